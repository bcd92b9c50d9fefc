#include "twindecomp/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "twindecomp/rng.hpp"

namespace twindecomp {

namespace {

using nlohmann::json;

IntRange range_from_json(const json& j, const char* field) {
  if (j.is_number_integer()) {
    const int v = j.get<int>();
    return {v, v};
  }
  if (j.is_object() && j.contains("min") && j.contains("max")) {
    return {j["min"].get<int>(), j["max"].get<int>()};
  }
  throw ConfigError(std::string("field '") + field +
                    "' must be an integer or {min, max}");
}

WindowRates rates_from_json(const json& j, const char* field) {
  if (!j.is_object()) {
    throw ConfigError(std::string("field '") + field +
                      "' must be an object with NN/PNN/CH");
  }
  WindowRates r;
  r.nn = j.value("NN", 0.0);
  r.pnn = j.value("PNN", 0.0);
  r.ch = j.value("CH", 0.0);
  return r;
}

std::array<double, 3> edu_from_json(const json& j, const char* field) {
  std::array<double, 3> probs = {j.value("none", 0.0), j.value("primary", 0.0),
                                 j.value("secondary", 0.0)};
  const double total = probs[0] + probs[1] + probs[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError(std::string("education probabilities in '") + field +
                      "' must sum to 1");
  }
  return probs;
}

// Death probability for one hazard stage.
double stage_prob(const SynthConfig& c, int stage, Sex sex, int p,
                  Society society) {
  double q = c.base_hazard[stage];
  if (sex == Sex::male) q += c.biology_effect[stage];
  if (p == 1) q += c.prenatal_effect[stage];
  if (sex == Sex::female && society == Society::D) {
    q += c.discrimination_effect[stage];
  }
  return q;
}

std::string mother_label(Society society, std::uint64_t index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%s-%07llu", to_string(society),
                static_cast<unsigned long long>(index + 1));
  return buf;
}

double normal_draw(Rng& rng) {
  const double u1 = 1.0 - rng.uniform01();  // (0, 1]
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

EducationLevel categorical3(Rng& rng, const std::array<double, 3>& probs) {
  const double u = rng.uniform01();
  if (u < probs[0]) return EducationLevel::none;
  if (u < probs[0] + probs[1]) return EducationLevel::primary;
  return EducationLevel::secondary;
}

std::string categorical_map(Rng& rng,
                            const std::map<std::string, double>& probs) {
  const double u = rng.uniform01();
  double cum = 0.0;
  for (const auto& [name, p] : probs) {
    cum += p;
    if (u < cum) return name;
  }
  return probs.rbegin()->first;
}

struct MotherOutput {
  std::vector<BirthRecord> records;
  std::vector<std::uint8_t> prenatal;
};

void generate_mother(const SynthConfig& c, Society society,
                     std::uint64_t mother_index, std::uint64_t stream_id,
                     MotherOutput& out) {
  Rng rng(Rng::mix(c.seed, stream_id));
  const std::string mother_id = mother_label(society, mother_index);

  const int p_mother = rng.bernoulli(c.prenatal_prevalence) ? 1 : 0;

  BirthRecord proto;
  proto.mother_id = mother_id;
  proto.society = society;
  proto.survey_year = rng.uniform_int(c.survey_years.min, c.survey_years.max);
  {
    const int n_countries =
        society == Society::ND ? c.countries_nd : c.countries_d;
    const int pick = rng.uniform_int(1, n_countries);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%02d", to_string(society), pick);
    proto.country_code = buf;
  }
  {
    const CovariateConfig& cov = c.covariates;
    double mean = cov.mother_age_mean;
    if (p_mother == 1) mean += cov.mother_age_p1_shift;
    int age = static_cast<int>(
        std::lround(mean + cov.mother_age_sd * normal_draw(rng)));
    proto.mother_age = std::clamp(age, 15, 60);
    proto.mother_edu = categorical3(rng, cov.mother_edu_probs);
    proto.mother_marital = categorical_map(rng, cov.marital_probs);
    proto.father_edu = categorical3(rng, cov.father_edu_probs);
    proto.household_size =
        rng.uniform_int(cov.household_size.min, cov.household_size.max);
    const double shift = p_mother == 1 ? cov.asset_p1_shift : 0.0;
    proto.electricity = rng.bernoulli(cov.electricity + shift) ? 1 : 0;
    proto.radio = rng.bernoulli(cov.radio + shift) ? 1 : 0;
    proto.tv = rng.bernoulli(cov.tv + shift) ? 1 : 0;
    proto.car = rng.bernoulli(cov.car + shift) ? 1 : 0;
  }

  const int n_deliveries =
      rng.uniform_int(c.deliveries_per_mother.min, c.deliveries_per_mother.max);
  const int year_span = c.birth_years.max - c.birth_years.min + 1;
  const int slot_count = year_span * 12;
  std::vector<bool> slot_taken(static_cast<std::size_t>(slot_count), false);

  int child_counter = 0;
  for (int d = 0; d < n_deliveries; ++d) {
    const int p_delivery =
        c.prenatal_per_mother ? p_mother
                              : (rng.bernoulli(c.prenatal_prevalence) ? 1 : 0);
    // Distinct (year, month) per delivery: linear probe after a collision.
    int slot = (rng.uniform_int(c.birth_years.min, c.birth_years.max) -
                c.birth_years.min) *
                   12 +
               rng.uniform_int(0, 11);
    while (slot_taken[static_cast<std::size_t>(slot)]) {
      slot = (slot + 1) % slot_count;
    }
    slot_taken[static_cast<std::size_t>(slot)] = true;
    const int birth_year = c.birth_years.min + slot / 12;
    const int birth_month = 1 + slot % 12;

    const bool twin = rng.bernoulli(c.twin_rate);
    const int n_children = twin ? 2 : 1;
    const double p_male = 0.5 + c.sex_shift * (p_delivery == 1 ? 1.0 : -1.0);

    for (int k = 0; k < n_children; ++k) {
      BirthRecord r = proto;
      ++child_counter;
      r.child_id = mother_id + "-" + std::to_string(child_counter);
      r.birth_year = birth_year;
      r.birth_month = birth_month;
      r.multiplicity = n_children;
      r.sex = rng.bernoulli(p_male) ? Sex::male : Sex::female;

      // Sequential stage survival.
      bool dead = false;
      for (int stage = 0; stage < 3 && !dead; ++stage) {
        if (rng.bernoulli(stage_prob(c, stage, r.sex, p_delivery, society))) {
          dead = true;
          switch (stage) {
            case 0:
              r.death_age_months = 0;
              break;
            case 1:
              r.death_age_months = rng.uniform_int(1, 11);
              break;
            default:
              r.death_age_months = rng.uniform_int(12, 59);
          }
        }
      }
      if (!dead) r.age_at_survey_months = rng.uniform_int(60, 119);

      out.prenatal.push_back(static_cast<std::uint8_t>(p_delivery));
      out.records.push_back(std::move(r));
    }
  }
}

}  // namespace

SynthConfig SynthConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  SynthConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("n_mothers")) {
    const auto& nm = j["n_mothers"];
    c.n_mothers_nd = nm.value("ND", c.n_mothers_nd);
    c.n_mothers_d = nm.value("D", c.n_mothers_d);
  }
  c.twin_rate = j.value("twin_rate", c.twin_rate);
  if (j.contains("deliveries_per_mother")) {
    c.deliveries_per_mother =
        range_from_json(j["deliveries_per_mother"], "deliveries_per_mother");
  }
  c.prenatal_prevalence = j.value("prenatal_prevalence", c.prenatal_prevalence);
  c.sex_shift = j.value("sex_shift", c.sex_shift);
  c.prenatal_per_mother = j.value("prenatal_per_mother", c.prenatal_per_mother);
  if (j.contains("base_hazard"))
    c.base_hazard = rates_from_json(j["base_hazard"], "base_hazard");
  if (j.contains("biology_effect"))
    c.biology_effect = rates_from_json(j["biology_effect"], "biology_effect");
  if (j.contains("prenatal_mortality_effect"))
    c.prenatal_effect =
        rates_from_json(j["prenatal_mortality_effect"],
                        "prenatal_mortality_effect");
  if (j.contains("discrimination_effect"))
    c.discrimination_effect = rates_from_json(j["discrimination_effect"],
                                              "discrimination_effect");
  if (j.contains("birth_years"))
    c.birth_years = range_from_json(j["birth_years"], "birth_years");
  if (j.contains("survey_years"))
    c.survey_years = range_from_json(j["survey_years"], "survey_years");
  if (j.contains("countries")) {
    c.countries_nd = j["countries"].value("ND", 1);
    c.countries_d = j["countries"].value("D", 1);
  }
  if (j.contains("covariates")) {
    const auto& cv = j["covariates"];
    CovariateConfig& cov = c.covariates;
    if (cv.contains("mother_age")) {
      cov.mother_age_mean = cv["mother_age"].value("mean", cov.mother_age_mean);
      cov.mother_age_sd = cv["mother_age"].value("sd", cov.mother_age_sd);
      cov.mother_age_p1_shift =
          cv["mother_age"].value("p1_shift", cov.mother_age_p1_shift);
    }
    if (cv.contains("mother_edu"))
      cov.mother_edu_probs = edu_from_json(cv["mother_edu"], "mother_edu");
    if (cv.contains("father_edu"))
      cov.father_edu_probs = edu_from_json(cv["father_edu"], "father_edu");
    if (cv.contains("marital")) {
      cov.marital_probs.clear();
      for (const auto& [name, p] : cv["marital"].items()) {
        cov.marital_probs[name] = p.get<double>();
      }
    }
    if (cv.contains("household_size"))
      cov.household_size =
          range_from_json(cv["household_size"], "household_size");
    if (cv.contains("assets")) {
      cov.electricity = cv["assets"].value("electricity", cov.electricity);
      cov.radio = cv["assets"].value("radio", cov.radio);
      cov.tv = cv["assets"].value("tv", cov.tv);
      cov.car = cv["assets"].value("car", cov.car);
    }
    cov.asset_p1_shift = cv.value("asset_p1_shift", cov.asset_p1_shift);
  }
  c.validate();
  return c;
}

SynthConfig SynthConfig::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

void SynthConfig::validate() const {
  auto check01 = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string(what) + " must lie in [0, 1], got " +
                        std::to_string(v));
    }
  };
  check01(twin_rate, "twin_rate");
  check01(prenatal_prevalence, "prenatal_prevalence");
  if (!(sex_shift >= 0.0 && sex_shift <= 0.5)) {
    throw ConfigError("sex_shift must lie in [0, 0.5]");
  }
  if (deliveries_per_mother.min < 1 ||
      deliveries_per_mother.max < deliveries_per_mother.min) {
    throw ConfigError("deliveries_per_mother range is invalid");
  }
  if (birth_years.max < birth_years.min) {
    throw ConfigError("birth_years range is invalid");
  }
  if (survey_years.max < survey_years.min) {
    throw ConfigError("survey_years range is invalid");
  }
  const int slots = (birth_years.max - birth_years.min + 1) * 12;
  if (slots < deliveries_per_mother.max) {
    throw ConfigError("birth_years range too narrow for deliveries_per_mother");
  }
  if (countries_nd < 1 || countries_d < 1) {
    throw ConfigError("countries per society must be >= 1");
  }

  // Every reachable additive death probability must be a probability. Never
  // clamp silently.
  for (int stage = 0; stage < 3; ++stage) {
    for (Society society : {Society::ND, Society::D}) {
      for (Sex sex : {Sex::male, Sex::female}) {
        for (int p = 0; p <= 1; ++p) {
          const double q = stage_prob(*this, stage, sex, p, society);
          if (!(q >= 0.0 && q <= 1.0)) {
            std::ostringstream msg;
            msg << "death probability out of [0, 1] for stage "
                << (stage == 0 ? "NN" : stage == 1 ? "PNN" : "CH")
                << ", sex " << to_string(sex) << ", p=" << p << ", society "
                << to_string(society) << ": " << q;
            throw ConfigError(msg.str());
          }
        }
      }
    }
  }

  const CovariateConfig& cov = covariates;
  if (cov.marital_probs.empty()) {
    throw ConfigError("marital probabilities must not be empty");
  }
  double marital_total = 0.0;
  for (const auto& [name, p] : cov.marital_probs) {
    if (p < 0.0) throw ConfigError("marital probability for '" + name +
                                   "' is negative");
    marital_total += p;
  }
  if (std::abs(marital_total - 1.0) > 1e-9) {
    throw ConfigError("marital probabilities must sum to 1");
  }
  for (double base : {cov.electricity, cov.radio, cov.tv, cov.car}) {
    check01(base, "asset probability");
    check01(base + cov.asset_p1_shift, "asset probability with p1 shift");
  }
  if (cov.household_size.min < 1 ||
      cov.household_size.max < cov.household_size.min) {
    throw ConfigError("household_size range is invalid");
  }
  if (cov.mother_age_sd < 0.0) {
    throw ConfigError("mother_age sd must be non-negative");
  }
}

std::pair<BirthTable, SynthAudit> generate_audited(const SynthConfig& config,
                                                   int n_workers) {
  config.validate();
  const std::uint64_t total = config.n_mothers_nd + config.n_mothers_d;

  // Fixed-size blocks of mothers keep output identical for any worker count.
  constexpr std::uint64_t kBlock = 1024;
  const std::uint64_t n_blocks = (total + kBlock - 1) / kBlock;
  std::vector<MotherOutput> blocks(n_blocks);

  auto run_block = [&](std::uint64_t b) {
    MotherOutput& out = blocks[b];
    const std::uint64_t lo = b * kBlock;
    const std::uint64_t hi = std::min(total, lo + kBlock);
    for (std::uint64_t m = lo; m < hi; ++m) {
      const Society society =
          m < config.n_mothers_nd ? Society::ND : Society::D;
      const std::uint64_t index =
          m < config.n_mothers_nd ? m : m - config.n_mothers_nd;
      generate_mother(config, society, index, m + 1, out);
    }
  };

  if (n_workers <= 1 || n_blocks <= 1) {
    for (std::uint64_t b = 0; b < n_blocks; ++b) run_block(b);
  } else {
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
      while (true) {
        const std::uint64_t b = next.fetch_add(1);
        if (b >= n_blocks) break;
        run_block(b);
      }
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(n_workers, static_cast<int>(n_blocks));
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::size_t n_records = 0;
  for (const auto& b : blocks) n_records += b.records.size();
  std::vector<BirthRecord> records;
  records.reserve(n_records);
  SynthAudit audit;
  audit.prenatal.reserve(n_records);
  for (auto& b : blocks) {
    for (auto& r : b.records) records.push_back(std::move(r));
    audit.prenatal.insert(audit.prenatal.end(), b.prenatal.begin(),
                          b.prenatal.end());
  }
  return {BirthTable(std::move(records)), std::move(audit)};
}

BirthTable generate(const SynthConfig& config, int n_workers) {
  return generate_audited(config, n_workers).first;
}

PlantedEffects planted_thetas(const SynthConfig& config) {
  config.validate();
  const double pi = config.prenatal_prevalence;
  const double delta = config.sex_shift;

  // theta and theta_tfe per (window, society), enumerated exactly.
  double theta[4][2];
  double theta_tfe[4][2];

  for (Society society : {Society::ND, Society::D}) {
    const int s = static_cast<int>(society);
    double weight_p[2] = {1.0 - pi, pi};
    double p_male[2] = {0.5 - delta, 0.5 + delta};

    double q[3][2][2];     // stage x sex x p
    double surv[3][2][2];  // survival to stage start
    for (int p = 0; p <= 1; ++p) {
      for (Sex sex : {Sex::male, Sex::female}) {
        const int sx = sex == Sex::male ? 0 : 1;
        double alive = 1.0;
        for (int stage = 0; stage < 3; ++stage) {
          q[stage][sx][p] = stage_prob(config, stage, sex, p, society);
          surv[stage][sx][p] = alive;
          alive *= 1.0 - q[stage][sx][p];
        }
      }
    }

    auto infant_q = [&](int sx, int p) {
      return q[0][sx][p] + (1.0 - q[0][sx][p]) * q[1][sx][p];
    };

    // Map window enum -> (stage index, -1 for the composed infant window).
    const struct {
      WindowKind kind;
      int stage;
    } windows[] = {{WindowKind::NN, 0},
                   {WindowKind::PNN, 1},
                   {WindowKind::I, -1},
                   {WindowKind::CH, 2}};

    for (const auto& [kind, stage] : windows) {
      const int w = static_cast<int>(kind);
      double rate[2];  // death rate among eligible, by sex
      for (int sx = 0; sx <= 1; ++sx) {
        double num = 0.0, den = 0.0;
        for (int p = 0; p <= 1; ++p) {
          const double sex_weight = sx == 0 ? p_male[p] : 1.0 - p_male[p];
          const double surv_w = stage < 0 ? 1.0 : surv[stage][sx][p];
          const double death = stage < 0 ? infant_q(sx, p) : q[stage][sx][p];
          const double mass = weight_p[p] * sex_weight * surv_w;
          num += mass * death;
          den += mass;
        }
        rate[sx] = num / den;
      }
      theta[w][s] = rate[0] - rate[1];

      double num = 0.0, den = 0.0;
      for (int p = 0; p <= 1; ++p) {
        const double pair_weight =
            weight_p[p] * 2.0 * p_male[p] * (1.0 - p_male[p]);
        const double both_surv =
            stage < 0 ? 1.0 : surv[stage][0][p] * surv[stage][1][p];
        const double gap = stage < 0
                               ? infant_q(0, p) - infant_q(1, p)
                               : q[stage][0][p] - q[stage][1][p];
        num += pair_weight * both_surv * gap;
        den += pair_weight * both_surv;
      }
      theta_tfe[w][s] = num / den;
    }
  }

  PlantedEffects effects;
  for (int w = 0; w < 4; ++w) {
    for (int s = 0; s < 2; ++s) {
      PlantedCell& cell = effects.cells[w][s];
      cell.theta1 = theta[w][s] - theta_tfe[w][s];
      cell.theta2 = theta_tfe[w][0];
      cell.theta3 = theta_tfe[w][s] - theta_tfe[w][0];
    }
  }
  return effects;
}

}  // namespace twindecomp
