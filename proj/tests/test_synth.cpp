#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "twindecomp/synth.hpp"

using namespace twindecomp;

namespace {

SynthConfig planted_config() {
  SynthConfig c;
  c.seed = 7;
  c.n_mothers_nd = 2000;
  c.n_mothers_d = 2000;
  c.twin_rate = 0.8;
  c.prenatal_prevalence = 0.5;
  c.sex_shift = 0.1;
  c.base_hazard = {0.05, 0.04, 0.03};
  c.biology_effect = {0.025, 0.01, -0.008};
  c.prenatal_effect = {0.05, 0.03, 0.02};
  c.discrimination_effect = {0.035, 0.02, 0.012};
  return c;
}

}  // namespace

TEST_CASE("config validation fails fast on impossible probabilities") {
  SynthConfig c = planted_config();
  SUBCASE("sum above one") {
    c.base_hazard.nn = 0.95;
    c.prenatal_effect.nn = 0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("negative cell") {
    c.biology_effect.ch = -0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("sex shift out of range") {
    c.sex_shift = 0.6;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("marital probabilities must sum to one") {
    c.covariates.marital_probs = {{"married", 0.5}};
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
}

TEST_CASE("config parses from JSON with nested fields") {
  const char* text = R"({
    "seed": 42,
    "n_mothers": {"ND": 100, "D": 50},
    "twin_rate": 0.25,
    "deliveries_per_mother": {"min": 1, "max": 3},
    "prenatal_prevalence": 0.4,
    "sex_shift": 0.12,
    "base_hazard": {"NN": 0.02, "PNN": 0.015, "CH": 0.01},
    "biology_effect": {"NN": 0.01},
    "prenatal_mortality_effect": {"NN": 0.02, "PNN": 0.01},
    "discrimination_effect": {"NN": 0.03},
    "birth_years": {"min": 1988, "max": 1999},
    "survey_years": 2001,
    "countries": {"ND": 4, "D": 2}
  })";
  SynthConfig c = SynthConfig::from_json_text(text);
  CHECK(c.seed == 42);
  CHECK(c.n_mothers_nd == 100);
  CHECK(c.n_mothers_d == 50);
  CHECK(c.twin_rate == 0.25);
  CHECK(c.deliveries_per_mother.max == 3);
  CHECK(c.sex_shift == 0.12);
  CHECK(c.base_hazard.pnn == 0.015);
  CHECK(c.biology_effect.pnn == 0.0);
  CHECK(c.discrimination_effect.nn == 0.03);
  CHECK(c.survey_years.min == 2001);
  CHECK(c.countries_nd == 4);

  CHECK_THROWS_AS(SynthConfig::from_json_text("{not json"), ConfigError);
}

TEST_CASE("generation is reproducible and worker-count independent") {
  SynthConfig c = planted_config();
  c.n_mothers_nd = 3000;
  c.n_mothers_d = 500;
  BirthTable one = generate(c, 1);
  BirthTable again = generate(c, 1);
  BirthTable parallel = generate(c, 3);
  CHECK(one.records() == again.records());
  CHECK(one.records() == parallel.records());

  c.seed += 1;
  BirthTable other = generate(c, 1);
  CHECK(one.records() != other.records());
}

TEST_CASE("twin pairs share the prenatal draw") {
  SynthConfig c = planted_config();
  c.n_mothers_nd = 1500;
  c.n_mothers_d = 1500;
  c.deliveries_per_mother = {1, 3};
  auto [table, audit] = generate_audited(c);
  auto [pairs, diag] = match_twins(table);
  REQUIRE(pairs.pairs.size() > 100);
  for (const TwinPair& pair : pairs.pairs) {
    CHECK(audit.prenatal[pair.row_a] == audit.prenatal[pair.row_b]);
  }
}

TEST_CASE("no twins means no pairs") {
  SynthConfig c = planted_config();
  c.twin_rate = 0.0;
  c.n_mothers_nd = 500;
  c.n_mothers_d = 500;
  BirthTable table = generate(c);
  auto [pairs, diag] = match_twins(table);
  CHECK(pairs.pairs.empty());
  CHECK(diag.declared_multiples == 0);
}

TEST_CASE("delta zero gives balanced sexes") {
  SynthConfig c = planted_config();
  c.sex_shift = 0.0;
  c.n_mothers_nd = 20000;
  c.n_mothers_d = 0;
  c.twin_rate = 0.3;
  BirthTable table = generate(c);
  std::uint64_t single_m = 0, single_n = 0, twin_m = 0, twin_n = 0;
  auto [pairs, diag] = match_twins(table);
  for (const BirthRecord& r : table.records()) {
    if (r.multiplicity == 1) {
      ++single_n;
      if (r.sex == Sex::male) ++single_m;
    }
  }
  for (const TwinPair& p : pairs.pairs) {
    if (p.type == PairType::MF) continue;
    twin_n += 2;
    if (p.type == PairType::MM) twin_m += 2;
  }
  const double single_rate =
      static_cast<double>(single_m) / static_cast<double>(single_n);
  const double twin_rate_m =
      static_cast<double>(twin_m) / static_cast<double>(twin_n);
  // three binomial SDs
  CHECK(std::abs(single_rate - 0.5) <
        3.0 * 0.5 / std::sqrt(static_cast<double>(single_n)));
  CHECK(std::abs(twin_rate_m - 0.5) <
        3.0 * 0.5 / std::sqrt(static_cast<double>(twin_n)));
}

TEST_CASE("twin share of births tracks the configured delivery rate") {
  SynthConfig c = planted_config();
  c.twin_rate = 0.0155;
  c.n_mothers_nd = 120000;
  c.n_mothers_d = 0;
  c.deliveries_per_mother = {1, 2};
  BirthTable table = generate(c);
  std::uint64_t twins = 0;
  for (const BirthRecord& r : table.records()) {
    if (r.multiplicity == 2) ++twins;
  }
  const double share =
      static_cast<double>(twins) / static_cast<double>(table.size());
  // 2t/(1+t) at t=0.0155 is about 0.0305
  CHECK(share == doctest::Approx(0.0305).epsilon(0.08));
}

TEST_CASE("planted NN effects have the closed forms") {
  SynthConfig c = planted_config();
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    c.prenatal_prevalence = 0.1 + 0.8 * u01(rng);
    c.sex_shift = 0.4 * u01(rng);
    c.base_hazard = {0.03 + 0.05 * u01(rng), 0.03, 0.02};
    c.biology_effect = {0.03 * u01(rng), 0.01, 0.0};
    c.prenatal_effect = {0.05 * u01(rng), 0.02, 0.01};
    c.discrimination_effect = {0.04 * u01(rng), 0.01, 0.005};
    PlantedEffects planted = planted_thetas(c);

    const double pi = c.prenatal_prevalence;
    const double delta = c.sex_shift;
    const double skew = delta * (2.0 * pi - 1.0);
    const double p_gap =
        2.0 * delta * pi * (1.0 - pi) / (0.25 - skew * skew);

    const auto& nd = planted.at(WindowKind::NN, Society::ND);
    CHECK(nd.theta2 == doctest::Approx(c.biology_effect.nn).epsilon(1e-12));
    CHECK(nd.theta3 == 0.0);
    CHECK(nd.theta1 ==
          doctest::Approx(c.prenatal_effect.nn * p_gap).epsilon(1e-12));

    const auto& d = planted.at(WindowKind::NN, Society::D);
    CHECK(d.theta2 == doctest::Approx(c.biology_effect.nn).epsilon(1e-12));
    CHECK(d.theta3 ==
          doctest::Approx(-c.discrimination_effect.nn).epsilon(1e-12));
  }
}

TEST_CASE("planted thetas: spec examples") {
  SynthConfig c = planted_config();
  SUBCASE("no prenatal mortality effect means theta1 is zero at NN") {
    c.prenatal_effect.nn = 0.0;
    PlantedEffects p = planted_thetas(c);
    CHECK(p.at(WindowKind::NN, Society::ND).theta1 ==
          doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("no sex shift removes the sex-ratio channel") {
    c.sex_shift = 0.0;
    PlantedEffects p = planted_thetas(c);
    for (Society s : {Society::ND, Society::D}) {
      // Exactly zero where eligibility is unconditional.
      CHECK(std::abs(p.at(WindowKind::NN, s).theta1) <= 1e-15);
      CHECK(std::abs(p.at(WindowKind::I, s).theta1) <= 1e-15);
      // Conditional windows keep a tiny term: males with p=1 die more in
      // earlier stages, so the surviving p composition differs by sex even
      // with a balanced sex ratio. Order e * b * q.
      CHECK(std::abs(p.at(WindowKind::PNN, s).theta1) < 1e-4);
      CHECK(std::abs(p.at(WindowKind::CH, s).theta1) < 1e-4);
    }
  }
  SUBCASE("pi 0.5, delta 0.1, e 0.05 closes to 0.01") {
    c.prenatal_prevalence = 0.5;
    c.sex_shift = 0.1;
    c.prenatal_effect.nn = 0.05;
    PlantedEffects p = planted_thetas(c);
    CHECK(p.at(WindowKind::NN, Society::ND).theta1 ==
          doctest::Approx(0.01).epsilon(1e-12));

    // brute-force check over the joint (p, sex) lattice
    const double pi = 0.5, delta = 0.1;
    double e_p_male_num = 0, e_p_male_den = 0, e_p_f_num = 0, e_p_f_den = 0;
    for (int p_val = 0; p_val <= 1; ++p_val) {
      const double wp = p_val == 1 ? pi : 1 - pi;
      const double pm = p_val == 1 ? 0.5 + delta : 0.5 - delta;
      e_p_male_num += wp * pm * p_val;
      e_p_male_den += wp * pm;
      e_p_f_num += wp * (1 - pm) * p_val;
      e_p_f_den += wp * (1 - pm);
    }
    const double gap = e_p_male_num / e_p_male_den - e_p_f_num / e_p_f_den;
    CHECK(0.05 * gap == doctest::Approx(0.01).epsilon(1e-12));
  }
}

TEST_CASE("planted thetas agree with the independent enumeration oracle") {
  SynthConfig c = planted_config();
  PlantedEffects planted = planted_thetas(c);

  const struct {
    WindowKind kind;
    int oracle_window;
  } windows[] = {{WindowKind::NN, 0},
                 {WindowKind::PNN, 1},
                 {WindowKind::CH, 2},
                 {WindowKind::I, 3}};

  for (const auto& [kind, ow] : windows) {
    const auto nd = oracles::enumerate_window(c, ow, false);
    const auto d = oracles::enumerate_window(c, ow, true);

    const auto& cell_nd = planted.at(kind, Society::ND);
    CHECK(cell_nd.theta1 ==
          doctest::Approx(nd.theta - nd.theta_tfe).epsilon(1e-12));
    CHECK(cell_nd.theta2 == doctest::Approx(nd.theta_tfe).epsilon(1e-12));
    CHECK(cell_nd.theta3 == 0.0);
    // additivity: planted parts sum to the enumerated cross-sectional gap
    CHECK(cell_nd.theta1 + cell_nd.theta2 + cell_nd.theta3 ==
          doctest::Approx(nd.theta).epsilon(1e-12));

    const auto& cell_d = planted.at(kind, Society::D);
    CHECK(cell_d.theta1 ==
          doctest::Approx(d.theta - d.theta_tfe).epsilon(1e-12));
    CHECK(cell_d.theta2 == doctest::Approx(nd.theta_tfe).epsilon(1e-12));
    CHECK(cell_d.theta3 ==
          doctest::Approx(d.theta_tfe - nd.theta_tfe).epsilon(1e-12));
    CHECK(cell_d.theta1 + cell_d.theta2 + cell_d.theta3 ==
          doctest::Approx(d.theta).epsilon(1e-12));
  }
}

TEST_CASE("generated mortality rates match the enumerated model") {
  SynthConfig c = planted_config();
  c.n_mothers_nd = 60000;
  c.n_mothers_d = 60000;
  c.twin_rate = 1.0;
  BirthTable table = generate(c);
  auto [nd, d] = split_by_society(table);

  for (bool in_d : {false, true}) {
    const BirthTable& t = in_d ? d : nd;
    auto [pairs, diag] = match_twins(t);
    Sample s = build_sample(t, pairs, MortalityWindow::for_kind(WindowKind::NN),
                            SampleMode::all_twins);
    double deaths_m = 0, n_m = 0, deaths_f = 0, n_f = 0;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      if (t.record(s.rows[i]).sex == Sex::male) {
        n_m += 1;
        deaths_m += s.outcomes[i];
      } else {
        n_f += 1;
        deaths_f += s.outcomes[i];
      }
    }
    const auto est = oracles::enumerate_window(c, 0, in_d);
    const double gap = deaths_m / n_m - deaths_f / n_f;
    const double se = std::sqrt(0.25 / n_m + 0.25 / n_f);
    CHECK(std::abs(gap - est.theta) < 4.0 * se);
  }
}

TEST_CASE("audit aligns with records and p is reproducible") {
  SynthConfig c = planted_config();
  c.n_mothers_nd = 200;
  c.n_mothers_d = 200;
  auto [table, audit] = generate_audited(c);
  CHECK(audit.prenatal.size() == table.size());
  auto [table2, audit2] = generate_audited(c, 2);
  CHECK(audit.prenatal == audit2.prenatal);
}
