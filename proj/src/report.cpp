#include "twindecomp/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace twindecomp {

namespace {

using nlohmann::ordered_json;

std::string fmt_full(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, ptr};
}

std::string fmt_fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

double scale_of(const RenderOptions& opt) {
  return opt.per_thousand ? 1000.0 : 1.0;
}

const char* window_title(const std::string& window) {
  if (window == "I") return "Infant mortality";
  if (window == "NN") return "Neonatal mortality";
  if (window == "PNN") return "Postneonatal mortality";
  if (window == "CH") return "Child mortality";
  return window.c_str();
}

struct GroupCount {
  std::uint64_t n = 0;
  std::uint64_t males = 0;
};

double binomial_sd(double p) { return std::sqrt(p * (1.0 - p)); }

// Sample SD with the n-1 denominator; 0 when n < 2.
double sample_sd(double sum, double sum_sq, double n) {
  if (n < 2.0) return 0.0;
  const double var = (sum_sq - sum * sum / n) / (n - 1.0);
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

}  // namespace

SexRatioSummary sex_ratio_table(const BirthTable& table,
                                const TwinPairSet& pairs) {
  SexRatioSummary summary;
  for (Society society : {Society::ND, Society::D}) {
    std::map<std::string, GroupCount> counts;
    for (const BirthRecord& r : table.records()) {
      if (r.society != society || r.multiplicity != 1) continue;
      GroupCount& g = counts["singletons"];
      ++g.n;
      if (r.sex == Sex::male) ++g.males;
    }
    for (const TwinPair& pair : pairs.pairs) {
      const BirthRecord& a = table.record(pair.row_a);
      if (a.society != society) continue;
      const BirthRecord& b = table.record(pair.row_b);
      const char* type_group = pair.type == PairType::MF   ? "mf"
                               : pair.type == PairType::MM ? "mm"
                                                           : "ff";
      for (const BirthRecord* r : {&a, &b}) {
        for (const char* group : {"all_twins", type_group}) {
          GroupCount& g = counts[group];
          ++g.n;
          if (r->sex == Sex::male) ++g.males;
        }
        if (pair.type != PairType::MF) {
          GroupCount& g = counts["same_sex_twins"];
          ++g.n;
          if (r->sex == Sex::male) ++g.males;
        }
      }
    }

    const char* society_name = to_string(society);
    for (const char* group : {"singletons", "all_twins", "mf", "mm", "ff",
                              "same_sex_twins"}) {
      auto it = counts.find(group);
      if (it == counts.end() || it->second.n == 0) {
        summary.notes.push_back(std::string("group ") + group +
                                " empty for society " + society_name);
        continue;
      }
      SexRatioRow row;
      row.society = society_name;
      row.group = group;
      row.n = it->second.n;
      row.prop_male =
          static_cast<double>(it->second.males) / static_cast<double>(row.n);
      row.sd = binomial_sd(row.prop_male);
      summary.rows.push_back(std::move(row));
    }

    const GroupCount singles = counts.count("singletons")
                                   ? counts["singletons"]
                                   : GroupCount{};
    const GroupCount twins =
        counts.count("all_twins") ? counts["all_twins"] : GroupCount{};
    const std::uint64_t males = singles.males + twins.males;
    const std::uint64_t total = singles.n + twins.n;
    if (total > 0 && total > males) {
      PooledSexRatio pooled;
      pooled.society = society_name;
      pooled.males = males;
      pooled.females = total - males;
      pooled.ratio =
          static_cast<double>(males) / static_cast<double>(total - males);
      summary.pooled.push_back(std::move(pooled));
    }
  }
  return summary;
}

RateTable mortality_rate_table(const BirthTable& table,
                               const TwinPairSet& pairs,
                               const std::vector<WindowKind>& windows) {
  RateTable out;
  for (Society society : {Society::ND, Society::D}) {
    for (WindowKind kind : windows) {
      const MortalityWindow window = MortalityWindow::for_kind(kind);
      // deaths/eligible per group x sex
      std::map<std::string, std::array<std::array<std::uint64_t, 2>, 2>> cells;
      auto tally = [&](const char* group, const BirthRecord& r) {
        auto outcome = classify_window(r, window);
        if (!outcome) return;
        auto& cell = cells[group];
        const int sx = r.sex == Sex::male ? 0 : 1;
        ++cell[static_cast<std::size_t>(sx)][0];
        cell[static_cast<std::size_t>(sx)][1] +=
            static_cast<std::uint64_t>(*outcome);
      };
      for (const BirthRecord& r : table.records()) {
        if (r.society != society || r.multiplicity != 1) continue;
        tally("singletons", r);
      }
      for (const TwinPair& pair : pairs.pairs) {
        const BirthRecord& a = table.record(pair.row_a);
        if (a.society != society) continue;
        const BirthRecord& b = table.record(pair.row_b);
        for (const BirthRecord* r : {&a, &b}) {
          tally("all_twins", *r);
          if (pair.type == PairType::MF) tally("mf_twins", *r);
        }
      }
      for (const char* group : {"all_twins", "mf_twins", "singletons"}) {
        auto it = cells.find(group);
        if (it == cells.end()) continue;
        for (int sx = 0; sx <= 1; ++sx) {
          const auto& [eligible, deaths] = std::pair(
              it->second[static_cast<std::size_t>(sx)][0],
              it->second[static_cast<std::size_t>(sx)][1]);
          if (eligible == 0) continue;
          RateRow row;
          row.society = to_string(society);
          row.group = group;
          row.sex = sx == 0 ? "M" : "F";
          row.window = to_string(kind);
          row.deaths = deaths;
          row.n = eligible;
          row.rate =
              static_cast<double>(deaths) / static_cast<double>(eligible);
          row.sd = binomial_sd(row.rate);
          out.rows.push_back(std::move(row));
        }
      }
    }
  }
  return out;
}

CovariateSummary covariate_summary(const BirthTable& table,
                                   const TwinPairSet& pairs) {
  CovariateSummary out;

  // Twin rows are the matched pair members; singletons are multiplicity 1.
  std::vector<char> is_twin(table.size(), 0);
  for (const TwinPair& pair : pairs.pairs) {
    is_twin[pair.row_a] = 1;
    is_twin[pair.row_b] = 1;
  }

  struct Acc {
    double n = 0.0, sum = 0.0, sum_sq = 0.0;
    void add(double v) {
      n += 1.0;
      sum += v;
      sum_sq += v * v;
    }
  };

  for (Society society : {Society::ND, Society::D}) {
    for (const char* group : {"twins", "singletons"}) {
      const bool want_twins = std::string(group) == "twins";
      std::map<std::string, Acc, std::less<>> acc;
      std::set<std::string> marital_levels;
      bool any = false;

      for (std::uint32_t row = 0; row < table.size(); ++row) {
        const BirthRecord& r = table.record(row);
        if (r.society != society) continue;
        if (want_twins != (is_twin[row] == 1)) continue;
        if (!want_twins && r.multiplicity != 1) continue;
        any = true;

        acc["child_is_male"].add(r.sex == Sex::male ? 1.0 : 0.0);
        if (r.mother_age) acc["mother_age"].add(*r.mother_age);
        if (r.mother_marital) marital_levels.insert(*r.mother_marital);
        if (r.mother_edu) {
          acc["mother_edu_none"].add(*r.mother_edu == EducationLevel::none);
          acc["mother_edu_primary"].add(*r.mother_edu ==
                                        EducationLevel::primary);
          acc["mother_edu_secondary"].add(*r.mother_edu ==
                                          EducationLevel::secondary);
        }
        if (r.father_edu) {
          acc["father_edu_none"].add(*r.father_edu == EducationLevel::none);
          acc["father_edu_primary"].add(*r.father_edu ==
                                        EducationLevel::primary);
          acc["father_edu_secondary"].add(*r.father_edu ==
                                          EducationLevel::secondary);
        }
        if (r.household_size) acc["household_size"].add(*r.household_size);
        if (r.electricity) acc["electricity"].add(*r.electricity);
        if (r.radio) acc["radio"].add(*r.radio);
        if (r.tv) acc["tv"].add(*r.tv);
        if (r.car) acc["car"].add(*r.car);

        for (WindowKind kind :
             {WindowKind::I, WindowKind::NN, WindowKind::PNN, WindowKind::CH}) {
          auto outcome =
              classify_window(r, MortalityWindow::for_kind(kind));
          if (outcome) {
            acc[std::string("mortality_") + to_string(kind)].add(*outcome);
          }
        }
      }
      if (!any) continue;

      // Marital dummies need a second pass over the discovered levels.
      for (std::uint32_t row = 0; row < table.size(); ++row) {
        const BirthRecord& r = table.record(row);
        if (r.society != society) continue;
        if (want_twins != (is_twin[row] == 1)) continue;
        if (!want_twins && r.multiplicity != 1) continue;
        if (!r.mother_marital) continue;
        for (const std::string& level : marital_levels) {
          acc["marital_" + level].add(*r.mother_marital == level ? 1.0 : 0.0);
        }
      }

      for (const auto& [variable, a] : acc) {
        CovariateRow row;
        row.society = to_string(society);
        row.group = group;
        row.variable = variable;
        row.n = static_cast<std::uint64_t>(a.n);
        row.mean = a.sum / a.n;
        row.sd = sample_sd(a.sum, a.sum_sq, a.n);
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string render_csv_sex_ratio(const SexRatioSummary& s, double scale) {
  (void)scale;
  std::ostringstream out;
  out << "society,group,n,prop_male,sd\n";
  for (const auto& r : s.rows) {
    out << r.society << ',' << r.group << ',' << r.n << ','
        << fmt_full(r.prop_male) << ',' << fmt_full(r.sd) << '\n';
  }
  for (const auto& p : s.pooled) {
    out << p.society << ",pooled_ratio," << (p.males + p.females) << ','
        << fmt_full(p.ratio) << ",\n";
  }
  return out.str();
}

ordered_json json_sex_ratio(const SexRatioSummary& s) {
  ordered_json j;
  j["rows"] = ordered_json::array();
  for (const auto& r : s.rows) {
    j["rows"].push_back({{"society", r.society},
                         {"group", r.group},
                         {"n", r.n},
                         {"prop_male", r.prop_male},
                         {"sd", r.sd}});
  }
  j["pooled"] = ordered_json::array();
  for (const auto& p : s.pooled) {
    j["pooled"].push_back({{"society", p.society},
                           {"males", p.males},
                           {"females", p.females},
                           {"ratio", p.ratio}});
  }
  j["notes"] = s.notes;
  return j;
}

std::string render_md_sex_ratio(const SexRatioSummary& s) {
  std::ostringstream out;
  out << "| society | group | n | prop male | SD |\n";
  out << "|---|---|---|---|---|\n";
  for (const auto& r : s.rows) {
    out << "| " << r.society << " | " << r.group << " | " << r.n << " | "
        << fmt_fixed3(r.prop_male) << " | " << fmt_fixed3(r.sd) << " |\n";
  }
  for (const auto& p : s.pooled) {
    out << "| " << p.society << " | pooled_ratio | " << (p.males + p.females)
        << " | " << fmt_fixed3(p.ratio) << " | |\n";
  }
  return out.str();
}

std::string render_csv_rates(const RateTable& t, double scale) {
  std::ostringstream out;
  out << "society,group,sex,window,rate,sd,deaths,n\n";
  for (const auto& r : t.rows) {
    out << r.society << ',' << r.group << ',' << r.sex << ',' << r.window
        << ',' << fmt_full(r.rate * scale) << ',' << fmt_full(r.sd) << ','
        << r.deaths << ',' << r.n << '\n';
  }
  return out.str();
}

ordered_json json_rates(const RateTable& t) {
  ordered_json j;
  j["rows"] = ordered_json::array();
  for (const auto& r : t.rows) {
    j["rows"].push_back({{"society", r.society},
                         {"group", r.group},
                         {"sex", r.sex},
                         {"window", r.window},
                         {"rate", r.rate},
                         {"sd", r.sd},
                         {"deaths", r.deaths},
                         {"n", r.n}});
  }
  return j;
}

std::string render_md_rates(const RateTable& t, double scale) {
  std::ostringstream out;
  out << "| society | group | sex | window | rate | SD | n |\n";
  out << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : t.rows) {
    out << "| " << r.society << " | " << r.group << " | " << r.sex << " | "
        << r.window << " | " << fmt_fixed3(r.rate * scale) << " | "
        << fmt_fixed3(r.sd) << " | " << r.n << " |\n";
  }
  return out.str();
}

std::string render_csv_covariates(const CovariateSummary& s) {
  std::ostringstream out;
  out << "society,group,variable,n,mean,sd\n";
  for (const auto& r : s.rows) {
    out << r.society << ',' << r.group << ',' << r.variable << ',' << r.n
        << ',' << fmt_full(r.mean) << ',' << fmt_full(r.sd) << '\n';
  }
  return out.str();
}

ordered_json json_covariates(const CovariateSummary& s) {
  ordered_json j;
  j["rows"] = ordered_json::array();
  for (const auto& r : s.rows) {
    j["rows"].push_back({{"society", r.society},
                         {"group", r.group},
                         {"variable", r.variable},
                         {"n", r.n},
                         {"mean", r.mean},
                         {"sd", r.sd}});
  }
  return j;
}

std::string render_md_covariates(const CovariateSummary& s) {
  std::ostringstream out;
  out << "| society | group | variable | n | mean | SD |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& r : s.rows) {
    out << "| " << r.society << " | " << r.group << " | " << r.variable
        << " | " << r.n << " | " << fmt_fixed3(r.mean) << " | "
        << fmt_fixed3(r.sd) << " |\n";
  }
  return out.str();
}

std::string render_csv_decomposition(const DecompositionTable& t,
                                     double scale) {
  const bool has_se = !t.periods.empty() && t.periods.front().se_theta1_nd;
  std::ostringstream out;
  out << "window,theta1_nd,theta2_nd,theta3_nd,theta1_d,theta2_d,theta3_d";
  if (has_se) {
    out << ",se_theta1_nd,se_theta2_nd,se_theta1_d,se_theta2_d,se_theta3_d";
  }
  out << '\n';
  for (const auto& p : t.periods) {
    out << to_string(p.window) << ',' << fmt_full(p.theta1_nd * scale) << ','
        << fmt_full(p.theta2_nd * scale) << ',' << fmt_full(p.theta3_nd * scale)
        << ',' << fmt_full(p.theta1_d * scale) << ','
        << fmt_full(p.theta2_d * scale) << ','
        << fmt_full(p.theta3_d * scale);
    if (has_se) {
      for (const auto& se : {p.se_theta1_nd, p.se_theta2_nd, p.se_theta1_d,
                             p.se_theta2_d, p.se_theta3_d}) {
        out << ',' << (se ? fmt_full(*se * scale) : std::string());
      }
    }
    out << '\n';
  }
  return out.str();
}

ordered_json json_decomposition(const DecompositionTable& t) {
  ordered_json j;
  j["provenance"] = t.provenance;
  j["bootstrap_replicates"] = t.bootstrap_replicates;
  j["bootstrap_discarded"] = t.bootstrap_discarded;
  j["periods"] = ordered_json::array();
  for (const auto& p : t.periods) {
    ordered_json period;
    period["window"] = to_string(p.window);
    period["theta_nd"] = p.theta_nd;
    period["theta_tfe_nd"] = p.theta_tfe_nd;
    period["theta_d"] = p.theta_d;
    period["theta_tfe_d"] = p.theta_tfe_d;
    period["theta1_nd"] = p.theta1_nd;
    period["theta2_nd"] = p.theta2_nd;
    period["theta3_nd"] = p.theta3_nd;
    period["theta1_d"] = p.theta1_d;
    period["theta2_d"] = p.theta2_d;
    period["theta3_d"] = p.theta3_d;
    if (p.se_theta1_nd) {
      period["se_theta1_nd"] = *p.se_theta1_nd;
      period["se_theta2_nd"] = *p.se_theta2_nd;
      period["se_theta1_d"] = *p.se_theta1_d;
      period["se_theta2_d"] = *p.se_theta2_d;
      period["se_theta3_d"] = *p.se_theta3_d;
    }
    j["periods"].push_back(std::move(period));
  }
  return j;
}

std::string render_md_decomposition(const DecompositionTable& t,
                                    double scale) {
  std::ostringstream out;
  out << "| period | ND prenatal | ND biology | ND preferences "
         "| D prenatal | D biology | D preferences |\n";
  out << "|---|---|---|---|---|---|---|\n";
  for (const auto& p : t.periods) {
    out << "| " << window_title(to_string(p.window)) << " | "
        << fmt_fixed3(p.theta1_nd * scale) << " | "
        << fmt_fixed3(p.theta2_nd * scale) << " | "
        << fmt_fixed3(p.theta3_nd * scale) << " | "
        << fmt_fixed3(p.theta1_d * scale) << " | "
        << fmt_fixed3(p.theta2_d * scale) << " | "
        << fmt_fixed3(p.theta3_d * scale) << " |\n";
  }
  // A negative D-preferences entry means discrimination raises female
  // mortality by that magnitude; spell it out to avoid sign misreads.
  for (const auto& p : t.periods) {
    if (p.theta3_d < 0.0) {
      out << "\n" << window_title(to_string(p.window))
          << ": parental preferences raise female mortality by "
          << fmt_fixed3(-p.theta3_d * scale)
          << (scale == 1000.0 ? " per thousand" : "") << " (signed "
          << fmt_fixed3(p.theta3_d * scale) << ").";
    }
  }
  if (!t.periods.empty()) out << '\n';
  return out.str();
}

}  // namespace

std::string render(const SexRatioSummary& summary, const RenderOptions& opt) {
  switch (opt.format) {
    case RenderFormat::csv:
      return render_csv_sex_ratio(summary, scale_of(opt));
    case RenderFormat::json:
      return json_sex_ratio(summary).dump(2) + "\n";
    case RenderFormat::markdown:
      return render_md_sex_ratio(summary);
  }
  throw ConfigError("unknown render format");
}

std::string render(const RateTable& table, const RenderOptions& opt) {
  switch (opt.format) {
    case RenderFormat::csv:
      return render_csv_rates(table, scale_of(opt));
    case RenderFormat::json:
      return json_rates(table).dump(2) + "\n";
    case RenderFormat::markdown:
      return render_md_rates(table, scale_of(opt));
  }
  throw ConfigError("unknown render format");
}

std::string render(const CovariateSummary& summary, const RenderOptions& opt) {
  switch (opt.format) {
    case RenderFormat::csv:
      return render_csv_covariates(summary);
    case RenderFormat::json:
      return json_covariates(summary).dump(2) + "\n";
    case RenderFormat::markdown:
      return render_md_covariates(summary);
  }
  throw ConfigError("unknown render format");
}

std::string render(const DecompositionTable& table, const RenderOptions& opt) {
  switch (opt.format) {
    case RenderFormat::csv:
      return render_csv_decomposition(table, scale_of(opt));
    case RenderFormat::json:
      return json_decomposition(table).dump(2) + "\n";
    case RenderFormat::markdown:
      return render_md_decomposition(table, scale_of(opt));
  }
  throw ConfigError("unknown render format");
}

std::string figure1_csv(const RateTable& table) {
  std::ostringstream out;
  out << "society,group,sex,window,rate,n\n";
  for (const auto& r : table.rows) {
    if (r.group != "singletons" || (r.window != "I" && r.window != "CH")) {
      continue;
    }
    out << r.society << ',' << r.group << ',' << r.sex << ',' << r.window
        << ',' << fmt_full(r.rate) << ',' << r.n << '\n';
  }
  return out.str();
}

SexRatioSummary parse_sex_ratio_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SexRatioSummary s;
  for (const auto& r : j.at("rows")) {
    s.rows.push_back({r.at("society").get<std::string>(),
                      r.at("group").get<std::string>(),
                      r.at("n").get<std::uint64_t>(),
                      r.at("prop_male").get<double>(),
                      r.at("sd").get<double>()});
  }
  for (const auto& p : j.at("pooled")) {
    s.pooled.push_back({p.at("society").get<std::string>(),
                        p.at("males").get<std::uint64_t>(),
                        p.at("females").get<std::uint64_t>(),
                        p.at("ratio").get<double>()});
  }
  s.notes = j.at("notes").get<std::vector<std::string>>();
  return s;
}

RateTable parse_rate_table_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RateTable t;
  for (const auto& r : j.at("rows")) {
    t.rows.push_back(
        {r.at("society").get<std::string>(), r.at("group").get<std::string>(),
         r.at("sex").get<std::string>(), r.at("window").get<std::string>(),
         r.at("rate").get<double>(), r.at("sd").get<double>(),
         r.at("deaths").get<std::uint64_t>(), r.at("n").get<std::uint64_t>()});
  }
  return t;
}

CovariateSummary parse_covariate_summary_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CovariateSummary s;
  for (const auto& r : j.at("rows")) {
    s.rows.push_back({r.at("society").get<std::string>(),
                      r.at("group").get<std::string>(),
                      r.at("variable").get<std::string>(),
                      r.at("n").get<std::uint64_t>(),
                      r.at("mean").get<double>(), r.at("sd").get<double>()});
  }
  return s;
}

DecompositionTable parse_decomposition_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DecompositionTable t;
  t.provenance = j.at("provenance").get<std::string>();
  t.bootstrap_replicates = j.at("bootstrap_replicates").get<std::uint64_t>();
  t.bootstrap_discarded = j.at("bootstrap_discarded").get<std::uint64_t>();
  for (const auto& pj : j.at("periods")) {
    PeriodDecomposition p;
    p.window = window_kind_from_string(pj.at("window").get<std::string>());
    p.theta_nd = pj.at("theta_nd").get<double>();
    p.theta_tfe_nd = pj.at("theta_tfe_nd").get<double>();
    p.theta_d = pj.at("theta_d").get<double>();
    p.theta_tfe_d = pj.at("theta_tfe_d").get<double>();
    p.theta1_nd = pj.at("theta1_nd").get<double>();
    p.theta2_nd = pj.at("theta2_nd").get<double>();
    p.theta3_nd = pj.at("theta3_nd").get<double>();
    p.theta1_d = pj.at("theta1_d").get<double>();
    p.theta2_d = pj.at("theta2_d").get<double>();
    p.theta3_d = pj.at("theta3_d").get<double>();
    if (pj.contains("se_theta1_nd")) {
      p.se_theta1_nd = pj.at("se_theta1_nd").get<double>();
      p.se_theta2_nd = pj.at("se_theta2_nd").get<double>();
      p.se_theta1_d = pj.at("se_theta1_d").get<double>();
      p.se_theta2_d = pj.at("se_theta2_d").get<double>();
      p.se_theta3_d = pj.at("se_theta3_d").get<double>();
    }
    t.periods.push_back(std::move(p));
  }
  return t;
}

RenderFormat render_format_from_string(const std::string& name) {
  if (name == "csv") return RenderFormat::csv;
  if (name == "json") return RenderFormat::json;
  if (name == "markdown" || name == "md") return RenderFormat::markdown;
  throw ConfigError("unknown output format '" + name +
                    "' (expected csv, json, or markdown)");
}

}  // namespace twindecomp
