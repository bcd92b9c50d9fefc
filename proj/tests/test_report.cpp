#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "twindecomp/report.hpp"
#include "twindecomp/synth.hpp"

using namespace twindecomp;

namespace {

// Singletons plus the three twin groups, sized so the proportions male are
// exactly the published values: singletons 0.508, same-sex twins 0.506.
BirthTable table1_shaped() {
  std::vector<BirthRecord> records;
  for (int i = 0; i < 1000; ++i) {
    records.push_back(helpers::record("s" + std::to_string(i),
                                      "sm" + std::to_string(i),
                                      i < 508 ? Sex::male : Sex::female));
  }
  auto mf = helpers::mf_pairs_with_rates(10077, 0, 0, 0, Society::ND, "mf");
  auto mm = helpers::same_sex_pairs(7805, Sex::male, 0, 0, Society::ND, "mm");
  auto ff = helpers::same_sex_pairs(7615, Sex::female, 0, 0, Society::ND, "ff");
  records.insert(records.end(), mf.begin(), mf.end());
  records.insert(records.end(), mm.begin(), mm.end());
  records.insert(records.end(), ff.begin(), ff.end());
  return BirthTable(std::move(records));
}

const SexRatioRow& row_of(const SexRatioSummary& s, const std::string& society,
                          const std::string& group) {
  for (const auto& r : s.rows) {
    if (r.society == society && r.group == group) return r;
  }
  throw std::runtime_error("missing row " + society + "/" + group);
}

}  // namespace

TEST_CASE("sex ratio table matches the published proportions") {
  BirthTable table = table1_shaped();
  auto [pairs, diag] = match_twins(table);
  SexRatioSummary s = sex_ratio_table(table, pairs);

  const auto& same_sex = row_of(s, "ND", "same_sex_twins");
  CHECK(same_sex.n == 30840);
  CHECK(same_sex.prop_male == doctest::Approx(0.506).epsilon(0.001));
  CHECK(same_sex.sd == doctest::Approx(0.500).epsilon(0.001));

  const auto& singles = row_of(s, "ND", "singletons");
  CHECK(singles.prop_male == doctest::Approx(0.508).epsilon(1e-9));

  // pairing forces one male per MF pair
  const auto& mf = row_of(s, "ND", "mf");
  CHECK(mf.prop_male == 0.5);
  const auto& mm = row_of(s, "ND", "mm");
  CHECK(mm.prop_male == 1.0);
  CHECK(mm.sd == 0.0);
  const auto& ff = row_of(s, "ND", "ff");
  CHECK(ff.prop_male == 0.0);

  const auto& all_twins = row_of(s, "ND", "all_twins");
  CHECK(all_twins.n == 50994);
  CHECK(all_twins.n == mf.n + mm.n + ff.n);

  // pooled ratio is males over females
  REQUIRE(s.pooled.size() == 1);
  const std::uint64_t males = 508 + 10077 + 15610;
  const std::uint64_t females = 492 + 10077 + 15230;
  CHECK(s.pooled[0].males == males);
  CHECK(s.pooled[0].ratio ==
        doctest::Approx(static_cast<double>(males) / females).epsilon(1e-12));

  // the D society is absent: rows omitted with notes
  bool noted = false;
  for (const auto& note : s.notes) noted |= note.find(" D") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("balanced synthetic data pools to a ratio near one") {
  SynthConfig c;
  c.seed = 5;
  c.n_mothers_nd = 30000;
  c.n_mothers_d = 0;
  c.twin_rate = 0.3;
  c.sex_shift = 0.0;
  BirthTable table = generate(c);
  auto [pairs, diag] = match_twins(table);
  SexRatioSummary s = sex_ratio_table(table, pairs);
  REQUIRE(!s.pooled.empty());
  const double n = static_cast<double>(s.pooled[0].males + s.pooled[0].females);
  CHECK(std::abs(s.pooled[0].ratio - 1.0) < 8.0 / std::sqrt(n));
}

TEST_CASE("mortality rate table") {
  SUBCASE("MF infant rates as published for India") {
    auto records =
        helpers::mf_pairs_with_rates(1000, 338, 348, 3, Society::D, "in");
    BirthTable table(std::move(records));
    auto [pairs, diag] = match_twins(table);
    RateTable t = mortality_rate_table(table, pairs, {WindowKind::I});
    double boys = -1, girls = -1;
    for (const auto& r : t.rows) {
      if (r.group == "mf_twins" && r.sex == "M") boys = r.rate;
      if (r.group == "mf_twins" && r.sex == "F") girls = r.rate;
    }
    CHECK(boys == doctest::Approx(0.338).epsilon(1e-12));
    CHECK(girls == doctest::Approx(0.348).epsilon(1e-12));
  }
  SUBCASE("all survivors mean zero rates") {
    auto records = helpers::mf_pairs_with_rates(50, 0, 0, 0, Society::ND, "t");
    BirthTable table(std::move(records));
    auto [pairs, diag] = match_twins(table);
    RateTable t = mortality_rate_table(
        table, pairs,
        {WindowKind::I, WindowKind::NN, WindowKind::PNN, WindowKind::CH});
    for (const auto& r : t.rows) CHECK(r.rate == 0.0);
  }
  SUBCASE("rates equal deaths over eligible, recounted") {
    SynthConfig c;
    c.seed = 13;
    c.n_mothers_nd = 3000;
    c.n_mothers_d = 3000;
    c.twin_rate = 0.5;
    c.base_hazard = {0.1, 0.08, 0.05};
    c.sex_shift = 0.1;
    c.prenatal_effect = {0.05, 0.02, 0.01};
    BirthTable table = generate(c);
    auto [pairs, diag] = match_twins(table);
    RateTable t = mortality_rate_table(table, pairs, kAllWindows);
    CHECK(!t.rows.empty());
    for (const auto& r : t.rows) {
      CHECK(r.rate == static_cast<double>(r.deaths) / static_cast<double>(r.n));
      CHECK(r.sd ==
            doctest::Approx(std::sqrt(r.rate * (1.0 - r.rate))).epsilon(1e-12));
    }
  }
  SUBCASE("synthetic rates agree with the enumerated hazards") {
    SynthConfig c;
    c.seed = 21;
    c.n_mothers_nd = 40000;
    c.n_mothers_d = 0;
    c.twin_rate = 1.0;
    c.sex_shift = 0.1;
    c.base_hazard = {0.08, 0.06, 0.04};
    c.biology_effect = {0.03, 0.01, 0.0};
    c.prenatal_effect = {0.05, 0.02, 0.01};
    BirthTable table = generate(c);
    auto [pairs, diag] = match_twins(table);
    RateTable t = mortality_rate_table(table, pairs, {WindowKind::NN});
    const auto est = oracles::enumerate_window(c, 0, false);
    double boys = -1, girls = -1;
    std::uint64_t n_boys = 0, n_girls = 0;
    for (const auto& r : t.rows) {
      if (r.group != "all_twins") continue;
      if (r.sex == "M") {
        boys = r.rate;
        n_boys = r.n;
      } else {
        girls = r.rate;
        n_girls = r.n;
      }
    }
    const double gap_se =
        std::sqrt(0.25 / static_cast<double>(n_boys) +
                  0.25 / static_cast<double>(n_girls));
    CHECK(std::abs((boys - girls) - est.theta) < 4.0 * gap_se);
  }
}

TEST_CASE("covariate summary") {
  SUBCASE("means, SDs, and missing exclusion") {
    std::vector<BirthRecord> records;
    for (int i = 0; i < 4; ++i) {
      auto r = helpers::record("c" + std::to_string(i), "m" + std::to_string(i),
                               i % 2 == 0 ? Sex::male : Sex::female);
      r.mother_age = 30 + i;          // varies
      r.household_size = 6;           // constant -> SD 0
      r.electricity = (i < 2) ? 1 : 0;
      records.push_back(r);
    }
    records[3].mother_age.reset();    // excluded from n
    BirthTable table(std::move(records));
    auto [pairs, diag] = match_twins(table);
    CovariateSummary s = covariate_summary(table, pairs);

    const CovariateRow* age = nullptr;
    const CovariateRow* hh = nullptr;
    for (const auto& r : s.rows) {
      if (r.society == "ND" && r.group == "singletons") {
        if (r.variable == "mother_age") age = &r;
        if (r.variable == "household_size") hh = &r;
      }
    }
    REQUIRE(age != nullptr);
    CHECK(age->n == 3);
    CHECK(age->mean == doctest::Approx(31.0).epsilon(1e-12));
    REQUIRE(hh != nullptr);
    CHECK(hh->n == 4);
    CHECK(hh->sd == 0.0);
  }
  SUBCASE("configured mother age mean is recovered") {
    SynthConfig c;
    c.seed = 3;
    c.n_mothers_nd = 30000;
    c.n_mothers_d = 0;
    c.twin_rate = 0.06;
    c.covariates.mother_age_mean = 36.3;
    c.covariates.mother_age_sd = 7.5;
    BirthTable table = generate(c);
    auto [pairs, diag] = match_twins(table);
    CovariateSummary s = covariate_summary(table, pairs);
    for (const auto& r : s.rows) {
      if (r.society == "ND" && r.group == "twins" &&
          r.variable == "mother_age") {
        CHECK(r.mean == doctest::Approx(36.3).epsilon(0.01));
        CHECK(r.sd == doctest::Approx(7.5).epsilon(0.05));
      }
    }
  }
  SUBCASE("outcome rows use window eligibility for n") {
    auto records =
        helpers::mf_pairs_with_rates(100, 30, 20, 0, Society::ND, "t");
    BirthTable table(std::move(records));
    auto [pairs, diag] = match_twins(table);
    CovariateSummary s = covariate_summary(table, pairs);
    for (const auto& r : s.rows) {
      if (r.society != "ND" || r.group != "twins") continue;
      if (r.variable == "mortality_NN") CHECK(r.n == 200);
      if (r.variable == "mortality_PNN") CHECK(r.n == 150);  // NN deaths out
      if (r.variable == "mortality_CH") CHECK(r.n == 150);
    }
  }
}

TEST_CASE("render formats") {
  DecompositionTable table;
  table.provenance = "direct";
  table.periods.push_back(
      decompose_period(0.045, 0.027, 0.027, -0.010, WindowKind::I));
  table.periods.push_back(
      decompose_period(0.036, 0.022, 0.045, 0.009, WindowKind::NN));
  table.periods.push_back(
      decompose_period(0.018, 0.010, -0.014, -0.032, WindowKind::PNN));
  table.periods.push_back(
      decompose_period(0.004, -0.008, -0.016, -0.031, WindowKind::CH));

  SUBCASE("markdown mirrors the four-row six-effect layout") {
    std::string md =
        render(table, RenderOptions{RenderFormat::markdown, false});
    CHECK(md.find("Infant mortality") != std::string::npos);
    CHECK(md.find("Neonatal mortality") != std::string::npos);
    CHECK(md.find("Postneonatal mortality") != std::string::npos);
    CHECK(md.find("Child mortality") != std::string::npos);
    CHECK(md.find("0.018") != std::string::npos);
    CHECK(md.find("-0.037") != std::string::npos);
    // plain-language rendering of the discrimination magnitude
    CHECK(md.find("raise female mortality by 0.037") != std::string::npos);
    // 4 data rows + header + separator + blank + 4 notes
    std::size_t pipes = 0;
    for (char ch : md) pipes += ch == '\n';
    CHECK(pipes >= 6);
  }
  SUBCASE("json round-trips to an equal table") {
    std::string json = render(table, RenderOptions{RenderFormat::json, false});
    DecompositionTable parsed = parse_decomposition_json(json);
    REQUIRE(parsed.periods.size() == table.periods.size());
    for (std::size_t i = 0; i < table.periods.size(); ++i) {
      CHECK(parsed.periods[i].window == table.periods[i].window);
      CHECK(parsed.periods[i].theta1_nd == table.periods[i].theta1_nd);
      CHECK(parsed.periods[i].theta3_d == table.periods[i].theta3_d);
      CHECK(parsed.periods[i].se_theta3_d == table.periods[i].se_theta3_d);
    }
    CHECK(parsed.provenance == table.provenance);
  }
  SUBCASE("csv full precision agrees with markdown after rounding") {
    std::string csv = render(table, RenderOptions{RenderFormat::csv, false});
    std::istringstream lines(csv);
    std::string header, line;
    std::getline(lines, header);
    CHECK(header ==
          "window,theta1_nd,theta2_nd,theta3_nd,theta1_d,theta2_d,theta3_d");
    std::getline(lines, line);  // infant row
    CHECK(line.substr(0, 2) == "I,");
    const double v = std::stod(line.substr(2));
    char rounded[16];
    std::snprintf(rounded, sizeof(rounded), "%.3f", v);
    CHECK(std::string(rounded) == "0.018");
  }
  SUBCASE("per-thousand scaling") {
    std::string md = render(table, RenderOptions{RenderFormat::markdown, true});
    CHECK(md.find("18.000") != std::string::npos);
    CHECK(md.find("-37.000") != std::string::npos);
  }
}

TEST_CASE("empty tables render as headers only") {
  RateTable empty;
  std::string csv = render(empty, RenderOptions{RenderFormat::csv, false});
  CHECK(csv == "society,group,sex,window,rate,sd,deaths,n\n");
  CovariateSummary none;
  CHECK(render(none, RenderOptions{RenderFormat::csv, false}) ==
        "society,group,variable,n,mean,sd\n");
}

TEST_CASE("report json parsers invert the renderers") {
  SynthConfig c;
  c.seed = 17;
  c.n_mothers_nd = 800;
  c.n_mothers_d = 800;
  c.twin_rate = 0.5;
  c.base_hazard = {0.1, 0.06, 0.04};
  c.sex_shift = 0.1;
  BirthTable table = generate(c);
  auto [pairs, diag] = match_twins(table);

  RenderOptions json_opt{RenderFormat::json, false};
  SexRatioSummary sr = sex_ratio_table(table, pairs);
  CHECK(parse_sex_ratio_json(render(sr, json_opt)) == sr);
  RateTable rt = mortality_rate_table(table, pairs, kAllWindows);
  CHECK(parse_rate_table_json(render(rt, json_opt)) == rt);
  CovariateSummary cs = covariate_summary(table, pairs);
  CHECK(parse_covariate_summary_json(render(cs, json_opt)) == cs);
}

TEST_CASE("figure data block holds singleton infant and child rates") {
  std::vector<BirthRecord> records;
  for (int i = 0; i < 40; ++i) {
    records.push_back(helpers::record(
        "s" + std::to_string(i), "m" + std::to_string(i),
        i % 2 == 0 ? Sex::male : Sex::female, 1,
        i < 8 ? std::optional<int>(i % 2 == 0 ? 3 : 20) : std::nullopt, 60,
        i % 3 == 0 ? Society::D : Society::ND));
  }
  auto twins = helpers::mf_pairs_with_rates(10, 2, 1, 0, Society::ND, "t");
  records.insert(records.end(), twins.begin(), twins.end());
  BirthTable table(std::move(records));
  auto [pairs, diag] = match_twins(table);
  RateTable t = mortality_rate_table(table, pairs, kAllWindows);
  std::string block = figure1_csv(t);
  std::istringstream lines(block);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "society,group,sex,window,rate,n");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    CHECK(line.find("singletons") != std::string::npos);
    const bool infant = line.find(",I,") != std::string::npos;
    const bool child = line.find(",CH,") != std::string::npos;
    CHECK((infant || child));
    ++rows;
  }
  CHECK(rows == 8);  // 2 societies x 2 sexes x 2 windows
}

TEST_CASE("unknown render format names are rejected") {
  CHECK_THROWS_AS(render_format_from_string("yaml"), ConfigError);
  CHECK(render_format_from_string("md") == RenderFormat::markdown);
}
