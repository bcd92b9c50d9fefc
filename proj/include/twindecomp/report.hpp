#ifndef TWINDECOMP_REPORT_HPP
#define TWINDECOMP_REPORT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "twindecomp/decompose.hpp"
#include "twindecomp/ingest.hpp"

namespace twindecomp {

enum class RenderFormat : std::uint8_t { csv, json, markdown };

struct RenderOptions {
  RenderFormat format = RenderFormat::csv;
  bool per_thousand = false;  // render rates/effects multiplied by 1000
};

struct SexRatioRow {
  std::string society;
  std::string group;  // singletons, all_twins, mf, mm, ff, same_sex_twins
  std::uint64_t n = 0;
  double prop_male = 0.0;
  double sd = 0.0;

  bool operator==(const SexRatioRow&) const = default;
};

struct PooledSexRatio {
  std::string society;
  std::uint64_t males = 0;
  std::uint64_t females = 0;
  double ratio = 0.0;

  bool operator==(const PooledSexRatio&) const = default;
};

struct SexRatioSummary {
  std::vector<SexRatioRow> rows;
  std::vector<PooledSexRatio> pooled;
  std::vector<std::string> notes;  // omitted empty groups

  bool operator==(const SexRatioSummary&) const = default;
};

struct RateRow {
  std::string society;
  std::string group;  // all_twins, mf_twins, singletons
  std::string sex;    // M, F
  std::string window;
  double rate = 0.0;
  double sd = 0.0;
  std::uint64_t deaths = 0;
  std::uint64_t n = 0;  // eligible

  bool operator==(const RateRow&) const = default;
};

struct RateTable {
  std::vector<RateRow> rows;

  bool operator==(const RateTable&) const = default;
};

struct CovariateRow {
  std::string society;
  std::string group;  // twins, singletons
  std::string variable;
  std::uint64_t n = 0;
  double mean = 0.0;
  double sd = 0.0;

  bool operator==(const CovariateRow&) const = default;
};

struct CovariateSummary {
  std::vector<CovariateRow> rows;

  bool operator==(const CovariateSummary&) const = default;
};

// Proportion male with SD sqrt(p(1-p)) per group, plus the pooled
// male/female ratio over singletons and matched twins. Empty groups are
// omitted with a note.
SexRatioSummary sex_ratio_table(const BirthTable& table,
                                const TwinPairSet& pairs);

// Mortality rates on window-eligible members per (society, group, sex,
// window). The singleton x {I, CH} cells are the underlying data of the
// usual infant/child comparison figure.
RateTable mortality_rate_table(const BirthTable& table,
                               const TwinPairSet& pairs,
                               const std::vector<WindowKind>& windows);

// Per-variable n/mean/SD for twins vs singletons per society. Missing
// values are excluded from n; mortality outcomes use window eligibility.
CovariateSummary covariate_summary(const BirthTable& table,
                                   const TwinPairSet& pairs);

std::string render(const SexRatioSummary& summary, const RenderOptions& opt);
std::string render(const RateTable& table, const RenderOptions& opt);
std::string render(const CovariateSummary& summary, const RenderOptions& opt);
std::string render(const DecompositionTable& table, const RenderOptions& opt);

// society,group,sex,window,rate,n block for the singleton infant/child cells.
std::string figure1_csv(const RateTable& table);

// Inverses of the JSON renderings.
SexRatioSummary parse_sex_ratio_json(const std::string& text);
RateTable parse_rate_table_json(const std::string& text);
CovariateSummary parse_covariate_summary_json(const std::string& text);
DecompositionTable parse_decomposition_json(const std::string& text);

RenderFormat render_format_from_string(const std::string& name);

}  // namespace twindecomp

#endif  // TWINDECOMP_REPORT_HPP
