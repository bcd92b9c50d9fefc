#ifndef TWINDECOMP_INGEST_HPP
#define TWINDECOMP_INGEST_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "twindecomp/domain.hpp"

namespace twindecomp {

// Column order of the canonical birth-history CSV.
extern const char* const kBirthCsvHeader;

// An ordered collection of live births with a mother index. Mothers are
// numbered densely in order of first appearance; that ordering is what all
// downstream cluster ids refer to.
class BirthTable {
 public:
  BirthTable() = default;
  explicit BirthTable(std::vector<BirthRecord> records);

  const std::vector<BirthRecord>& records() const { return records_; }
  const BirthRecord& record(std::uint32_t row) const { return records_[row]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  std::size_t mother_count() const { return mother_rows_.size(); }
  std::uint32_t mother_index(std::uint32_t row) const {
    return row_mother_[row];
  }
  const std::vector<std::uint32_t>& mother_rows(std::uint32_t mother) const {
    return mother_rows_[mother];
  }
  const std::string& mother_id(std::uint32_t mother) const;

 private:
  std::vector<BirthRecord> records_;
  std::vector<std::uint32_t> row_mother_;             // row -> dense mother
  std::vector<std::vector<std::uint32_t>> mother_rows_;  // mother -> rows
};

struct MatchDiagnostics {
  std::uint64_t pairs_mm = 0;
  std::uint64_t pairs_ff = 0;
  std::uint64_t pairs_mf = 0;
  std::uint64_t unmatched_individuals = 0;       // declared twins, group of 1
  std::uint64_t dropped_individuals = 0;         // higher-order or group >= 3
  std::uint64_t dropped_groups = 0;
  std::uint64_t declared_multiples = 0;          // records with multiplicity >= 2

  std::uint64_t matched_individuals() const {
    return 2 * (pairs_mm + pairs_ff + pairs_mf);
  }
};

struct TwinPairSet {
  std::vector<TwinPair> pairs;
};

enum class SampleMode : std::uint8_t { all_twins, mf_pairs, singletons, all };

// Rows of a BirthTable eligible for one window under one mode, with their
// 0/1 outcomes and mother cluster ids. In mf_pairs mode `pair_rows` lists
// (male position, female position) into the sample arrays, one per complete
// pair.
struct Sample {
  WindowKind window = WindowKind::I;
  SampleMode mode = SampleMode::all;
  const BirthTable* table = nullptr;
  std::vector<std::uint32_t> rows;        // rows into *table
  std::vector<double> outcomes;           // aligned with rows
  std::vector<std::uint32_t> clusters;    // dense mother ids, aligned
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pair_rows;
  bool empty_flag = false;

  std::size_t size() const { return rows.size(); }
};

// Parse the canonical CSV. Throws SchemaError when the header does not match
// and DataError for duplicate child ids, inconsistent ages or unparseable
// mandatory fields (errors carry 1-based line numbers).
BirthTable parse_births(const std::string& path);
BirthTable parse_births(std::istream& in, const std::string& name);

// Write a table back out in the canonical format.
void write_births(const BirthTable& table, std::ostream& out);
void write_births(const BirthTable& table, const std::string& path);

// Group declared twins (multiplicity 2) by (mother, birth year, birth month).
// Groups of exactly two become pairs; singletons within a group stay
// unmatched; groups of three or more, and every record declared with
// multiplicity >= 3, are dropped. All anomalies land in diagnostics.
std::pair<TwinPairSet, MatchDiagnostics> match_twins(const BirthTable& table);

Sample build_sample(const BirthTable& table, const TwinPairSet& pairs,
                    const MortalityWindow& window, SampleMode mode);

// Split one mixed table into (ND, D) tables, preserving record order.
std::pair<BirthTable, BirthTable> split_by_society(const BirthTable& table);

const char* to_string(SampleMode mode);

}  // namespace twindecomp

#endif  // TWINDECOMP_INGEST_HPP
