#include "twindecomp/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

namespace twindecomp {

const char* const kBirthCsvHeader =
    "child_id,mother_id,country,society,sex,birth_year,birth_month,"
    "multiplicity,death_age_months,age_at_survey_months,survey_year,"
    "mother_age,mother_edu,mother_marital,father_edu,household_size,"
    "electricity,radio,tv,car";

namespace {

constexpr int kFieldCount = 20;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

int parse_int(std::string_view text, const char* field, std::size_t line_no) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("line " + std::to_string(line_no) + ": field '" + field +
                    "' is not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::optional<int> parse_opt_int(std::string_view text, const char* field,
                                 std::size_t line_no) {
  if (text.empty()) return std::nullopt;
  return parse_int(text, field, line_no);
}

std::optional<EducationLevel> parse_opt_edu(std::string_view text,
                                            const char* field,
                                            std::size_t line_no) {
  if (text.empty()) return std::nullopt;
  if (text == "none") return EducationLevel::none;
  if (text == "primary") return EducationLevel::primary;
  if (text == "secondary" || text == "secondary+")
    return EducationLevel::secondary;
  throw DataError("line " + std::to_string(line_no) + ": field '" + field +
                  "' has unknown education level '" + std::string(text) + "'");
}

std::string field_or_empty(const std::optional<int>& v) {
  return v ? std::to_string(*v) : std::string();
}

}  // namespace

BirthTable::BirthTable(std::vector<BirthRecord> records)
    : records_(std::move(records)) {
  row_mother_.reserve(records_.size());
  std::unordered_map<std::string, std::uint32_t> mother_of;
  mother_of.reserve(records_.size() / 2 + 1);
  for (std::uint32_t row = 0; row < records_.size(); ++row) {
    auto [it, inserted] = mother_of.try_emplace(
        records_[row].mother_id,
        static_cast<std::uint32_t>(mother_rows_.size()));
    if (inserted) mother_rows_.emplace_back();
    row_mother_.push_back(it->second);
    mother_rows_[it->second].push_back(row);
  }
}

const std::string& BirthTable::mother_id(std::uint32_t mother) const {
  return records_[mother_rows_[mother].front()].mother_id;
}

BirthTable parse_births(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open births file '" + path + "'");
  return parse_births(in, path);
}

BirthTable parse_births(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError(name + ": empty file, expected header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kBirthCsvHeader) {
    throw SchemaError(name + ": header does not match canonical schema; "
                      "expected '" + std::string(kBirthCsvHeader) + "'");
  }

  std::vector<BirthRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != kFieldCount) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(kFieldCount) + " fields, got " +
                      std::to_string(fields.size()));
    }
    BirthRecord r;
    r.child_id = std::string(fields[0]);
    r.mother_id = std::string(fields[1]);
    r.country_code = std::string(fields[2]);
    if (r.child_id.empty())
      throw DataError("line " + std::to_string(line_no) + ": empty child_id");
    if (r.mother_id.empty())
      throw DataError("line " + std::to_string(line_no) + ": empty mother_id");
    if (!seen_ids.insert(r.child_id).second) {
      throw DataError("line " + std::to_string(line_no) +
                      ": duplicate child_id '" + r.child_id + "'");
    }
    if (fields[3] == "ND") {
      r.society = Society::ND;
    } else if (fields[3] == "D") {
      r.society = Society::D;
    } else {
      throw DataError("line " + std::to_string(line_no) +
                      ": society must be ND or D, got '" +
                      std::string(fields[3]) + "'");
    }
    if (fields[4] == "M") {
      r.sex = Sex::male;
    } else if (fields[4] == "F") {
      r.sex = Sex::female;
    } else {
      throw DataError("line " + std::to_string(line_no) +
                      ": sex must be M or F, got '" + std::string(fields[4]) +
                      "'");
    }
    r.birth_year = parse_int(fields[5], "birth_year", line_no);
    r.birth_month = parse_int(fields[6], "birth_month", line_no);
    if (r.birth_month < 1 || r.birth_month > 12) {
      throw DataError("line " + std::to_string(line_no) +
                      ": birth_month out of range 1-12");
    }
    r.multiplicity = parse_int(fields[7], "multiplicity", line_no);
    if (r.multiplicity < 1) {
      throw DataError("line " + std::to_string(line_no) +
                      ": multiplicity must be >= 1");
    }
    r.death_age_months = parse_opt_int(fields[8], "death_age_months", line_no);
    r.age_at_survey_months =
        parse_opt_int(fields[9], "age_at_survey_months", line_no);
    if (!r.death_age_months && !r.age_at_survey_months) {
      throw DataError("line " + std::to_string(line_no) +
                      ": both death_age_months and age_at_survey_months "
                      "are empty");
    }
    if (r.death_age_months && *r.death_age_months < 0) {
      throw DataError("line " + std::to_string(line_no) +
                      ": negative death_age_months");
    }
    if (r.death_age_months && r.age_at_survey_months &&
        *r.death_age_months > *r.age_at_survey_months) {
      throw DataError("line " + std::to_string(line_no) +
                      ": death_age_months exceeds age_at_survey_months");
    }
    r.survey_year = parse_int(fields[10], "survey_year", line_no);
    r.mother_age = parse_opt_int(fields[11], "mother_age", line_no);
    r.mother_edu = parse_opt_edu(fields[12], "mother_edu", line_no);
    if (!fields[13].empty()) r.mother_marital = std::string(fields[13]);
    r.father_edu = parse_opt_edu(fields[14], "father_edu", line_no);
    r.household_size = parse_opt_int(fields[15], "household_size", line_no);
    r.electricity = parse_opt_int(fields[16], "electricity", line_no);
    r.radio = parse_opt_int(fields[17], "radio", line_no);
    r.tv = parse_opt_int(fields[18], "tv", line_no);
    r.car = parse_opt_int(fields[19], "car", line_no);
    records.push_back(std::move(r));
  }
  return BirthTable(std::move(records));
}

void write_births(const BirthTable& table, std::ostream& out) {
  out << kBirthCsvHeader << '\n';
  for (const BirthRecord& r : table.records()) {
    out << r.child_id << ',' << r.mother_id << ',' << r.country_code << ','
        << to_string(r.society) << ',' << to_string(r.sex) << ','
        << r.birth_year << ',' << r.birth_month << ',' << r.multiplicity << ','
        << field_or_empty(r.death_age_months) << ','
        << field_or_empty(r.age_at_survey_months) << ',' << r.survey_year
        << ',' << field_or_empty(r.mother_age) << ','
        << (r.mother_edu ? to_string(*r.mother_edu) : "") << ','
        << (r.mother_marital ? *r.mother_marital : "") << ','
        << (r.father_edu ? to_string(*r.father_edu) : "") << ','
        << field_or_empty(r.household_size) << ','
        << field_or_empty(r.electricity) << ',' << field_or_empty(r.radio)
        << ',' << field_or_empty(r.tv) << ',' << field_or_empty(r.car) << '\n';
  }
}

void write_births(const BirthTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write births file '" + path + "'");
  write_births(table, out);
}

std::pair<TwinPairSet, MatchDiagnostics> match_twins(const BirthTable& table) {
  TwinPairSet set;
  MatchDiagnostics diag;

  // Per mother, group declared-twin rows by (year, month). std::map keeps
  // delivery order deterministic regardless of row order.
  for (std::uint32_t mother = 0; mother < table.mother_count(); ++mother) {
    std::map<std::pair<int, int>, std::vector<std::uint32_t>> groups;
    for (std::uint32_t row : table.mother_rows(mother)) {
      const BirthRecord& r = table.record(row);
      if (r.multiplicity >= 2) ++diag.declared_multiples;
      if (r.multiplicity >= 3) {
        ++diag.dropped_individuals;
        continue;
      }
      if (r.multiplicity == 2) {
        groups[{r.birth_year, r.birth_month}].push_back(row);
      }
    }
    for (auto& [when, rows] : groups) {
      if (rows.size() == 1) {
        ++diag.unmatched_individuals;
        continue;
      }
      if (rows.size() >= 3) {
        diag.dropped_individuals += rows.size();
        ++diag.dropped_groups;
        continue;
      }
      const BirthRecord* a = &table.record(rows[0]);
      const BirthRecord* b = &table.record(rows[1]);
      if (b->child_id < a->child_id) {
        std::swap(a, b);
        std::swap(rows[0], rows[1]);
      }
      TwinPair pair;
      pair.pair_id = static_cast<std::uint32_t>(set.pairs.size());
      pair.mother_id = a->mother_id;
      pair.member_a = a->child_id;
      pair.member_b = b->child_id;
      pair.row_a = rows[0];
      pair.row_b = rows[1];
      pair.type = pair_type_for(a->sex, b->sex);
      switch (pair.type) {
        case PairType::MM:
          ++diag.pairs_mm;
          break;
        case PairType::FF:
          ++diag.pairs_ff;
          break;
        case PairType::MF:
          ++diag.pairs_mf;
          break;
      }
      set.pairs.push_back(std::move(pair));
    }
  }
  return {std::move(set), diag};
}

Sample build_sample(const BirthTable& table, const TwinPairSet& pairs,
                    const MortalityWindow& window, SampleMode mode) {
  Sample sample;
  sample.window = window.kind;
  sample.mode = mode;
  sample.table = &table;

  auto push = [&](std::uint32_t row, int outcome) {
    sample.rows.push_back(row);
    sample.outcomes.push_back(static_cast<double>(outcome));
    sample.clusters.push_back(table.mother_index(row));
  };

  switch (mode) {
    case SampleMode::all_twins: {
      for (const TwinPair& pair : pairs.pairs) {
        for (std::uint32_t row : {pair.row_a, pair.row_b}) {
          auto outcome = classify_window(table.record(row), window);
          if (outcome) push(row, *outcome);
        }
      }
      break;
    }
    case SampleMode::mf_pairs: {
      for (const TwinPair& pair : pairs.pairs) {
        if (pair.type != PairType::MF) continue;
        auto out_a = classify_window(table.record(pair.row_a), window);
        auto out_b = classify_window(table.record(pair.row_b), window);
        // Complete pairs only: one ineligible member drops the pair.
        if (!out_a || !out_b) continue;
        std::uint32_t male_row = pair.row_a;
        std::uint32_t female_row = pair.row_b;
        int male_out = *out_a;
        int female_out = *out_b;
        if (table.record(pair.row_a).sex != Sex::male) {
          std::swap(male_row, female_row);
          std::swap(male_out, female_out);
        }
        auto pos = static_cast<std::uint32_t>(sample.rows.size());
        push(male_row, male_out);
        push(female_row, female_out);
        sample.pair_rows.emplace_back(pos, pos + 1);
      }
      break;
    }
    case SampleMode::singletons: {
      for (std::uint32_t row = 0; row < table.size(); ++row) {
        const BirthRecord& r = table.record(row);
        if (r.multiplicity != 1) continue;
        auto outcome = classify_window(r, window);
        if (outcome) push(row, *outcome);
      }
      break;
    }
    case SampleMode::all: {
      for (std::uint32_t row = 0; row < table.size(); ++row) {
        auto outcome = classify_window(table.record(row), window);
        if (outcome) push(row, *outcome);
      }
      break;
    }
  }
  sample.empty_flag = sample.rows.empty();
  return sample;
}

std::pair<BirthTable, BirthTable> split_by_society(const BirthTable& table) {
  std::vector<BirthRecord> nd, d;
  for (const BirthRecord& r : table.records()) {
    (r.society == Society::ND ? nd : d).push_back(r);
  }
  return {BirthTable(std::move(nd)), BirthTable(std::move(d))};
}

const char* to_string(SampleMode mode) {
  switch (mode) {
    case SampleMode::all_twins:
      return "all_twins";
    case SampleMode::mf_pairs:
      return "mf_pairs";
    case SampleMode::singletons:
      return "singletons";
    case SampleMode::all:
      return "all";
  }
  return "?";
}

}  // namespace twindecomp
