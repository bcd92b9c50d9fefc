#ifndef TWINDECOMP_DOMAIN_HPP
#define TWINDECOMP_DOMAIN_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "twindecomp/errors.hpp"

namespace twindecomp {

enum class Sex : std::uint8_t { male, female };
enum class Society : std::uint8_t { ND, D };

// Mortality windows. Ages at death are completed months: death_age 0 means
// the child died before completing month 1. Window membership uses half-open
// [start, end) intervals over completed months so NN, PNN and CH partition
// the first five years without overlap.
enum class WindowKind : std::uint8_t { NN, PNN, I, CH };

struct MortalityWindow {
  WindowKind kind;
  int start_month;           // conditioning age: child must survive to here
  int end_month;             // exclusive upper bound in completed months
  int requires_survival_to;  // == start_month

  static MortalityWindow for_kind(WindowKind kind);
};

enum class EducationLevel : std::uint8_t { none, primary, secondary };

// One live birth as reported in a birth-history file. Duration fields are in
// completed months. death_age_months is absent iff the child was alive at
// the survey; age_at_survey_months may be absent for dead children.
struct BirthRecord {
  std::string child_id;
  std::string mother_id;
  std::string country_code;
  Society society = Society::ND;
  Sex sex = Sex::male;
  int birth_year = 0;
  int birth_month = 1;  // 1-12
  int multiplicity = 1; // as declared by the mother; 2 = twin
  std::optional<int> death_age_months;
  std::optional<int> age_at_survey_months;
  int survey_year = 0;

  std::optional<int> mother_age;
  std::optional<EducationLevel> mother_edu;
  std::optional<std::string> mother_marital;
  std::optional<EducationLevel> father_edu;
  std::optional<int> household_size;
  std::optional<int> electricity;  // 0/1 asset flags
  std::optional<int> radio;
  std::optional<int> tv;
  std::optional<int> car;

  bool operator==(const BirthRecord&) const = default;
};

enum class PairType : std::uint8_t { MM, FF, MF };

// A matched twin pair. Both members share mother_id, birth year/month and
// have multiplicity 2.
struct TwinPair {
  std::uint32_t pair_id = 0;
  std::string mother_id;
  std::string member_a;  // child_ids, a < b lexicographically
  std::string member_b;
  std::uint32_t row_a = 0;  // rows in the owning BirthTable
  std::uint32_t row_b = 0;
  PairType type = PairType::MM;
};

PairType pair_type_for(Sex a, Sex b);
PairType pair_type(const TwinPair& pair);

// Window label for one record: 1 = died inside the window, 0 = survived
// past its end, nullopt = ineligible. A record is ineligible when it failed
// the window's survival condition (died before start_month) or when it is
// alive with age_at_survey_months < end_month (incomplete exposure).
// Throws DataError if both age fields are absent.
std::optional<int> classify_window(const BirthRecord& record,
                                   const MortalityWindow& window);

const char* to_string(WindowKind kind);
const char* to_string(Society society);
const char* to_string(Sex sex);
const char* to_string(PairType type);
const char* to_string(EducationLevel level);
WindowKind window_kind_from_string(const std::string& text);

}  // namespace twindecomp

#endif  // TWINDECOMP_DOMAIN_HPP
