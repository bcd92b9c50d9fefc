// Shared builders for hand-constructed birth tables.
#ifndef TWINDECOMP_TESTS_HELPERS_HPP
#define TWINDECOMP_TESTS_HELPERS_HPP

#include <string>
#include <vector>

#include "twindecomp/ingest.hpp"

namespace helpers {

using twindecomp::BirthRecord;
using twindecomp::BirthTable;
using twindecomp::Sex;
using twindecomp::Society;

inline BirthRecord record(std::string child_id, std::string mother_id,
                          Sex sex, int multiplicity = 1,
                          std::optional<int> death_age = std::nullopt,
                          std::optional<int> age_at_survey = 60,
                          Society society = Society::ND) {
  BirthRecord r;
  r.child_id = std::move(child_id);
  r.mother_id = std::move(mother_id);
  r.country_code = society == Society::ND ? "ND01" : "D01";
  r.society = society;
  r.sex = sex;
  r.birth_year = 1995;
  r.birth_month = 6;
  r.multiplicity = multiplicity;
  r.death_age_months = death_age;
  r.age_at_survey_months = death_age ? std::nullopt : age_at_survey;
  r.survey_year = 2000;
  return r;
}

// n_pairs MF twin pairs where the first male_deaths males and the first
// female_deaths females die at death_age months; everyone else survives to
// 60+. One mother per pair.
inline std::vector<BirthRecord> mf_pairs_with_rates(
    int n_pairs, int male_deaths, int female_deaths, int death_age,
    Society society, const std::string& prefix) {
  std::vector<BirthRecord> records;
  records.reserve(2 * static_cast<std::size_t>(n_pairs));
  for (int i = 0; i < n_pairs; ++i) {
    const std::string mother = prefix + "m" + std::to_string(i);
    auto male = record(mother + "-a", mother, Sex::male, 2,
                       i < male_deaths ? std::optional<int>(death_age)
                                       : std::nullopt,
                       60, society);
    auto female = record(mother + "-b", mother, Sex::female, 2,
                         i < female_deaths ? std::optional<int>(death_age)
                                           : std::nullopt,
                         60, society);
    records.push_back(std::move(male));
    records.push_back(std::move(female));
  }
  return records;
}

// Same-sex pairs, analogous construction.
inline std::vector<BirthRecord> same_sex_pairs(int n_pairs, Sex sex,
                                               int deaths, int death_age,
                                               Society society,
                                               const std::string& prefix) {
  std::vector<BirthRecord> records;
  for (int i = 0; i < n_pairs; ++i) {
    const std::string mother = prefix + "m" + std::to_string(i);
    for (int k = 0; k < 2; ++k) {
      records.push_back(record(
          mother + (k == 0 ? "-a" : "-b"), mother, sex, 2,
          (2 * i + k) < deaths ? std::optional<int>(death_age) : std::nullopt,
          60, society));
    }
  }
  return records;
}

}  // namespace helpers

#endif  // TWINDECOMP_TESTS_HELPERS_HPP
