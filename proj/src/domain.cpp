#include "twindecomp/domain.hpp"

namespace twindecomp {

MortalityWindow MortalityWindow::for_kind(WindowKind kind) {
  switch (kind) {
    case WindowKind::NN:
      return {kind, 0, 1, 0};
    case WindowKind::PNN:
      return {kind, 1, 12, 1};
    case WindowKind::I:
      return {kind, 0, 12, 0};
    case WindowKind::CH:
      return {kind, 12, 60, 12};
  }
  throw ConfigError("invalid mortality window kind");
}

PairType pair_type_for(Sex a, Sex b) {
  if (a != b) return PairType::MF;
  return a == Sex::male ? PairType::MM : PairType::FF;
}

PairType pair_type(const TwinPair& pair) { return pair.type; }

std::optional<int> classify_window(const BirthRecord& record,
                                   const MortalityWindow& window) {
  if (!record.death_age_months && !record.age_at_survey_months) {
    throw DataError("record '" + record.child_id +
                    "': both death_age_months and age_at_survey_months "
                    "are absent");
  }
  if (record.death_age_months) {
    const int death_age = *record.death_age_months;
    if (death_age < window.requires_survival_to) return std::nullopt;
    return death_age < window.end_month ? 1 : 0;
  }
  // Alive at survey: needs complete exposure over the whole window.
  if (*record.age_at_survey_months < window.end_month) return std::nullopt;
  return 0;
}

const char* to_string(WindowKind kind) {
  switch (kind) {
    case WindowKind::NN:
      return "NN";
    case WindowKind::PNN:
      return "PNN";
    case WindowKind::I:
      return "I";
    case WindowKind::CH:
      return "CH";
  }
  return "?";
}

const char* to_string(Society society) {
  return society == Society::ND ? "ND" : "D";
}

const char* to_string(Sex sex) { return sex == Sex::male ? "M" : "F"; }

const char* to_string(PairType type) {
  switch (type) {
    case PairType::MM:
      return "MM";
    case PairType::FF:
      return "FF";
    case PairType::MF:
      return "MF";
  }
  return "?";
}

const char* to_string(EducationLevel level) {
  switch (level) {
    case EducationLevel::none:
      return "none";
    case EducationLevel::primary:
      return "primary";
    case EducationLevel::secondary:
      return "secondary";
  }
  return "?";
}

WindowKind window_kind_from_string(const std::string& text) {
  if (text == "NN") return WindowKind::NN;
  if (text == "PNN") return WindowKind::PNN;
  if (text == "I") return WindowKind::I;
  if (text == "CH") return WindowKind::CH;
  throw ConfigError("unknown mortality window '" + text + "'");
}

}  // namespace twindecomp
