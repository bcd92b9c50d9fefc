#ifndef TWINDECOMP_SYNTH_HPP
#define TWINDECOMP_SYNTH_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twindecomp/domain.hpp"
#include "twindecomp/ingest.hpp"

namespace twindecomp {

// Additive per-window death probabilities for the generator. Windows are the
// three hazard stages NN, PNN, CH; the infant window is their composition.
struct WindowRates {
  double nn = 0.0;
  double pnn = 0.0;
  double ch = 0.0;

  double operator[](int stage) const {
    return stage == 0 ? nn : (stage == 1 ? pnn : ch);
  }
};

struct IntRange {
  int min = 0;
  int max = 0;
};

struct CovariateConfig {
  double mother_age_mean = 35.0;
  double mother_age_sd = 8.0;
  double mother_age_p1_shift = 0.0;  // added to the mean when p_h = 1
  std::array<double, 3> mother_edu_probs = {0.55, 0.34, 0.11};
  std::array<double, 3> father_edu_probs = {0.58, 0.33, 0.09};
  std::map<std::string, double> marital_probs = {
      {"married", 0.77}, {"partner", 0.10}, {"widowed", 0.05},
      {"single", 0.02},  {"separated", 0.03}, {"divorced", 0.03}};
  IntRange household_size = {2, 14};
  double electricity = 0.17;
  double radio = 0.55;
  double tv = 0.13;
  double car = 0.04;
  double asset_p1_shift = 0.0;  // added to each asset probability when p_h = 1
};

// Generator configuration. The mortality model is sequential: a child dies
// in stage w with probability base[w] + biology[w]*male + prenatal[w]*p_h +
// discrimination[w]*female*in_D, conditional on surviving earlier stages.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::uint64_t n_mothers_nd = 1000;
  std::uint64_t n_mothers_d = 1000;
  double twin_rate = 0.02;            // probability a delivery is a twin pair
  IntRange deliveries_per_mother = {1, 1};
  double prenatal_prevalence = 0.5;   // P(p_h = 1)
  double sex_shift = 0.0;             // delta: P(male|p=1) = 0.5 + delta
  bool prenatal_per_mother = false;   // default: redraw p per delivery
  WindowRates base_hazard = {0.05, 0.04, 0.03};
  WindowRates biology_effect;         // male shift
  WindowRates prenatal_effect;        // p_h = 1 shift
  WindowRates discrimination_effect;  // female shift, society D only
  IntRange birth_years = {1990, 1999};
  IntRange survey_years = {2000, 2000};
  int countries_nd = 1;
  int countries_d = 1;
  CovariateConfig covariates;

  static SynthConfig from_json_text(const std::string& text);
  static SynthConfig from_json_file(const std::string& path);

  // Throws ConfigError when any probability, or any additive probability
  // sum reachable by some (sex, p, society) cell, falls outside [0, 1].
  void validate() const;
};

struct PlantedCell {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
};

// Exact population estimands implied by a config, per window and society,
// computed by enumeration over the finite (p, sex, survival path) lattice.
struct PlantedEffects {
  PlantedCell& at(WindowKind w, Society s) {
    return cells[static_cast<int>(w)][static_cast<int>(s)];
  }
  const PlantedCell& at(WindowKind w, Society s) const {
    return cells[static_cast<int>(w)][static_cast<int>(s)];
  }
  std::array<std::array<PlantedCell, 2>, 4> cells{};
};

struct SynthAudit {
  std::vector<std::uint8_t> prenatal;  // p_h per record, aligned with table
};

BirthTable generate(const SynthConfig& config, int n_workers = 1);
std::pair<BirthTable, SynthAudit> generate_audited(const SynthConfig& config,
                                                   int n_workers = 1);

PlantedEffects planted_thetas(const SynthConfig& config);

}  // namespace twindecomp

#endif  // TWINDECOMP_SYNTH_HPP
