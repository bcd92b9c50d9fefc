#ifndef TWINDECOMP_DECOMPOSE_HPP
#define TWINDECOMP_DECOMPOSE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twindecomp/estimate.hpp"

namespace twindecomp {

// One window's gap decomposition. theta1 = prenatal environment, theta2 =
// child biology, theta3 = parental preferences:
//   theta1 = theta - theta_tfe        (per society)
//   theta2 = theta_tfe of ND          (both societies)
//   theta3 = 0 in ND; theta_tfe_d - theta_tfe_nd in D
struct PeriodDecomposition {
  WindowKind window = WindowKind::I;
  double theta_nd = 0.0;
  double theta_tfe_nd = 0.0;
  double theta_d = 0.0;
  double theta_tfe_d = 0.0;
  double theta1_nd = 0.0;
  double theta2_nd = 0.0;
  double theta3_nd = 0.0;
  double theta1_d = 0.0;
  double theta2_d = 0.0;
  double theta3_d = 0.0;
  std::optional<double> se_theta1_nd;
  std::optional<double> se_theta2_nd;
  std::optional<double> se_theta1_d;
  std::optional<double> se_theta2_d;
  std::optional<double> se_theta3_d;
};

struct DecompositionTable {
  std::vector<PeriodDecomposition> periods;
  std::string provenance;
  std::uint64_t bootstrap_replicates = 0;
  std::uint64_t bootstrap_discarded = 0;

  const PeriodDecomposition& at(WindowKind window) const;
};

enum class FitRole : std::uint8_t { lpm_controls, twin_fe };

using FitKey = std::tuple<Society, WindowKind, FitRole>;
using FitMap = std::map<FitKey, RegressionFit>;

PeriodDecomposition decompose_period(double theta_nd, double theta_tfe_nd,
                                     double theta_d, double theta_tfe_d,
                                     WindowKind window);

// Requires, for every requested window, the four fits (ND/D x controls-LPM /
// twin-FE). A missing fit is an error naming the cell.
DecompositionTable decompose_all(const FitMap& fits,
                                 const std::vector<WindowKind>& windows);

// Direct-coefficient mode: JSON {"I": {"theta_nd": .., "theta_tfe_nd": ..,
// "theta_d": .., "theta_tfe_d": ..}, ...}. Windows are taken from the keys.
DecompositionTable decompose_from_json_text(const std::string& text);

struct PipelineOptions {
  ControlSet lpm_controls = ControlSet::full;
  MissingPolicy missing = MissingPolicy::listwise_drop;
};

struct PipelineResult {
  DecompositionTable decomposition;
  std::vector<RegressionFit> fits;
};

// match -> samples -> fits -> decomposition over two society tables.
PipelineResult run_pipeline(const BirthTable& table_nd,
                            const BirthTable& table_d,
                            const std::vector<WindowKind>& windows,
                            const PipelineOptions& options = {});

// Cluster bootstrap: resamples mothers with replacement independently within
// each society, reruns the full pipeline per replicate, and attaches the
// across-replicate SD as the SE of every decomposed effect. B = 0 returns
// point estimates only. Replicates whose pipeline has an empty required cell
// are discarded and counted; more than 20% discarded is an error. Replicate
// RNG streams derive from (seed, replicate index), so results do not depend
// on the worker count.
DecompositionTable bootstrap_decomposition(
    const BirthTable& table_nd, const BirthTable& table_d,
    const std::vector<WindowKind>& windows, std::uint64_t replicates,
    std::uint64_t seed, const PipelineOptions& options = {},
    int n_workers = 1);

extern const std::vector<WindowKind> kAllWindows;  // I, NN, PNN, CH

}  // namespace twindecomp

#endif  // TWINDECOMP_DECOMPOSE_HPP
