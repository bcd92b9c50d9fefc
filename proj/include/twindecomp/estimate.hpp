#ifndef TWINDECOMP_ESTIMATE_HPP
#define TWINDECOMP_ESTIMATE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "twindecomp/ingest.hpp"

namespace twindecomp {

enum class ControlSet : std::uint8_t { none, full };
enum class MissingPolicy : std::uint8_t { listwise_drop, missing_indicator };

// Regression specification. The full control set mirrors the standard
// covariate list: child's birth year, mother age, mother education dummies,
// marital-status dummies, father education dummies, household size, asset
// dummies, a linear survey-year term and country fixed effects. Reference
// categories: education = none, marital = married (first sorted level when
// married is absent), country = first code in sort order.
struct ModelSpec {
  ControlSet controls = ControlSet::none;
  MissingPolicy missing = MissingPolicy::listwise_drop;
};

struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::uint32_t> clusters;
  std::vector<std::string> names;          // aligned with X columns
  std::vector<std::string> dropped_constant;  // zero-variance columns removed
  std::size_t rows_dropped_missing = 0;
};

struct OlsResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
};

struct RegressionFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;  // cluster-robust, symmetric PSD
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  Eigen::VectorXd residuals;
  std::vector<std::string> dropped_constant;

  // Context labels used for serialization and pipeline bookkeeping.
  std::string window;
  std::string mode;
  std::string society;
  std::string estimator;

  double coefficient(const std::string& name) const;
  double se(const std::string& name) const;
  // Male-female mortality difference (the coefficient on the male dummy).
  double theta() const { return coefficient("male"); }
  double theta_se() const { return se("male"); }

  std::string to_json() const;
};

// Intercept + male dummy, plus the encoded control set. One-hot columns drop
// their reference category; zero-variance columns are removed and recorded.
// With ControlSet::none no covariate is consulted and no row is ever dropped.
DesignMatrix build_design(const Sample& sample, const ModelSpec& spec);

// Least squares via column-pivoted Householder QR. Rank deficiency is an
// error naming the dependent columns, never a silent repair.
OlsResult fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<std::string>& names);

// Sandwich covariance with clusters g: (X'X)^-1 (sum_g s_g s_g') (X'X)^-1,
// s_g = X_g' u_g, scaled by the small-sample factor
// G/(G-1) * (N-1)/(N-K). Requires at least two clusters.
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& residuals,
                             const std::vector<std::uint32_t>& clusters);

// Cross-sectional linear probability model on any sample.
RegressionFit fit_lpm(const Sample& sample, const ModelSpec& spec);

// Within-pair estimator on an mf_pairs sample: the mean over pairs of
// (male outcome - female outcome), with mother-clustered SEs on the pair
// differences. Numerically identical to the male coefficient of a
// pair-fixed-effect LPM over all complete twin pairs.
RegressionFit fit_twin_fe(const Sample& sample);

// Within-mother estimator: demeans outcome and male dummy inside each
// mother's eligible children, then OLS on the demeaned data. Absorbs
// mother-constant unobservables; delivery-specific prenatal factors remain.
RegressionFit fit_family_fe(const Sample& sample);

}  // namespace twindecomp

#endif  // TWINDECOMP_ESTIMATE_HPP
