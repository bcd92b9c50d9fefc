#include "twindecomp/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace twindecomp {

namespace {

bool covariates_complete(const BirthRecord& r) {
  return r.mother_age && r.mother_edu && r.mother_marital && r.father_edu &&
         r.household_size && r.electricity && r.radio && r.tv && r.car;
}

std::vector<std::string> sorted_levels(const std::set<std::string>& levels) {
  return {levels.begin(), levels.end()};
}

}  // namespace

double RegressionFit::coefficient(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return beta[static_cast<Eigen::Index>(i)];
  }
  throw EstimationError("no coefficient named '" + name + "' in fit");
}

double RegressionFit::se(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) {
      auto j = static_cast<Eigen::Index>(i);
      return std::sqrt(vcov(j, j));
    }
  }
  throw EstimationError("no coefficient named '" + name + "' in fit");
}

std::string RegressionFit::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json coef = nlohmann::ordered_json::object();
  nlohmann::ordered_json se_obj = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto k = static_cast<Eigen::Index>(i);
    coef[names[i]] = beta[k];
    double s = std::sqrt(vcov(k, k));
    if (std::isfinite(s)) {
      se_obj[names[i]] = s;
    } else {
      se_obj[names[i]] = nullptr;
    }
  }
  j["coefficients"] = std::move(coef);
  j["se"] = std::move(se_obj);
  j["n_obs"] = n_obs;
  j["n_clusters"] = n_clusters;
  j["window"] = window;
  j["mode"] = mode;
  j["society"] = society;
  j["estimator"] = estimator;
  if (!dropped_constant.empty()) j["dropped_constant"] = dropped_constant;
  return j.dump();
}

DesignMatrix build_design(const Sample& sample, const ModelSpec& spec) {
  if (sample.rows.empty()) {
    throw EstimationError("cannot build a design from an empty sample");
  }
  const BirthTable& table = *sample.table;

  // Rows kept under the missing-covariate policy. Male-only regressions
  // never drop rows.
  std::vector<std::uint32_t> kept;
  kept.reserve(sample.rows.size());
  if (spec.controls == ControlSet::full &&
      spec.missing == MissingPolicy::listwise_drop) {
    for (std::uint32_t i = 0; i < sample.rows.size(); ++i) {
      if (covariates_complete(table.record(sample.rows[i]))) kept.push_back(i);
    }
  } else {
    for (std::uint32_t i = 0; i < sample.rows.size(); ++i) kept.push_back(i);
  }
  if (kept.empty()) {
    throw EstimationError(
        "all rows dropped by the missing-covariate policy; design is empty");
  }

  DesignMatrix design;
  design.rows_dropped_missing = sample.rows.size() - kept.size();
  const auto n = static_cast<Eigen::Index>(kept.size());

  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> columns;
  auto add_column = [&](std::string name, Eigen::VectorXd col) {
    names.push_back(std::move(name));
    columns.push_back(std::move(col));
  };

  add_column("intercept", Eigen::VectorXd::Ones(n));
  {
    Eigen::VectorXd male(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      male[i] =
          table.record(sample.rows[kept[i]]).sex == Sex::male ? 1.0 : 0.0;
    }
    add_column("male", std::move(male));
  }

  if (spec.controls == ControlSet::full) {
    const bool indicator = spec.missing == MissingPolicy::missing_indicator;
    auto record_of = [&](Eigen::Index i) -> const BirthRecord& {
      return table.record(sample.rows[kept[i]]);
    };

    auto add_numeric = [&](const char* name, auto getter) {
      Eigen::VectorXd col(n);
      Eigen::VectorXd miss = Eigen::VectorXd::Zero(n);
      bool any_missing = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        auto value = getter(record_of(i));
        if (value) {
          col[i] = static_cast<double>(*value);
        } else {
          col[i] = 0.0;
          miss[i] = 1.0;
          any_missing = true;
        }
      }
      add_column(name, std::move(col));
      if (indicator && any_missing) {
        add_column(std::string("miss_") + name, std::move(miss));
      }
    };

    auto add_education = [&](const char* prefix, auto getter) {
      Eigen::VectorXd primary = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd secondary = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd miss = Eigen::VectorXd::Zero(n);
      bool any_missing = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        auto value = getter(record_of(i));
        if (!value) {
          miss[i] = 1.0;
          any_missing = true;
          continue;
        }
        if (*value == EducationLevel::primary) primary[i] = 1.0;
        if (*value == EducationLevel::secondary) secondary[i] = 1.0;
      }
      add_column(std::string(prefix) + "_primary", std::move(primary));
      add_column(std::string(prefix) + "_secondary", std::move(secondary));
      if (indicator && any_missing) {
        add_column(std::string("miss_") + prefix, std::move(miss));
      }
    };

    add_numeric("birth_year", [](const BirthRecord& r) {
      return std::optional<int>(r.birth_year);
    });
    add_numeric("mother_age",
                [](const BirthRecord& r) { return r.mother_age; });
    add_education("mother_edu",
                  [](const BirthRecord& r) { return r.mother_edu; });

    // Marital levels come from the data; reference is "married" when present.
    {
      std::set<std::string> level_set;
      bool any_missing = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& m = record_of(i).mother_marital;
        if (m) {
          level_set.insert(*m);
        } else {
          any_missing = true;
        }
      }
      if (indicator && any_missing) level_set.insert("missing");
      auto levels = sorted_levels(level_set);
      std::string reference = "married";
      if (std::find(levels.begin(), levels.end(), reference) == levels.end() &&
          !levels.empty()) {
        reference = levels.front();
      }
      for (const std::string& level : levels) {
        if (level == reference) continue;
        Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto& m = record_of(i).mother_marital;
          const std::string& value = m ? *m : std::string("missing");
          if (value == level) col[i] = 1.0;
        }
        add_column("marital_" + level, std::move(col));
      }
    }

    add_education("father_edu",
                  [](const BirthRecord& r) { return r.father_edu; });
    add_numeric("household_size",
                [](const BirthRecord& r) { return r.household_size; });
    add_numeric("electricity",
                [](const BirthRecord& r) { return r.electricity; });
    add_numeric("radio", [](const BirthRecord& r) { return r.radio; });
    add_numeric("tv", [](const BirthRecord& r) { return r.tv; });
    add_numeric("car", [](const BirthRecord& r) { return r.car; });
    add_numeric("survey_year", [](const BirthRecord& r) {
      return std::optional<int>(r.survey_year);
    });

    // Country fixed effects, reference = first code in sort order.
    {
      std::set<std::string> codes;
      for (Eigen::Index i = 0; i < n; ++i) {
        codes.insert(record_of(i).country_code);
      }
      auto levels = sorted_levels(codes);
      for (std::size_t c = 1; c < levels.size(); ++c) {
        Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (record_of(i).country_code == levels[c]) col[i] = 1.0;
        }
        add_column("country_" + levels[c], std::move(col));
      }
    }
  }

  // Drop zero-variance columns (the intercept stays).
  std::vector<std::size_t> keep_cols;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c == 0 || columns[c].minCoeff() != columns[c].maxCoeff()) {
      keep_cols.push_back(c);
    } else {
      design.dropped_constant.push_back(names[c]);
    }
  }

  design.X.resize(n, static_cast<Eigen::Index>(keep_cols.size()));
  for (std::size_t c = 0; c < keep_cols.size(); ++c) {
    design.X.col(static_cast<Eigen::Index>(c)) = columns[keep_cols[c]];
    design.names.push_back(names[keep_cols[c]]);
  }
  design.y.resize(n);
  design.clusters.reserve(kept.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    design.y[i] = sample.outcomes[kept[i]];
    design.clusters.push_back(sample.clusters[kept[i]]);
  }
  return design;
}

OlsResult fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<std::string>& names) {
  if (X.rows() < X.cols()) {
    throw EstimationError("fewer observations than design columns (" +
                          std::to_string(X.rows()) + " x " +
                          std::to_string(X.cols()) + ")");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) {
    const auto& perm = qr.colsPermutation().indices();
    std::ostringstream msg;
    msg << "design is rank deficient; dependent columns:";
    for (Eigen::Index i = qr.rank(); i < X.cols(); ++i) {
      const auto col = static_cast<std::size_t>(perm[i]);
      msg << ' ' << (col < names.size() ? names[col] : std::to_string(col));
    }
    throw EstimationError(msg.str());
  }
  OlsResult result;
  result.beta = qr.solve(y);
  result.residuals = y - X * result.beta;
  return result;
}

Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& residuals,
                             const std::vector<std::uint32_t>& clusters) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (static_cast<Eigen::Index>(clusters.size()) != n) {
    throw EstimationError("cluster id count does not match row count");
  }

  // Per-cluster scores s_g = X_g' u_g, accumulated in row order; meat
  // summed over clusters in first-appearance order for determinism.
  std::unordered_map<std::uint32_t, Eigen::Index> slot;
  std::vector<Eigen::VectorXd> scores;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [it, inserted] = slot.try_emplace(
        clusters[static_cast<std::size_t>(i)],
        static_cast<Eigen::Index>(scores.size()));
    if (inserted) scores.push_back(Eigen::VectorXd::Zero(k));
    scores[static_cast<std::size_t>(it->second)] +=
        X.row(i).transpose() * residuals[i];
  }
  const auto n_clusters = static_cast<Eigen::Index>(scores.size());
  if (n_clusters < 2) {
    throw EstimationError("cluster-robust covariance needs >= 2 clusters, got " +
                          std::to_string(n_clusters));
  }

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const Eigen::VectorXd& s : scores) meat += s * s.transpose();
  if (meat.isZero(0.0)) return Eigen::MatrixXd::Zero(k, k);
  if (n <= k) {
    throw EstimationError("small-sample correction undefined with n <= k");
  }

  // (X'X)^-1 from the R factor of a Householder QR.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  Eigen::MatrixXd R =
      qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  Eigen::MatrixXd r_inv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd bread = r_inv * r_inv.transpose();

  const double g = static_cast<double>(n_clusters);
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  const double factor = g / (g - 1.0) * (nn - 1.0) / (nn - kk);

  Eigen::MatrixXd vcov = factor * bread * meat * bread;
  return ((vcov + vcov.transpose()) / 2.0).eval();
}

namespace {

std::size_t count_clusters(const std::vector<std::uint32_t>& clusters) {
  std::unordered_set<std::uint32_t> unique(clusters.begin(), clusters.end());
  return unique.size();
}

}  // namespace

RegressionFit fit_lpm(const Sample& sample, const ModelSpec& spec) {
  DesignMatrix design = build_design(sample, spec);
  OlsResult ols = fit_ols(design.X, design.y, design.names);

  RegressionFit fit;
  fit.names = design.names;
  fit.beta = ols.beta;
  fit.vcov = cluster_vcov(design.X, ols.residuals, design.clusters);
  fit.n_obs = static_cast<std::size_t>(design.X.rows());
  fit.n_clusters = count_clusters(design.clusters);
  fit.residuals = ols.residuals;
  fit.dropped_constant = design.dropped_constant;
  fit.window = to_string(sample.window);
  fit.mode = to_string(sample.mode);
  fit.estimator =
      spec.controls == ControlSet::full ? "lpm_controls" : "lpm";
  return fit;
}

RegressionFit fit_twin_fe(const Sample& sample) {
  if (sample.mode != SampleMode::mf_pairs) {
    throw EstimationError("twin fixed effects require an mf_pairs sample");
  }
  if (sample.pair_rows.empty()) {
    throw EstimationError("twin fixed effects: sample contains zero pairs");
  }
  const auto n_pairs = static_cast<Eigen::Index>(sample.pair_rows.size());
  Eigen::VectorXd diffs(n_pairs);
  std::vector<std::uint32_t> pair_clusters;
  pair_clusters.reserve(sample.pair_rows.size());
  for (Eigen::Index j = 0; j < n_pairs; ++j) {
    const auto& [male_pos, female_pos] =
        sample.pair_rows[static_cast<std::size_t>(j)];
    diffs[j] = sample.outcomes[male_pos] - sample.outcomes[female_pos];
    pair_clusters.push_back(sample.clusters[male_pos]);
  }
  const double theta = diffs.mean();

  RegressionFit fit;
  fit.names = {"male"};
  fit.beta = Eigen::VectorXd::Constant(1, theta);
  fit.residuals = diffs.array() - theta;
  fit.n_obs = sample.rows.size();
  fit.n_clusters = count_clusters(pair_clusters);
  fit.window = to_string(sample.window);
  fit.mode = to_string(sample.mode);
  fit.estimator = "twin_fe";
  if (fit.n_clusters >= 2) {
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n_pairs, 1);
    fit.vcov = cluster_vcov(ones, fit.residuals, pair_clusters);
  } else {
    // SE undefined with a single mother cluster.
    fit.vcov = Eigen::MatrixXd::Constant(
        1, 1, std::numeric_limits<double>::quiet_NaN());
  }
  return fit;
}

RegressionFit fit_family_fe(const Sample& sample) {
  if (sample.rows.empty()) {
    throw EstimationError("family fixed effects: empty sample");
  }
  const auto n = static_cast<Eigen::Index>(sample.rows.size());
  const BirthTable& table = *sample.table;

  std::unordered_map<std::uint32_t, std::pair<double, double>> sums;  // y, male
  std::unordered_map<std::uint32_t, double> counts;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const std::uint32_t g = sample.clusters[idx];
    const double male =
        table.record(sample.rows[idx]).sex == Sex::male ? 1.0 : 0.0;
    sums[g].first += sample.outcomes[idx];
    sums[g].second += male;
    counts[g] += 1.0;
  }

  Eigen::MatrixXd x_dm(n, 1);
  Eigen::VectorXd y_dm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const std::uint32_t g = sample.clusters[idx];
    const double male =
        table.record(sample.rows[idx]).sex == Sex::male ? 1.0 : 0.0;
    x_dm(i, 0) = male - sums[g].second / counts[g];
    y_dm[i] = sample.outcomes[idx] - sums[g].first / counts[g];
  }

  const double sxx = x_dm.col(0).squaredNorm();
  if (sxx == 0.0) {
    throw EstimationError(
        "family fixed effects: no within-mother sex variation");
  }
  const double theta = x_dm.col(0).dot(y_dm) / sxx;

  RegressionFit fit;
  fit.names = {"male"};
  fit.beta = Eigen::VectorXd::Constant(1, theta);
  fit.residuals = y_dm - x_dm.col(0) * theta;
  fit.n_obs = sample.rows.size();
  fit.n_clusters = count_clusters(sample.clusters);
  fit.window = to_string(sample.window);
  fit.mode = to_string(sample.mode);
  fit.estimator = "family_fe";
  if (fit.n_clusters >= 2) {
    fit.vcov = cluster_vcov(x_dm, fit.residuals, sample.clusters);
  } else {
    fit.vcov = Eigen::MatrixXd::Constant(
        1, 1, std::numeric_limits<double>::quiet_NaN());
  }
  return fit;
}

}  // namespace twindecomp
