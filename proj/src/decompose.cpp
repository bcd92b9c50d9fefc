#include "twindecomp/decompose.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "json.hpp"
#include "twindecomp/rng.hpp"

namespace twindecomp {

const std::vector<WindowKind> kAllWindows = {WindowKind::I, WindowKind::NN,
                                             WindowKind::PNN, WindowKind::CH};

const PeriodDecomposition& DecompositionTable::at(WindowKind window) const {
  for (const auto& p : periods) {
    if (p.window == window) return p;
  }
  throw DataError(std::string("decomposition table has no window ") +
                  to_string(window));
}

PeriodDecomposition decompose_period(double theta_nd, double theta_tfe_nd,
                                     double theta_d, double theta_tfe_d,
                                     WindowKind window) {
  for (double v : {theta_nd, theta_tfe_nd, theta_d, theta_tfe_d}) {
    if (!std::isfinite(v)) {
      throw DataError(std::string("non-finite decomposition input for window ") +
                      to_string(window));
    }
  }
  PeriodDecomposition out;
  out.window = window;
  out.theta_nd = theta_nd;
  out.theta_tfe_nd = theta_tfe_nd;
  out.theta_d = theta_d;
  out.theta_tfe_d = theta_tfe_d;
  out.theta1_nd = theta_nd - theta_tfe_nd;
  out.theta2_nd = theta_tfe_nd;
  out.theta3_nd = 0.0;
  out.theta1_d = theta_d - theta_tfe_d;
  out.theta2_d = theta_tfe_nd;
  out.theta3_d = theta_tfe_d - theta_tfe_nd;
  return out;
}

DecompositionTable decompose_all(const FitMap& fits,
                                 const std::vector<WindowKind>& windows) {
  DecompositionTable table;
  table.provenance = "fits";
  for (WindowKind window : windows) {
    auto fetch = [&](Society society, FitRole role) -> const RegressionFit& {
      auto it = fits.find({society, window, role});
      if (it == fits.end()) {
        throw DataError(std::string("missing fit for society=") +
                        to_string(society) + " window=" + to_string(window) +
                        " role=" +
                        (role == FitRole::lpm_controls ? "lpm_controls"
                                                       : "twin_fe"));
      }
      return it->second;
    };
    const double theta_nd = fetch(Society::ND, FitRole::lpm_controls).theta();
    const double tfe_nd = fetch(Society::ND, FitRole::twin_fe).theta();
    const double theta_d = fetch(Society::D, FitRole::lpm_controls).theta();
    const double tfe_d = fetch(Society::D, FitRole::twin_fe).theta();
    table.periods.push_back(
        decompose_period(theta_nd, tfe_nd, theta_d, tfe_d, window));
  }
  return table;
}

DecompositionTable decompose_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("coefficient input is not valid JSON: ") +
                    e.what());
  }
  if (!j.is_object() || j.empty()) {
    throw DataError("coefficient input must be a non-empty JSON object "
                    "keyed by window");
  }
  DecompositionTable table;
  table.provenance = "direct";
  for (WindowKind window : kAllWindows) {
    const char* key = to_string(window);
    if (!j.contains(key)) continue;
    const auto& cell = j[key];
    for (const char* field :
         {"theta_nd", "theta_tfe_nd", "theta_d", "theta_tfe_d"}) {
      if (!cell.contains(field)) {
        throw DataError(std::string("window ") + key + " is missing field '" +
                        field + "'");
      }
    }
    table.periods.push_back(decompose_period(
        cell["theta_nd"].get<double>(), cell["theta_tfe_nd"].get<double>(),
        cell["theta_d"].get<double>(), cell["theta_tfe_d"].get<double>(),
        window));
  }
  if (table.periods.empty()) {
    throw DataError("coefficient input contains no known window keys "
                    "(expected I, NN, PNN, CH)");
  }
  return table;
}

namespace {

struct SocietyFits {
  // lpm theta and twin-FE theta per window, plus the labeled fits.
  std::vector<RegressionFit> fits;
};

void fit_society(const BirthTable& table, Society society,
                 const std::vector<WindowKind>& windows,
                 const PipelineOptions& options, FitMap& fits,
                 std::vector<RegressionFit>& all_fits) {
  auto [pairs, diag] = match_twins(table);
  (void)diag;
  ModelSpec spec;
  spec.controls = options.lpm_controls;
  spec.missing = options.missing;
  for (WindowKind window : windows) {
    const MortalityWindow w = MortalityWindow::for_kind(window);
    Sample all_twins = build_sample(table, pairs, w, SampleMode::all_twins);
    if (all_twins.empty_flag) {
      throw DataError(std::string("empty all_twins sample for society=") +
                      to_string(society) + " window=" + to_string(window));
    }
    RegressionFit lpm = fit_lpm(all_twins, spec);
    lpm.society = to_string(society);
    fits.emplace(FitKey{society, window, FitRole::lpm_controls}, lpm);
    all_fits.push_back(std::move(lpm));

    Sample mf = build_sample(table, pairs, w, SampleMode::mf_pairs);
    RegressionFit tfe = fit_twin_fe(mf);
    tfe.society = to_string(society);
    fits.emplace(FitKey{society, window, FitRole::twin_fe}, tfe);
    all_fits.push_back(std::move(tfe));
  }
}

// Resample mothers with replacement; each draw becomes a fresh cluster.
BirthTable resample_mothers(const BirthTable& table, Rng& rng) {
  std::vector<BirthRecord> records;
  records.reserve(table.size());
  const auto n_mothers = static_cast<int>(table.mother_count());
  for (int draw = 0; draw < n_mothers; ++draw) {
    const auto pick =
        static_cast<std::uint32_t>(rng.uniform_int(0, n_mothers - 1));
    const std::string prefix = "b" + std::to_string(draw) + ":";
    for (std::uint32_t row : table.mother_rows(pick)) {
      BirthRecord r = table.record(row);
      r.mother_id = prefix + r.mother_id;
      r.child_id = prefix + r.child_id;
      records.push_back(std::move(r));
    }
  }
  return BirthTable(std::move(records));
}

}  // namespace

PipelineResult run_pipeline(const BirthTable& table_nd,
                            const BirthTable& table_d,
                            const std::vector<WindowKind>& windows,
                            const PipelineOptions& options) {
  PipelineResult result;
  FitMap fits;
  fit_society(table_nd, Society::ND, windows, options, fits, result.fits);
  fit_society(table_d, Society::D, windows, options, fits, result.fits);
  result.decomposition = decompose_all(fits, windows);
  return result;
}

DecompositionTable bootstrap_decomposition(
    const BirthTable& table_nd, const BirthTable& table_d,
    const std::vector<WindowKind>& windows, std::uint64_t replicates,
    std::uint64_t seed, const PipelineOptions& options, int n_workers) {
  DecompositionTable table =
      run_pipeline(table_nd, table_d, windows, options).decomposition;
  if (replicates == 0) return table;
  if (replicates == 1) {
    throw ConfigError("bootstrap needs 0 or >= 2 replicates");
  }

  // Five SE'd effects per window: theta1_nd, theta2_nd, theta1_d, theta2_d,
  // theta3_d (theta3_nd is identically zero).
  struct Row {
    bool ok = false;
    std::vector<std::array<double, 5>> values;
  };
  std::vector<Row> rows(replicates);

  auto run_replicate = [&](std::uint64_t r) {
    Rng rng_nd(Rng::mix(seed, 2 * r + 1));
    Rng rng_d(Rng::mix(seed, 2 * r + 2));
    try {
      BirthTable nd = resample_mothers(table_nd, rng_nd);
      BirthTable d = resample_mothers(table_d, rng_d);
      DecompositionTable rep =
          run_pipeline(nd, d, windows, options).decomposition;
      Row& row = rows[r];
      row.values.reserve(rep.periods.size());
      for (const auto& p : rep.periods) {
        row.values.push_back(
            {p.theta1_nd, p.theta2_nd, p.theta1_d, p.theta2_d, p.theta3_d});
      }
      row.ok = true;
    } catch (const std::exception&) {
      rows[r].ok = false;  // discarded; counted below
    }
  };

  if (n_workers <= 1) {
    for (std::uint64_t r = 0; r < replicates; ++r) run_replicate(r);
  } else {
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
      while (true) {
        const std::uint64_t r = next.fetch_add(1);
        if (r >= replicates) break;
        run_replicate(r);
      }
    };
    std::vector<std::thread> pool;
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(
        static_cast<std::uint64_t>(n_workers), replicates));
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::uint64_t kept = 0;
  for (const Row& row : rows) {
    if (row.ok) ++kept;
  }
  const std::uint64_t discarded = replicates - kept;
  if (discarded * 5 > replicates) {
    throw DataError("bootstrap discarded " + std::to_string(discarded) +
                    " of " + std::to_string(replicates) +
                    " replicates (> 20%)");
  }
  if (kept < 2) {
    throw DataError("bootstrap kept fewer than 2 replicates");
  }

  for (std::size_t w = 0; w < table.periods.size(); ++w) {
    std::array<double, 5> mean{};
    for (const Row& row : rows) {
      if (!row.ok) continue;
      for (int e = 0; e < 5; ++e) mean[e] += row.values[w][e];
    }
    for (int e = 0; e < 5; ++e) mean[e] /= static_cast<double>(kept);
    std::array<double, 5> ss{};
    for (const Row& row : rows) {
      if (!row.ok) continue;
      for (int e = 0; e < 5; ++e) {
        const double d = row.values[w][e] - mean[e];
        ss[e] += d * d;
      }
    }
    PeriodDecomposition& p = table.periods[w];
    auto se = [&](int e) {
      return std::sqrt(ss[e] / static_cast<double>(kept - 1));
    };
    p.se_theta1_nd = se(0);
    p.se_theta2_nd = se(1);
    p.se_theta1_d = se(2);
    p.se_theta2_d = se(3);
    p.se_theta3_d = se(4);
  }
  table.bootstrap_replicates = replicates;
  table.bootstrap_discarded = discarded;
  return table;
}

}  // namespace twindecomp
