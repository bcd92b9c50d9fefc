#include "twindecomp/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "CLI11.hpp"
#include "json.hpp"
#include "twindecomp/decompose.hpp"
#include "twindecomp/report.hpp"
#include "twindecomp/synth.hpp"

namespace twindecomp::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file '" + path.string() + "'");
  out << content;
}

int worker_count(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("TWINDECOMP_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

void write_manifest(const fs::path& path, const std::string& subcommand,
                    ordered_json extra) {
  ordered_json m;
  m["tool"] = "twindecomp";
  m["version"] = kVersion;
  m["subcommand"] = subcommand;
  for (auto& [key, value] : extra.items()) m[key] = std::move(value);
  write_file(path, m.dump(2) + "\n");
}

// Merge one or two birth files, rejecting duplicate child ids and mothers
// that straddle societies.
BirthTable load_births(const std::string& path1, const std::string& path2) {
  BirthTable first = parse_births(path1);
  std::vector<BirthRecord> records(first.records().begin(),
                                   first.records().end());
  if (!path2.empty()) {
    BirthTable second = parse_births(path2);
    records.insert(records.end(), second.records().begin(),
                   second.records().end());
  }
  BirthTable table(std::move(records));
  {
    std::unordered_set<std::string> ids;
    ids.reserve(table.size());
    for (const BirthRecord& r : table.records()) {
      if (!ids.insert(r.child_id).second) {
        throw DataError("duplicate child_id '" + r.child_id +
                        "' across input files");
      }
    }
  }
  for (std::uint32_t m = 0; m < table.mother_count(); ++m) {
    const auto& rows = table.mother_rows(m);
    const Society society = table.record(rows.front()).society;
    for (std::uint32_t row : rows) {
      if (table.record(row).society != society) {
        throw DataError("mother '" + table.mother_id(m) +
                        "' appears in both societies");
      }
    }
  }
  return table;
}

ordered_json diagnostics_json(const MatchDiagnostics& diag) {
  ordered_json j;
  j["pairs_mm"] = diag.pairs_mm;
  j["pairs_ff"] = diag.pairs_ff;
  j["pairs_mf"] = diag.pairs_mf;
  j["matched_individuals"] = diag.matched_individuals();
  j["unmatched_individuals"] = diag.unmatched_individuals;
  j["dropped_individuals"] = diag.dropped_individuals;
  j["dropped_groups"] = diag.dropped_groups;
  j["declared_multiples"] = diag.declared_multiples;
  return j;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 int workers) {
  SynthConfig config = SynthConfig::from_json_file(config_path);
  BirthTable table = generate(config, worker_count(workers));
  write_births(table, out_path);
  const std::string config_text = read_file(config_path);
  ordered_json extra;
  extra["config"] = config_path;
  extra["config_hash"] = fnv1a_hex(config_text);
  extra["seed"] = config.seed;
  extra["records"] = table.size();
  write_manifest(out_path + ".manifest.json", "simulate", std::move(extra));
  return 0;
}

int cmd_analyze(const std::string& births1, const std::string& births2,
                const std::string& out_dir, std::uint64_t bootstrap,
                std::uint64_t seed, int workers) {
  BirthTable table = load_births(births1, births2);
  auto [table_nd, table_d] = split_by_society(table);
  if (table_nd.empty()) throw DataError("no ND-society records in input");
  if (table_d.empty()) throw DataError("no D-society records in input");

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  auto [pairs, diag] = match_twins(table);

  // Column-I/II/III style fits per society and window, plus a singleton
  // baseline where one exists.
  std::vector<RegressionFit> fits;
  FitMap fit_map;
  for (const auto& [society, society_table] :
       {std::pair<Society, const BirthTable*>{Society::ND, &table_nd},
        std::pair<Society, const BirthTable*>{Society::D, &table_d}}) {
    auto [society_pairs, society_diag] = match_twins(*society_table);
    (void)society_diag;
    for (WindowKind kind : kAllWindows) {
      const MortalityWindow window = MortalityWindow::for_kind(kind);
      Sample all_twins =
          build_sample(*society_table, society_pairs, window,
                       SampleMode::all_twins);
      if (all_twins.empty_flag) {
        throw DataError(std::string("empty all_twins sample for society=") +
                        to_string(society) + " window=" + to_string(kind));
      }
      ModelSpec none_spec;
      RegressionFit plain = fit_lpm(all_twins, none_spec);
      plain.society = to_string(society);
      fits.push_back(plain);

      ModelSpec full_spec;
      full_spec.controls = ControlSet::full;
      RegressionFit controls = fit_lpm(all_twins, full_spec);
      controls.society = to_string(society);
      fit_map.emplace(FitKey{society, kind, FitRole::lpm_controls}, controls);
      fits.push_back(std::move(controls));

      Sample mf = build_sample(*society_table, society_pairs, window,
                               SampleMode::mf_pairs);
      RegressionFit tfe = fit_twin_fe(mf);
      tfe.society = to_string(society);
      fit_map.emplace(FitKey{society, kind, FitRole::twin_fe}, tfe);
      fits.push_back(std::move(tfe));

      Sample singles = build_sample(*society_table, society_pairs, window,
                                    SampleMode::singletons);
      if (!singles.empty_flag) {
        try {
          RegressionFit single_fit = fit_lpm(singles, none_spec);
          single_fit.society = to_string(society);
          fits.push_back(std::move(single_fit));
        } catch (const EstimationError&) {
          // Singleton baseline is descriptive only; skip degenerate cells.
        }
      }
    }
  }

  DecompositionTable decomposition;
  if (bootstrap > 0) {
    decomposition =
        bootstrap_decomposition(table_nd, table_d, kAllWindows, bootstrap,
                                seed, PipelineOptions{}, worker_count(workers));
  } else {
    decomposition = decompose_all(fit_map, kAllWindows);
  }

  {
    std::ostringstream out;
    out << "[\n";
    for (std::size_t i = 0; i < fits.size(); ++i) {
      out << fits[i].to_json();
      if (i + 1 < fits.size()) out << ',';
      out << '\n';
    }
    out << "]\n";
    write_file(dir / "fits.json", out.str());
  }

  RenderOptions json_opt{RenderFormat::json, false};
  RenderOptions csv_opt{RenderFormat::csv, false};
  RenderOptions md_opt{RenderFormat::markdown, false};
  write_file(dir / "decomposition.json", render(decomposition, json_opt));
  write_file(dir / "decomposition.csv", render(decomposition, csv_opt));
  write_file(dir / "decomposition.md", render(decomposition, md_opt));

  SexRatioSummary sex_ratio = sex_ratio_table(table, pairs);
  write_file(dir / "sex_ratio.json", render(sex_ratio, json_opt));

  RateTable rates = mortality_rate_table(table, pairs, kAllWindows);
  write_file(dir / "rates.json", render(rates, json_opt));
  write_file(dir / "figure1.csv", figure1_csv(rates));

  CovariateSummary covariates = covariate_summary(table, pairs);
  write_file(dir / "covariates.json", render(covariates, json_opt));

  write_file(dir / "diagnostics.json", diagnostics_json(diag).dump(2) + "\n");

  ordered_json extra;
  extra["births"] = births1;
  extra["births_hash"] = fnv1a_hex(read_file(births1));
  if (!births2.empty()) {
    extra["births2"] = births2;
    extra["births2_hash"] = fnv1a_hex(read_file(births2));
  }
  extra["bootstrap"] = bootstrap;
  extra["seed"] = seed;
  write_manifest(dir / "manifest.json", "analyze", std::move(extra));
  return 0;
}

int cmd_decompose(const std::string& coeffs_path, const std::string& out_path,
                  const std::string& format, bool per_thousand) {
  const std::string text = read_file(coeffs_path);
  DecompositionTable table = decompose_from_json_text(text);
  RenderOptions opt{render_format_from_string(format), per_thousand};
  write_file(out_path, render(table, opt));
  ordered_json extra;
  extra["coeffs"] = coeffs_path;
  extra["coeffs_hash"] = fnv1a_hex(text);
  extra["format"] = format;
  write_manifest(out_path + ".manifest.json", "decompose", std::move(extra));
  return 0;
}

int cmd_report(const std::string& fit_dir, const std::string& what,
               const std::string& format, bool per_thousand,
               const std::string& out_path) {
  const fs::path dir(fit_dir);
  RenderOptions opt{render_format_from_string(format), per_thousand};
  std::string rendered;
  if (what == "decomposition") {
    rendered = render(
        parse_decomposition_json(read_file((dir / "decomposition.json").string())),
        opt);
  } else if (what == "sex_ratio") {
    rendered = render(
        parse_sex_ratio_json(read_file((dir / "sex_ratio.json").string())), opt);
  } else if (what == "rates") {
    rendered = render(
        parse_rate_table_json(read_file((dir / "rates.json").string())), opt);
  } else if (what == "covariates") {
    rendered = render(parse_covariate_summary_json(
                          read_file((dir / "covariates.json").string())),
                      opt);
  } else {
    throw ConfigError("unknown report '" + what +
                      "' (expected decomposition, sex_ratio, rates, "
                      "or covariates)");
  }
  if (out_path.empty()) {
    std::cout << rendered;
  } else {
    write_file(out_path, rendered);
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Twin-based decomposition of sex differences in early-age "
               "mortality"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  int workers = 0;

  auto* simulate = app.add_subcommand(
      "simulate", "Generate a synthetic birth-history CSV from a config");
  simulate->add_option("--config", config_path, "Generator config JSON")
      ->required();
  simulate->add_option("--out", out_path, "Output CSV path")->required();
  simulate->add_option("--workers", workers,
                       "Worker threads (default: TWINDECOMP_WORKERS or 1)");

  std::string births1, births2, an_out;
  std::uint64_t bootstrap = 0;
  std::uint64_t seed = 12345;
  auto* analyze = app.add_subcommand(
      "analyze", "Run the full pipeline over one or two birth files");
  analyze->add_option("--births", births1, "Birth-history CSV")->required();
  analyze->add_option("--births2", births2, "Second birth-history CSV");
  analyze->add_option("--out", an_out, "Output directory")->required();
  analyze->add_option("--bootstrap", bootstrap,
                      "Cluster-bootstrap replicates (0 = none)");
  analyze->add_option("--seed", seed, "Bootstrap seed (default 12345)");
  analyze->add_option("--workers", workers,
                      "Worker threads (default: TWINDECOMP_WORKERS or 1)");

  std::string coeffs_path, format = "json";
  bool per_thousand = false;
  auto* decompose = app.add_subcommand(
      "decompose", "Decompose directly from per-window coefficients");
  decompose->add_option("--coeffs", coeffs_path, "Coefficient JSON")
      ->required();
  decompose->add_option("--out", out_path, "Output path")->required();
  decompose->add_option("--format", format, "csv, json, or markdown");
  decompose->add_flag("--per-thousand", per_thousand,
                      "Render effects per thousand births");

  std::string fit_dir, what = "decomposition", report_out;
  auto* report = app.add_subcommand(
      "report", "Re-render artifacts from an analyze output directory");
  report->add_option("--fit-dir", fit_dir, "analyze output directory")
      ->required();
  report->add_option("--what", what,
                     "decomposition, sex_ratio, rates, or covariates");
  report->add_option("--format", format, "csv, json, or markdown");
  report->add_flag("--per-thousand", per_thousand,
                   "Render effects per thousand births");
  report->add_option("--out", report_out, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) {
      return cmd_simulate(config_path, out_path, workers);
    }
    if (analyze->parsed()) {
      return cmd_analyze(births1, births2, an_out, bootstrap, seed, workers);
    }
    if (decompose->parsed()) {
      return cmd_decompose(coeffs_path, out_path, format, per_thousand);
    }
    if (report->parsed()) {
      return cmd_report(fit_dir, what, format, per_thousand, report_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace twindecomp::cli
