#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "csteer/cache_io.hpp"
#include "csteer/config.hpp"
#include "csteer/experiment.hpp"
#include "csteer/report.hpp"

namespace fs = std::filesystem;
using namespace csteer;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitInternal = 1;

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  unsigned jobs = 0;
  std::string format = "csv";
  std::optional<std::string> output_dir;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--seed", opts.seed, "Master seed (overrides the config)");
  cmd->add_option("--jobs", opts.jobs, "Worker threads (0 = logical cores)");
  cmd->add_option("--format", opts.format, "Report format printed to stdout: csv, json or markdown");
  cmd->add_option("--output-dir", opts.output_dir, "Directory for summary and trial files (overrides the config)");
}

ReportFormat require_format(const std::string& name) {
  const auto f = parse_report_format(name);
  if (!f) throw UsageError("unknown format \"" + name + "\"; expected csv, json or markdown");
  return *f;
}

void apply_common(ExperimentConfig& config, const CommonOptions& opts) {
  if (opts.seed) config.master_seed = *opts.seed;
  if (opts.output_dir) config.output_dir = *opts.output_dir;
}

void write_outputs(const fs::path& dir, const std::string& summary_name, const std::string& summary,
                   const std::vector<TrialRecord>& trials) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / summary_name, summary);
  write_file_atomic(dir / "trials.jsonl", render_trials_jsonl(trials));
}

int run_grid(const std::string& config_path, const CommonOptions& opts) {
  const auto format = require_format(opts.format);
  auto config = load_config(config_path);
  apply_common(config, opts);
  const auto outcome = grid_search(config, opts.jobs);
  write_outputs(config.output_dir, "summary.csv", render_report(outcome.results, ReportFormat::csv),
                outcome.trials);
  std::cout << render_report(outcome.results, format);
  return kExitOk;
}

bool names_file(const std::string& arg) {
  std::error_code ec;
  return fs::exists(resolve_cache_path(arg), ec);
}

int run_composite(const std::optional<std::string>& config_path, const std::string& a, const std::string& b,
                  const std::string& compound, const CommonOptions& opts) {
  const auto format = require_format(opts.format);
  ExperimentConfig config;
  if (config_path) config = load_config(*config_path);
  apply_common(config, opts);

  const int files = names_file(a) + names_file(b) + names_file(compound);
  if (files != 0 && files != 3) {
    throw UsageError("--a, --b and --compound must all be cache files or all be synthetic task labels");
  }

  CompositeReport report;
  if (files == 3) {
    CacheSourceConfig cache_config;
    if (const auto* c = std::get_if<CacheSourceConfig>(&config.source)) cache_config = *c;
    CacheSource source(cache_config);
    const auto label_a = source.add(a);
    const auto label_b = source.add(b);
    const auto label_c = source.add(compound);
    if (label_a.empty() || label_b.empty() || label_c.empty()) {
      throw UsageError("--a, --b and --compound must each name a single task");
    }
    if (!config_path || std::holds_alternative<SyntheticSourceConfig>(config.source)) {
      config.source = cache_config;
      config.source_task = label_c;
    }
    report = composite_experiment(config, source, label_a, label_b, label_c, opts.jobs);
  } else {
    const auto* syn = std::get_if<SyntheticSourceConfig>(&config.source);
    if (syn == nullptr) throw UsageError("synthetic task labels need a synthetic source");
    auto ensemble = make_task_ensemble(syn->spec, syn->n_tasks);
    if (!ensemble.contains(compound)) ensemble = with_composite_task(syn->spec, ensemble, a, b, compound);
    SyntheticSource source(*syn, std::move(ensemble));
    report = composite_experiment(config, source, a, b, compound, opts.jobs);
  }
  write_outputs(config.output_dir, "composite.csv", render_composite(report, ReportFormat::csv), report.trials);
  std::cout << render_composite(report, format);
  return kExitOk;
}

int run_cache_validate(const std::string& path) {
  const auto report = validate_cache_file(resolve_cache_path(path));
  if (report.ok()) {
    std::cout << path << ": ok\n";
    return kExitOk;
  }
  for (const auto& f : report.findings) std::cout << path << ": " << f.code << ": " << f.message << '\n';
  return kExitValidation;
}

int run_synth_export(const std::string& config_path, const std::string& out_dir, Index n_rows,
                     const std::optional<std::uint64_t>& seed) {
  auto config = load_config(config_path);
  const auto* syn = std::get_if<SyntheticSourceConfig>(&config.source);
  if (syn == nullptr) throw UsageError("synth export needs a synthetic source");
  const auto ensemble = make_task_ensemble(syn->spec, syn->n_tasks);
  const std::uint64_t base = seed.value_or(config.master_seed);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  auto write = [&](const ActivationSetd& set, const std::string& label, std::uint64_t layer) {
    CacheManifest m;
    m.model_id = "synthetic";
    m.layer_index = layer;
    m.task_label = label;
    m.n_prompts = set.n();
    m.dim = set.dim();
    m.dtype = DType::f64;
    m.seed = static_cast<std::int64_t>(base);
    const auto name = label + "_L" + std::to_string(layer) + ".actcache";
    write_cache(fs::path(out_dir) / name, set, m);
    std::cout << (fs::path(out_dir) / name).string() << '\n';
  };
  for (auto layer : config.layers) {
    for (const auto& task : ensemble.tasks()) {
      Rng rng(derive_seed(base, hash_text("export:" + task.label)));
      write(generate_task_activations(syn->spec, ensemble, task.label, n_rows, rng), task.label, layer);
    }
    Rng rng(derive_seed(base, hash_text("export:baseline")));
    write(generate_mixture(syn->spec, ensemble, n_rows, rng), "baseline", layer);
  }
  return kExitOk;
}

int run_mechanism_build(const std::string& cache_path, const std::string& kind_name, std::optional<double> alpha,
                        double beta, const std::optional<std::string>& baseline, const std::string& out) {
  const auto kind = parse_mechanism_kind(kind_name);
  if (!kind || *kind == MechanismKind::none) throw UsageError("unknown mechanism kind \"" + kind_name + "\"");
  const auto file = read_cache(resolve_cache_path(cache_path));
  TrialData data;
  data.train.emplace(file.manifest.task_label, file.activations());
  if (baseline) data.context = MeanCenteringContextd::from_baseline(read_cache(resolve_cache_path(*baseline)).activations());
  const auto mechanism = build_mechanism(data, *kind, file.manifest.task_label, alpha, beta);
  CacheManifest base = file.manifest;
  base.mechanism.reset();
  write_mechanism(out, mechanism, base);
  std::cout << out << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conceptor-based activation steering experiments"};
  app.require_subcommand(1);

  CommonOptions grid_opts;
  std::string grid_config;
  auto* grid = app.add_subcommand("grid", "Grid search over layers, apertures and steering strengths");
  grid->add_option("--config", grid_config, "TOML experiment config")->required();
  add_common(grid, grid_opts);

  CommonOptions comp_opts;
  std::optional<std::string> comp_config;
  std::string comp_a, comp_b, comp_compound;
  auto* composite = app.add_subcommand("composite", "Compare combined mechanisms against the compound task");
  composite->add_option("--a", comp_a, "Cache file or synthetic task label")->required();
  composite->add_option("--b", comp_b, "Cache file or synthetic task label")->required();
  composite->add_option("--compound", comp_compound, "Cache file or synthetic task label")->required();
  composite->add_option("--config", comp_config, "TOML experiment config");
  add_common(composite, comp_opts);

  std::string validate_path;
  auto* cache = app.add_subcommand("cache", "Activation cache utilities");
  cache->require_subcommand(1);
  auto* validate = cache->add_subcommand("validate", "Check a cache file and list every problem");
  validate->add_option("path", validate_path, "Cache file")->required();

  std::string export_config, export_out;
  Index export_rows = 640;
  std::optional<std::uint64_t> export_seed;
  auto* synth = app.add_subcommand("synth", "Synthetic data utilities");
  synth->require_subcommand(1);
  auto* exporter = synth->add_subcommand("export", "Write synthetic tasks and a baseline as cache files");
  exporter->add_option("--config", export_config, "TOML config with a synthetic source")->required();
  exporter->add_option("--out", export_out, "Output directory")->required();
  exporter->add_option("--rows", export_rows, "Rows per file");
  exporter->add_option("--seed", export_seed, "Seed (overrides the config master seed)");

  std::string mech_cache, mech_kind = "conceptor", mech_out;
  std::optional<double> mech_alpha;
  double mech_beta = 1.0;
  std::optional<std::string> mech_baseline;
  auto* mechanism = app.add_subcommand("mechanism", "Steering mechanism files");
  mechanism->require_subcommand(1);
  auto* build = mechanism->add_subcommand("build", "Build a mechanism from a cache file");
  build->add_option("--cache", mech_cache, "Task activations")->required();
  build->add_option("--kind", mech_kind, "additive, additive_mc, conceptor or conceptor_mc");
  build->add_option("--alpha", mech_alpha, "Aperture (conceptor kinds)");
  build->add_option("--beta", mech_beta, "Steering strength");
  build->add_option("--baseline", mech_baseline, "Baseline activations (mean-centered kinds)");
  build->add_option("--out", mech_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*grid) return run_grid(grid_config, grid_opts);
    if (*composite) return run_composite(comp_config, comp_a, comp_b, comp_compound, comp_opts);
    if (*validate) return run_cache_validate(validate_path);
    if (*exporter) return run_synth_export(export_config, export_out, export_rows, export_seed);
    if (*build) return run_mechanism_build(mech_cache, mech_kind, mech_alpha, mech_beta, mech_baseline, mech_out);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitValidation;
}
