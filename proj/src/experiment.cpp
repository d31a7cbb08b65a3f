#include "csteer/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace csteer {

namespace {

constexpr Arm kAllArms[] = {Arm::none,         Arm::additive,      Arm::additive_mc,  Arm::conceptor,
                            Arm::conceptor_mc, Arm::additive_mean, Arm::conceptor_and};

void require_positive_grid(const std::vector<double>& grid, const char* name) {
  if (grid.empty()) throw ValidationError(std::string(name) + " must not be empty");
  for (double v : grid) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string(name) + " entries must be positive and finite");
    }
  }
}

std::optional<MechanismKind> single_task_kind(Arm arm) {
  switch (arm) {
    case Arm::none: return MechanismKind::none;
    case Arm::additive: return MechanismKind::additive;
    case Arm::additive_mc: return MechanismKind::additive_mc;
    case Arm::conceptor: return MechanismKind::conceptor;
    case Arm::conceptor_mc: return MechanismKind::conceptor_mc;
    default: return std::nullopt;
  }
}

void add_cells(std::vector<GridCell>& out, Arm arm, std::uint64_t layer, const ExperimentConfig& config) {
  if (arm == Arm::none) {
    out.push_back({arm, layer, std::nullopt, 0.0});
  } else if (arm_uses_alpha(arm)) {
    for (double alpha : config.alpha_grid)
      for (double beta : config.beta_c_grid) out.push_back({arm, layer, alpha, beta});
  } else {
    for (double beta : config.beta_add_grid) out.push_back({arm, layer, std::nullopt, beta});
  }
}

std::size_t grid_size(Arm arm, const ExperimentConfig& config) {
  if (arm == Arm::none) return 1;
  if (arm_uses_alpha(arm)) return config.alpha_grid.size() * config.beta_c_grid.size();
  return config.beta_add_grid.size();
}

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads; rethrows the first failure.
template <typename Work>
void parallel_for(std::size_t n, unsigned jobs, Work&& work) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        work(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

struct RunPlan {
  std::vector<GridCell> cells;
  std::vector<std::string> train_tasks;
  std::string train_task;
  std::string task_a, task_b;
  std::string target;
};

GridOutcome run_cells(const ExperimentConfig& config, const ActivationSource& source, const RunPlan& plan,
                      unsigned jobs) {
  std::vector<std::uint64_t> layers;
  for (const auto& cell : plan.cells) {
    if (std::find(layers.begin(), layers.end(), cell.layer) == layers.end()) layers.push_back(cell.layer);
  }
  std::map<std::pair<std::size_t, std::uint64_t>, TrialData> data;
  for (std::size_t k = 0; k < config.n_seeds; ++k) {
    for (auto layer : layers) {
      data.emplace(std::pair{k, layer},
                   source.trial_data(data_seed_for(config.master_seed, k), layer, plan.train_tasks,
                                     config.source_task, config.n_test));
    }
  }

  const std::size_t n_cells = plan.cells.size();
  std::vector<GridCellResult> results(n_cells);
  std::vector<TrialRecord> trials(n_cells * config.n_seeds);
  parallel_for(n_cells, jobs, [&](std::size_t i) {
    const auto& cell = plan.cells[i];
    GridCellResult r{cell.arm, cell.layer, cell.alpha, cell.beta, {}, 0.0, 0.0};
    for (std::size_t k = 0; k < config.n_seeds; ++k) {
      const auto& d = data.at({k, cell.layer});
      const auto outcome = evaluate_cell(d, cell, plan.train_task, plan.task_a, plan.task_b, plan.target);
      r.accuracies.push_back(outcome.steered);
      trials[i * config.n_seeds + k] =
          TrialRecord{cell, k, data_seed_for(config.master_seed, k), outcome.unsteered, outcome.steered};
    }
    r.mean = mean_of(r.accuracies);
    r.stddev = stddev_of(r.accuracies);
    results[i] = std::move(r);
  });
  sort_results(results);
  return {std::move(results), std::move(trials)};
}

}  // namespace

const char* to_string(Arm arm) {
  switch (arm) {
    case Arm::none: return "none";
    case Arm::additive: return "additive";
    case Arm::additive_mc: return "additive_mc";
    case Arm::conceptor: return "conceptor";
    case Arm::conceptor_mc: return "conceptor_mc";
    case Arm::additive_mean: return "additive_mean";
    case Arm::conceptor_and: return "conceptor_and";
  }
  return "unknown";
}

std::optional<Arm> parse_arm(std::string_view name) {
  for (auto arm : kAllArms)
    if (name == to_string(arm)) return arm;
  return std::nullopt;
}

bool arm_uses_alpha(Arm arm) {
  return arm == Arm::conceptor || arm == Arm::conceptor_mc || arm == Arm::conceptor_and;
}

Arm arm_of(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::none: return Arm::none;
    case MechanismKind::additive: return Arm::additive;
    case MechanismKind::additive_mc: return Arm::additive_mc;
    case MechanismKind::conceptor: return Arm::conceptor;
    case MechanismKind::conceptor_mc: return Arm::conceptor_mc;
  }
  return Arm::none;
}

std::uint64_t data_seed_for(std::uint64_t master_seed, std::size_t seed_index) {
  return derive_seed(master_seed, seed_index);
}

void ExperimentConfig::validate() const {
  if (mechanisms.empty()) throw ValidationError("at least one mechanism is required");
  if (layers.empty()) throw ValidationError("at least one layer is required");
  if (n_seeds < 1) throw ValidationError("n_seeds must be >= 1");
  if (n_test < 1) throw ValidationError("n_test must be >= 1");
  bool needs_alpha = false, needs_beta_c = false, needs_beta_add = false;
  for (auto m : mechanisms) {
    needs_alpha |= uses_conceptor(m);
    needs_beta_c |= uses_conceptor(m);
    needs_beta_add |= (m == MechanismKind::additive || m == MechanismKind::additive_mc);
  }
  if (needs_alpha) require_positive_grid(alpha_grid, "alpha_grid");
  if (needs_beta_c) require_positive_grid(beta_c_grid, "beta_c_grid");
  if (needs_beta_add) require_positive_grid(beta_add_grid, "beta_add_grid");
  if (source_task.empty() || target_task.empty()) throw ValidationError("source_task and target_task are required");
  if (const auto* syn = std::get_if<SyntheticSourceConfig>(&source)) {
    syn->spec.validate();
    if (syn->n_tasks < 1 || syn->n_train < 1 || syn->n_baseline < 1) {
      throw ValidationError("synthetic n_tasks, n_train and n_baseline must be >= 1");
    }
  } else {
    const auto& cache = std::get<CacheSourceConfig>(source);
    if (!(cache.train_fraction > 0.0 && cache.train_fraction < 1.0)) {
      throw ValidationError("train_fraction must lie strictly between 0 and 1");
    }
  }
}

// ---------------------------------------------------------------------------

SyntheticSource::SyntheticSource(SyntheticSourceConfig config, TaskEnsemble ensemble)
    : config_(std::move(config)), ensemble_(std::move(ensemble)) {}

SyntheticSource::SyntheticSource(const SyntheticSourceConfig& config)
    : SyntheticSource(config, make_task_ensemble(config.spec, config.n_tasks)) {}

TrialData SyntheticSource::trial_data(std::uint64_t data_seed, std::uint64_t /*layer*/,
                                      const std::vector<std::string>& train_tasks, const std::string& source_task,
                                      Index n_test) const {
  return make_synthetic_trial_data(config_.spec, ensemble_, data_seed, train_tasks, source_task, config_.n_train,
                                   n_test, config_.n_baseline);
}

std::vector<std::string> SyntheticSource::task_labels() const {
  std::vector<std::string> out;
  for (const auto& t : ensemble_.tasks()) out.push_back(t.label);
  return out;
}

CacheSource::CacheSource(const CacheSourceConfig& config) : config_(config) {
  for (const auto& f : config_.files) add(f);
}

std::string CacheSource::add(const std::filesystem::path& raw) {
  const auto path = resolve_cache_path(raw);
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".actcache") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .actcache files in " + path.string());
    std::set<std::string> labels;
    for (const auto& f : files) labels.insert(add(f));
    return labels.size() == 1 ? *labels.begin() : std::string();
  }
  if (!std::filesystem::exists(path, ec)) throw IoError("missing cache file " + path.string());
  auto file = read_cache(path);
  auto key = std::pair{file.manifest.task_label, file.manifest.layer_index};
  if (sets_.contains(key)) {
    throw ValidationError("two cache files for task \"" + key.first + "\" at layer " + std::to_string(key.second));
  }
  sets_.emplace(key, file.activations());
  return key.first;
}

const ActivationSetd& CacheSource::lookup(const std::string& task, std::uint64_t layer) const {
  const auto it = sets_.find({task, layer});
  if (it == sets_.end()) {
    throw ValidationError("no cached activations for task \"" + task + "\" at layer " + std::to_string(layer));
  }
  return it->second;
}

std::vector<std::string> CacheSource::task_labels() const {
  std::set<std::string> labels;
  for (const auto& [key, set] : sets_) {
    if (key.first != config_.baseline_task) labels.insert(key.first);
  }
  return {labels.begin(), labels.end()};
}

TrialData CacheSource::trial_data(std::uint64_t data_seed, std::uint64_t layer,
                                  const std::vector<std::string>& train_tasks, const std::string& source_task,
                                  Index n_test) const {
  struct Split {
    Matrixd train, held_out;
  };
  auto split = [&](const std::string& task) {
    const auto& set = lookup(task, layer);
    Rng rng(derive_seed(data_seed, hash_text("split:" + task)));
    std::vector<Index> order(static_cast<std::size_t>(set.n()));
    std::iota(order.begin(), order.end(), Index{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const Index n_train = std::max<Index>(1, static_cast<Index>(std::floor(config_.train_fraction * set.n())));
    Split s{Matrixd(n_train, set.dim()), Matrixd(set.n() - n_train, set.dim())};
    for (Index i = 0; i < set.n(); ++i) {
      const auto row = set.data().row(order[static_cast<std::size_t>(i)]);
      if (i < n_train) s.train.row(i) = row;
      else s.held_out.row(i - n_train) = row;
    }
    return s;
  };

  TrialData data;
  std::vector<SyntheticTask> centroids;
  for (const auto& task : task_labels()) {
    if (!sets_.contains({task, layer})) continue;
    auto s = split(task);
    centroids.push_back({task, s.train.colwise().mean().transpose(), {}});
    if (std::find(train_tasks.begin(), train_tasks.end(), task) != train_tasks.end()) {
      data.train.insert_or_assign(task, ActivationSetd(s.train));
    }
    if (task == source_task) {
      if (s.held_out.rows() < 1) throw ValidationError("source task \"" + task + "\" has no held-out rows");
      data.test = s.held_out.topRows(std::min(n_test, s.held_out.rows()));
    }
  }
  for (const auto& task : train_tasks) {
    if (!data.train.contains(task)) lookup(task, layer);
  }
  if (data.test.rows() == 0) lookup(source_task, layer);
  if (sets_.contains({config_.baseline_task, layer})) {
    data.context = MeanCenteringContextd::from_baseline(lookup(config_.baseline_task, layer));
  }
  data.centroids = TaskEnsemble(std::move(centroids));
  return data;
}

std::unique_ptr<ActivationSource> make_source(const ExperimentConfig& config) {
  if (const auto* syn = std::get_if<SyntheticSourceConfig>(&config.source)) {
    return std::make_unique<SyntheticSource>(*syn);
  }
  return std::make_unique<CacheSource>(std::get<CacheSourceConfig>(config.source));
}

// ---------------------------------------------------------------------------

std::vector<GridCell> enumerate_cells(const ExperimentConfig& config) {
  std::vector<GridCell> cells;
  for (auto m : config.mechanisms)
    for (auto layer : config.layers) add_cells(cells, arm_of(m), layer, config);
  return cells;
}

std::size_t expected_cell_count(const ExperimentConfig& config) {
  std::size_t total = 0;
  for (auto m : config.mechanisms) total += config.layers.size() * grid_size(arm_of(m), config);
  return total;
}

void sort_results(std::vector<GridCellResult>& results) {
  std::stable_sort(results.begin(), results.end(), [](const GridCellResult& a, const GridCellResult& b) {
    if (a.mechanism != b.mechanism) return a.mechanism < b.mechanism;
    if (a.layer != b.layer) return a.layer < b.layer;
    if (a.mean != b.mean) return a.mean > b.mean;
    if (a.beta != b.beta) return a.beta < b.beta;
    return a.alpha.value_or(0.0) < b.alpha.value_or(0.0);
  });
}

SteeringOutcome evaluate_cell(const TrialData& data, const GridCell& cell, const std::string& train_task,
                              const std::string& task_a, const std::string& task_b, const std::string& target) {
  if (const auto kind = single_task_kind(cell.arm)) {
    return evaluate_steering(data, build_mechanism(data, *kind, train_task, cell.alpha, cell.beta), target);
  }
  if (cell.arm == Arm::additive_mean) {
    const auto v = combine_vectors_mean(build_steering_vector(data.train_set(task_a), task_a),
                                        build_steering_vector(data.train_set(task_b), task_b));
    return evaluate_steering(data, SteeringMechanismd::additive(v, cell.beta), target);
  }
  if (!cell.alpha) throw ValidationError("conceptor_and cells need an aperture");
  const Aperture alpha(*cell.alpha);
  auto combined = conjunction(conceptor_from_activations(data.train_set(task_a), alpha),
                              conceptor_from_activations(data.train_set(task_b), alpha));
  return evaluate_steering(data, SteeringMechanismd::conceptor(std::move(combined), cell.beta), target);
}

GridOutcome grid_search(const ExperimentConfig& config, const ActivationSource& source, unsigned jobs) {
  config.validate();
  RunPlan plan{enumerate_cells(config), {config.target_task}, config.target_task, "", "", config.target_task};
  return run_cells(config, source, plan, jobs);
}

GridOutcome grid_search(const ExperimentConfig& config, unsigned jobs) {
  config.validate();
  const auto source = make_source(config);
  return grid_search(config, *source, jobs);
}

GridCellResult best_cell(const std::vector<GridCellResult>& results, Arm arm) {
  const GridCellResult* best = nullptr;
  for (const auto& r : results) {
    if (r.mechanism != arm) continue;
    if (best == nullptr) {
      best = &r;
      continue;
    }
    const auto key = [](const GridCellResult& c) {
      return std::tuple(-c.mean, c.layer, c.beta, c.alpha.value_or(0.0));
    };
    if (key(r) < key(*best)) best = &r;
  }
  if (best == nullptr) throw ValidationError(std::string("no results for mechanism ") + to_string(arm));
  return *best;
}

CompositeReport composite_experiment(const ExperimentConfig& config, const ActivationSource& source,
                                     const std::string& task_a, const std::string& task_b,
                                     const std::string& compound, unsigned jobs) {
  config.validate();
  require_positive_grid(config.alpha_grid, "alpha_grid");
  require_positive_grid(config.beta_c_grid, "beta_c_grid");
  require_positive_grid(config.beta_add_grid, "beta_add_grid");
  static constexpr Arm kCompared[] = {Arm::conceptor, Arm::additive, Arm::conceptor_and, Arm::additive_mean};

  RunPlan plan;
  for (auto layer : config.layers) {
    add_cells(plan.cells, Arm::none, layer, config);
    for (auto arm : kCompared) add_cells(plan.cells, arm, layer, config);
  }
  plan.train_tasks = {task_a, task_b, compound};
  plan.train_task = compound;
  plan.task_a = task_a;
  plan.task_b = task_b;
  plan.target = compound;
  auto outcome = run_cells(config, source, plan, jobs);

  CompositeReport report{task_a, task_b, compound, {}, std::move(outcome.results), std::move(outcome.trials)};
  for (auto layer : config.layers) {
    std::vector<GridCellResult> at_layer;
    for (const auto& r : report.cells)
      if (r.layer == layer) at_layer.push_back(r);
    const double baseline = best_cell(at_layer, Arm::none).mean;
    for (auto arm : kCompared) {
      const auto best = best_cell(at_layer, arm);
      report.rows.push_back({arm, layer, best.alpha, best.beta, best.mean, best.stddev, baseline});
    }
  }
  return report;
}

}  // namespace csteer
