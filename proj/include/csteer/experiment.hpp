#pragma once

// Grid search and composite experiments over synthetic or cached activations.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "csteer/cache_io.hpp"
#include "csteer/steering.hpp"
#include "csteer/synth.hpp"
#include "csteer/trial.hpp"

namespace csteer {

/// Experiment arms. The first five are the single-task mechanisms; the last two
/// combine two task mechanisms for composite experiments.
enum class Arm { none, additive, additive_mc, conceptor, conceptor_mc, additive_mean, conceptor_and };

const char* to_string(Arm arm);
std::optional<Arm> parse_arm(std::string_view name);
bool arm_uses_alpha(Arm arm);
Arm arm_of(MechanismKind kind);

struct SyntheticSourceConfig {
  SyntheticTaskSpec spec;
  std::size_t n_tasks = 3;
  Index n_train = 640;
  Index n_baseline = 640;
};

struct CacheSourceConfig {
  std::vector<std::filesystem::path> files;
  std::string baseline_task = "baseline";
  double train_fraction = 0.5;
};

struct ExperimentConfig {
  std::variant<SyntheticSourceConfig, CacheSourceConfig> source;
  std::vector<MechanismKind> mechanisms{MechanismKind::none, MechanismKind::additive, MechanismKind::additive_mc,
                                        MechanismKind::conceptor, MechanismKind::conceptor_mc};
  std::vector<std::uint64_t> layers{0};
  std::vector<double> alpha_grid = default_alpha_grid();
  std::vector<double> beta_c_grid = default_beta_c_grid();
  std::vector<double> beta_add_grid = default_beta_add_grid();
  Index n_test = 1000;
  std::size_t n_seeds = 5;
  std::uint64_t master_seed = 0;
  std::string source_task = "task1";
  std::string target_task = "task0";
  std::filesystem::path output_dir = "results";

  void validate() const;
};

/// One hyperparameter combination. `beta` is 0 for the `none` arm.
struct GridCell {
  Arm arm = Arm::none;
  std::uint64_t layer = 0;
  std::optional<double> alpha;
  double beta = 0.0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct GridCellResult {
  Arm mechanism = Arm::none;
  std::uint64_t layer = 0;
  std::optional<double> alpha;
  double beta = 0.0;
  std::vector<double> accuracies;
  double mean = 0.0;
  double stddev = 0.0;

  friend bool operator==(const GridCellResult&, const GridCellResult&) = default;
};

/// One seed of one cell, as written to the JSON-lines trial log.
struct TrialRecord {
  GridCell cell;
  std::size_t seed_index = 0;
  std::uint64_t data_seed = 0;
  double unsteered = 0.0;
  double steered = 0.0;
};

struct GridOutcome {
  std::vector<GridCellResult> results;  // sorted, see sort_results
  std::vector<TrialRecord> trials;      // cell order, then seed order
};

/// Produces the activations for one (seed, layer).
class ActivationSource {
 public:
  virtual ~ActivationSource() = default;
  virtual TrialData trial_data(std::uint64_t data_seed, std::uint64_t layer,
                               const std::vector<std::string>& train_tasks, const std::string& source_task,
                               Index n_test) const = 0;
  /// Tasks scored by the nearest-centroid oracle.
  virtual std::vector<std::string> task_labels() const = 0;
};

/// Synthetic clouds. Layers carry no structure here: every layer sees the
/// same data for a given seed.
class SyntheticSource final : public ActivationSource {
 public:
  SyntheticSource(SyntheticSourceConfig config, TaskEnsemble ensemble);
  explicit SyntheticSource(const SyntheticSourceConfig& config);

  TrialData trial_data(std::uint64_t data_seed, std::uint64_t layer, const std::vector<std::string>& train_tasks,
                       const std::string& source_task, Index n_test) const override;
  std::vector<std::string> task_labels() const override;
  const TaskEnsemble& ensemble() const { return ensemble_; }

 private:
  SyntheticSourceConfig config_;
  TaskEnsemble ensemble_;
};

/// Cached activations, one file per (task, layer). Rows of every task are
/// shuffled per seed and split into a training part and a held-out part;
/// centroids are the training means of every non-baseline task.
class CacheSource final : public ActivationSource {
 public:
  explicit CacheSource(const CacheSourceConfig& config);

  TrialData trial_data(std::uint64_t data_seed, std::uint64_t layer, const std::vector<std::string>& train_tasks,
                       const std::string& source_task, Index n_test) const override;
  std::vector<std::string> task_labels() const override;

  /// Loads an extra file (or every *.actcache file in a directory) and
  /// returns the task label it carries; empty if a directory holds several.
  std::string add(const std::filesystem::path& path);

 private:
  const ActivationSetd& lookup(const std::string& task, std::uint64_t layer) const;

  CacheSourceConfig config_;
  std::map<std::pair<std::string, std::uint64_t>, ActivationSetd> sets_;
};

std::unique_ptr<ActivationSource> make_source(const ExperimentConfig& config);

/// Every cell implied by the config: per mechanism × layer × its grid.
std::vector<GridCell> enumerate_cells(const ExperimentConfig& config);

/// Cell count from the grid sizes alone.
std::size_t expected_cell_count(const ExperimentConfig& config);

/// Orders by (mechanism, layer, mean descending, beta, alpha).
void sort_results(std::vector<GridCellResult>& results);

/// Evaluates every cell over n_seeds seeds on `jobs` worker threads.
GridOutcome grid_search(const ExperimentConfig& config, const ActivationSource& source, unsigned jobs = 0);
GridOutcome grid_search(const ExperimentConfig& config, unsigned jobs = 0);

/// Highest mean for `arm`; ties go to the lower layer, then beta, then alpha.
GridCellResult best_cell(const std::vector<GridCellResult>& results, Arm arm);

struct CompositeRow {
  Arm mechanism = Arm::none;
  std::uint64_t layer = 0;
  std::optional<double> alpha;
  double beta = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double baseline_mean = 0.0;
};

struct CompositeReport {
  std::string task_a, task_b, compound;
  std::vector<CompositeRow> rows;     // per layer: conceptor, additive, conceptor_and, additive_mean
  std::vector<GridCellResult> cells;  // full grid including the `none` reference
  std::vector<TrialRecord> trials;
};

/// Compares mechanisms trained on the compound task with AND-combined
/// conceptors and mean-combined vectors of the two component tasks, all
/// scored against the compound label.
CompositeReport composite_experiment(const ExperimentConfig& config, const ActivationSource& source,
                                     const std::string& task_a, const std::string& task_b,
                                     const std::string& compound, unsigned jobs = 0);

/// Steers the test rows with one cell's mechanism and scores against `target`.
/// Single-task arms train on `train_task`; combined arms on `task_a`/`task_b`.
SteeringOutcome evaluate_cell(const TrialData& data, const GridCell& cell, const std::string& train_task,
                              const std::string& task_a, const std::string& task_b, const std::string& target);

/// Seed for the data of seed index `k`.
std::uint64_t data_seed_for(std::uint64_t master_seed, std::size_t seed_index);

}  // namespace csteer
