#pragma once

// Synthetic task activations: each task is a centroid plus a low-rank Gaussian
// cloud plus isotropic noise. Centroids are a shared offset (the common bias
// direction every task inherits) plus a task-specific direction.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csteer/activation_set.hpp"
#include "csteer/linalg.hpp"
#include "csteer/random.hpp"
#include "csteer/steering.hpp"

namespace csteer {

/// Standard deviations below this are raised to it.
inline constexpr double kMinSyntheticStd = 1e-12;

struct SyntheticTaskSpec {
  Index dim = 64;
  Index subspace_rank = 4;
  double centroid_norm = 10.0;
  double within_task_std = 1.0;
  double noise_std = 0.1;
  double shared_offset_norm = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  double effective_within_std() const { return std::max(within_task_std, kMinSyntheticStd); }
  double effective_noise_std() const { return std::max(noise_std, kMinSyntheticStd); }
};

struct SyntheticTask {
  std::string label;
  Vectord centroid;
  Eigen::MatrixXd basis;  // d×r, orthonormal columns
};

/// Labelled centroids (and, for generated tasks, their bases). Labels are unique.
class TaskEnsemble {
 public:
  TaskEnsemble() = default;
  explicit TaskEnsemble(std::vector<SyntheticTask> tasks);

  const std::vector<SyntheticTask>& tasks() const { return tasks_; }
  std::size_t size() const { return tasks_.size(); }
  bool empty() const { return tasks_.empty(); }
  Index dim() const { return tasks_.empty() ? 0 : tasks_.front().centroid.size(); }

  /// Throws ValidationError for an unknown label.
  std::size_t index_of(std::string_view label) const;
  bool contains(std::string_view label) const;
  const SyntheticTask& task(std::string_view label) const { return tasks_[index_of(label)]; }

  double min_pairwise_distance() const;

 private:
  std::vector<SyntheticTask> tasks_;
};

/// Tasks "task0" … "task{n-1}" with pairwise centroid distance > 4·within_task_std.
TaskEnsemble make_task_ensemble(const SyntheticTaskSpec& spec, std::size_t n_tasks);

/// Adds a task whose centroid is the midpoint of `a` and `b` and whose basis
/// mixes the leading directions of both.
TaskEnsemble with_composite_task(const SyntheticTaskSpec& spec, const TaskEnsemble& ensemble,
                                 std::string_view a, std::string_view b, std::string label);

/// n rows of centroid + basis·(within_task_std·z_r) + noise_std·z_d.
ActivationSetd generate_task_activations(const SyntheticTaskSpec& spec, const TaskEnsemble& ensemble,
                                         std::string_view label, Index n, Rng& rng);

/// Same, with a stream derived from spec.seed and the label.
ActivationSetd generate_task_activations(const SyntheticTaskSpec& spec, const TaskEnsemble& ensemble,
                                         std::string_view label, Index n);

/// Rows cycling through every task in ensemble order.
ActivationSetd generate_mixture(const SyntheticTaskSpec& spec, const TaskEnsemble& ensemble, Index n, Rng& rng);

/// Index of the nearest centroid for each row; ties go to the lowest index.
std::vector<std::size_t> nearest_centroid_labels(const Matrixd& h, const TaskEnsemble& ensemble);

/// Fraction of rows whose nearest centroid is `true_label`.
double nearest_centroid_eval(const Matrixd& h, const TaskEnsemble& ensemble, std::string_view true_label);
double nearest_centroid_eval(const ActivationSetd& h, const TaskEnsemble& ensemble, std::string_view true_label);

struct TrialConfig {
  SyntheticTaskSpec spec;
  std::size_t n_tasks = 3;
  std::string source_task = "task1";
  std::string target_task = "task0";
  MechanismKind mechanism = MechanismKind::conceptor;
  double alpha = 0.1;
  double beta = 1.0;
  Index n_train = 640;
  Index n_test = 640;
  Index n_baseline = 640;
  std::size_t n_seeds = 5;
  std::uint64_t master_seed = 0;

  void validate() const;
};

struct SeedOutcome {
  std::size_t seed_index = 0;
  std::uint64_t data_seed = 0;
  double unsteered = 0.0;
  double steered = 0.0;
};

struct TrialReport {
  std::vector<SeedOutcome> seeds;
  double unsteered_mean = 0.0;
  double unsteered_stddev = 0.0;
  double steered_mean = 0.0;
  double steered_stddev = 0.0;
};

/// Per seed: build the mechanism from fresh target-task samples, steer fresh
/// source-task samples, and score both arms against the target label.
TrialReport run_synthetic_steering_trial(const TrialConfig& config);

}  // namespace csteer
