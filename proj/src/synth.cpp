#include "csteer/synth.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "csteer/trial.hpp"

namespace csteer {

namespace {

constexpr int kMaxCentroidAttempts = 1000;

void require_nonnegative_finite(double value, const char* name) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ValidationError(std::string(name) + " must be finite and non-negative");
  }
}

Vectord random_direction(Rng& rng, Index d) {
  Vectord v = rng.normal_vector(d);
  return v / v.norm();
}

}  // namespace

void SyntheticTaskSpec::validate() const {
  if (dim < 1) throw ValidationError("synthetic dim must be >= 1");
  if (subspace_rank < 1 || subspace_rank > dim) {
    throw ValidationError("subspace_rank must lie in [1, dim]");
  }
  if (!(centroid_norm > 0.0) || !std::isfinite(centroid_norm)) {
    throw ValidationError("centroid_norm must be positive");
  }
  require_nonnegative_finite(within_task_std, "within_task_std");
  require_nonnegative_finite(noise_std, "noise_std");
  require_nonnegative_finite(shared_offset_norm, "shared_offset_norm");
}

TaskEnsemble::TaskEnsemble(std::vector<SyntheticTask> tasks) : tasks_(std::move(tasks)) {
  std::set<std::string, std::less<>> labels;
  for (const auto& t : tasks_) {
    if (!labels.insert(t.label).second) throw ValidationError("duplicate task label " + t.label);
    if (t.centroid.size() != dim()) throw DimensionError("task " + t.label + " has a different dimension");
    if (t.basis.size() != 0 && t.basis.rows() != dim()) {
      throw DimensionError("task " + t.label + " basis has the wrong row count");
    }
    if (!all_finite(t.centroid)) throw ValidationError("task " + t.label + " centroid is not finite");
  }
}

std::size_t TaskEnsemble::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i].label == label) return i;
  }
  throw ValidationError("unknown task label \"" + std::string(label) + "\"");
}

bool TaskEnsemble::contains(std::string_view label) const {
  for (const auto& t : tasks_)
    if (t.label == label) return true;
  return false;
}

double TaskEnsemble::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tasks_.size(); ++i)
    for (std::size_t j = i + 1; j < tasks_.size(); ++j)
      best = std::min(best, (tasks_[i].centroid - tasks_[j].centroid).norm());
  return best;
}

TaskEnsemble make_task_ensemble(const SyntheticTaskSpec& spec, std::size_t n_tasks) {
  spec.validate();
  if (n_tasks < 1) throw ValidationError("an ensemble needs at least one task");
  Rng rng(spec.seed);
  const Vectord offset = random_direction(rng, spec.dim) * spec.shared_offset_norm;
  const double separation = 4.0 * spec.effective_within_std();
  std::vector<SyntheticTask> tasks;
  for (std::size_t k = 0; k < n_tasks; ++k) {
    Vectord centroid;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxCentroidAttempts && !placed; ++attempt) {
      centroid = offset + random_direction(rng, spec.dim) * spec.centroid_norm;
      placed = true;
      for (const auto& t : tasks) {
        if ((t.centroid - centroid).norm() <= separation) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) {
      throw ValidationError("cannot place " + std::to_string(n_tasks) +
                            " centroids more than 4 within-task deviations apart; raise centroid_norm");
    }
    tasks.push_back({"task" + std::to_string(k), centroid, random_orthonormal(rng, spec.dim, spec.subspace_rank)});
  }
  return TaskEnsemble(std::move(tasks));
}

TaskEnsemble with_composite_task(const SyntheticTaskSpec& spec, const TaskEnsemble& ensemble, std::string_view a,
                                 std::string_view b, std::string label) {
  const auto& ta = ensemble.task(a);
  const auto& tb = ensemble.task(b);
  const Index r = ta.basis.cols();
  const Index from_a = (r + 1) / 2;
  Eigen::MatrixXd mixed(ta.basis.rows(), r);
  mixed.leftCols(from_a) = ta.basis.leftCols(from_a);
  mixed.rightCols(r - from_a) = tb.basis.leftCols(r - from_a);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(mixed);
  Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(mixed.rows(), r);

  auto tasks = ensemble.tasks();
  tasks.push_back({std::move(label), (ta.centroid + tb.centroid) * 0.5, std::move(basis)});
  TaskEnsemble out(std::move(tasks));
  if (out.min_pairwise_distance() <= 4.0 * spec.effective_within_std()) {
    throw ValidationError("composite centroid lies within 4 within-task deviations of another task");
  }
  return out;
}

ActivationSetd generate_task_activations(const SyntheticTaskSpec& spec, const TaskEnsemble& ensemble,
                                         std::string_view label, Index n, Rng& rng) {
  if (n < 1) throw ValidationError("need at least one sample");
  const auto& task = ensemble.task(label);
  const Index d = task.centroid.size();
  const Index r = task.basis.cols();
  const double sigma = spec.effective_within_std();
  const double noise = spec.effective_noise_std();
  Matrixd rows(n, d);
  for (Index i = 0; i < n; ++i) {
    const Vectord latent = rng.normal_vector(r) * sigma;
    const Vectord iso = rng.normal_vector(d) * noise;
    rows.row(i) = (task.centroid + task.basis * latent + iso).transpose();
  }
  return ActivationSetd(std::move(rows));
}

ActivationSetd generate_task_activations(const SyntheticTaskSpec& spec, const TaskEnsemble& ensemble,
                                         std::string_view label, Index n) {
  Rng rng(derive_seed(spec.seed, hash_text(label)));
  return generate_task_activations(spec, ensemble, label, n, rng);
}

ActivationSetd generate_mixture(const SyntheticTaskSpec& spec, const TaskEnsemble& ensemble, Index n, Rng& rng) {
  if (ensemble.empty()) throw ValidationError("mixture needs a non-empty ensemble");
  Matrixd rows(n, ensemble.dim());
  for (Index i = 0; i < n; ++i) {
    const auto& label = ensemble.tasks()[static_cast<std::size_t>(i) % ensemble.size()].label;
    rows.row(i) = generate_task_activations(spec, ensemble, label, 1, rng).data().row(0);
  }
  return ActivationSetd(std::move(rows));
}

std::vector<std::size_t> nearest_centroid_labels(const Matrixd& h, const TaskEnsemble& ensemble) {
  if (ensemble.empty()) throw ValidationError("nearest-centroid evaluation needs a non-empty ensemble");
  if (h.cols() != ensemble.dim()) {
    throw DimensionError("activations have dimension " + std::to_string(h.cols()) + ", centroids " +
                         std::to_string(ensemble.dim()));
  }
  std::vector<std::size_t> out(static_cast<std::size_t>(h.rows()));
  for (Index i = 0; i < h.rows(); ++i) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ensemble.size(); ++k) {
      const double dist = (h.row(i).transpose() - ensemble.tasks()[k].centroid).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

double nearest_centroid_eval(const Matrixd& h, const TaskEnsemble& ensemble, std::string_view true_label) {
  if (ensemble.empty()) throw ValidationError("nearest-centroid evaluation needs a non-empty ensemble");
  const std::size_t truth = ensemble.index_of(true_label);
  if (h.rows() == 0) return 0.0;
  const auto labels = nearest_centroid_labels(h, ensemble);
  std::size_t hits = 0;
  for (auto l : labels) hits += (l == truth);
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double nearest_centroid_eval(const ActivationSetd& h, const TaskEnsemble& ensemble, std::string_view true_label) {
  return nearest_centroid_eval(h.data(), ensemble, true_label);
}

void TrialConfig::validate() const {
  spec.validate();
  if (n_tasks < 1) throw ValidationError("n_tasks must be >= 1");
  if (n_train < 1 || n_test < 1 || n_baseline < 1) throw ValidationError("sample counts must be >= 1");
  if (n_seeds < 1) throw ValidationError("n_seeds must be >= 1");
  if (mechanism != MechanismKind::none && !(beta > 0.0)) throw ValidationError("beta must be positive");
  if (uses_conceptor(mechanism) && !(alpha > 0.0)) throw ValidationError("alpha must be positive");
}

TrialReport run_synthetic_steering_trial(const TrialConfig& config) {
  config.validate();
  const auto ensemble = make_task_ensemble(config.spec, config.n_tasks);
  ensemble.index_of(config.source_task);
  ensemble.index_of(config.target_task);

  TrialReport report;
  std::vector<double> unsteered, steered;
  for (std::size_t k = 0; k < config.n_seeds; ++k) {
    const std::uint64_t data_seed = derive_seed(config.master_seed, k);
    const auto data = make_synthetic_trial_data(config.spec, ensemble, data_seed, {config.target_task},
                                                config.source_task, config.n_train, config.n_test,
                                                config.n_baseline);
    const auto mechanism = build_mechanism(
        data, config.mechanism, config.target_task,
        uses_conceptor(config.mechanism) ? std::optional<double>(config.alpha) : std::nullopt, config.beta);
    const auto outcome = evaluate_steering(data, mechanism, config.target_task);
    report.seeds.push_back({k, data_seed, outcome.unsteered, outcome.steered});
    unsteered.push_back(outcome.unsteered);
    steered.push_back(outcome.steered);
  }
  report.unsteered_mean = mean_of(unsteered);
  report.unsteered_stddev = stddev_of(unsteered);
  report.steered_mean = mean_of(steered);
  report.steered_stddev = stddev_of(steered);
  return report;
}

}  // namespace csteer
