#include "csteer/trial.hpp"

#include <cmath>
#include <numeric>

namespace csteer {

const ActivationSetd& TrialData::train_set(std::string_view task) const {
  const auto it = train.find(task);
  if (it == train.end()) throw ValidationError("no training activations for task \"" + std::string(task) + "\"");
  return it->second;
}

const MeanCenteringContextd& TrialData::require_context() const {
  if (!context) throw UsageError("mean-centered mechanisms need baseline activations");
  return *context;
}

TrialData make_synthetic_trial_data(const SyntheticTaskSpec& spec, const TaskEnsemble& ensemble,
                                    std::uint64_t data_seed, const std::vector<std::string>& train_tasks,
                                    const std::string& source_task, Index n_train, Index n_test,
                                    Index n_baseline) {
  TrialData data;
  for (const auto& task : train_tasks) {
    Rng rng(derive_seed(data_seed, hash_text("train:" + task)));
    data.train.insert_or_assign(task, generate_task_activations(spec, ensemble, task, n_train, rng));
  }
  Rng test_rng(derive_seed(data_seed, hash_text("test:" + source_task)));
  data.test = generate_task_activations(spec, ensemble, source_task, n_test, test_rng).data();
  Rng baseline_rng(derive_seed(data_seed, hash_text("baseline")));
  data.context = MeanCenteringContextd::from_baseline(generate_mixture(spec, ensemble, n_baseline, baseline_rng));
  data.centroids = ensemble;
  return data;
}

SteeringMechanismd build_mechanism(const TrialData& data, MechanismKind kind, const std::string& task,
                                   std::optional<double> alpha, double beta) {
  if (uses_conceptor(kind) && !alpha) throw ValidationError("conceptor mechanisms need an aperture");
  switch (kind) {
    case MechanismKind::none:
      return SteeringMechanismd::none();
    case MechanismKind::additive:
      return SteeringMechanismd::additive(build_steering_vector(data.train_set(task), task), beta);
    case MechanismKind::additive_mc: {
      const auto& ctx = data.require_context();
      auto v = mean_center_vector(build_steering_vector(data.train_set(task), task), ctx);
      return SteeringMechanismd::additive_mc(std::move(v), ctx, beta);
    }
    case MechanismKind::conceptor:
      return SteeringMechanismd::conceptor(conceptor_from_activations(data.train_set(task), Aperture(*alpha)),
                                           beta);
    case MechanismKind::conceptor_mc: {
      const auto& ctx = data.require_context();
      return SteeringMechanismd::conceptor_mc(
          mean_centered_conceptor(data.train_set(task), ctx, Aperture(*alpha)), ctx, beta);
    }
  }
  throw ValidationError("unknown mechanism kind");
}

SteeringOutcome evaluate_steering(const TrialData& data, const SteeringMechanismd& mechanism,
                                  const std::string& target) {
  SteeringOutcome out;
  out.unsteered = nearest_centroid_eval(data.test, data.centroids, target);
  out.steered = nearest_centroid_eval(mechanism.apply_rows(data.test), data.centroids, target);
  return out;
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev_of(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean_of(values);
  double sum = 0.0;
  for (double v : values) sum += (v - m) * (v - m);
  return std::sqrt(sum / static_cast<double>(values.size() - 1));
}

}  // namespace csteer
