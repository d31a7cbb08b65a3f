#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csteer/activation_set.hpp"
#include "csteer/steering.hpp"
#include "csteer/synth.hpp"

namespace csteer {

/// Everything one seed of one layer needs: training activations per task,
/// held-out source activations, the mean-centering baseline and the
/// centroids used for scoring.
struct TrialData {
  std::map<std::string, ActivationSetd, std::less<>> train;
  Matrixd test;
  std::optional<MeanCenteringContextd> context;
  TaskEnsemble centroids;

  const ActivationSetd& train_set(std::string_view task) const;
  const MeanCenteringContextd& require_context() const;
};

/// Synthetic trial data. Each task, the test set and the baseline draw from
/// their own stream derived from `data_seed`, so the data for one task does
/// not depend on which other tasks are requested.
TrialData make_synthetic_trial_data(const SyntheticTaskSpec& spec, const TaskEnsemble& ensemble,
                                    std::uint64_t data_seed, const std::vector<std::string>& train_tasks,
                                    const std::string& source_task, Index n_train, Index n_test,
                                    Index n_baseline);

/// Single-task mechanism of `kind` trained on `task`. `alpha` is required for
/// conceptor kinds, the context for *_mc kinds.
SteeringMechanismd build_mechanism(const TrialData& data, MechanismKind kind, const std::string& task,
                                   std::optional<double> alpha, double beta);

struct SteeringOutcome {
  double unsteered = 0.0;
  double steered = 0.0;
};

/// Nearest-centroid accuracy of the test rows against `target`, before and after steering.
SteeringOutcome evaluate_steering(const TrialData& data, const SteeringMechanismd& mechanism,
                                  const std::string& target);

double mean_of(std::span<const double> values);
/// Sample standard deviation (n − 1); zero for fewer than two values.
double stddev_of(std::span<const double> values);

}  // namespace csteer
