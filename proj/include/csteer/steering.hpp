#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "csteer/activation_set.hpp"
#include "csteer/conceptor.hpp"
#include "csteer/linalg.hpp"

namespace csteer {

template <typename Scalar>
class SteeringVector {
 public:
  SteeringVector(Vector<Scalar> vector, bool mean_centered, std::string task_label)
      : vector_(std::move(vector)), mean_centered_(mean_centered), label_(std::move(task_label)) {
    if (vector_.size() < 1) throw ValidationError("steering vector must have dimension > 0");
    if (!all_finite(vector_)) throw ValidationError("steering vector has non-finite entries");
  }

  const Vector<Scalar>& vector() const { return vector_; }
  Index dim() const { return vector_.size(); }
  bool mean_centered() const { return mean_centered_; }
  const std::string& task_label() const { return label_; }

 private:
  Vector<Scalar> vector_;
  bool mean_centered_;
  std::string label_;
};

/// Baseline mean μ_train and the number of samples it was averaged over.
template <typename Scalar>
class MeanCenteringContext {
 public:
  MeanCenteringContext(Vector<Scalar> mu_train, Index source_count)
      : mu_(std::move(mu_train)), source_count_(source_count) {
    if (mu_.size() < 1) throw ValidationError("mu_train must have dimension > 0");
    if (!all_finite(mu_)) throw ValidationError("mu_train has non-finite entries");
    if (source_count_ < 1) throw ValidationError("mu_train needs at least one source sample");
  }

  static MeanCenteringContext from_baseline(const ActivationSet<Scalar>& baseline) {
    return MeanCenteringContext(baseline.mean(), baseline.n());
  }

  const Vector<Scalar>& mu_train() const { return mu_; }
  Index source_count() const { return source_count_; }
  Index dim() const { return mu_.size(); }

 private:
  Vector<Scalar> mu_;
  Index source_count_;
};

using SteeringVectord = SteeringVector<double>;
using MeanCenteringContextd = MeanCenteringContext<double>;

namespace detail {

inline void require_dim(Index got, Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(got) + " does not match " +
                         std::to_string(want));
  }
}

template <typename Scalar>
void require_positive_beta(Scalar beta) {
  if (!(beta > Scalar(0)) || !std::isfinite(beta)) {
    throw DomainError("steering coefficient must be positive and finite, got " +
                      std::to_string(double(beta)));
  }
}

}  // namespace detail

/// Column-wise mean of the task activations.
template <typename Scalar>
SteeringVector<Scalar> build_steering_vector(const ActivationSet<Scalar>& x, std::string label) {
  return SteeringVector<Scalar>(x.mean(), false, std::move(label));
}

template <typename Scalar>
SteeringVector<Scalar> mean_center_vector(const SteeringVector<Scalar>& v,
                                          const MeanCenteringContext<Scalar>& ctx) {
  if (v.mean_centered()) throw UsageError("steering vector is already mean-centered");
  detail::require_dim(ctx.dim(), v.dim(), "mean_center_vector");
  return SteeringVector<Scalar>(v.vector() - ctx.mu_train(), true, v.task_label());
}

/// h' = β·v + h.
template <typename Scalar>
Vector<Scalar> additive_steer(const Vector<Scalar>& h, const SteeringVector<Scalar>& v, Scalar beta) {
  detail::require_dim(h.size(), v.dim(), "additive_steer");
  detail::require_positive_beta(beta);
  return beta * v.vector() + h;
}

/// h' = β·C h. Replaces the activation; there is no residual term.
template <typename Scalar>
Vector<Scalar> conceptor_steer(const Vector<Scalar>& h, const Conceptor<Scalar>& c, Scalar beta) {
  detail::require_dim(h.size(), c.dim(), "conceptor_steer");
  detail::require_positive_beta(beta);
  const Vector<Scalar> projected = c.matrix() * h;
  return beta * projected;
}

/// Conceptor of the rows of X shifted by −μ_train.
template <typename Scalar>
Conceptor<Scalar> mean_centered_conceptor(const ActivationSet<Scalar>& x,
                                          const MeanCenteringContext<Scalar>& ctx, const Aperture& alpha) {
  detail::require_dim(ctx.dim(), x.dim(), "mean_centered_conceptor");
  return conceptor_from_correlation(correlation_matrix(x.centered(ctx.mu_train())), alpha,
                                    ConceptorOrigin::mean_centered);
}

/// h' = β·C_mc (h − μ) + μ.
template <typename Scalar>
Vector<Scalar> mean_centered_conceptor_steer(const Vector<Scalar>& h, const Conceptor<Scalar>& c_mc,
                                             const MeanCenteringContext<Scalar>& ctx, Scalar beta) {
  if (!c_mc.mean_centered()) {
    throw UsageError("mean-centered steering needs a conceptor built from mean-centered data");
  }
  detail::require_dim(h.size(), c_mc.dim(), "mean_centered_conceptor_steer");
  detail::require_dim(ctx.dim(), c_mc.dim(), "mean_centered_conceptor_steer");
  detail::require_positive_beta(beta);
  const Vector<Scalar> shifted = h - ctx.mu_train();
  const Vector<Scalar> projected = c_mc.matrix() * shifted;
  return beta * projected + ctx.mu_train();
}

/// ½(v1 + v2), labelled "a+b".
template <typename Scalar>
SteeringVector<Scalar> combine_vectors_mean(const SteeringVector<Scalar>& v1,
                                            const SteeringVector<Scalar>& v2) {
  detail::require_dim(v2.dim(), v1.dim(), "combine_vectors_mean");
  if (v1.mean_centered() != v2.mean_centered()) {
    throw UsageError("cannot average a mean-centered and a raw steering vector");
  }
  return SteeringVector<Scalar>((v1.vector() + v2.vector()) * Scalar(0.5), v1.mean_centered(),
                                v1.task_label() + "+" + v2.task_label());
}

/// W·C, so that (W·C) h = W (C h).
template <typename Scalar>
Matrix<Scalar> fuse_conceptor(const Matrix<Scalar>& w, const Conceptor<Scalar>& c) {
  detail::require_dim(w.cols(), c.dim(), "fuse_conceptor");
  return w * c.matrix();
}

enum class MechanismKind { none, additive, additive_mc, conceptor, conceptor_mc };

inline const char* to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::none: return "none";
    case MechanismKind::additive: return "additive";
    case MechanismKind::additive_mc: return "additive_mc";
    case MechanismKind::conceptor: return "conceptor";
    case MechanismKind::conceptor_mc: return "conceptor_mc";
  }
  return "unknown";
}

inline bool uses_conceptor(MechanismKind k) {
  return k == MechanismKind::conceptor || k == MechanismKind::conceptor_mc;
}
inline bool uses_context(MechanismKind k) {
  return k == MechanismKind::additive_mc || k == MechanismKind::conceptor_mc;
}

/// One intervention: kind, scaling coefficient and payload.
template <typename Scalar>
class SteeringMechanism {
 public:
  using Payload = std::variant<std::monostate, SteeringVector<Scalar>, Conceptor<Scalar>>;

  static SteeringMechanism none() { return SteeringMechanism(MechanismKind::none, Scalar(0), {}, {}); }

  static SteeringMechanism additive(SteeringVector<Scalar> v, Scalar beta) {
    if (v.mean_centered()) throw UsageError("plain additive steering needs a raw steering vector");
    detail::require_positive_beta(beta);
    return SteeringMechanism(MechanismKind::additive, beta, std::move(v), {});
  }

  /// `v` must already be mean-centered with `ctx`.
  static SteeringMechanism additive_mc(SteeringVector<Scalar> v, MeanCenteringContext<Scalar> ctx,
                                       Scalar beta) {
    if (!v.mean_centered()) throw UsageError("additive_mc steering needs a mean-centered vector");
    detail::require_dim(ctx.dim(), v.dim(), "additive_mc");
    detail::require_positive_beta(beta);
    return SteeringMechanism(MechanismKind::additive_mc, beta, std::move(v), std::move(ctx));
  }

  static SteeringMechanism conceptor(Conceptor<Scalar> c, Scalar beta) {
    detail::require_positive_beta(beta);
    return SteeringMechanism(MechanismKind::conceptor, beta, std::move(c), {});
  }

  static SteeringMechanism conceptor_mc(Conceptor<Scalar> c, MeanCenteringContext<Scalar> ctx, Scalar beta) {
    if (!c.mean_centered()) throw UsageError("conceptor_mc steering needs a mean-centered conceptor");
    detail::require_dim(ctx.dim(), c.dim(), "conceptor_mc");
    detail::require_positive_beta(beta);
    return SteeringMechanism(MechanismKind::conceptor_mc, beta, std::move(c), std::move(ctx));
  }

  MechanismKind kind() const { return kind_; }
  Scalar beta() const { return beta_; }
  const Payload& payload() const { return payload_; }
  const std::optional<MeanCenteringContext<Scalar>>& context() const { return context_; }

  Vector<Scalar> apply(const Vector<Scalar>& h) const {
    switch (kind_) {
      case MechanismKind::none:
        return h;
      case MechanismKind::additive:
      case MechanismKind::additive_mc:
        return additive_steer(h, std::get<SteeringVector<Scalar>>(payload_), beta_);
      case MechanismKind::conceptor:
        return conceptor_steer(h, std::get<Conceptor<Scalar>>(payload_), beta_);
      case MechanismKind::conceptor_mc:
        return mean_centered_conceptor_steer(h, std::get<Conceptor<Scalar>>(payload_), *context_, beta_);
    }
    return h;
  }

  /// Applies the mechanism to every row of `h`.
  Matrix<Scalar> apply_rows(const Matrix<Scalar>& h) const {
    switch (kind_) {
      case MechanismKind::none:
        return h;
      case MechanismKind::additive:
      case MechanismKind::additive_mc: {
        const auto& v = std::get<SteeringVector<Scalar>>(payload_);
        detail::require_dim(h.cols(), v.dim(), "apply_rows");
        return h.rowwise() + (beta_ * v.vector()).transpose();
      }
      case MechanismKind::conceptor: {
        const auto& c = std::get<Conceptor<Scalar>>(payload_);
        detail::require_dim(h.cols(), c.dim(), "apply_rows");
        Matrix<Scalar> projected = h * c.matrix().transpose();
        return beta_ * projected;
      }
      case MechanismKind::conceptor_mc: {
        const auto& c = std::get<Conceptor<Scalar>>(payload_);
        detail::require_dim(h.cols(), c.dim(), "apply_rows");
        const auto mu = context_->mu_train().transpose();
        Matrix<Scalar> projected = (h.rowwise() - mu) * c.matrix().transpose();
        return (beta_ * projected).rowwise() + mu;
      }
    }
    return h;
  }

 private:
  SteeringMechanism(MechanismKind kind, Scalar beta, Payload payload,
                    std::optional<MeanCenteringContext<Scalar>> context)
      : kind_(kind), beta_(beta), payload_(std::move(payload)), context_(std::move(context)) {}

  MechanismKind kind_;
  Scalar beta_;
  Payload payload_;
  std::optional<MeanCenteringContext<Scalar>> context_;
};

using SteeringMechanismd = SteeringMechanism<double>;

inline std::optional<MechanismKind> parse_mechanism_kind(std::string_view name) {
  for (auto k : {MechanismKind::none, MechanismKind::additive, MechanismKind::additive_mc,
                 MechanismKind::conceptor, MechanismKind::conceptor_mc}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

/// Default hyperparameter grids for the grid search.
inline const std::vector<double>& default_alpha_grid() {
  static const std::vector<double> grid{0.001, 0.0125, 0.05, 0.1};
  return grid;
}
inline const std::vector<double>& default_beta_c_grid() {
  static const std::vector<double> grid{0.5, 1.0, 2.0, 3.0, 4.0, 5.0};
  return grid;
}
inline const std::vector<double>& default_beta_add_grid() {
  static const std::vector<double> grid{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};
  return grid;
}

}  // namespace csteer
