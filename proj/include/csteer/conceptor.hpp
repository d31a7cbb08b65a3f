#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "csteer/activation_set.hpp"
#include "csteer/linalg.hpp"

namespace csteer {

/// Symmetric PSD matrix XᵀX/n together with the sample count it came from.
template <typename Scalar>
class CorrelationMatrix {
 public:
  CorrelationMatrix(Matrix<Scalar> data, Index n_source)
      : data_(std::move(data)), n_source_(n_source) {
    using Tol = Tolerance<Scalar>;
    if (data_.rows() != data_.cols() || data_.rows() < 1) {
      throw DimensionError("correlation matrix must be square and non-empty");
    }
    if (n_source_ < 1) throw ValidationError("correlation matrix needs n_source >= 1");
    if (!all_finite(data_)) throw ValidationError("correlation matrix has non-finite entries");
    if (relative_asymmetry(data_) > Tol::symmetry) {
      throw ValidationError("correlation matrix is not symmetric");
    }
    const Vector<Scalar> ev = symmetric_eigenvalues(data_);
    const Scalar largest = std::max(ev.maxCoeff(), Scalar(0));
    if (ev.minCoeff() < -Tol::spectrum * largest) {
      throw ValidationError("correlation matrix is not positive semi-definite (smallest eigenvalue " +
                            std::to_string(double(ev.minCoeff())) + ")");
    }
  }

  const Matrix<Scalar>& data() const { return data_; }
  Index n_source() const { return n_source_; }
  Index dim() const { return data_.rows(); }

 private:
  Matrix<Scalar> data_;
  Index n_source_;
};

/// Positive finite aperture α. The regularizer in the closed form is α⁻².
class Aperture {
 public:
  explicit Aperture(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      throw DomainError("aperture must be positive and finite, got " + std::to_string(alpha));
    }
  }
  double value() const { return alpha_; }
  double inverse_square() const { return 1.0 / (alpha_ * alpha_); }

  friend bool operator==(const Aperture&, const Aperture&) = default;

 private:
  double alpha_;
};

enum class ApertureLimit { zero, infinity };

enum class ConceptorOrigin { correlation, mean_centered, disjunction, conjunction, negation, limit };

inline const char* to_string(ConceptorOrigin origin) {
  switch (origin) {
    case ConceptorOrigin::correlation: return "correlation";
    case ConceptorOrigin::mean_centered: return "mean_centered";
    case ConceptorOrigin::disjunction: return "or";
    case ConceptorOrigin::conjunction: return "and";
    case ConceptorOrigin::negation: return "not";
    case ConceptorOrigin::limit: return "limit";
  }
  return "unknown";
}

/// How a conceptor was built. Boolean results keep the apertures of their
/// leaves; `centered` is set when every leaf was built from mean-centered data.
struct Provenance {
  ConceptorOrigin origin = ConceptorOrigin::correlation;
  bool centered = false;
  std::vector<double> operand_apertures;
};

/// Symmetric d×d matrix with spectrum in [0, 1]. Immutable.
template <typename Scalar>
class Conceptor {
 public:
  /// Validates symmetry and the spectrum bound.
  static Conceptor from_matrix(Matrix<Scalar> m, Provenance provenance,
                               std::optional<Aperture> aperture = std::nullopt) {
    using Tol = Tolerance<Scalar>;
    if (m.rows() != m.cols() || m.rows() < 1) {
      throw DimensionError("conceptor must be square and non-empty");
    }
    if (!all_finite(m)) throw ValidationError("conceptor has non-finite entries");
    if (relative_asymmetry(m) > Tol::symmetry) throw ValidationError("conceptor is not symmetric");
    const Vector<Scalar> ev = symmetric_eigenvalues(m);
    if (ev.minCoeff() < -Tol::spectrum || ev.maxCoeff() > Scalar(1) + Tol::spectrum) {
      throw ValidationError("conceptor spectrum [" + std::to_string(double(ev.minCoeff())) + ", " +
                            std::to_string(double(ev.maxCoeff())) + "] leaves [0, 1]");
    }
    return Conceptor(std::move(m), aperture, std::move(provenance));
  }

  const Matrix<Scalar>& matrix() const { return matrix_; }
  Index dim() const { return matrix_.rows(); }
  const std::optional<Aperture>& aperture() const { return aperture_; }
  const Provenance& provenance() const { return provenance_; }
  bool mean_centered() const { return provenance_.centered; }

  Vector<Scalar> eigenvalues() const { return symmetric_eigenvalues(matrix_); }

  /// Apertures of every leaf that went into this conceptor.
  std::vector<double> leaf_apertures() const {
    if (aperture_ && provenance_.operand_apertures.empty()) return {aperture_->value()};
    return provenance_.operand_apertures;
  }

  template <typename Other>
  Conceptor<Other> cast() const {
    return Conceptor<Other>::from_matrix(matrix_.template cast<Other>(), provenance_, aperture_);
  }

 private:
  Conceptor(Matrix<Scalar> m, std::optional<Aperture> aperture, Provenance provenance)
      : matrix_(std::move(m)), aperture_(aperture), provenance_(std::move(provenance)) {}

  Matrix<Scalar> matrix_;
  std::optional<Aperture> aperture_;
  Provenance provenance_;
};

using CorrelationMatrixd = CorrelationMatrix<double>;
using Conceptord = Conceptor<double>;

/// R = XᵀX / n.
template <typename Scalar>
CorrelationMatrix<Scalar> correlation_matrix(const ActivationSet<Scalar>& x) {
  using ColMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  ColMajor lower = ColMajor::Zero(x.dim(), x.dim());
  lower.template selfadjointView<Eigen::Lower>().rankUpdate(x.data().transpose());
  Matrix<Scalar> full = lower.template selfadjointView<Eigen::Lower>();
  full /= Scalar(x.n());
  return CorrelationMatrix<Scalar>(std::move(full), x.n());
}

/// μ = λ / (λ + α⁻²).
template <typename Scalar>
Scalar spectrum_map(Scalar lambda, const Aperture& alpha) {
  if (!(lambda >= Scalar(0))) throw DomainError("spectrum_map needs lambda >= 0");
  if (lambda == Scalar(0)) return Scalar(0);
  return lambda / (lambda + Scalar(alpha.inverse_square()));
}

/// Limit values of the spectrum map. At α→0 only λ = 1 survives; at α→∞
/// everything but λ = 0 maps to 1.
template <typename Scalar>
Scalar spectrum_map(Scalar lambda, ApertureLimit limit) {
  if (!(lambda >= Scalar(0))) throw DomainError("spectrum_map needs lambda >= 0");
  if (limit == ApertureLimit::zero) return lambda == Scalar(1) ? Scalar(1) : Scalar(0);
  return lambda == Scalar(0) ? Scalar(0) : Scalar(1);
}

/// C(R, α) = R (R + α⁻² I)⁻¹, evaluated in R's eigenbasis. `origin` is
/// correlation or mean_centered.
template <typename Scalar>
Conceptor<Scalar> conceptor_from_correlation(const CorrelationMatrix<Scalar>& r, const Aperture& alpha,
                                             ConceptorOrigin origin = ConceptorOrigin::correlation) {
  if (origin != ConceptorOrigin::correlation && origin != ConceptorOrigin::mean_centered) {
    throw UsageError("closed-form conceptors are either plain or mean-centered");
  }
  const auto eig = symmetric_eigen(r.data());
  const Vector<Scalar> lambda = eig.values.cwiseMax(Scalar(0));
  const Scalar reg = Scalar(alpha.inverse_square());
  const Scalar largest = lambda.maxCoeff();
  const Scalar smallest = lambda.minCoeff();
  const Scalar condition = (largest + reg) / (smallest + reg);
  if (!(condition <= Scalar(1) / std::numeric_limits<Scalar>::epsilon())) {
    throw NumericalError("R + alpha^-2 I is numerically singular (condition " +
                         std::to_string(double(condition)) + ")");
  }
  Vector<Scalar> mu(lambda.size());
  for (Index i = 0; i < lambda.size(); ++i) mu(i) = spectrum_map(lambda(i), alpha);
  Provenance provenance{origin, origin == ConceptorOrigin::mean_centered, {}};
  return Conceptor<Scalar>::from_matrix(from_spectrum<Scalar>(eig.vectors, mu), std::move(provenance),
                                        alpha);
}

template <typename Scalar>
Conceptor<Scalar> conceptor_from_activations(const ActivationSet<Scalar>& x, const Aperture& alpha) {
  return conceptor_from_correlation(correlation_matrix(x), alpha);
}

/// (1 − slack)·I, the clamped α→∞ limit.
template <typename Scalar>
Conceptor<Scalar> full_pass_conceptor(Index dim, Scalar slack = Scalar(1e-9)) {
  Matrix<Scalar> m = Matrix<Scalar>::Identity(dim, dim) * (Scalar(1) - slack);
  return Conceptor<Scalar>::from_matrix(std::move(m), {ConceptorOrigin::limit, false, {}});
}

/// The zero mapping, the α→0 limit.
template <typename Scalar>
Conceptor<Scalar> zero_conceptor(Index dim) {
  return Conceptor<Scalar>::from_matrix(Matrix<Scalar>::Zero(dim, dim),
                                        {ConceptorOrigin::limit, false, {}});
}

namespace detail {

template <typename Scalar>
void require_same_dim(const Conceptor<Scalar>& a, const Conceptor<Scalar>& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw DimensionError(std::string(op) + ": operand dimensions differ (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
  }
}

template <typename Scalar>
Provenance combined(ConceptorOrigin origin, const Conceptor<Scalar>& a, const Conceptor<Scalar>& b) {
  Provenance p{origin, a.mean_centered() && b.mean_centered(), a.leaf_apertures()};
  const auto rhs = b.leaf_apertures();
  p.operand_apertures.insert(p.operand_apertures.end(), rhs.begin(), rhs.end());
  return p;
}

/// Inverse of a symmetric positive definite matrix whose eigenvalues are >= 1.
template <typename Scalar>
Matrix<Scalar> spd_inverse(const Matrix<Scalar>& m) {
  const Index d = m.rows();
  Eigen::LDLT<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> ldlt(m);
  if (ldlt.info() != Eigen::Success) throw NumericalError("LDLT factorization failed");
  Matrix<Scalar> inv = ldlt.solve(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(d, d));
  return symmetrized(inv);
}

}  // namespace detail

/// ¬C = I − C.
template <typename Scalar>
Conceptor<Scalar> negate(const Conceptor<Scalar>& c) {
  Matrix<Scalar> m = Matrix<Scalar>::Identity(c.dim(), c.dim()) - c.matrix();
  Provenance p{ConceptorOrigin::negation, c.mean_centered(), c.leaf_apertures()};
  return Conceptor<Scalar>::from_matrix(std::move(m), std::move(p));
}

/// C1 ∨ C2 = (I + (C1(I−C1)⁻¹ + C2(I−C2)⁻¹)⁻¹)⁻¹.
///
/// With S the inner sum this equals I − (I + S)⁻¹, which needs no inverse of S
/// and stays defined when both operands share a null direction. The inverses
/// of I − Ci are Tikhonov-regularized.
template <typename Scalar>
Conceptor<Scalar> disjunction(const Conceptor<Scalar>& c1, const Conceptor<Scalar>& c2) {
  detail::require_same_dim(c1, c2, "disjunction");
  const Index d = c1.dim();
  const Matrix<Scalar> id = Matrix<Scalar>::Identity(d, d);
  const Matrix<Scalar> inv1 = regularized_inverse(Matrix<Scalar>(id - c1.matrix()), "operand 1 (I - C1)");
  const Matrix<Scalar> inv2 = regularized_inverse(Matrix<Scalar>(id - c2.matrix()), "operand 2 (I - C2)");
  const Matrix<Scalar> s = symmetrized(Matrix<Scalar>(c1.matrix() * inv1 + c2.matrix() * inv2));
  Matrix<Scalar> result = id - detail::spd_inverse<Scalar>(id + s);
  return Conceptor<Scalar>::from_matrix(symmetrized(result),
                                        detail::combined(ConceptorOrigin::disjunction, c1, c2));
}

/// C1 ∧ C2 = (C1⁻¹ + C2⁻¹ − I)⁻¹ with Tikhonov-regularized operand inverses.
template <typename Scalar>
Conceptor<Scalar> conjunction(const Conceptor<Scalar>& c1, const Conceptor<Scalar>& c2) {
  detail::require_same_dim(c1, c2, "conjunction");
  const Index d = c1.dim();
  const Matrix<Scalar> id = Matrix<Scalar>::Identity(d, d);
  const Matrix<Scalar> inv1 = regularized_inverse(c1.matrix(), "operand 1 (C1)");
  const Matrix<Scalar> inv2 = regularized_inverse(c2.matrix(), "operand 2 (C2)");
  Matrix<Scalar> result = detail::spd_inverse<Scalar>(symmetrized(Matrix<Scalar>(inv1 + inv2 - id)));
  return Conceptor<Scalar>::from_matrix(std::move(result),
                                        detail::combined(ConceptorOrigin::conjunction, c1, c2));
}

/// Correlation-space OR: the conceptor of R1 + R2 at α. The result is a
/// closed-form conceptor, so it keeps α.
template <typename Scalar>
Conceptor<Scalar> or_from_correlations(const CorrelationMatrix<Scalar>& r1,
                                       const CorrelationMatrix<Scalar>& r2, const Aperture& alpha) {
  if (r1.dim() != r2.dim()) throw DimensionError("or_from_correlations: dimensions differ");
  CorrelationMatrix<Scalar> sum(symmetrized(Matrix<Scalar>(r1.data() + r2.data())),
                                r1.n_source() + r2.n_source());
  const auto c = conceptor_from_correlation(sum, alpha);
  return Conceptor<Scalar>::from_matrix(
      c.matrix(), {ConceptorOrigin::disjunction, false, {alpha.value(), alpha.value()}}, alpha);
}

}  // namespace csteer
