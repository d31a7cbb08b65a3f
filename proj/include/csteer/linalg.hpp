#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "csteer/errors.hpp"

namespace csteer {

using Index = Eigen::Index;

// Row-major storage matches the on-disk activation layout.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrixd = Matrix<double>;
using Vectord = Vector<double>;

/// Numerical thresholds per scalar type. Double values are the contract;
/// float values are scaled for single-precision round-off.
template <typename Scalar>
struct Tolerance;

template <>
struct Tolerance<double> {
  static constexpr double symmetry = 1e-10;
  static constexpr double spectrum = 1e-10;
  static constexpr double regularization = 1e-10;
  static constexpr double regularization_floor = 1e-200;
  static constexpr double idempotence = 1e-6;
};

template <>
struct Tolerance<float> {
  static constexpr float symmetry = 1e-5f;
  static constexpr float spectrum = 1e-5f;
  static constexpr float regularization = 1e-6f;
  static constexpr float regularization_floor = 1e-20f;
  static constexpr float idempotence = 1e-3f;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

/// ‖M − Mᵀ‖_F / ‖M‖_F, zero for the zero matrix.
template <typename Derived>
typename Derived::Scalar relative_asymmetry(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Scalar scale = m.norm();
  if (scale == Scalar(0)) return Scalar(0);
  return (m - m.transpose()).norm() / scale;
}

template <typename Derived>
Matrix<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) * typename Derived::Scalar(0.5);
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
template <typename Scalar>
struct SymmetricEigen {
  Vector<Scalar> values;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;
};

template <typename Derived>
SymmetricEigen<typename Derived::Scalar> symmetric_eigen(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using ColMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::SelfAdjointEigenSolver<ColMajor> solver(ColMajor(m), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigendecomposition did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

template <typename Derived>
Vector<typename Derived::Scalar> symmetric_eigenvalues(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using ColMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::SelfAdjointEigenSolver<ColMajor> solver(ColMajor(m), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigendecomposition did not converge");
  }
  return solver.eigenvalues();
}

/// U diag(values) Uᵀ, symmetrized so the result is exactly symmetric.
template <typename Scalar>
Matrix<Scalar> from_spectrum(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& vectors,
                             const Vector<Scalar>& values) {
  Matrix<Scalar> m = vectors * values.asDiagonal() * vectors.transpose();
  return symmetrized(m);
}

/// Tikhonov-regularized inverse (M + εI)⁻¹ of a symmetric PSD matrix with
/// ε = tol · max(λ_max(M), floor). Throws SingularityError when
/// ‖M (M+εI)⁻¹ M − M‖_F exceeds the idempotence tolerance relative to ‖M‖_F.
template <typename Derived>
Matrix<typename Derived::Scalar> regularized_inverse(const Eigen::MatrixBase<Derived>& m,
                                                     const std::string& operand) {
  using Scalar = typename Derived::Scalar;
  using Tol = Tolerance<Scalar>;
  const auto eig = symmetric_eigen(m);
  const Scalar largest = std::max(eig.values.maxCoeff(), Tol::regularization_floor);
  const Scalar eps = Tol::regularization * largest;
  // Round-off can leave tiny negative eigenvalues on a PSD operand.
  const Vector<Scalar> clamped = eig.values.cwiseMax(Scalar(0));
  const Vector<Scalar> inv = (clamped.array() + eps).inverse().matrix();
  Matrix<Scalar> result = from_spectrum<Scalar>(eig.vectors, inv);
  if (!all_finite(result)) {
    throw SingularityError("regularized inverse of " + operand + " is not finite");
  }
  const Scalar scale = m.norm();
  if (scale > Scalar(0)) {
    const Scalar deviation = (m * result * m - m).norm() / scale;
    if (!(deviation <= Tol::idempotence)) {
      throw SingularityError("regularized inverse of " + operand +
                             " fails the idempotence check (relative deviation " +
                             std::to_string(deviation) + ")");
    }
  }
  return result;
}

}  // namespace csteer
