#pragma once

#include <cmath>

#include "csteer/conceptor.hpp"
#include "csteer/random.hpp"

namespace csteer::testing {

inline Matrixd random_matrix(Rng& rng, Index rows, Index cols) {
  Matrixd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

/// Conceptor with a random eigenbasis and spectrum drawn uniformly from [lo, hi].
inline Conceptord random_conceptor(Rng& rng, Index d, double lo, double hi) {
  const Eigen::MatrixXd u = random_orthonormal(rng, d, d);
  Vectord mu(d);
  for (Index i = 0; i < d; ++i) mu(i) = lo + (hi - lo) * rng.uniform();
  return Conceptord::from_matrix(from_spectrum<double>(u, mu), {ConceptorOrigin::limit, false, {}});
}

/// Full-rank correlation matrix with eigenvalues drawn from [lo, hi].
inline CorrelationMatrixd random_correlation(Rng& rng, Index d, double lo, double hi) {
  const Eigen::MatrixXd u = random_orthonormal(rng, d, d);
  Vectord lambda(d);
  for (Index i = 0; i < d; ++i) lambda(i) = lo + (hi - lo) * rng.uniform();
  return CorrelationMatrixd(from_spectrum<double>(u, lambda), 1);
}

}  // namespace csteer::testing
