#pragma once

#include <string>
#include <utility>

#include "csteer/linalg.hpp"

namespace csteer {

/// n×d activation matrix, one sample per row. Never empty, always finite.
template <typename Scalar>
class ActivationSet {
 public:
  explicit ActivationSet(Matrix<Scalar> data) : data_(std::move(data)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
      throw ValidationError("activation set needs n >= 1 and d >= 1, got " +
                            std::to_string(data_.rows()) + "x" + std::to_string(data_.cols()));
    }
    for (Index i = 0; i < data_.rows(); ++i) {
      for (Index j = 0; j < data_.cols(); ++j) {
        if (!std::isfinite(data_(i, j))) {
          throw ValidationError("non-finite activation at row " + std::to_string(i) + ", column " +
                                std::to_string(j));
        }
      }
    }
  }

  Index n() const { return data_.rows(); }
  Index dim() const { return data_.cols(); }
  const Matrix<Scalar>& data() const { return data_; }
  auto row(Index i) const { return data_.row(i); }

  /// Column-wise mean.
  Vector<Scalar> mean() const { return data_.colwise().mean().transpose(); }

  /// Every row shifted by −offset.
  ActivationSet centered(const Vector<Scalar>& offset) const {
    if (offset.size() != dim()) {
      throw DimensionError("offset has dimension " + std::to_string(offset.size()) +
                           ", activations have " + std::to_string(dim()));
    }
    return ActivationSet(Matrix<Scalar>(data_.rowwise() - offset.transpose()));
  }

  template <typename Other>
  ActivationSet<Other> cast() const {
    return ActivationSet<Other>(data_.template cast<Other>());
  }

 private:
  Matrix<Scalar> data_;
};

using ActivationSetd = ActivationSet<double>;

}  // namespace csteer
