// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include <Eigen/Core>

namespace adamd::num {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

inline MatrixMap map(std::span<double> s, Eigen::Index rows, Eigen::Index cols) {
  return MatrixMap(s.data(), rows, cols);
}
inline ConstMatrixMap cmap(std::span<const double> s, Eigen::Index rows,
                           Eigen::Index cols) {
  return ConstMatrixMap(s.data(), rows, cols);
}
inline VectorMap vec(std::span<double> s) {
  return VectorMap(s.data(), static_cast<Eigen::Index>(s.size()));
}
inline ConstVectorMap cvec(std::span<const double> s) {
  return ConstVectorMap(s.data(), static_cast<Eigen::Index>(s.size()));
}

} // namespace adamd::num
