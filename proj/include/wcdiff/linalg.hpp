#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace wcdiff {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Rows/columns of `m` picked by `idx`, in that order.
inline Matrix submatrix(const Matrix& m, std::span<const Index> rows,
                        std::span<const Index> cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) {
      out(i, j) = m(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

inline Matrix submatrix(const Matrix& m, const std::vector<Index>& rows,
                        const std::vector<Index>& cols) {
  return submatrix(m, std::span<const Index>(rows), std::span<const Index>(cols));
}

}  // namespace wcdiff
