#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <limits>
#include <stdexcept>
#include <string>

namespace cvxq {

using Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using SparseMatrixX = Eigen::SparseMatrix<Scalar>;

using VectorXd = VectorX<double>;
using MatrixXd = MatrixX<double>;
using SparseMatrixXd = SparseMatrixX<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Thrown on contract violations (dimension mismatch, inadmissible input, ...).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

}  // namespace cvxq
