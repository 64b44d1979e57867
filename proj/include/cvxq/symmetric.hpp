#pragma once

#include "cvxq/types.hpp"

namespace cvxq {

/// Coordinates for symmetric matrices: row-major upper triangle, diagonal
/// included, each off-diagonal entry stored once.
inline Index sym_dim(Index n) { return n * (n + 1) / 2; }

inline MatrixXd vech_to_sym(const VectorXd& v, Index n) {
  require(v.size() == sym_dim(n), "vech_to_sym: size mismatch");
  MatrixXd M(n, n);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      M(i, j) = v[k];
      M(j, i) = v[k];
      ++k;
    }
  return M;
}

inline VectorXd sym_to_vech(const MatrixXd& M) {
  const Index n = M.rows();
  require(M.cols() == n, "sym_to_vech: matrix must be square");
  VectorXd v(sym_dim(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) v[k++] = 0.5 * (M(i, j) + M(j, i));
  return v;
}

/// Features f with f' vech(M) = z' M z for symmetric M: squared terms on the
/// diagonal, doubled cross terms off it.
inline VectorXd quad_features(const VectorXd& z) {
  const Index n = z.size();
  VectorXd f(sym_dim(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) f[k++] = (i == j) ? z[i] * z[i] : 2.0 * z[i] * z[j];
  return f;
}

}  // namespace cvxq
