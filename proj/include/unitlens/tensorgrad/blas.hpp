// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace unitlens::tensorgrad::blas {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Stride = Eigen::OuterStride<>;
using ConstView = Eigen::Map<const RowMajor, Eigen::Unaligned, Stride>;
using View = Eigen::Map<RowMajor, Eigen::Unaligned, Stride>;

/// C[m x n] = alpha * op(A) * op(B) + beta * C, all row-major with leading
/// dimensions lda/ldb/ldc. Eigen runs single threaded here, so every output
/// element is reduced in a fixed order.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  View C(c, m, n, Stride(ldc));
  if (beta == 0.0) {
    C.setZero();
  } else if (beta != 1.0) {
    C *= beta;
  }
  const ConstView A(a, trans_a ? k : m, trans_a ? m : k, Stride(lda));
  const ConstView B(b, trans_b ? n : k, trans_b ? k : n, Stride(ldb));
  if (!trans_a && !trans_b) {
    C.noalias() += alpha * A * B;
  } else if (!trans_a && trans_b) {
    C.noalias() += alpha * A * B.transpose();
  } else if (trans_a && !trans_b) {
    C.noalias() += alpha * A.transpose() * B;
  } else {
    C.noalias() += alpha * A.transpose() * B.transpose();
  }
}

}  // namespace unitlens::tensorgrad::blas
