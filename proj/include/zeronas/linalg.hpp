#pragma once

// Small dense symmetric eigensolver and LU determinant. The matrices here are
// at most batch-size square (<= 64), so cyclic Jacobi and plain partial-pivot
// LU are entirely adequate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "zeronas/common.hpp"

namespace zeronas {

// Eigenvalues of a symmetric matrix (row-major, n x n), ascending. Cyclic
// Jacobi sweeps until the off-diagonal Frobenius norm falls below
// tol * ||A||_F.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, int n,
                                              double tol = 1e-12, int max_sweeps = 100) {
  if (n <= 0 || static_cast<std::size_t>(n) * n != a.size())
    throw Error("jacobi_eigenvalues: matrix size mismatch");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = a[static_cast<std::size_t>(i) * n + j] -
                       a[static_cast<std::size_t>(j) * n + i];
      if (std::abs(d) > 1e-9 * (1.0 + std::abs(a[static_cast<std::size_t>(i) * n + j])))
        throw Error("jacobi_eigenvalues: matrix is not symmetric");
    }

  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double v = a[static_cast<std::size_t>(i) * n + j];
        s += 2.0 * v * v;
      }
    return std::sqrt(s);
  };
  double full = 0.0;
  for (double v : a) full += v * v;
  full = std::sqrt(full);
  const double thresh = tol * std::max(full, 1e-300);

  for (int sweep = 0; sweep < max_sweeps && off_norm() > thresh; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<std::size_t>(p) * n + q];
        if (apq == 0.0) continue;
        const double app = a[static_cast<std::size_t>(p) * n + p];
        const double aqq = a[static_cast<std::size_t>(q) * n + q];
        const double theta = 0.5 * (aqq - app) / apq;
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[static_cast<std::size_t>(k) * n + p];
          const double akq = a[static_cast<std::size_t>(k) * n + q];
          a[static_cast<std::size_t>(k) * n + p] = c * akp - s * akq;
          a[static_cast<std::size_t>(k) * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[static_cast<std::size_t>(p) * n + k];
          const double aqk = a[static_cast<std::size_t>(q) * n + k];
          a[static_cast<std::size_t>(p) * n + k] = c * apk - s * aqk;
          a[static_cast<std::size_t>(q) * n + k] = s * apk + c * aqk;
        }
      }
    }
  }

  std::vector<double> eig(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i) * n + i];
  std::sort(eig.begin(), eig.end());
  return eig;
}

struct LogDet {
  double log_abs = 0.0;  // log |det|
  int sign = 0;          // -1, 0, +1
};

// log|det| via LU with partial pivoting. sign == 0 flags an exactly singular
// pivot.
inline LogDet lu_logdet(std::vector<double> a, int n) {
  if (n <= 0 || static_cast<std::size_t>(n) * n != a.size())
    throw Error("lu_logdet: matrix size mismatch");
  int sign = 1;
  double log_abs = 0.0;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(a[static_cast<std::size_t>(k) * n + k]);
    for (int i = k + 1; i < n; ++i) {
      const double v = std::abs(a[static_cast<std::size_t>(i) * n + k]);
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best == 0.0) return {0.0, 0};
    if (piv != k) {
      for (int j = 0; j < n; ++j)
        std::swap(a[static_cast<std::size_t>(k) * n + j], a[static_cast<std::size_t>(piv) * n + j]);
      sign = -sign;
    }
    const double pivot = a[static_cast<std::size_t>(k) * n + k];
    log_abs += std::log(std::abs(pivot));
    if (pivot < 0.0) sign = -sign;
    for (int i = k + 1; i < n; ++i) {
      const double f = a[static_cast<std::size_t>(i) * n + k] / pivot;
      a[static_cast<std::size_t>(i) * n + k] = f;
      for (int j = k + 1; j < n; ++j)
        a[static_cast<std::size_t>(i) * n + j] -= f * a[static_cast<std::size_t>(k) * n + j];
    }
  }
  return {log_abs, sign};
}

}  // namespace zeronas
