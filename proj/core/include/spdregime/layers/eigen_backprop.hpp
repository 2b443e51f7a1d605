#pragma once

#include "spdregime/spd/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace spdregime::layers {

using spd::EigenDecomposition;
using spd::Matrix;
using spd::SymMatrix;
using spd::Vector;

/// Eigenvalue pairs closer than this (relative to max(1, |sigma_i|)) use the
/// derivative at their midpoint instead of the divided difference.
inline constexpr double kDegenerateGap = 1e-10;

/// Divided-difference (Loewner) matrix of f on the spectrum.
template <typename F, typename FPrime>
Matrix loewner_kernel(const Vector& sigma, F&& f, FPrime&& fprime) {
  const Eigen::Index n = sigma.size();
  Vector fs(n);
  for (Eigen::Index i = 0; i < n; ++i) fs(i) = f(sigma(i));
  Matrix k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double gap = sigma(i) - sigma(j);
      if (i == j) {
        k(i, j) = fprime(sigma(i));
      } else if (std::abs(gap) < kDegenerateGap * std::max(1.0, std::abs(sigma(i)))) {
        k(i, j) = fprime(0.5 * (sigma(i) + sigma(j)));
      } else {
        k(i, j) = (fs(i) - fs(j)) / gap;
      }
    }
  }
  return k;
}

/// Gradient of L w.r.t. X for Y = U f(Sigma) U^T, given symmetric dL/dY:
/// dL/dX = U (K o U^T G U) U^T.
template <typename F, typename FPrime>
SymMatrix eigfunc_backward(const EigenDecomposition& e, const SymMatrix& upstream, F&& f,
                           FPrime&& fprime) {
  const Matrix& u = e.eigvecs;
  const Matrix k = loewner_kernel(e.eigvals, f, fprime);
  const Matrix rotated = u.transpose() * upstream.matrix() * u;
  return SymMatrix(u * k.cwiseProduct(rotated) * u.transpose());
}

}  // namespace spdregime::layers
