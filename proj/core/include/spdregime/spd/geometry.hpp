#pragma once

#include "spdregime/spd/matrix.hpp"

#include <span>
#include <vector>

namespace spdregime::spd {

/// Eigenvalues above this are rejected by spd_exp (exp overflows near 709.78).
inline constexpr double kExpCap = 700.0;

/// U diag(f(sigma)) U^T over a cached decomposition.
template <typename F>
SymMatrix eig_map(const EigenDecomposition& e, F&& f) {
  Vector mapped(e.eigvals.size());
  for (Eigen::Index i = 0; i < mapped.size(); ++i) mapped(i) = f(e.eigvals(i));
  return SymMatrix(reconstruct(e.eigvecs, mapped));
}

SymMatrix spd_log(const SPDMatrix& x);
SPDMatrix spd_exp(const SymMatrix& s);
SPDMatrix spd_sqrt(const SPDMatrix& x);
SPDMatrix spd_invsqrt(const SPDMatrix& x);
/// X^t for real t.
SPDMatrix spd_pow(const SPDMatrix& x, double t);

/// A^T X A, validated as SPD (A must have full column rank).
SPDMatrix congruence(const SPDMatrix& x, const Matrix& a);
/// M X M for symmetric M, returned symmetric but unvalidated.
SymMatrix sandwich(const SymMatrix& m, const SymMatrix& x);

/// ||log(X^{-1/2} Y X^{-1/2})||_F.
double affine_distance(const SPDMatrix& x, const SPDMatrix& y);

/// ||log X - log Y||_F.
double log_euclidean_distance(const SPDMatrix& x, const SPDMatrix& y);

/// Point at parameter t on the affine-invariant geodesic from a (t=0) to b (t=1).
SPDMatrix geodesic(const SPDMatrix& a, const SPDMatrix& b, double t);

struct KarcherOptions {
  int max_iter = 50;
  double tol = 1e-8;
};

/// Frechet mean under the affine-invariant metric. Fixed-point iteration
/// from the arithmetic mean; throws MeanFailure if the tangent-mean norm is
/// still above tol after max_iter steps.
SPDMatrix karcher_mean(std::span<const SPDMatrix> batch, const KarcherOptions& opts = {});

/// G^{-1/2} X G^{-1/2}.
SPDMatrix transport_center(const SPDMatrix& x, const SPDMatrix& g);
/// B^{1/2} X B^{1/2}.
SPDMatrix transport_bias(const SPDMatrix& x, const SPDMatrix& b);

/// Elementwise sqrt(2 (1 - c_ij)) with a zero diagonal. Entries outside
/// [-1, 1] by more than 1e-12 throw DomainError.
SymMatrix corr_distance(const SymMatrix& c);

}  // namespace spdregime::spd
