#include "spdregime/spd/geometry.hpp"

#include "spdregime/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spdregime::spd {

namespace {

void require_same_dim(const SPDMatrix& a, const SPDMatrix& b, const char* what) {
  if (a.dim() != b.dim())
    throw ShapeError(std::string(what) + ": " + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()));
}

SPDMatrix map_spectrum(const SPDMatrix& x, double (*f)(double)) {
  const auto& e = x.eig();
  return SPDMatrix::from_spectrum(e.eigvecs, e.eigvals.unaryExpr(f), x.tolerance());
}

}  // namespace

SymMatrix spd_log(const SPDMatrix& x) {
  const auto& e = x.eig();
  if (e.eigvals.minCoeff() < x.tolerance())
    throw DomainError("spd_log: eigenvalue below spd tolerance");
  return eig_map(e, [](double s) { return std::log(s); });
}

SPDMatrix spd_exp(const SymMatrix& s) {
  const EigenDecomposition e = sym_eig(s);
  if (e.eigvals.maxCoeff() > kExpCap)
    throw OverflowError("spd_exp: eigenvalue " + std::to_string(e.eigvals.maxCoeff()) +
                        " exceeds exp cap");
  return SPDMatrix::from_spectrum(e.eigvecs, e.eigvals.array().exp().matrix());
}

SPDMatrix spd_sqrt(const SPDMatrix& x) {
  return map_spectrum(x, [](double s) { return std::sqrt(s); });
}

SPDMatrix spd_invsqrt(const SPDMatrix& x) {
  return map_spectrum(x, [](double s) { return 1.0 / std::sqrt(s); });
}

SPDMatrix spd_pow(const SPDMatrix& x, double t) {
  const auto& e = x.eig();
  return SPDMatrix::from_spectrum(e.eigvecs, e.eigvals.array().pow(t).matrix(), x.tolerance());
}

SPDMatrix congruence(const SPDMatrix& x, const Matrix& a) {
  if (a.rows() != x.dim()) throw ShapeError("congruence: rows of A must equal dim of X");
  return SPDMatrix(SymMatrix(a.transpose() * x.matrix() * a), x.tolerance());
}

SymMatrix sandwich(const SymMatrix& m, const SymMatrix& x) {
  if (m.dim() != x.dim()) throw ShapeError("sandwich");
  return SymMatrix(m.matrix() * x.matrix() * m.matrix());
}

double affine_distance(const SPDMatrix& x, const SPDMatrix& y) {
  require_same_dim(x, y, "affine_distance");
  const Matrix xis = spd_invsqrt(x).matrix();
  const EigenDecomposition e = sym_eig(SymMatrix(xis * y.matrix() * xis));
  double s = 0.0;
  for (Eigen::Index i = 0; i < e.eigvals.size(); ++i) {
    if (!(e.eigvals(i) > 0.0)) throw DomainError("affine_distance: lost positive definiteness");
    const double l = std::log(e.eigvals(i));
    s += l * l;
  }
  return std::sqrt(s);
}

double log_euclidean_distance(const SPDMatrix& x, const SPDMatrix& y) {
  require_same_dim(x, y, "log_euclidean_distance");
  return (spd_log(x) - spd_log(y)).frobenius_norm();
}

SPDMatrix geodesic(const SPDMatrix& a, const SPDMatrix& b, double t) {
  require_same_dim(a, b, "geodesic");
  const Matrix as = spd_sqrt(a).matrix();
  const Matrix ais = spd_invsqrt(a).matrix();
  const SPDMatrix inner_pt(SymMatrix(ais * b.matrix() * ais), a.tolerance());
  const Matrix step = spd_pow(inner_pt, t).matrix();
  return SPDMatrix(SymMatrix(as * step * as), a.tolerance());
}

SPDMatrix karcher_mean(std::span<const SPDMatrix> batch, const KarcherOptions& opts) {
  if (batch.empty()) throw DomainError("karcher_mean: empty batch");
  const int n = batch.front().dim();
  Matrix acc = Matrix::Zero(n, n);
  for (const auto& x : batch) {
    if (x.dim() != n) throw ShapeError("karcher_mean: non-uniform batch dims");
    acc += x.matrix();
  }
  if (batch.size() == 1) return batch.front();
  SPDMatrix g(SymMatrix(acc / static_cast<double>(batch.size())), batch.front().tolerance());

  double residual = 0.0;
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    const Matrix gs = spd_sqrt(g).matrix();
    const Matrix gis = spd_invsqrt(g).matrix();
    Matrix tangent = Matrix::Zero(n, n);
    for (const auto& x : batch) {
      const SPDMatrix centered(SymMatrix(gis * x.matrix() * gis), x.tolerance());
      tangent += spd_log(centered).matrix();
    }
    tangent /= static_cast<double>(batch.size());
    residual = tangent.norm();
    if (residual < opts.tol) return g;
    if (iter == opts.max_iter) break;
    const Matrix step = spd_exp(SymMatrix(tangent)).matrix();
    g = SPDMatrix(SymMatrix(gs * step * gs), g.tolerance());
  }
  throw MeanFailure(residual);
}

SPDMatrix transport_center(const SPDMatrix& x, const SPDMatrix& g) {
  require_same_dim(x, g, "transport_center");
  const Matrix gis = spd_invsqrt(g).matrix();
  return SPDMatrix(SymMatrix(gis * x.matrix() * gis), x.tolerance());
}

SPDMatrix transport_bias(const SPDMatrix& x, const SPDMatrix& b) {
  require_same_dim(x, b, "transport_bias");
  const Matrix bs = spd_sqrt(b).matrix();
  return SPDMatrix(SymMatrix(bs * x.matrix() * bs), x.tolerance());
}

SymMatrix corr_distance(const SymMatrix& c) {
  const int n = c.dim();
  Matrix d = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double v = c(i, j);
      if (!(v >= -1.0 - 1e-12 && v <= 1.0 + 1e-12))
        throw DomainError("corr_distance: entry (" + std::to_string(i) + "," + std::to_string(j) +
                          ") = " + std::to_string(v) + " outside [-1, 1]");
      if (i != j) d(i, j) = std::sqrt(2.0 * std::max(0.0, 1.0 - v));
    }
  }
  return SymMatrix(d);
}

}  // namespace spdregime::spd
