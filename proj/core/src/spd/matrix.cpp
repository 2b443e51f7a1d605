#include "spdregime/spd/matrix.hpp"

#include "spdregime/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace spdregime::spd {

namespace {

constexpr double kJacobiRelTol = 1e-12;
constexpr double kRepairFloor = -1e-10;

double off_diagonal_norm(const Matrix& a) {
  const Eigen::Index n = a.rows();
  double s = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols())
    throw ShapeError("symmetric matrix must be square, got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  if (m.rows() < 1) throw ShapeError("symmetric matrix must have dim >= 1");
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::zero(int dim) { return SymMatrix(Matrix::Zero(dim, dim)); }
SymMatrix SymMatrix::identity(int dim) { return SymMatrix(Matrix::Identity(dim, dim)); }
SymMatrix SymMatrix::diagonal(const Vector& diag) { return SymMatrix(Matrix(diag.asDiagonal())); }

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  if (o.dim() != dim()) throw ShapeError("sym add");
  return SymMatrix(m_ + o.m_, Trusted{});
}
SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  if (o.dim() != dim()) throw ShapeError("sym sub");
  return SymMatrix(m_ - o.m_, Trusted{});
}
SymMatrix SymMatrix::operator*(double s) const { return SymMatrix(m_ * s, Trusted{}); }

void canonicalize(EigenDecomposition& e) {
  const Eigen::Index n = e.eigvals.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return e.eigvals(a) > e.eigvals(b); });
  Vector vals(n);
  Matrix vecs(e.eigvecs.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    vals(k) = e.eigvals(src);
    vecs.col(k) = e.eigvecs.col(src);
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
      // Strict comparison keeps the first index on magnitude ties.
      if (std::abs(vecs(i, k)) > best + 1e-14) {
        best = std::abs(vecs(i, k));
        arg = i;
      }
    }
    if (vecs(arg, k) < 0.0) vecs.col(k) = -vecs.col(k);
  }
  e.eigvals = std::move(vals);
  e.eigvecs = std::move(vecs);
}

Matrix reconstruct(const Matrix& eigvecs, const Vector& eigvals) {
  return eigvecs * eigvals.asDiagonal() * eigvecs.transpose();
}

EigenDecomposition sym_eig(const SymMatrix& s, int max_sweeps) {
  Matrix a = s.matrix();
  const int n = s.dim();
  if (!a.allFinite()) throw DomainError("sym_eig: non-finite entries");

  Matrix v = Matrix::Identity(n, n);
  const double norm = a.norm();
  const double target = kJacobiRelTol * norm;
  const double negligible = 1e-18 * norm;

  int sweep = 0;
  while (off_diagonal_norm(a) > target) {
    if (sweep >= max_sweeps) throw EigFailure(sweep);
    ++sweep;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= negligible) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;

        double* colp = a.col(p).data();
        double* colq = a.col(q).data();
        for (int k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = colp[k];
          const double akq = colq[k];
          const double np = c * akp - sn * akq;
          const double nq = sn * akp + c * akq;
          colp[k] = np;
          colq[k] = nq;
          a(p, k) = np;
          a(q, k) = nq;
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        double* vp = v.col(p).data();
        double* vq = v.col(q).data();
        for (int k = 0; k < n; ++k) {
          const double x = vp[k];
          const double y = vq[k];
          vp[k] = c * x - sn * y;
          vq[k] = sn * x + c * y;
        }
      }
    }
  }

  EigenDecomposition e{a.diagonal(), std::move(v)};
  canonicalize(e);
  return e;
}

SPDMatrix SPDMatrix::validated(EigenDecomposition eig, Matrix m, double tolerance) {
  if (!(tolerance > 0.0)) throw DomainError("spd tolerance must be positive");
  const double lmin = eig.eigvals(eig.eigvals.size() - 1);
  bool repaired = false;
  if (!(lmin > tolerance)) {
    if (!(lmin > kRepairFloor))
      throw DomainError("matrix is not positive definite: smallest eigenvalue " +
                        std::to_string(lmin));
    const double shift = tolerance - lmin;
    eig.eigvals.array() += shift;
    m.diagonal().array() += shift;
    repaired = true;
  }
  return SPDMatrix(SymMatrix(std::move(m), SymMatrix::Trusted{}),
                   std::make_shared<const EigenDecomposition>(std::move(eig)), tolerance,
                   repaired);
}

SPDMatrix::SPDMatrix(const SymMatrix& s, double tolerance)
    : SPDMatrix(validated(sym_eig(s), s.matrix(), tolerance)) {}

SPDMatrix SPDMatrix::from_spectrum(const Matrix& eigvecs, const Vector& eigvals,
                                   double tolerance) {
  if (eigvecs.rows() != eigvecs.cols() || eigvecs.cols() != eigvals.size())
    throw ShapeError("from_spectrum: basis and spectrum sizes differ");
  if (!eigvals.allFinite()) throw DomainError("from_spectrum: non-finite eigenvalues");
  EigenDecomposition e{eigvals, eigvecs};
  canonicalize(e);
  Matrix m = reconstruct(e.eigvecs, e.eigvals);
  m = 0.5 * (m + m.transpose());
  return validated(std::move(e), std::move(m), tolerance);
}

SPDMatrix SPDMatrix::identity(int dim) {
  return from_spectrum(Matrix::Identity(dim, dim), Vector::Ones(dim));
}

}  // namespace spdregime::spd
