#pragma once

#include <Eigen/Dense>

#include <memory>

namespace spdregime::spd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultSpdTolerance = 1e-10;

/// Dense real symmetric matrix. Symmetry is exact: the constructor stores
/// (M + M^T) / 2, which is bitwise symmetric.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& m);

  static SymMatrix zero(int dim);
  static SymMatrix identity(int dim);
  static SymMatrix diagonal(const Vector& diag);

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  double frobenius_norm() const { return m_.norm(); }

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double s) const;

 private:
  struct Trusted {};
  SymMatrix(Matrix m, Trusted) : m_(std::move(m)) {}
  friend class SPDMatrix;

  Matrix m_;
};

inline SymMatrix operator*(double s, const SymMatrix& m) { return m * s; }

/// Frobenius inner product <A, B> = tr(A^T B).
inline double inner(const SymMatrix& a, const SymMatrix& b) {
  return a.matrix().cwiseProduct(b.matrix()).sum();
}

/// Eigenvalues in descending order; eigenvector columns normalised so that
/// their largest-magnitude component is positive.
struct EigenDecomposition {
  Vector eigvals;
  Matrix eigvecs;
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Throws EigFailure when
/// the off-diagonal norm does not fall below 1e-12 * ||S||_F within the
/// sweep cap.
EigenDecomposition sym_eig(const SymMatrix& s, int max_sweeps = 100);

/// Symmetric positive-definite matrix. The spectrum is validated on
/// construction and the decomposition is cached, so downstream eigenvalue
/// functions never re-diagonalise. Immutable after construction.
///
/// Validation policy: a smallest eigenvalue in (-1e-10, tolerance] is
/// repaired by adding (tolerance - lambda_min) * I and flagged; anything
/// lower throws DomainError.
class SPDMatrix {
 public:
  explicit SPDMatrix(const SymMatrix& s, double tolerance = kDefaultSpdTolerance);
  explicit SPDMatrix(const Matrix& m, double tolerance = kDefaultSpdTolerance)
      : SPDMatrix(SymMatrix(m), tolerance) {}

  /// Builds U diag(values) U^T from a known orthonormal basis. The same
  /// validation policy applies to `values`.
  static SPDMatrix from_spectrum(const Matrix& eigvecs, const Vector& eigvals,
                                 double tolerance = kDefaultSpdTolerance);

  static SPDMatrix identity(int dim);

  int dim() const noexcept { return sym_.dim(); }
  const SymMatrix& sym() const noexcept { return sym_; }
  const Matrix& matrix() const noexcept { return sym_.matrix(); }
  const EigenDecomposition& eig() const noexcept { return *eig_; }
  double min_eigenvalue() const { return eig_->eigvals(eig_->eigvals.size() - 1); }
  double tolerance() const noexcept { return tolerance_; }
  bool repaired() const noexcept { return repaired_; }

 private:
  SPDMatrix(SymMatrix s, std::shared_ptr<const EigenDecomposition> eig, double tol, bool repaired)
      : sym_(std::move(s)), eig_(std::move(eig)), tolerance_(tol), repaired_(repaired) {}

  static SPDMatrix validated(EigenDecomposition eig, Matrix m, double tolerance);

  SymMatrix sym_;
  std::shared_ptr<const EigenDecomposition> eig_;
  double tolerance_;
  bool repaired_;
};

/// Sorts eigenpairs descending and applies the sign convention in place.
void canonicalize(EigenDecomposition& e);

/// U diag(values) U^T.
Matrix reconstruct(const Matrix& eigvecs, const Vector& eigvals);

}  // namespace spdregime::spd
