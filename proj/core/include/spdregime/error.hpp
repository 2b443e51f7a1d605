#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spdregime {

/// Broad failure class; the CLI maps each to an exit code.
enum class ErrorCategory { Config, Data, Numerical, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// --- configuration ---------------------------------------------------------

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

// --- data ------------------------------------------------------------------

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class MissingColumn : public DataError {
 public:
  explicit MissingColumn(const std::string& column)
      : DataError("missing column: " + column), column_(column) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

/// Row and column are 1-based positions among data rows and value columns.
class UnparseableCell : public DataError {
 public:
  UnparseableCell(std::size_t row, std::size_t col, const std::string& text)
      : DataError("unparseable cell at row " + std::to_string(row) + ", col " +
                  std::to_string(col) + ": '" + text + "'"),
        row_(row),
        col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

class NonMonotonicDates : public DataError {
 public:
  explicit NonMonotonicDates(const std::string& what) : DataError(what) {}
};

class NonPositivePrice : public DataError {
 public:
  explicit NonPositivePrice(const std::string& what) : DataError(what) {}
};

class AllAssetsDropped : public DataError {
 public:
  AllAssetsDropped() : DataError("cleaning dropped every asset") {}
};

class EmptySplit : public DataError {
 public:
  explicit EmptySplit(const std::string& what) : DataError(what) {}
};

class ZeroVolatility : public DataError {
 public:
  ZeroVolatility() : DataError("basket return volatility is zero") {}
};

class EstimationError : public DataError {
 public:
  explicit EstimationError(const std::string& what) : DataError(what) {}
};

// --- numerical -------------------------------------------------------------

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::Numerical, what) {}
};

class ShapeError : public NumericalError {
 public:
  explicit ShapeError(const std::string& what) : NumericalError("shape mismatch: " + what) {}
};

class DomainError : public NumericalError {
 public:
  explicit DomainError(const std::string& what) : NumericalError(what) {}
};

class OverflowError : public NumericalError {
 public:
  explicit OverflowError(const std::string& what) : NumericalError(what) {}
};

class EigFailure : public NumericalError {
 public:
  explicit EigFailure(int sweeps)
      : NumericalError("Jacobi eigensolver did not converge after " + std::to_string(sweeps) +
                       " sweeps"),
        sweeps_(sweeps) {}
  int sweeps() const noexcept { return sweeps_; }

 private:
  int sweeps_;
};

class MeanFailure : public NumericalError {
 public:
  explicit MeanFailure(double residual)
      : NumericalError("Karcher mean did not converge, residual " + std::to_string(residual)),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class RetractionError : public NumericalError {
 public:
  explicit RetractionError(const std::string& what) : NumericalError(what) {}
};

class OptFailure : public NumericalError {
 public:
  explicit OptFailure(double residual)
      : NumericalError("mean-variance solver did not converge, KKT residual " +
                       std::to_string(residual)),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class TrainingDiverged : public NumericalError {
 public:
  explicit TrainingDiverged(int epoch)
      : NumericalError("training loss became non-finite at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// --- io --------------------------------------------------------------------

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::Io, what) {}
};

}  // namespace spdregime
