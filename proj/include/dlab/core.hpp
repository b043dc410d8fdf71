#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dlab {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Error classes surfaced by every module. The C API maps these one-to-one
/// onto status codes and the CLI prints the name as its machine-parsable
/// error class.
enum class ErrorCode {
  InvalidArgument,
  DimensionTooLarge,
  NonpositiveTime,
  ShapeMismatch,
  ContractionViolation,
  NonConvergence,
  NonFinite,
  Divergence,
  SupportTooLarge,
  EmptyInput,
  Io,
  Parse,
  BoundaryArgument,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Largest number of binary variables any exact enumeration accepts.
inline constexpr int kMaxEnumerationBits = 22;

/// Largest spectral norm estimate via power iteration on MᵀM.
/// Stops when successive estimates agree to `rel_tol`.
double operator_norm(const Matrix& m, double rel_tol = 1e-10,
                     int max_iterations = 200000);

/// True if `a` is square and equal to its transpose entrywise within `tol`
/// (relative to the largest entry).
bool is_symmetric(const Matrix& a, double tol = 1e-12);

/// Euclidean projection onto the centered ball of the given radius.
Vector project_to_ball(const Vector& v, double radius);

inline void require(bool condition, ErrorCode code, const std::string& msg) {
  if (!condition) throw Error(code, msg);
}

}  // namespace dlab
