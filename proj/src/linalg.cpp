#include "dlab/core.hpp"

#include <algorithm>
#include <cmath>

namespace dlab {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DimensionTooLarge: return "dimension-too-large";
    case ErrorCode::NonpositiveTime: return "nonpositive-time";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::ContractionViolation: return "contraction-violation";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::SupportTooLarge: return "support-too-large";
    case ErrorCode::EmptyInput: return "empty-input";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::BoundaryArgument: return "boundary-argument";
  }
  return "unknown";
}

double operator_norm(const Matrix& m, double rel_tol, int max_iterations) {
  if (m.size() == 0) return 0.0;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;

  // Deterministic start with an index-dependent tilt so the start vector is
  // not orthogonal to structured singular vectors (e.g. alternating signs).
  Vector v(m.cols());
  for (Index i = 0; i < v.size(); ++i) {
    v(i) = 1.0 + 0.37 * std::sin(1.0 + 2.3 * static_cast<double>(i));
  }
  v.normalize();

  double estimate = 0.0;
  Vector mv(m.rows());
  for (int it = 0; it < max_iterations; ++it) {
    mv.noalias() = m * v;
    Vector next = m.transpose() * mv;
    const double rayleigh = mv.squaredNorm();  // vᵀ MᵀM v with ‖v‖ = 1
    const double norm = next.norm();
    if (norm == 0.0) return std::sqrt(rayleigh);
    next /= norm;
    const double current = std::sqrt(rayleigh);
    v = std::move(next);
    if (it > 0 && std::abs(current - estimate) <= rel_tol * current) {
      estimate = current;
      break;
    }
    estimate = current;
  }
  // Final Rayleigh quotient with the converged direction.
  return std::max(estimate, (m * v).norm());
}

bool is_symmetric(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

Vector project_to_ball(const Vector& v, double radius) {
  const double norm = v.norm();
  if (norm <= radius) return v;
  return v * (radius / norm);
}

}  // namespace dlab
