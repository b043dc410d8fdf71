#pragma once

#include "dlab/core.hpp"
#include "dlab/models.hpp"

#include <iosfwd>
#include <vector>

namespace dlab {

/// h_bin(m) = -[(1+m)/2 log((1+m)/2) + (1-m)/2 log((1-m)/2)] for |m| < 1.
double binary_entropy(double m);

/// Σ -h_bin(m_i) - ⟨m, A m⟩/2 - (λ_t/σ_t²)⟨z, m⟩.
double naive_vb_energy(const Matrix& a, const Vector& z, double t,
                       const Vector& m);
/// naive_vb_energy + ⟨m, K m⟩/2.
double vi_energy(const Matrix& a, const Matrix& k, const Vector& z, double t,
                 const Vector& m);
/// Σ -h_bin(m_i) - ⟨m, U m⟩/2 - ⟨h, m⟩, the energy whose stationary points
/// are m = tanh(U m + h).
double tap_energy(const Matrix& u, const Vector& h, const Vector& m);

/// Nondecreasing scalar map applied coordinatewise by the fixed-point solver:
/// tanh, or the posterior mean G'(λ) of a finite prior under the tilt
/// exp(λβ - νβ²/2).
class ScalarDenoiser {
 public:
  enum class Kind { Tanh, Posterior };

  static ScalarDenoiser tanh();
  static ScalarDenoiser posterior(std::vector<PriorAtom> prior, double nu);

  double operator()(double x) const;

  Kind kind() const { return kind_; }
  const std::vector<PriorAtom>& prior() const { return prior_; }
  double nu() const { return nu_; }
  double range_min() const { return lo_; }
  double range_max() const { return hi_; }
  /// Π: bound on |output| (and Π² bounds the slope).
  double bound() const { return bound_; }

 private:
  ScalarDenoiser() = default;

  Kind kind_ = Kind::Tanh;
  std::vector<PriorAtom> prior_;
  double nu_ = 0.0;
  double lo_ = -1.0, hi_ = 1.0, bound_ = 1.0;
};

/// G'_t for a finite prior (log-domain weights).
ScalarDenoiser posterior_scalar(std::vector<PriorAtom> prior, double nu);

struct PwlKnot {
  double slope;       // a_j
  double breakpoint;  // w_j
};

/// f(x) = a₀ + Σ_j a_j ReLU(x - w_j).
struct PwlDenoiser {
  double a0 = 0.0;
  std::vector<PwlKnot> knots;
  double zeta = 0.0;
  double bound = 1.0;  // Π of the target

  double operator()(double x) const;
  double slope_sum() const;         // Σ|a_j|
  double max_breakpoint() const;    // max |w_j|, 0 without knots
};

/// Interpolates the target at its level-set quantiles so that the sup error
/// is at most ζ.
PwlDenoiser build_pwl(const ScalarDenoiser& target, double zeta);

/// Fixed-point problem m = f(U m + h). `a_norm` is a declared bound on
/// ‖U‖_op.
struct FreeEnergySpec {
  Matrix interaction;
  Vector field;
  double a_norm = 0.0;

  /// Fills a_norm with the power-iteration estimate of ‖U‖_op.
  static FreeEnergySpec with_measured_norm(Matrix u, Vector h);
};

/// Ising TAP template: U = A - K, h = λ_t z/σ_t² (+ extra).
FreeEnergySpec ising_free_energy(const Matrix& a, const Matrix& k, double t,
                                 const Vector& z);
/// Conditional template: U = A₁₁ - K, h = A₁₂θ + λ_t z/σ_t².
FreeEnergySpec conditional_free_energy(const BlockIsingModel& model,
                                       const Matrix& k, const Vector& theta,
                                       double t, const Vector& z);

struct FixedPointOptions {
  int steps = -1;           // >= 0: run exactly this many steps
  double tol = 1e-10;       // otherwise stop when ‖m^{l+1} - m^l‖_∞ <= tol
  int max_steps = 10000;
  bool trace = false;
  bool keep_iterates = false;
  bool energy = true;       // tap_energy per step while iterates stay in (-1,1)^d
};

struct TraceRow {
  int iter;
  double residual;  // ‖m^{l} - m^{l-1}‖_∞
  double energy;    // NaN when not evaluated
};

struct FixedPointResult {
  Vector m;
  int iterations = 0;
  double residual = 0.0;  // ‖m - f(U m + h)‖_∞ at exit
  bool converged = false;
  int energy_increases = 0;
  std::vector<TraceRow> trace;
  std::vector<Vector> iterates;  // m^0 .. m^L when keep_iterates
};

FixedPointResult fixed_point_solve(const FreeEnergySpec& spec,
                                   const ScalarDenoiser& f,
                                   const FixedPointOptions& options = {});
FixedPointResult fixed_point_solve(const FreeEnergySpec& spec,
                                   const PwlDenoiser& f,
                                   const FixedPointOptions& options = {});

/// CSV with header iter,residual,energy.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

/// Gauss–Hermite rule for E[f(G)], G ~ N(0,1): returns (nodes, weights) with
/// weights summing to 1.
std::pair<Vector, Vector> gauss_hermite_normal(int nodes);

/// q = E tanh²(β²q + λ²/σ² + sqrt(β²q + λ²/σ²) G), β in [0, 1/4].
double sk_overlap(double beta, double t, int quad_nodes = 61);
/// c_t = β²(1 - q_t).
double sk_correction(double beta, double t, int quad_nodes = 61);

}  // namespace dlab
