#pragma once

#include "dlab/core.hpp"

#include <vector>

namespace dlab {

/// Ornstein–Uhlenbeck noise level at time t: λ = e^{-t}, σ² = 1 - e^{-2t}.
struct NoiseLevel {
  double t;
  double lambda;
  double sigma2;

  double sigma() const;
  /// λ / σ², the signal-to-noise factor multiplying z in posterior tilts.
  double snr_factor() const { return lambda / sigma2; }
};

NoiseLevel noise_level(double t);

/// Discretization of [0, T - δ] for the reverse sampler. Stores the times
/// and the gaps redundantly; validate() checks that they agree.
struct TimeGrid {
  enum class Kind { TwoPhase, Uniform };

  Kind kind = Kind::TwoPhase;
  double kappa = 0.0;  // step size of the uniform phase (uniform grids: the step)
  int n0 = 0;          // number of uniform-phase steps
  int n = 0;           // total steps
  double horizon = 0.0;
  double delta = 0.0;
  std::vector<double> times;  // t_0 .. t_N
  std::vector<double> gaps;   // γ_0 .. γ_{N-1}

  int steps() const { return n; }

  /// Throws Error(InvalidArgument) when any grid invariant fails.
  void validate() const;
};

/// Uniform steps of length κ up to T - 1, then steps shrinking by 1/(1+κ)
/// until the terminal gap δ = (1+κ)^{n0-n}. Requires 0 < κ < 1 and
/// 0 < n0 < n.
TimeGrid two_phase_grid(double kappa, int n0, int n);

/// n equal steps covering [0, horizon - delta].
TimeGrid uniform_grid(double horizon, double delta, int n);

}  // namespace dlab
