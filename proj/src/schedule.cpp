#include "dlab/schedule.hpp"

#include <cmath>
#include <string>

namespace dlab {

double NoiseLevel::sigma() const { return std::sqrt(sigma2); }

NoiseLevel noise_level(double t) {
  require(t > 0.0 && std::isfinite(t), ErrorCode::NonpositiveTime,
          "noise level requires t > 0, got " + std::to_string(t));
  // -expm1(-2t) keeps σ² accurate for small t.
  return NoiseLevel{t, std::exp(-t), -std::expm1(-2.0 * t)};
}

TimeGrid two_phase_grid(double kappa, int n0, int n) {
  require(kappa > 0.0 && kappa < 1.0, ErrorCode::InvalidArgument,
          "two-phase grid requires 0 < kappa < 1");
  require(n0 > 0 && n0 < n, ErrorCode::InvalidArgument,
          "two-phase grid requires 0 < n0 < n");

  TimeGrid grid;
  grid.kind = TimeGrid::Kind::TwoPhase;
  grid.kappa = kappa;
  grid.n0 = n0;
  grid.n = n;
  grid.horizon = n0 * kappa + 1.0;
  grid.delta = std::pow(1.0 + kappa, n0 - n);

  grid.times.resize(static_cast<std::size_t>(n) + 1);
  grid.gaps.resize(static_cast<std::size_t>(n));
  for (int k = 0; k <= n0; ++k) grid.times[k] = k * kappa;
  for (int k = 1; k <= n - n0; ++k) {
    grid.times[n0 + k] = grid.horizon - std::pow(1.0 + kappa, -k);
  }
  for (int k = 0; k < n0; ++k) grid.gaps[k] = kappa;
  for (int k = 0; k < n - n0; ++k) {
    grid.gaps[n0 + k] = kappa / std::pow(1.0 + kappa, k + 1);
  }
  grid.validate();
  return grid;
}

TimeGrid uniform_grid(double horizon, double delta, int n) {
  require(n > 0, ErrorCode::InvalidArgument, "uniform grid requires n > 0");
  require(delta > 0.0 && delta < horizon, ErrorCode::InvalidArgument,
          "uniform grid requires 0 < delta < horizon");
  TimeGrid grid;
  grid.kind = TimeGrid::Kind::Uniform;
  grid.n0 = n;
  grid.n = n;
  grid.horizon = horizon;
  grid.delta = delta;
  const double end = horizon - delta;
  grid.kappa = end / n;
  grid.times.resize(static_cast<std::size_t>(n) + 1);
  grid.gaps.assign(static_cast<std::size_t>(n), grid.kappa);
  for (int k = 0; k <= n; ++k) grid.times[k] = end * k / n;
  grid.validate();
  return grid;
}

void TimeGrid::validate() const {
  constexpr double tol = 1e-12;
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::InvalidArgument, "time grid invariant failed: " + what);
  };
  if (n <= 0 || static_cast<int>(times.size()) != n + 1 ||
      static_cast<int>(gaps.size()) != n) {
    fail("sizes");
  }
  if (times.front() != 0.0) fail("t_0 = 0");
  if (std::abs(times.back() - (horizon - delta)) > tol) fail("t_N = T - delta");

  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    if (!(gaps[k] > 0.0)) fail("positive gaps");
    if (std::abs(times[k + 1] - times[k] - gaps[k]) > tol) {
      fail("gap " + std::to_string(k) + " matches time difference");
    }
    sum += gaps[k];
  }
  if (std::abs(sum - times.back()) > tol) fail("sum of gaps = t_N");

  if (kind == Kind::TwoPhase) {
    if (std::abs(delta - std::pow(1.0 + kappa, n0 - n)) > tol) fail("delta");
    if (std::abs(times[n0] - (horizon - 1.0)) > tol) fail("t_{n0} = T - 1");
    for (int k = 0; k <= n0; ++k) {
      if (times[k] != k * kappa) fail("uniform phase times");
    }
    for (int k = 0; k < n; ++k) {
      const double cap = kappa * std::min(1.0, horizon - times[k + 1]);
      if (gaps[k] > cap + tol) fail("gap bound at step " + std::to_string(k));
    }
  }
}

}  // namespace dlab
