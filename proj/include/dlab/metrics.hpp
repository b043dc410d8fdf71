#pragma once

#include "dlab/core.hpp"
#include "dlab/diffusion.hpp"
#include "dlab/models.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace dlab {

struct MseEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// E_z ‖ŝ(z) - s(z)‖²/d over z = λ_t x + σ_t g with x drawn from the model
/// (seed stream 0) and g from stream 1. Block models supply θ to
/// conditional oracles.
MseEstimate score_mse(const ScoreOracle& candidate, const ScoreOracle& reference,
                      const Model& model, double t, std::size_t n_mc,
                      std::uint64_t seed);

/// Same estimate on caller-supplied inputs.
MseEstimate score_mse_at(const ScoreOracle& candidate, const ScoreOracle& reference,
                         double t, const std::vector<Vector>& z,
                         const std::vector<Vector>& theta = {});

struct DiscreteReport {
  double value = 0.0;
  std::size_t n = 0;
  double pseudo_count = 0.0;
};

/// Sign-rounds each sample to a state code.
std::vector<std::uint32_t> round_to_codes(const std::vector<Vector>& samples);

/// KL(p ‖ q̂) with q̂(s) = (count(s) + α)/(n + α|support|).
DiscreteReport discrete_kl(const DiscreteDistribution& p,
                           const std::vector<std::uint32_t>& codes,
                           double pseudo_count = 0.5);
/// ½ Σ |p(s) - q̂(s)| with the unsmoothed empirical q̂; samples off the
/// support count fully.
DiscreteReport tv(const DiscreteDistribution& p,
                  const std::vector<std::uint32_t>& codes);

/// Law of sign(λ_t x + σ_t g) for x ~ p: each coordinate keeps its sign with
/// probability Φ(λ_t/σ_t). `p` must be a full table indexed by code.
DiscreteDistribution rounded_noised_distribution(const DiscreteDistribution& p,
                                                 double t);

/// Marginal table of the first d spins of a full joint table.
DiscreteDistribution leading_marginal(const DiscreteDistribution& joint, int d);

struct Moments {
  Vector mean;
  Matrix covariance;  // unbiased
};
Moments sample_moments(const std::vector<Vector>& samples);

/// 2 E‖X - Y‖ - E‖X - X'‖ - E‖Y - Y'‖ (U-statistics within samples).
double energy_distance(const std::vector<Vector>& x, const std::vector<Vector>& y);

struct EvalReport {
  double score_mse_per_dim = std::numeric_limits<double>::quiet_NaN();
  double score_mse_stderr = std::numeric_limits<double>::quiet_NaN();
  double kl = std::numeric_limits<double>::quiet_NaN();
  double tv = std::numeric_limits<double>::quiet_NaN();
  double energy_distance = std::numeric_limits<double>::quiet_NaN();
  Vector mean;
  Vector variance;
  std::size_t n = 0;
  std::map<std::string, std::string> metadata;

  /// Throws NonFinite / InvalidArgument when a present entry breaks the
  /// report invariants.
  void validate() const;
};

}  // namespace dlab
