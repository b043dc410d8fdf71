#pragma once

#include "dlab/diffusion.hpp"
#include "dlab/models.hpp"
#include "dlab/unroll.hpp"

#include <functional>
#include <vector>

namespace dlab {

/// Exact score of the model. Block models give the marginal score, or the
/// conditional score when `conditional` is set (θ of length m).
ScoreOracle exact_score_oracle(const Model& model, bool conditional = false);

/// Correction used by the variational oracle.
struct ViConfig {
  enum class Correction { None, Sk };
  Correction correction = Correction::None;
  double beta = 0.0;  // SK: K = β²(1 - q_t) I
  double zeta = 0.0;  // > 0: iterate with build_pwl(f, ζ) instead of f
  int steps = -1;     // >= 0: fixed number of steps, else solve to tol
  double tol = 1e-10;
  bool conditional = false;
};

/// Score from the fixed-point solution: Ising/block models use
/// m = f((A - K) m + h) with f = tanh; sparse coding uses G'_t with
/// ν = mean diag(AᵀA)/τ̄², K_t = ν I.
ScoreOracle vi_score_oracle(const Model& model, const ViConfig& config = {});

/// ν_t = mean diag(AᵀA)/τ̄_t², the scalar tilt used with K_t = ν_t I.
double sparse_default_nu(const SparseCodingModel& model, double t);

/// Scores from one network per time. A query at t uses the network whose t
/// matches within 1e-9 relative; a single network serves every t.
/// `truncation(t)` is applied to the network output when given.
ScoreOracle network_score_oracle(
    std::vector<ResNetWeights> nets, Provenance provenance,
    std::function<TruncationSpec(double)> truncation = nullptr);

/// Default truncation for a model: Ising (marginal/conditional use d) or
/// sparse ball; none for other cases.
std::function<TruncationSpec(double)> default_truncation(const Model& model);

}  // namespace dlab
