#pragma once

#include "dlab/core.hpp"
#include "dlab/schedule.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dlab {

enum class Provenance { Exact, FixedPoint, Unrolled, Trained };

const char* provenance_name(Provenance p);

/// Uniform interface to ŝ_t. `eval(t, z, θ, out)` writes the score into out
/// (length dim). θ is empty for unconditional oracles. Must be safe for
/// concurrent calls.
struct ScoreOracle {
  using Fn = std::function<void(double, const Vector&, const Vector&,
                                Eigen::Ref<Vector>)>;

  Fn eval;
  int dim = 0;
  int theta_dim = 0;
  Provenance provenance = Provenance::Exact;

  Vector operator()(double t, const Vector& z,
                    const Vector& theta = Vector()) const;
};

/// z = λ_t x + σ_t g, g ~ N(0, I) from stream 0 of `seed`.
Vector forward_noise(const Vector& x, double t, std::uint64_t seed);
/// Same with an explicit g.
Vector forward_noise(const Vector& x, double t, const Vector& g);

struct SampleOptions {
  std::size_t n_chains = 1;
  std::uint64_t seed = 0;
  Vector theta;     // conditional sampling when non-empty
  int threads = 1;  // chains are split across workers; results do not change
};

/// DDPM exponential-integrator sampler:
/// Y_{k+1} = e^γ Y_k + 2(e^γ - 1) ŝ_{T-t_k}(Y_k) + sqrt(e^{2γ} - 1) G_k,
/// Y_0 ~ N(0, I). Chain c draws from Rng(seed, c). Returns Y_N per chain.
std::vector<Vector> ddpm_sample(const ScoreOracle& score, const TimeGrid& grid,
                                const SampleOptions& options);

}  // namespace dlab
