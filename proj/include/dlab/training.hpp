#pragma once

#include "dlab/core.hpp"
#include "dlab/unroll.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dlab {

/// Training pairs with frozen noise: z_i = λ_t x_i + σ_t g_i.
struct TrainData {
  std::vector<Vector> x;
  std::vector<Vector> g;
  std::vector<Vector> theta;  // empty, or one per sample for conditional nets

  std::size_t size() const { return x.size(); }
};

/// Draws g_i ~ N(0, I) once from Rng(seed, 0).
TrainData make_train_data(std::vector<Vector> x, std::uint64_t seed,
                          std::vector<Vector> theta = {});

/// Indices [begin, end) of a dataset, or an explicit list.
using Batch = std::vector<std::size_t>;
Batch full_batch(const TrainData& data);

/// (1/(n d)) Σ ‖g_i/σ_t + P_t[ResN_W](λ_t x_i + σ_t g_i)‖².
double erm_loss(const ResNetWeights& w, const TrainData& data, const Batch& batch,
                double t, const TruncationSpec& spec);

/// Per-sample squared norms (not divided by d) in batch order.
std::vector<double> erm_sample_losses(const ResNetWeights& w, const TrainData& data,
                                      const Batch& batch, double t,
                                      const TruncationSpec& spec);

/// Gradient of erm_loss, same shape as w. Outside the projection ball the
/// ball-projection Jacobian R/‖v‖ (I - v vᵀ/‖v‖²) is used.
ResNetWeights erm_grad(const ResNetWeights& w, const TrainData& data,
                       const Batch& batch, double t, const TruncationSpec& spec,
                       double* loss = nullptr);

struct TrainConfig {
  double learning_rate = 1e-2;
  int steps = 1000;
  std::size_t batch_size = 0;  // 0: full batch
  double bound = 50.0;         // B
  bool truncation = true;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  double divergence_threshold = 1e6;
};

struct TrainDims {
  int D = 0;
  int L = 0;
  int M = 0;
};

struct TrainResult {
  ResNetWeights weights;
  std::vector<double> loss_trace;  // loss before each step, then the final loss
};

/// IID uniform entries in [-1, 1] scaled by init_scale/√D, from Rng(seed, 1).
ResNetWeights init_weights(int d, int theta_dim, const TrainDims& dims,
                           double init_scale, std::uint64_t seed);

/// Rescales each matrix (or block pair) whose norm exceeds B so that
/// |||W||| <= B.
void project_weights(ResNetWeights& w, double bound);

/// Gradient descent with post-step norm projection. `spec` is the truncation
/// used when config.truncation is set.
TrainResult train_score(const TrainData& data, double t, const TrainDims& dims,
                        const TrainConfig& config, const TruncationSpec& spec,
                        std::optional<ResNetWeights> init = std::nullopt);

}  // namespace dlab
