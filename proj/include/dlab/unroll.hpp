#pragma once

#include "dlab/core.hpp"
#include "dlab/models.hpp"
#include "dlab/variational.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dlab {

enum class NetKind { Generic, Ising, Marginal, Conditional, Sparse };

const char* net_kind_name(NetKind kind);
NetKind net_kind_from_name(const std::string& name);

struct ResNetBlock {
  Matrix w1;  // D × M
  Matrix w2;  // M × D
};

/// ResN_W(z) = W_out u⁽ᴸ⁾ with u⁽⁰⁾ = W_in [z; θ; 1] and
/// u⁽ˡ⁾ = u⁽ˡ⁻¹⁾ + W₁⁽ˡ⁾ ReLU(W₂⁽ˡ⁾ u⁽ˡ⁻¹⁾).
///
/// W_in is stored as D × (d + θ-length + 1) so it multiplies the input column
/// directly; W_out is stored as d × D.
struct ResNetWeights {
  NetKind kind = NetKind::Generic;
  int d = 0;
  int m = 0;  // latent / θ length (0 for plain Ising or generic nets)
  int D = 0;
  int L = 0;
  int M = 0;
  double bound = 0.0;  // declared B
  double t = 0.0;
  double zeta = 0.0;

  Matrix w_in;
  std::vector<ResNetBlock> blocks;
  Matrix w_out;

  int theta_dim() const { return static_cast<int>(w_in.cols()) - 1 - d; }
  /// Throws ShapeMismatch when matrices disagree with (d, D, L, M).
  void validate() const;
};

/// Zero-filled weights of the given shape.
ResNetWeights zero_weights(int d, int theta_dim, int D, int L, int M);

/// Called with (layer, u⁽ˡ⁾) for l = 0..L.
using LayerObserver = std::function<void(int, const Vector&)>;

Vector resnet_forward(const ResNetWeights& w, const Vector& z,
                      const Vector& theta = Vector(),
                      const LayerObserver& observer = nullptr);

/// Forward pass that also asserts the constant channel of a constructed net
/// stays exactly 1 at every layer (throws InvalidArgument otherwise).
Vector resnet_forward_checked(const ResNetWeights& w, const Vector& z,
                              const Vector& theta = Vector());

/// |||W||| = max(max_l ‖W₁⁽ˡ⁾‖ + ‖W₂⁽ˡ⁾‖, ‖W_in‖, ‖W_out‖).
double weight_norm(const ResNetWeights& w);

/// Net reproducing L steps of m ← f((A - K) m + λ_t z/σ_t²), output
/// (λ_t m̃ᴸ - z)/σ_t². D = 3d.
ResNetWeights unroll_ising(const Matrix& a, const Matrix& k, double t, int L,
                           const PwlDenoiser& pwl);
/// Same iteration on the joint coupling with field [λ_t z/σ_t²; 0]; output
/// uses the first d coordinates. D = 3(d+m). K is (d+m)×(d+m).
ResNetWeights unroll_marginal(const BlockIsingModel& model, const Matrix& k,
                              double t, int L, const PwlDenoiser& pwl);
/// Input [z; θ; 1]; iteration m ← f((A₁₁ - K) m + λ_t z/σ_t² + A₁₂θ). D = 4d.
ResNetWeights unroll_conditional(const Matrix& a11, const Matrix& a12,
                                 const Matrix& k, double t, int L,
                                 const PwlDenoiser& pwl);
/// e ← f((K_t - AᵀA/τ̄²) e + Aᵀz/(λ_t τ̄²)), output
/// λ_t A ẽᴸ/(σ_t²+τ²λ_t²) - z/(σ_t²+τ²λ_t²). D = 3m + d. `pwl` approximates
/// G'_t for the caller's ν_t, which is kept only as metadata here.
ResNetWeights unroll_sparse(const SparseCodingModel& model, const Matrix& k_t,
                            double t, int L, const PwlDenoiser& pwl);
ResNetWeights unroll_sparse(const SparseCodingModel& model, double c_t,
                            double t, int L, const PwlDenoiser& pwl);

/// Certified bounds on |||W||| for the constructions above.
double ising_norm_bound(double zeta, double t, int d);
double marginal_norm_bound(double zeta, double t, int d, int m);
double conditional_norm_bound(double zeta, double t, int d, double a12_norm);
/// `a_norm` bounds ‖AᵀA/τ̄² - K_t‖, `w_zeta` bounds max |w_j|.
double sparse_norm_bound(const SparseCodingModel& model, double zeta, double t,
                         double a_norm, double w_zeta);

/// P[f](z) = proj_R(f + c z) - c z; disabled specs pass f through.
struct TruncationSpec {
  double radius = 0.0;
  double shift = 0.0;
  bool enabled = false;

  static TruncationSpec none() { return {}; }
  /// R = λ_t σ_t⁻² √d, c = σ_t⁻².
  static TruncationSpec ising(double t, int d);
  /// R = √m ‖A‖ Π λ_t/(σ_t² + τ²λ_t²), c = 1/(σ_t² + τ²λ_t²).
  static TruncationSpec sparse(const SparseCodingModel& model, double t);
};

Vector truncate(const TruncationSpec& spec, const Vector& f_value,
                const Vector& z);

}  // namespace dlab
