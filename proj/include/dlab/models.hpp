#pragma once

#include "dlab/core.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace dlab {

// Spin configurations in {±1}^d are encoded as bit codes: bit i set means
// x_i = +1, clear means x_i = -1.

Vector spins_from_code(std::uint32_t code, int dim);
/// Coordinatewise sign rounding (x_i >= 0 maps to +1).
std::uint32_t code_from_spins(const Vector& x);

/// μ(x) ∝ exp(⟨x, A x⟩ / 2) on {±1}^d. A must be symmetric. Diagonal entries
/// are accepted; they only shift the log-weight of every state by the same
/// constant tr(A)/2.
class IsingModel {
 public:
  explicit IsingModel(Matrix coupling);

  const Matrix& coupling() const { return coupling_; }
  int dim() const { return static_cast<int>(coupling_.rows()); }

 private:
  Matrix coupling_;
};

/// Joint Ising model over (x, θ) ∈ {±1}^{d+m}:
/// μ(x, θ) ∝ exp(⟨x,A₁₁x⟩/2 + ⟨x,A₁₂θ⟩ + ⟨θ,A₂₂θ⟩/2).
class BlockIsingModel {
 public:
  BlockIsingModel(Matrix a11, Matrix a12, Matrix a22);

  const Matrix& a11() const { return a11_; }
  const Matrix& a12() const { return a12_; }
  const Matrix& a22() const { return a22_; }
  int dim() const { return static_cast<int>(a11_.rows()); }
  int latent_dim() const { return static_cast<int>(a22_.rows()); }

  /// The (d+m)×(d+m) coupling [A₁₁ A₁₂; A₁₂ᵀ A₂₂].
  Matrix joint_coupling() const;
  IsingModel joint() const { return IsingModel(joint_coupling()); }

 private:
  Matrix a11_, a12_, a22_;
};

struct PriorAtom {
  double value;
  double prob;
};

/// x = A θ + ε with θ_i iid from a finite prior on [-Π, Π] and
/// ε ~ N(0, τ² I).
class SparseCodingModel {
 public:
  /// support_bound <= 0 means "use max |atom|".
  SparseCodingModel(Matrix dictionary, std::vector<PriorAtom> prior,
                    double noise_sd, double support_bound = 0.0);

  const Matrix& dictionary() const { return dictionary_; }
  const std::vector<PriorAtom>& prior() const { return prior_; }
  double noise_sd() const { return noise_sd_; }
  double support_bound() const { return support_bound_; }
  int dim() const { return static_cast<int>(dictionary_.rows()); }
  int latent_dim() const { return static_cast<int>(dictionary_.cols()); }

 private:
  Matrix dictionary_;
  std::vector<PriorAtom> prior_;
  double noise_sd_;
  double support_bound_;
};

using Model = std::variant<IsingModel, BlockIsingModel, SparseCodingModel>;

/// Dimension of the observed vector x for any model.
int model_dim(const Model& model);

/// Exact probability table over spin configurations.
struct DiscreteDistribution {
  int dim = 0;
  std::vector<std::uint32_t> states;
  std::vector<double> probs;

  std::size_t size() const { return states.size(); }
  Vector spins(std::size_t i) const { return spins_from_code(states[i], dim); }
  /// Probability of a state code (0 when absent).
  double prob_of(std::uint32_t code) const;
  /// Throws when probabilities are negative, do not sum to one within 1e-12,
  /// or states repeat.
  void validate() const;
};

/// Posterior mean of x under exp(⟨x, A x⟩/2 + ⟨h, x⟩) on {±1}^d for many
/// fields h with a fixed coupling. Small d keeps a precomputed state table;
/// larger d streams states in Gray-code order. All sums are log-domain.
class IsingPosterior {
 public:
  explicit IsingPosterior(const Matrix& coupling);

  int dim() const { return dim_; }
  void mean(const Vector& field, Eigen::Ref<Vector> out) const;
  Vector mean(const Vector& field) const;

 private:
  void mean_streaming(const Vector& field, Eigen::Ref<Vector> out) const;

  int dim_;
  Matrix coupling_;
  bool tabulated_;
  Matrix states_;   // 2^d × d, rows are spin vectors
  Vector energies_; // ⟨x, A x⟩/2 per row
};

DiscreteDistribution enumerate_distribution(const IsingModel& model);

/// n iid draws via inverse CDF over the enumerated table. Deterministic in
/// (seed); uses stream 0 of the seed.
std::vector<Vector> sample(const IsingModel& model, std::size_t n,
                           std::uint64_t seed);

struct JointSample {
  Vector x;
  Vector theta;
};
std::vector<JointSample> sample_joint(const BlockIsingModel& model,
                                      std::size_t n, std::uint64_t seed);

/// m_t(z) = E[x | λ_t x + σ_t g = z].
Vector exact_denoiser(const IsingModel& model, double t, const Vector& z);
/// s_t(z) = (λ_t m_t(z) - z) / σ_t².
Vector exact_score(const IsingModel& model, double t, const Vector& z);

Vector exact_conditional_denoiser(const BlockIsingModel& model,
                                  const Vector& theta, double t, const Vector& z);
Vector exact_conditional_score(const BlockIsingModel& model, const Vector& theta,
                               double t, const Vector& z);
/// First d coordinates of the joint posterior mean given z (θ unobserved).
Vector exact_marginal_denoiser(const BlockIsingModel& model, double t,
                               const Vector& z);
Vector exact_marginal_score(const BlockIsingModel& model, double t,
                            const Vector& z);

std::vector<Vector> sparse_sample(const SparseCodingModel& model, std::size_t n,
                                  std::uint64_t seed);
/// e_t(z*) = E[θ | A θ + ε̄ = z*], ε̄ ~ N(0, τ̄² I), τ̄² = τ² + σ_t²/λ_t².
Vector sparse_exact_posterior_mean(const SparseCodingModel& model, double t,
                                   const Vector& z_star);
/// s_t(z) = (λ_t A e_t(z/λ_t) - z) / (τ²λ_t² + σ_t²).
Vector sparse_exact_score(const SparseCodingModel& model, double t,
                          const Vector& z);

/// τ̄_t² = τ² + σ_t²/λ_t².
double sparse_effective_noise(const SparseCodingModel& model, double t);

/// Symmetric Gaussian coupling with zero diagonal rescaled to the given
/// operator norm.
Matrix random_coupling(int dim, double op_norm, std::uint64_t seed);
/// A = β J, J ~ GOE(d) with off-diagonal variance 1/d, zero diagonal.
Matrix sk_coupling(int dim, double beta, std::uint64_t seed);

}  // namespace dlab
