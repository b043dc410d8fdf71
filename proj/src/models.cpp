#include "dlab/models.hpp"

#include "dlab/rng.hpp"
#include "dlab/schedule.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>

namespace dlab {

namespace {

constexpr int kTableBits = 16;

void require_enumerable(int bits) {
  require(bits <= kMaxEnumerationBits, ErrorCode::DimensionTooLarge,
          "exact enumeration supports at most " +
              std::to_string(kMaxEnumerationBits) + " binary variables, got " +
              std::to_string(bits));
}

void require_finite(const Matrix& m, const char* what) {
  require(m.allFinite(), ErrorCode::InvalidArgument,
          std::string(what) + " has non-finite entries");
}

// Log-domain running accumulator of Σ w and Σ w·x.
struct WeightedMean {
  double max_log = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  Vector sum;

  explicit WeightedMean(Index d) : sum(Vector::Zero(d)) {}

  template <typename Derived>
  void add(double log_weight, const Eigen::MatrixBase<Derived>& x) {
    if (log_weight > max_log) {
      const double rescale = std::exp(max_log - log_weight);
      total *= rescale;
      sum *= rescale;
      max_log = log_weight;
    }
    const double w = std::exp(log_weight - max_log);
    total += w;
    sum += w * x;
  }

  Vector mean() const { return sum / total; }
};

// Visits every state of {±1}^d in Gray-code order, passing (code, x, ⟨x,Ax⟩/2).
template <typename Visitor>
void for_each_state(const Matrix& coupling, Visitor&& visit) {
  const int d = static_cast<int>(coupling.rows());
  Vector x = Vector::Constant(d, -1.0);
  Vector ax = coupling * x;
  double energy = 0.5 * x.dot(ax);
  std::uint32_t code = 0;
  visit(code, x, energy);
  const std::uint64_t count = std::uint64_t{1} << d;
  for (std::uint64_t k = 1; k < count; ++k) {
    const int i = std::countr_zero(k);
    const double xi = x(i);
    energy += -2.0 * xi * ax(i) + 2.0 * coupling(i, i);
    ax -= 2.0 * xi * coupling.col(i);
    x(i) = -xi;
    code ^= (std::uint32_t{1} << i);
    visit(code, x, energy);
  }
}

}  // namespace

Vector spins_from_code(std::uint32_t code, int dim) {
  Vector x(dim);
  for (int i = 0; i < dim; ++i) x(i) = (code >> i) & 1u ? 1.0 : -1.0;
  return x;
}

std::uint32_t code_from_spins(const Vector& x) {
  require(x.size() <= 32, ErrorCode::DimensionTooLarge,
          "state codes hold at most 32 spins");
  std::uint32_t code = 0;
  for (Index i = 0; i < x.size(); ++i) {
    if (x(i) >= 0.0) code |= std::uint32_t{1} << i;
  }
  return code;
}

IsingModel::IsingModel(Matrix coupling) : coupling_(std::move(coupling)) {
  require(coupling_.rows() >= 1, ErrorCode::InvalidArgument,
          "Ising model needs at least one spin");
  require_finite(coupling_, "coupling");
  require(is_symmetric(coupling_), ErrorCode::InvalidArgument,
          "coupling matrix must be symmetric");
}

BlockIsingModel::BlockIsingModel(Matrix a11, Matrix a12, Matrix a22)
    : a11_(std::move(a11)), a12_(std::move(a12)), a22_(std::move(a22)) {
  require(a11_.rows() >= 1, ErrorCode::InvalidArgument,
          "block Ising model needs d >= 1");
  require(is_symmetric(a11_) && is_symmetric(a22_), ErrorCode::InvalidArgument,
          "diagonal blocks must be symmetric");
  require(a12_.rows() == a11_.rows() && a12_.cols() == a22_.rows(),
          ErrorCode::ShapeMismatch, "A12 must be d x m");
  require_finite(a11_, "A11");
  require_finite(a12_, "A12");
  require_finite(a22_, "A22");
}

Matrix BlockIsingModel::joint_coupling() const {
  const Index d = a11_.rows(), m = a22_.rows();
  Matrix joint(d + m, d + m);
  joint.topLeftCorner(d, d) = a11_;
  joint.topRightCorner(d, m) = a12_;
  joint.bottomLeftCorner(m, d) = a12_.transpose();
  joint.bottomRightCorner(m, m) = a22_;
  return joint;
}

SparseCodingModel::SparseCodingModel(Matrix dictionary,
                                     std::vector<PriorAtom> prior,
                                     double noise_sd, double support_bound)
    : dictionary_(std::move(dictionary)),
      prior_(std::move(prior)),
      noise_sd_(noise_sd),
      support_bound_(support_bound) {
  require(dictionary_.rows() >= 1 && dictionary_.cols() >= 1,
          ErrorCode::InvalidArgument, "dictionary must be non-empty");
  require_finite(dictionary_, "dictionary");
  require(noise_sd_ > 0.0 && std::isfinite(noise_sd_),
          ErrorCode::InvalidArgument, "noise sd tau must be positive");
  require(!prior_.empty(), ErrorCode::EmptyInput, "prior has no atoms");
  double total = 0.0, largest = 0.0;
  for (const auto& atom : prior_) {
    require(atom.prob >= 0.0 && std::isfinite(atom.value),
            ErrorCode::InvalidArgument, "prior atoms need prob >= 0");
    total += atom.prob;
    largest = std::max(largest, std::abs(atom.value));
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorCode::InvalidArgument,
          "prior probabilities must sum to 1");
  if (support_bound_ <= 0.0) support_bound_ = largest;
  require(largest <= support_bound_, ErrorCode::InvalidArgument,
          "prior atoms must lie within [-Pi, Pi]");
}

int model_dim(const Model& model) {
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

double DiscreteDistribution::prob_of(std::uint32_t code) const {
  // Tables from enumerate_distribution are indexed by code.
  if (code < states.size() && states[code] == code) return probs[code];
  auto it = std::find(states.begin(), states.end(), code);
  return it == states.end() ? 0.0 : probs[it - states.begin()];
}

void DiscreteDistribution::validate() const {
  require(states.size() == probs.size(), ErrorCode::ShapeMismatch,
          "distribution support and probabilities differ in length");
  double total = 0.0;
  for (double p : probs) {
    require(p >= 0.0, ErrorCode::InvalidArgument, "negative probability");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorCode::InvalidArgument,
          "probabilities must sum to 1");
  std::unordered_set<std::uint32_t> seen(states.begin(), states.end());
  require(seen.size() == states.size(), ErrorCode::InvalidArgument,
          "support entries must be distinct");
}

IsingPosterior::IsingPosterior(const Matrix& coupling)
    : dim_(static_cast<int>(coupling.rows())), coupling_(coupling) {
  require_enumerable(dim_);
  tabulated_ = dim_ <= kTableBits;
  if (!tabulated_) return;
  const Index count = Index{1} << dim_;
  states_.resize(count, dim_);
  energies_.resize(count);
  for (Index code = 0; code < count; ++code) {
    Vector x = spins_from_code(static_cast<std::uint32_t>(code), dim_);
    states_.row(code) = x.transpose();
    energies_(code) = 0.5 * x.dot(coupling_ * x);
  }
}

void IsingPosterior::mean(const Vector& field, Eigen::Ref<Vector> out) const {
  require(field.size() == dim_ && out.size() == dim_, ErrorCode::ShapeMismatch,
          "field dimension does not match the model");
  if (!tabulated_) {
    mean_streaming(field, out);
    return;
  }
  thread_local Vector logits;
  logits.noalias() = states_ * field;
  logits += energies_;
  const double top = logits.maxCoeff();
  logits = (logits.array() - top).exp();
  const double total = logits.sum();
  out.noalias() = states_.transpose() * logits;
  out /= total;
}

Vector IsingPosterior::mean(const Vector& field) const {
  Vector out(dim_);
  mean(field, out);
  return out;
}

void IsingPosterior::mean_streaming(const Vector& field,
                                    Eigen::Ref<Vector> out) const {
  WeightedMean acc(dim_);
  double linear = -field.sum();  // ⟨h, x⟩ at x = -1
  Vector prev = Vector::Constant(dim_, -1.0);
  for_each_state(coupling_, [&](std::uint32_t, const Vector& x, double energy) {
    // Track ⟨h, x⟩ incrementally from the single flipped coordinate.
    for (int i = 0; i < dim_; ++i) {
      if (x(i) != prev(i)) {
        linear += 2.0 * x(i) * field(i);
        prev(i) = x(i);
        break;
      }
    }
    acc.add(energy + linear, x);
  });
  out = acc.mean();
}

DiscreteDistribution enumerate_distribution(const IsingModel& model) {
  const int d = model.dim();
  require_enumerable(d);
  const std::size_t count = std::size_t{1} << d;
  std::vector<double> log_weights(count);
  for_each_state(model.coupling(), [&](std::uint32_t code, const Vector&,
                                       double energy) {
    log_weights[code] = energy;
  });
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - top);
  const double log_z = top + std::log(total);

  DiscreteDistribution dist;
  dist.dim = d;
  dist.states.resize(count);
  dist.probs.resize(count);
  for (std::size_t code = 0; code < count; ++code) {
    dist.states[code] = static_cast<std::uint32_t>(code);
    dist.probs[code] = std::exp(log_weights[code] - log_z);
  }
  return dist;
}

namespace {

std::vector<std::uint32_t> draw_codes(const DiscreteDistribution& dist,
                                      std::size_t n, std::uint64_t seed) {
  std::vector<double> cdf(dist.probs.size());
  std::partial_sum(dist.probs.begin(), dist.probs.end(), cdf.begin());
  Rng rng(seed, 0);
  std::vector<std::uint32_t> codes;
  codes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    codes.push_back(dist.states[it - cdf.begin()]);
  }
  return codes;
}

}  // namespace

std::vector<Vector> sample(const IsingModel& model, std::size_t n,
                           std::uint64_t seed) {
  require_enumerable(model.dim());
  if (n == 0) return {};
  const auto dist = enumerate_distribution(model);
  std::vector<Vector> out;
  out.reserve(n);
  for (auto code : draw_codes(dist, n, seed)) {
    out.push_back(spins_from_code(code, model.dim()));
  }
  return out;
}

std::vector<JointSample> sample_joint(const BlockIsingModel& model,
                                      std::size_t n, std::uint64_t seed) {
  const int d = model.dim(), m = model.latent_dim();
  require_enumerable(d + m);
  if (n == 0) return {};
  const auto dist = enumerate_distribution(model.joint());
  std::vector<JointSample> out;
  out.reserve(n);
  for (auto code : draw_codes(dist, n, seed)) {
    Vector joint = spins_from_code(code, d + m);
    out.push_back({joint.head(d), joint.tail(m)});
  }
  return out;
}

Vector exact_denoiser(const IsingModel& model, double t, const Vector& z) {
  require_enumerable(model.dim());
  const NoiseLevel nl = noise_level(t);
  require(z.size() == model.dim(), ErrorCode::ShapeMismatch,
          "z has the wrong dimension");
  return IsingPosterior(model.coupling()).mean(nl.snr_factor() * z);
}

Vector exact_score(const IsingModel& model, double t, const Vector& z) {
  const NoiseLevel nl = noise_level(t);
  return (nl.lambda * exact_denoiser(model, t, z) - z) / nl.sigma2;
}

Vector exact_conditional_denoiser(const BlockIsingModel& model,
                                  const Vector& theta, double t,
                                  const Vector& z) {
  require_enumerable(model.dim() + model.latent_dim());
  const NoiseLevel nl = noise_level(t);
  require(theta.size() == model.latent_dim(), ErrorCode::ShapeMismatch,
          "theta length does not match the latent dimension");
  require(z.size() == model.dim(), ErrorCode::ShapeMismatch,
          "z has the wrong dimension");
  const Vector field = model.a12() * theta + nl.snr_factor() * z;
  return IsingPosterior(model.a11()).mean(field);
}

Vector exact_conditional_score(const BlockIsingModel& model, const Vector& theta,
                               double t, const Vector& z) {
  const NoiseLevel nl = noise_level(t);
  return (nl.lambda * exact_conditional_denoiser(model, theta, t, z) - z) /
         nl.sigma2;
}

Vector exact_marginal_denoiser(const BlockIsingModel& model, double t,
                               const Vector& z) {
  const int d = model.dim(), m = model.latent_dim();
  require_enumerable(d + m);
  const NoiseLevel nl = noise_level(t);
  require(z.size() == d, ErrorCode::ShapeMismatch, "z has the wrong dimension");
  Vector field = Vector::Zero(d + m);
  field.head(d) = nl.snr_factor() * z;
  return IsingPosterior(model.joint_coupling()).mean(field).head(d);
}

Vector exact_marginal_score(const BlockIsingModel& model, double t,
                            const Vector& z) {
  const NoiseLevel nl = noise_level(t);
  return (nl.lambda * exact_marginal_denoiser(model, t, z) - z) / nl.sigma2;
}

std::vector<Vector> sparse_sample(const SparseCodingModel& model, std::size_t n,
                                  std::uint64_t seed) {
  const auto& prior = model.prior();
  std::vector<double> cdf(prior.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < prior.size(); ++k) cdf[k] = (acc += prior[k].prob);

  Rng rng(seed, 0);
  std::vector<Vector> out;
  out.reserve(n);
  Vector theta(model.latent_dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (Index j = 0; j < theta.size(); ++j) {
      const double u = rng.uniform() * cdf.back();
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      theta(j) = prior[it - cdf.begin()].value;
    }
    Vector x = model.dictionary() * theta;
    for (Index k = 0; k < x.size(); ++k) x(k) += model.noise_sd() * rng.normal();
    out.push_back(std::move(x));
  }
  return out;
}

double sparse_effective_noise(const SparseCodingModel& model, double t) {
  const NoiseLevel nl = noise_level(t);
  const double tau = model.noise_sd();
  return tau * tau + nl.sigma2 / (nl.lambda * nl.lambda);
}

Vector sparse_exact_posterior_mean(const SparseCodingModel& model, double t,
                                   const Vector& z_star) {
  const int m = model.latent_dim();
  const auto& prior = model.prior();
  const std::size_t k = prior.size();
  require(z_star.size() == model.dim(), ErrorCode::ShapeMismatch,
          "z* has the wrong dimension");
  const double log_count = m * std::log2(static_cast<double>(k));
  require(log_count <= kMaxEnumerationBits + 1e-9, ErrorCode::SupportTooLarge,
          "prior support size^m exceeds 2^22 configurations");
  const double tau_bar2 = sparse_effective_noise(model, t);

  std::vector<double> log_prior(k);
  for (std::size_t a = 0; a < k; ++a) {
    log_prior[a] = prior[a].prob > 0.0 ? std::log(prior[a].prob)
                                       : -std::numeric_limits<double>::infinity();
  }

  std::vector<std::size_t> digits(m, 0);
  Vector theta(m);
  for (int j = 0; j < m; ++j) theta(j) = prior[0].value;
  WeightedMean acc(m);
  const Matrix& a = model.dictionary();
  while (true) {
    double log_w = 0.0;
    for (int j = 0; j < m; ++j) log_w += log_prior[digits[j]];
    if (std::isfinite(log_w)) {
      log_w -= (z_star - a * theta).squaredNorm() / (2.0 * tau_bar2);
      acc.add(log_w, theta);
    }
    int j = 0;
    while (j < m && ++digits[j] == k) {
      digits[j] = 0;
      theta(j) = prior[0].value;
      ++j;
    }
    if (j == m) break;
    theta(j) = prior[digits[j]].value;
  }
  return acc.mean();
}

Vector sparse_exact_score(const SparseCodingModel& model, double t,
                          const Vector& z) {
  const NoiseLevel nl = noise_level(t);
  const double tau = model.noise_sd();
  const double denom = tau * tau * nl.lambda * nl.lambda + nl.sigma2;
  const Vector e = sparse_exact_posterior_mean(model, t, z / nl.lambda);
  return (-z + nl.lambda * (model.dictionary() * e)) / denom;
}

Matrix random_coupling(int dim, double op_norm, std::uint64_t seed) {
  require(dim >= 1, ErrorCode::InvalidArgument, "dimension must be positive");
  require(op_norm >= 0.0, ErrorCode::InvalidArgument, "op norm must be >= 0");
  Rng rng(seed, 0);
  Matrix a = Matrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) a(i, j) = a(j, i) = rng.normal();
  }
  if (dim == 1 || op_norm == 0.0) return Matrix::Zero(dim, dim);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  const double norm = eig.eigenvalues().cwiseAbs().maxCoeff();
  return a * (op_norm / norm);
}

Matrix sk_coupling(int dim, double beta, std::uint64_t seed) {
  require(dim >= 1, ErrorCode::InvalidArgument, "dimension must be positive");
  Rng rng(seed, 0);
  Matrix a = Matrix::Zero(dim, dim);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) a(i, j) = a(j, i) = beta * sd * rng.normal();
  }
  return a;
}

}  // namespace dlab
