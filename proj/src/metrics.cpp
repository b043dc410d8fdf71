#include "dlab/metrics.hpp"

#include "dlab/rng.hpp"
#include "dlab/schedule.hpp"

#include <cmath>
#include <unordered_map>

namespace dlab {

MseEstimate score_mse_at(const ScoreOracle& candidate, const ScoreOracle& reference,
                         double t, const std::vector<Vector>& z,
                         const std::vector<Vector>& theta) {
  require(!z.empty(), ErrorCode::EmptyInput, "no evaluation points");
  require(candidate.dim == reference.dim, ErrorCode::ShapeMismatch,
          "candidate and reference scores differ in dimension");
  require(theta.empty() || theta.size() == z.size(), ErrorCode::ShapeMismatch,
          "theta must be given for every point or none");
  const Vector none;
  const double d = candidate.dim;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const Vector& th_c = candidate.theta_dim > 0 ? theta.at(i) : none;
    const Vector& th_r = reference.theta_dim > 0 ? theta.at(i) : none;
    const double e = (candidate(t, z[i], th_c) - reference(t, z[i], th_r)).squaredNorm() / d;
    sum += e;
    sum_sq += e * e;
  }
  const double n = static_cast<double>(z.size());
  MseEstimate est;
  est.n = z.size();
  est.mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1)) : 0.0;
  est.std_error = std::sqrt(var / n);
  return est;
}

MseEstimate score_mse(const ScoreOracle& candidate, const ScoreOracle& reference,
                      const Model& model, double t, std::size_t n_mc,
                      std::uint64_t seed) {
  require(n_mc > 0, ErrorCode::EmptyInput, "n_mc must be positive");
  require(candidate.dim == model_dim(model) && reference.dim == model_dim(model),
          ErrorCode::ShapeMismatch, "score dimension does not match the model");
  const NoiseLevel nl = noise_level(t);
  std::vector<Vector> xs, thetas;
  if (const auto* ising = std::get_if<IsingModel>(&model)) {
    xs = sample(*ising, n_mc, seed);
  } else if (const auto* block = std::get_if<BlockIsingModel>(&model)) {
    for (auto& s : sample_joint(*block, n_mc, seed)) {
      xs.push_back(std::move(s.x));
      thetas.push_back(std::move(s.theta));
    }
  } else {
    xs = sparse_sample(std::get<SparseCodingModel>(model), n_mc, seed);
  }
  Rng rng(seed, 1);
  std::vector<Vector> zs;
  zs.reserve(xs.size());
  for (const auto& x : xs) zs.push_back(nl.lambda * x + nl.sigma() * rng.normal_vector(x.size()));
  return score_mse_at(candidate, reference, t, zs, thetas);
}

std::vector<std::uint32_t> round_to_codes(const std::vector<Vector>& samples) {
  std::vector<std::uint32_t> codes;
  codes.reserve(samples.size());
  for (const auto& s : samples) codes.push_back(code_from_spins(s));
  return codes;
}

namespace {

// Counts per support index; returns samples that fall off the support.
std::size_t count_states(const DiscreteDistribution& p,
                         const std::vector<std::uint32_t>& codes,
                         std::vector<double>& counts) {
  require(!codes.empty(), ErrorCode::EmptyInput, "no samples");
  require(p.size() <= (std::size_t{1} << 20), ErrorCode::DimensionTooLarge,
          "support exceeds 2^20 states");
  counts.assign(p.size(), 0.0);
  bool indexed = true;
  for (std::size_t i = 0; i < p.size() && indexed; ++i) indexed = p.states[i] == i;
  std::size_t off = 0;
  if (indexed) {
    for (auto c : codes) {
      if (c < counts.size()) {
        counts[c] += 1.0;
      } else {
        ++off;
      }
    }
    return off;
  }
  std::unordered_map<std::uint32_t, std::size_t> index;
  for (std::size_t i = 0; i < p.size(); ++i) index.emplace(p.states[i], i);
  for (auto c : codes) {
    auto it = index.find(c);
    if (it == index.end()) {
      ++off;
    } else {
      counts[it->second] += 1.0;
    }
  }
  return off;
}

}  // namespace

DiscreteReport discrete_kl(const DiscreteDistribution& p,
                           const std::vector<std::uint32_t>& codes,
                           double pseudo_count) {
  require(pseudo_count > 0.0, ErrorCode::InvalidArgument,
          "KL smoothing needs a positive pseudo-count");
  std::vector<double> counts;
  count_states(p, codes, counts);
  const double n = static_cast<double>(codes.size());
  const double denom = n + pseudo_count * static_cast<double>(p.size());
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] <= 0.0) continue;
    const double q = (counts[i] + pseudo_count) / denom;
    kl += p.probs[i] * (std::log(p.probs[i]) - std::log(q));
  }
  return {std::max(kl, 0.0), codes.size(), pseudo_count};
}

DiscreteReport tv(const DiscreteDistribution& p,
                  const std::vector<std::uint32_t>& codes) {
  std::vector<double> counts;
  const std::size_t off = count_states(p, codes, counts);
  const double n = static_cast<double>(codes.size());
  double acc = static_cast<double>(off) / n;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p.probs[i] - counts[i] / n);
  return {std::min(1.0, 0.5 * acc), codes.size(), 0.0};
}

DiscreteDistribution rounded_noised_distribution(const DiscreteDistribution& p,
                                                 double t) {
  const NoiseLevel nl = noise_level(t);
  require(p.size() == (std::size_t{1} << p.dim), ErrorCode::InvalidArgument,
          "rounding needs the full state table");
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p.states[i] == i, ErrorCode::InvalidArgument,
            "rounding needs a table indexed by state code");
  }
  // P(sign(λx + σg) = x) = Φ(λ/σ).
  const double keep = 0.5 * std::erfc(-nl.lambda / nl.sigma() / std::sqrt(2.0));
  DiscreteDistribution out = p;
  std::vector<double>& q = out.probs;
  for (int bit = 0; bit < p.dim; ++bit) {
    const std::uint32_t mask = std::uint32_t{1} << bit;
    for (std::uint32_t s = 0; s < q.size(); ++s) {
      if (s & mask) continue;
      const double a = q[s], b = q[s | mask];
      q[s] = keep * a + (1.0 - keep) * b;
      q[s | mask] = keep * b + (1.0 - keep) * a;
    }
  }
  return out;
}

DiscreteDistribution leading_marginal(const DiscreteDistribution& joint, int d) {
  require(d >= 1 && d <= joint.dim, ErrorCode::InvalidArgument,
          "marginal dimension out of range");
  require(joint.size() == (std::size_t{1} << joint.dim), ErrorCode::InvalidArgument,
          "marginalization needs the full state table");
  DiscreteDistribution out;
  out.dim = d;
  out.states.resize(std::size_t{1} << d);
  out.probs.assign(out.states.size(), 0.0);
  for (std::size_t s = 0; s < out.states.size(); ++s) out.states[s] = static_cast<std::uint32_t>(s);
  const std::uint32_t mask = (std::uint32_t{1} << d) - 1;
  for (std::size_t i = 0; i < joint.size(); ++i) out.probs[joint.states[i] & mask] += joint.probs[i];
  return out;
}

Moments sample_moments(const std::vector<Vector>& samples) {
  require(!samples.empty(), ErrorCode::EmptyInput, "no samples");
  const Index d = samples.front().size();
  Moments mo;
  mo.mean = Vector::Zero(d);
  for (const auto& s : samples) {
    require(s.size() == d, ErrorCode::ShapeMismatch, "samples differ in dimension");
    mo.mean += s;
  }
  mo.mean /= static_cast<double>(samples.size());
  mo.covariance = Matrix::Zero(d, d);
  for (const auto& s : samples) {
    const Vector c = s - mo.mean;
    mo.covariance.noalias() += c * c.transpose();
  }
  if (samples.size() > 1) mo.covariance /= static_cast<double>(samples.size() - 1);
  return mo;
}

double energy_distance(const std::vector<Vector>& x, const std::vector<Vector>& y) {
  require(x.size() >= 2 && y.size() >= 2, ErrorCode::EmptyInput,
          "energy distance needs at least two samples per side");
  auto within = [](const std::vector<Vector>& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) acc += (s[i] - s[j]).norm();
    }
    return 2.0 * acc / (static_cast<double>(s.size()) * (s.size() - 1));
  };
  double cross = 0.0;
  for (const auto& a : x) {
    for (const auto& b : y) {
      require(a.size() == b.size(), ErrorCode::ShapeMismatch, "samples differ in dimension");
      cross += (a - b).norm();
    }
  }
  cross /= static_cast<double>(x.size()) * y.size();
  return 2.0 * cross - within(x) - within(y);
}

void EvalReport::validate() const {
  auto finite_if_set = [](double v, const char* name) {
    require(std::isnan(v) || std::isfinite(v), ErrorCode::NonFinite,
            std::string(name) + " is not finite");
  };
  finite_if_set(score_mse_per_dim, "score_mse_per_dim");
  finite_if_set(kl, "kl");
  finite_if_set(tv, "tv");
  require(std::isnan(kl) || kl >= 0.0, ErrorCode::InvalidArgument, "KL must be >= 0");
  require(std::isnan(tv) || (tv >= 0.0 && tv <= 1.0), ErrorCode::InvalidArgument,
          "TV must lie in [0, 1]");
  require(mean.allFinite() && variance.allFinite(), ErrorCode::NonFinite,
          "sample moments are not finite");
}

}  // namespace dlab
