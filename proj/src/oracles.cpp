#include "dlab/oracles.hpp"

#include "dlab/variational.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace dlab {

namespace {

// Thread-safe memo keyed by t; grid times repeat across chains.
template <typename V>
class TimeCache {
 public:
  template <typename F>
  V get(double t, F&& make) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = values_.find(t);
      if (it != values_.end()) return it->second;
    }
    V v = make();
    std::lock_guard<std::mutex> lock(mu_);
    return values_.emplace(t, std::move(v)).first->second;
  }

 private:
  std::mutex mu_;
  std::map<double, V> values_;
};

void tweedie(const NoiseLevel& nl, const Vector& z, Eigen::Ref<Vector> out) {
  out = (nl.lambda * out - z) / nl.sigma2;
}

ScoreOracle ising_exact(const Matrix& coupling, int dim) {
  auto post = std::make_shared<IsingPosterior>(coupling);
  ScoreOracle o;
  o.dim = dim;
  o.provenance = Provenance::Exact;
  o.eval = [post](double t, const Vector& z, const Vector&, Eigen::Ref<Vector> out) {
    const NoiseLevel nl = noise_level(t);
    thread_local Vector field;
    field = nl.snr_factor() * z;
    post->mean(field, out);
    tweedie(nl, z, out);
  };
  return o;
}

}  // namespace

ScoreOracle exact_score_oracle(const Model& model, bool conditional) {
  if (const auto* ising = std::get_if<IsingModel>(&model)) {
    return ising_exact(ising->coupling(), ising->dim());
  }
  if (const auto* block = std::get_if<BlockIsingModel>(&model)) {
    const int d = block->dim(), m = block->latent_dim();
    ScoreOracle o;
    o.dim = d;
    o.provenance = Provenance::Exact;
    if (conditional) {
      auto post = std::make_shared<IsingPosterior>(block->a11());
      const Matrix a12 = block->a12();
      o.theta_dim = m;
      o.eval = [post, a12](double t, const Vector& z, const Vector& theta,
                           Eigen::Ref<Vector> out) {
        const NoiseLevel nl = noise_level(t);
        const Vector field = a12 * theta + nl.snr_factor() * z;
        post->mean(field, out);
        tweedie(nl, z, out);
      };
    } else {
      auto post = std::make_shared<IsingPosterior>(block->joint_coupling());
      o.eval = [post, d, m](double t, const Vector& z, const Vector&,
                            Eigen::Ref<Vector> out) {
        const NoiseLevel nl = noise_level(t);
        Vector field = Vector::Zero(d + m);
        field.head(d) = nl.snr_factor() * z;
        out = post->mean(field).head(d);
        tweedie(nl, z, out);
      };
    }
    return o;
  }
  const auto& sparse = std::get<SparseCodingModel>(model);
  require(!conditional, ErrorCode::InvalidArgument,
          "sparse coding has no conditional score");
  ScoreOracle o;
  o.dim = sparse.dim();
  o.provenance = Provenance::Exact;
  o.eval = [sparse](double t, const Vector& z, const Vector&, Eigen::Ref<Vector> out) {
    out = sparse_exact_score(sparse, t, z);
  };
  return o;
}

ScoreOracle vi_score_oracle(const Model& model, const ViConfig& config) {
  FixedPointOptions opt;
  opt.steps = config.steps;
  opt.tol = config.tol;
  opt.energy = false;

  if (const auto* sparse = std::get_if<SparseCodingModel>(&model)) {
    require(!config.conditional, ErrorCode::InvalidArgument,
            "sparse coding has no conditional score");
    struct Setup {
      Matrix u;
      double u_norm;
      double nu;
      ScalarDenoiser g;
      PwlDenoiser pwl;
    };
    auto cache = std::make_shared<TimeCache<std::shared_ptr<Setup>>>();
    const SparseCodingModel model_copy = *sparse;
    ScoreOracle o;
    o.dim = sparse->dim();
    o.provenance = Provenance::FixedPoint;
    o.eval = [model_copy, cache, config, opt](double t, const Vector& z, const Vector&,
                                              Eigen::Ref<Vector> out) {
      const Matrix& a = model_copy.dictionary();
      const NoiseLevel nl = noise_level(t);
      const double tau_bar2 = sparse_effective_noise(model_copy, t);
      auto setup = cache->get(t, [&] {
        const Matrix gram = a.transpose() * a / tau_bar2;
        const double nu = sparse_default_nu(model_copy, t);
        Matrix u = Matrix::Identity(gram.rows(), gram.cols()) * nu - gram;
        ScalarDenoiser g = posterior_scalar(model_copy.prior(), nu);
        PwlDenoiser pwl = config.zeta > 0.0 ? build_pwl(g, config.zeta) : PwlDenoiser{};
        const double u_norm = operator_norm(u);
        return std::make_shared<Setup>(Setup{std::move(u), u_norm, nu, g, pwl});
      });
      FreeEnergySpec spec{setup->u, a.transpose() * (z / nl.lambda) / tau_bar2,
                          setup->u_norm};
      const Vector e = config.zeta > 0.0 ? fixed_point_solve(spec, setup->pwl, opt).m
                                         : fixed_point_solve(spec, setup->g, opt).m;
      const double tau = model_copy.noise_sd();
      const double denom = tau * tau * nl.lambda * nl.lambda + nl.sigma2;
      out = (nl.lambda * (a * e) - z) / denom;
    };
    return o;
  }

  Matrix coupling, a12;
  int d = 0, m = 0;
  if (const auto* ising = std::get_if<IsingModel>(&model)) {
    coupling = ising->coupling();
    d = ising->dim();
  } else {
    const auto& block = std::get<BlockIsingModel>(model);
    d = block.dim();
    m = block.latent_dim();
    if (config.conditional) {
      coupling = block.a11();
      a12 = block.a12();
    } else {
      coupling = block.joint_coupling();
    }
  }
  const Index n = coupling.rows();
  const auto pwl = std::make_shared<PwlDenoiser>(
      config.zeta > 0.0 ? build_pwl(ScalarDenoiser::tanh(), config.zeta) : PwlDenoiser{});
  auto norms = std::make_shared<TimeCache<std::pair<Matrix, double>>>();

  ScoreOracle o;
  o.dim = d;
  o.theta_dim = config.conditional ? m : 0;
  o.provenance = Provenance::FixedPoint;
  o.eval = [=](double t, const Vector& z, const Vector& theta, Eigen::Ref<Vector> out) {
    const NoiseLevel nl = noise_level(t);
    auto [u, a_norm] = norms->get(t, [&] {
      double c = 0.0;
      if (config.correction == ViConfig::Correction::Sk) c = sk_correction(config.beta, t);
      Matrix uu = coupling - c * Matrix::Identity(n, n);
      const double nrm = operator_norm(uu);
      return std::make_pair(std::move(uu), nrm);
    });
    Vector h = Vector::Zero(n);
    h.head(d) = nl.snr_factor() * z;
    if (config.conditional && m > 0) h += a12 * theta;
    FreeEnergySpec spec{std::move(u), std::move(h), a_norm};
    const Vector mm = config.zeta > 0.0
                          ? fixed_point_solve(spec, *pwl, opt).m
                          : fixed_point_solve(spec, ScalarDenoiser::tanh(), opt).m;
    out = mm.head(d);
    tweedie(nl, z, out);
  };
  return o;
}

double sparse_default_nu(const SparseCodingModel& model, double t) {
  const Matrix& a = model.dictionary();
  return a.colwise().squaredNorm().mean() / sparse_effective_noise(model, t);
}

ScoreOracle network_score_oracle(std::vector<ResNetWeights> nets,
                                 Provenance provenance,
                                 std::function<TruncationSpec(double)> truncation) {
  require(!nets.empty(), ErrorCode::EmptyInput, "no networks given");
  for (const auto& w : nets) w.validate();
  const int d = nets.front().d, theta = nets.front().theta_dim();
  for (const auto& w : nets) {
    require(w.d == d && w.theta_dim() == theta, ErrorCode::ShapeMismatch,
            "networks in a bundle must share input dimensions");
  }
  auto shared = std::make_shared<const std::vector<ResNetWeights>>(std::move(nets));
  ScoreOracle o;
  o.dim = d;
  o.theta_dim = theta;
  o.provenance = provenance;
  o.eval = [shared, truncation](double t, const Vector& z, const Vector& th,
                                Eigen::Ref<Vector> out) {
    const ResNetWeights* pick = nullptr;
    if (shared->size() == 1) {
      pick = &shared->front();
    } else {
      for (const auto& w : *shared) {
        if (std::abs(w.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
          pick = &w;
          break;
        }
      }
    }
    require(pick != nullptr, ErrorCode::InvalidArgument,
            "no network in the bundle for t = " + std::to_string(t));
    Vector f = resnet_forward(*pick, z, th);
    if (truncation) f = truncate(truncation(t), f, z);
    out = f;
  };
  return o;
}

std::function<TruncationSpec(double)> default_truncation(const Model& model) {
  if (const auto* sparse = std::get_if<SparseCodingModel>(&model)) {
    const SparseCodingModel copy = *sparse;
    return [copy](double t) { return TruncationSpec::sparse(copy, t); };
  }
  const int d = model_dim(model);
  return [d](double t) { return TruncationSpec::ising(t, d); };
}

}  // namespace dlab
