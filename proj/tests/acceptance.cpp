// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include "dlab/diffusion.hpp"
#include "dlab/metrics.hpp"
#include "dlab/models.hpp"
#include "dlab/oracles.hpp"
#include "dlab/rng.hpp"
#include "dlab/schedule.hpp"
#include "dlab/training.hpp"
#include "dlab/unroll.hpp"
#include "dlab/variational.hpp"

#include "support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace dlab;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0,
                double e = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

double lam(double t) { return std::exp(-t); }
double s2(double t) { return 1 - std::exp(-2 * t); }

// 1. s·σ² + z = λ m, the denoiser against brute-force Bayes, and the score
// against finite differences of the enumerated log density.
Outcome oracle_identity() {
  const auto start = Clock::now();
  Rng rng(101, 0);
  double worst_id = 0, worst_bayes = 0, worst_fd = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int d = 1 + rep % 8;
    const Matrix a = random_coupling(d, uniform(rng, 0.05, 1.2), 1000 + rep);
    const IsingModel model(a);
    const double t = std::exp(uniform(rng, std::log(0.05), std::log(3.0)));
    const Vector x = sample(model, 1, 2000 + rep)[0];
    const Vector z = lam(t) * x + std::sqrt(s2(t)) * rng.normal_vector(d);
    const Vector s = exact_score(model, t, z), m = exact_denoiser(model, t, z);
    worst_id = std::max(worst_id, (s * s2(t) + z - lam(t) * m).lpNorm<Eigen::Infinity>());
    worst_bayes = std::max(worst_bayes,
                           (m - oracle::ising_denoiser(a, t, z)).lpNorm<Eigen::Infinity>());
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& y) { return oracle::ising_log_density(a, t, y); }, z, 1e-5);
    worst_fd = std::max(worst_fd, (fd - s).lpNorm<Eigen::Infinity>() /
                                      std::max(1.0, s.lpNorm<Eigen::Infinity>()));
  }
  const double secs = seconds_since(start);
  return {worst_id <= 1e-12 && worst_bayes <= 1e-12 && worst_fd <= 1e-5 && secs < 30,
          fmt("identity %.2e, brute force %.2e, fd rel %.2e, %.1fs", worst_id, worst_bayes,
              worst_fd, secs)};
}

// 2. E‖m̂ − m_t‖²/d ≤ 4/(1 − 2‖A‖) · ‖A‖_F²/d.
Outcome vb_consistency() {
  const auto start = Clock::now();
  const int d = 8, n_mc = 200;
  double worst_ratio = 0;
  bool ok = true;
  Rng rng(202, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const double norm = 0.05 + 0.35 * rep / 49.0;
    const Matrix a = random_coupling(d, norm, 3000 + rep);
    const IsingModel model(a);
    const double bound = 4.0 / (1 - 2 * oracle::spectral_norm(a)) * a.squaredNorm() / d;
    for (double t : {0.25, 0.5, 1.0, 2.0}) {
      const auto xs = sample(model, n_mc, 4000 + rep);
      double err = 0;
      for (const Vector& x : xs) {
        const Vector z = lam(t) * x + std::sqrt(s2(t)) * rng.normal_vector(d);
        const Vector mh =
            fixed_point_solve(ising_free_energy(a, Matrix::Zero(d, d), t, z),
                              ScalarDenoiser::tanh())
                .m;
        err += (mh - exact_denoiser(model, t, z)).squaredNorm() / d / n_mc;
      }
      ok = ok && err <= bound;
      worst_ratio = std::max(worst_ratio, err / bound);
    }
  }
  const double secs = seconds_since(start);
  return {ok && secs < 120, fmt("max error/bound %.3e over 200 cases, %.1fs", worst_ratio, secs)};
}

double knots(double zeta, double range) { return std::ceil(range / zeta) - 1; }

// 3. Constructed nets reproduce L pwl fixed-point steps and respect B.
Outcome unrolling_exactness() {
  const auto start = Clock::now();
  const int L = 6;
  const double zeta = 0.05;
  const PwlDenoiser pwl = build_pwl(ScalarDenoiser::tanh(), zeta);
  const auto f = [&](double v) { return pwl(v); };
  Rng rng(303, 0);
  double worst = 0;
  std::string why;
  bool norms = true;
  const auto check_norm = [&](const char* name, const ResNetWeights& w, double B) {
    if (weight_norm(w) > B) {
      norms = false;
      why += std::string(" ") + name + " norm over B;";
    }
  };
  for (double t : {0.3, 1.0}) {
    const double base = 8 + 1 / s2(t);
    {
      const int d = 5;
      const Matrix a = random_coupling(d, 0.6, 5000);
      const ResNetWeights w = unroll_ising(a, Matrix::Zero(d, d), t, L, pwl);
      for (int i = 0; i < 200; ++i) {
        const Vector z = 2.0 * rng.normal_vector(d);
        const Vector m = oracle::picard(a, lam(t) * z / s2(t), f, L);
        worst = std::max(worst, (resnet_forward_checked(w, z) - (lam(t) * m - z) / s2(t))
                                    .lpNorm<Eigen::Infinity>());
      }
      check_norm("ising", w, knots(zeta, 2) * (4 + std::log(std::ceil(1 / zeta))) + base +
                                 std::sqrt(double(d)));
    }
    const int d = 3, m = 2;
    const Matrix j = random_coupling(d + m, 0.5, 5001);
    const BlockIsingModel block(j.topLeftCorner(d, d), j.topRightCorner(d, m),
                                j.bottomRightCorner(m, m));
    {
      const ResNetWeights w = unroll_marginal(block, Matrix::Zero(d + m, d + m), t, L, pwl);
      for (int i = 0; i < 200; ++i) {
        const Vector z = 2.0 * rng.normal_vector(d);
        Vector h = Vector::Zero(d + m);
        h.head(d) = lam(t) * z / s2(t);
        const Vector mm = oracle::picard(j, h, f, L);
        worst = std::max(worst, (resnet_forward_checked(w, z) - (lam(t) * mm.head(d) - z) / s2(t))
                                    .lpNorm<Eigen::Infinity>());
      }
      check_norm("marginal", w, knots(zeta, 2) * (4 + std::log(std::ceil(1 / zeta))) + base +
                                    std::sqrt(double(d + m)));
    }
    {
      const Matrix a11 = block.a11(), a12 = block.a12();
      const ResNetWeights w = unroll_conditional(a11, a12, Matrix::Zero(d, d), t, L, pwl);
      for (int i = 0; i < 200; ++i) {
        const Vector z = 2.0 * rng.normal_vector(d);
        const Vector th = oracle::spins(static_cast<unsigned>(i) % 4, m);
        const Vector mm = oracle::picard(a11, lam(t) * z / s2(t) + a12 * th, f, L);
        worst = std::max(worst, (resnet_forward_checked(w, z, th) - (lam(t) * mm - z) / s2(t))
                                    .lpNorm<Eigen::Infinity>());
      }
      const double an = oracle::spectral_norm(a12);
      check_norm("conditional", w,
                 knots(zeta, 2) * (std::log(std::ceil(1 / zeta)) + 4 + an) + base + an +
                     std::sqrt(double(d)));
    }
    {
      const int ds = 4, ms = 3;
      const double tau = 0.5;
      const Matrix a = 0.4 * rng.normal_vector(ds * ms).reshaped(ds, ms);
      const SparseCodingModel model(a, {{-1.0, 0.3}, {0.0, 0.4}, {1.0, 0.3}}, tau);
      const double tb2 = tau * tau + s2(t) / (lam(t) * lam(t));
      const double nu = a.colwise().squaredNorm().mean() / tb2;
      const PwlDenoiser g = build_pwl(posterior_scalar(model.prior(), nu), zeta);
      const ResNetWeights w = unroll_sparse(model, nu, t, L, g);
      const Matrix u = nu * Matrix::Identity(ms, ms) - a.transpose() * a / tb2;
      const double denom = s2(t) + tau * tau * lam(t) * lam(t);
      for (int i = 0; i < 200; ++i) {
        const Vector z = 2.0 * rng.normal_vector(ds);
        const Vector e = oracle::picard(u, a.transpose() * z / (lam(t) * tb2),
                                        [&](double v) { return g(v); }, L);
        worst = std::max(worst, (resnet_forward_checked(w, z) - (lam(t) * a * e - z) / denom)
                                    .lpNorm<Eigen::Infinity>());
      }
      const double pi = 1.0, an = oracle::spectral_norm(a);
      const double B = knots(zeta, 2 * pi) *
                           (oracle::spectral_norm(u) + 1 + 2 * pi * pi + g.max_breakpoint()) +
                       2 * pi + 6 + (an + 1) / s2(t) + an / (tb2 * lam(t)) + std::sqrt(double(ms));
      check_norm("sparse", w, B);
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-9 && norms && secs < 60,
          fmt("max forward vs trace %.2e over 1600 inputs, %.1fs", worst, secs) + why};
}

// 4. ‖m̃ᵏ − m*‖/√d ≤ Π(Π²A)ᵏ + ζ/(1 − Π²A) with Π = 1 for tanh.
Outcome fixed_point_rate() {
  const auto start = Clock::now();
  const int d = 8, steps = 40;
  double worst = -1e9;
  Rng rng(404, 0);
  for (double A : {0.3, 0.5, 0.7}) {
    for (int rep = 0; rep < 20; ++rep) {
      const double zeta = rep % 2 ? 0.05 : 0.2;
      const PwlDenoiser pwl = build_pwl(ScalarDenoiser::tanh(), zeta);
      const FreeEnergySpec spec{random_coupling(d, A, 6000 + rep), 1.5 * rng.normal_vector(d), A};
      FixedPointOptions exact;
      exact.tol = 1e-14;
      const Vector star = fixed_point_solve(spec, ScalarDenoiser::tanh(), exact).m;
      FixedPointOptions opt;
      opt.steps = steps;
      opt.keep_iterates = true;
      const auto r = fixed_point_solve(spec, pwl, opt);
      for (int k = 0; k <= steps; ++k) {
        const double err = (r.iterates[k] - star).norm() / std::sqrt(double(d));
        worst = std::max(worst, err - (std::pow(A, k) + zeta / (1 - A)));
      }
    }
  }
  return {worst <= 1e-12,
          fmt("max error minus bound %.3e over 60 instances, %.1fs", worst, seconds_since(start))};
}

// 5. tanh pwl budgets.
Outcome tanh_pwl() {
  bool ok = true;
  std::string detail;
  const ScalarDenoiser th = ScalarDenoiser::tanh();
  for (double zeta : {0.2, 0.05, 0.01}) {
    const PwlDenoiser p = build_pwl(th, zeta);
    double sup = 0;
    for (int i = 0; i <= 400000; ++i) {
      const double x = -20 + 40.0 * i / 400000;
      sup = std::max(sup, std::abs(p(x) - std::tanh(x)));
    }
    double slopes = 0, wmax = 0;
    for (const auto& k : p.knots) {
      slopes += std::abs(k.slope);
      wmax = std::max(wmax, std::abs(k.breakpoint));
    }
    const double wcap = std::log(std::ceil(1 / zeta));
    ok = ok && sup <= zeta + 1e-12 && slopes <= 2 + 1e-12 && wmax <= wcap + 1e-12;
    detail += fmt(" zeta %g: sup %.4f, sum|a| %.4f, max|w| %.3f/%.3f;", zeta, sup, slopes, wmax,
                  wcap);
  }
  return {ok, detail.substr(1)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 6. Median rounded KL is non-increasing as κ shrinks at T = 5, δ ≈ 0.05.
Outcome sampling_trend() {
  const auto start = Clock::now();
  Matrix a(2, 2);
  a << 0, 0.6, 0.6, 0;
  const IsingModel model(a);
  const auto table = enumerate_distribution(model);
  const ScoreOracle score = exact_score_oracle(model);
  const double T = 5, delta = 0.05;
  const int seeds = 20;
  const std::size_t chains = 100000;
  double prev = INFINITY;
  bool mono = true;
  std::string detail;
  for (double kappa : {0.2, 0.1, 0.05}) {
    const int n0 = static_cast<int>(std::lround((T - 1) / kappa));
    const int tail = static_cast<int>(std::lround(std::log(1 / delta) / std::log1p(kappa)));
    const TimeGrid grid = two_phase_grid(kappa, n0, n0 + tail);
    const auto ref = rounded_noised_distribution(table, grid.delta);
    std::vector<double> kls;
    for (int s = 0; s < seeds; ++s) {
      SampleOptions opt;
      opt.n_chains = chains;
      opt.seed = static_cast<std::uint64_t>(s);
      kls.push_back(discrete_kl(ref, round_to_codes(ddpm_sample(score, grid, opt)), 0.5).value);
    }
    const double med = median(kls);
    mono = mono && med <= prev;
    prev = med;
    detail += fmt(" kappa %g: %.3e;", kappa, med);
  }
  const double secs = seconds_since(start);
  return {mono && secs < 600, "median KL" + detail + fmt(" %.0fs", secs)};
}

double& coord(ResNetWeights& w, int which, int r, int c) {
  const int nb = static_cast<int>(w.blocks.size());
  if (which == 0) return w.w_in(r % w.w_in.rows(), c % w.w_in.cols());
  if (which == 1) return w.w_out(r % w.w_out.rows(), c % w.w_out.cols());
  auto& b = w.blocks[(which - 2) / 2 % nb];
  Matrix& m = (which % 2 == 0) ? b.w1 : b.w2;
  return m(r % m.rows(), c % m.cols());
}

// 7. Gradient check, then a trained net within 2x of the unrolled baseline.
Outcome training_sanity() {
  const auto start = Clock::now();
  const int d = 4;
  const double t = 0.5;
  const Matrix a = random_coupling(d, 0.3, 7);
  const IsingModel model(a);

  double worst_grad = 0;
  {
    const TrainData small = make_train_data(sample(model, 64, 11), 12);
    const ResNetWeights w = init_weights(d, 0, {3 * d, 2, 16}, 1.5, 13);
    Rng rng(707, 0);
    for (bool trunc : {false, true}) {
      const TruncationSpec spec = trunc ? TruncationSpec::ising(t, d) : TruncationSpec::none();
      const Batch batch = full_batch(small);
      ResNetWeights g = erm_grad(w, small, batch, t, spec);
      for (int k = 0; k < 30; ++k) {
        const int which = static_cast<int>(rng.bits() % 6);
        const int r = static_cast<int>(rng.bits() % 64), c = static_cast<int>(rng.bits() % 64);
        ResNetWeights wp = w, wm = w;
        const double h = 1e-5;
        coord(wp, which, r, c) += h;
        coord(wm, which, r, c) -= h;
        const double fd =
            (erm_loss(wp, small, batch, t, spec) - erm_loss(wm, small, batch, t, spec)) / (2 * h);
        const double an = coord(g, which, r, c);
        worst_grad = std::max(worst_grad, std::abs(fd - an) / std::max(1e-3, std::abs(an)));
      }
    }
  }

  const TrainData data = make_train_data(sample(model, 20000, 21), 22);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.steps = 1500;
  cfg.batch_size = 256;
  cfg.bound = 50;
  cfg.seed = 23;
  const TruncationSpec spec = TruncationSpec::ising(t, d);
  const TrainResult trained = train_score(data, t, {3 * d, 4, 32}, cfg, spec);
  const ResNetWeights base = unroll_ising(a, Matrix::Zero(d, d), t, 4, build_pwl(ScalarDenoiser::tanh(), 0.4));
  const Model mdl = model;
  const ScoreOracle exact = exact_score_oracle(mdl);
  const auto trunc = default_truncation(mdl);
  const double mse_trained =
      score_mse(network_score_oracle({trained.weights}, Provenance::Trained, trunc), exact, mdl, t,
                20000, 24)
          .mean;
  const double mse_base =
      score_mse(network_score_oracle({base}, Provenance::Unrolled, trunc), exact, mdl, t, 20000, 24)
          .mean;
  const bool shape = base.L == 4 && base.M == 32;
  return {worst_grad <= 1e-5 && shape && mse_trained <= 2 * mse_base,
          fmt("grad rel %.2e; trained mse/d %.4f vs unrolled %.4f (L=4, M=32), %.1fs", worst_grad,
              mse_trained, mse_base, seconds_since(start))};
}

// 8. Sparse score against the mixture density, and the A = 0 Gaussian limit.
Outcome sparse_identity() {
  Rng rng(808, 0);
  double worst = 0, worst_gauss = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 2 + rep % 3, m = 1 + rep % 3;
    const Matrix a = rng.normal_vector(d * m).reshaped(d, m) / std::sqrt(double(d));
    std::vector<PriorAtom> prior;
    const int k = 2 + rep % 2;
    double total = 0;
    for (int j = 0; j < k; ++j) {
      prior.push_back({uniform(rng, -1.5, 1.5), uniform(rng, 0.2, 1.0)});
      total += prior.back().prob;
    }
    for (auto& p : prior) p.prob /= total;
    const double tau = uniform(rng, 0.2, 1.0), t = uniform(rng, 0.1, 2.0);
    const SparseCodingModel model(a, prior, tau);
    std::vector<double> atoms, probs;
    for (const auto& p : prior) {
      atoms.push_back(p.value);
      probs.push_back(p.prob);
    }
    const Vector z = 1.5 * rng.normal_vector(d);
    const Vector s = sparse_exact_score(model, t, z);
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& y) { return oracle::sparse_log_density(a, atoms, probs, tau, t, y); }, z,
        1e-4);
    worst = std::max(worst, (fd - s).lpNorm<Eigen::Infinity>() /
                                std::max(1.0, s.lpNorm<Eigen::Infinity>()));

    const SparseCodingModel flat(Matrix::Zero(d, m), prior, tau);
    const Vector g = -z / (s2(t) + tau * tau * lam(t) * lam(t));
    const Vector sg = sparse_exact_score(flat, t, z);
    worst_gauss = std::max(worst_gauss, ((sg - g).array().abs() / g.array().abs().max(1e-300))
                                            .maxCoeff());
  }
  return {worst <= 1e-6 && worst_gauss <= 1e-15,
          fmt("fd rel %.2e over 50 instances; A = 0 vs Gaussian rel %.1e", worst, worst_gauss)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {"oracle identity", oracle_identity},
      {"variational consistency", vb_consistency},
      {"unrolling exactness", unrolling_exactness},
      {"fixed-point rate", fixed_point_rate},
      {"tanh approximation", tanh_pwl},
      {"sampling trend", sampling_trend},
      {"training sanity", training_sanity},
      {"sparse score identity", sparse_identity},
  };
  int failures = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    Outcome o;
    try {
      o = all[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, all[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
