#include "dlab/diffusion.hpp"

#include "dlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

namespace dlab {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Exact: return "exact";
    case Provenance::FixedPoint: return "fixed-point";
    case Provenance::Unrolled: return "unrolled";
    case Provenance::Trained: return "trained";
  }
  return "exact";
}

Vector ScoreOracle::operator()(double t, const Vector& z,
                               const Vector& theta) const {
  require(z.size() == dim, ErrorCode::ShapeMismatch,
          "score input has the wrong dimension");
  require(theta.size() == theta_dim, ErrorCode::ShapeMismatch,
          "theta length does not match the score oracle");
  Vector out(dim);
  eval(t, z, theta, out);
  return out;
}

Vector forward_noise(const Vector& x, double t, const Vector& g) {
  const NoiseLevel nl = noise_level(t);
  require(g.size() == x.size(), ErrorCode::ShapeMismatch,
          "noise and data lengths differ");
  return nl.lambda * x + nl.sigma() * g;
}

Vector forward_noise(const Vector& x, double t, std::uint64_t seed) {
  noise_level(t);
  Rng rng(seed, 0);
  return forward_noise(x, t, rng.normal_vector(x.size()));
}

namespace {

void run_chains(const ScoreOracle& score, const TimeGrid& grid,
                const SampleOptions& opt, std::size_t begin, std::size_t end,
                std::vector<Vector>& out) {
  const int d = score.dim;
  const int n = grid.steps();
  std::vector<double> growth(n), drift(n), spread(n), query(n);
  for (int k = 0; k < n; ++k) {
    const double g = grid.gaps[k];
    growth[k] = std::exp(g);
    drift[k] = 2.0 * std::expm1(g);
    spread[k] = std::sqrt(std::expm1(2.0 * g));
    query[k] = grid.horizon - grid.times[k];
  }
  Vector s(d);
  for (std::size_t c = begin; c < end; ++c) {
    Rng rng(opt.seed, c);
    Vector y = rng.normal_vector(d);
    for (int k = 0; k < n; ++k) {
      score.eval(query[k], y, opt.theta, s);
      if (!s.allFinite()) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "score returned non-finite values at t_k = " << grid.times[k]
            << " (step " << k << ", chain " << c << ")";
        throw Error(ErrorCode::NonFinite, msg.str());
      }
      y = growth[k] * y + drift[k] * s;
      for (int i = 0; i < d; ++i) y(i) += spread[k] * rng.normal();
    }
    out[c] = std::move(y);
  }
}

}  // namespace

std::vector<Vector> ddpm_sample(const ScoreOracle& score, const TimeGrid& grid,
                                const SampleOptions& opt) {
  grid.validate();
  require(static_cast<bool>(score.eval) && score.dim >= 1,
          ErrorCode::InvalidArgument, "score oracle is empty");
  require(opt.theta.size() == score.theta_dim, ErrorCode::ShapeMismatch,
          "theta length does not match the score oracle");
  std::vector<Vector> out(opt.n_chains);
  const std::size_t workers = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(opt.threads, 1)), 1,
      std::max<std::size_t>(opt.n_chains, 1));
  if (workers == 1) {
    run_chains(score, grid, opt, 0, opt.n_chains, out);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t per = (opt.n_chains + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = std::min(opt.n_chains, w * per);
    const std::size_t e = std::min(opt.n_chains, b + per);
    pool.emplace_back([&, w, b, e] {
      try {
        run_chains(score, grid, opt, b, e, out);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return out;
}

}  // namespace dlab
