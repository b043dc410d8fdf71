#include "dlab/variational.hpp"

#include "dlab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace dlab {

double binary_entropy(double m) {
  require(std::abs(m) < 1.0, ErrorCode::BoundaryArgument,
          "binary entropy needs |m| < 1, got " + std::to_string(m));
  const double p = 0.5 * (1.0 + m), q = 0.5 * (1.0 - m);
  return -(p * std::log(p) + q * std::log(q));
}

double tap_energy(const Matrix& u, const Vector& h, const Vector& m) {
  require(u.rows() == m.size() && u.cols() == m.size() && h.size() == m.size(),
          ErrorCode::ShapeMismatch, "energy arguments disagree in dimension");
  double entropy = 0.0;
  for (Index i = 0; i < m.size(); ++i) entropy += binary_entropy(m(i));
  return -entropy - 0.5 * m.dot(u * m) - h.dot(m);
}

double naive_vb_energy(const Matrix& a, const Vector& z, double t,
                       const Vector& m) {
  const NoiseLevel nl = noise_level(t);
  return tap_energy(a, nl.snr_factor() * z, m);
}

double vi_energy(const Matrix& a, const Matrix& k, const Vector& z, double t,
                 const Vector& m) {
  require(k.rows() == m.size() && k.cols() == m.size(), ErrorCode::ShapeMismatch,
          "K has the wrong shape");
  return naive_vb_energy(a, z, t, m) + 0.5 * m.dot(k * m);
}

ScalarDenoiser ScalarDenoiser::tanh() { return ScalarDenoiser(); }

ScalarDenoiser ScalarDenoiser::posterior(std::vector<PriorAtom> prior,
                                         double nu) {
  require(!prior.empty(), ErrorCode::EmptyInput, "prior has no atoms");
  require(std::isfinite(nu), ErrorCode::InvalidArgument, "nu must be finite");
  ScalarDenoiser f;
  f.kind_ = Kind::Posterior;
  f.nu_ = nu;
  f.lo_ = std::numeric_limits<double>::infinity();
  f.hi_ = -f.lo_;
  f.bound_ = 0.0;
  for (const auto& atom : prior) {
    require(atom.prob >= 0.0 && std::isfinite(atom.value),
            ErrorCode::InvalidArgument, "invalid prior atom");
    if (atom.prob == 0.0) continue;
    f.prior_.push_back(atom);
    f.lo_ = std::min(f.lo_, atom.value);
    f.hi_ = std::max(f.hi_, atom.value);
    f.bound_ = std::max(f.bound_, std::abs(atom.value));
  }
  require(!f.prior_.empty(), ErrorCode::EmptyInput,
          "prior has no atoms with positive mass");
  return f;
}

ScalarDenoiser posterior_scalar(std::vector<PriorAtom> prior, double nu) {
  return ScalarDenoiser::posterior(std::move(prior), nu);
}

double ScalarDenoiser::operator()(double x) const {
  if (kind_ == Kind::Tanh) return std::tanh(x);
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& atom : prior_) {
    top = std::max(top, std::log(atom.prob) + x * atom.value -
                            0.5 * nu_ * atom.value * atom.value);
  }
  double num = 0.0, den = 0.0;
  for (const auto& atom : prior_) {
    const double w = std::exp(std::log(atom.prob) + x * atom.value -
                              0.5 * nu_ * atom.value * atom.value - top);
    num += w * atom.value;
    den += w;
  }
  return std::clamp(num / den, lo_, hi_);
}

double PwlDenoiser::operator()(double x) const {
  double y = a0;
  for (const auto& k : knots) {
    if (x > k.breakpoint) y += k.slope * (x - k.breakpoint);
  }
  return y;
}

double PwlDenoiser::slope_sum() const {
  double s = 0.0;
  for (const auto& k : knots) s += std::abs(k.slope);
  return s;
}

double PwlDenoiser::max_breakpoint() const {
  double w = 0.0;
  for (const auto& k : knots) w = std::max(w, std::abs(k.breakpoint));
  return w;
}

namespace {

// Solves f(w) = level for a nondecreasing f whose range strictly contains level.
double solve_level(const ScalarDenoiser& f, double level) {
  double lo = -1.0, hi = 1.0;
  for (int i = 0; f(lo) >= level; ++i) {
    require(i < 60, ErrorCode::NonConvergence, "could not bracket level set");
    lo *= 2.0;
  }
  for (int i = 0; f(hi) < level; ++i) {
    require(i < 60, ErrorCode::NonConvergence, "could not bracket level set");
    hi *= 2.0;
  }
  for (int i = 0; i < 400 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

PwlDenoiser build_pwl(const ScalarDenoiser& target, double zeta) {
  require(zeta > 0.0 && std::isfinite(zeta), ErrorCode::InvalidArgument,
          "zeta must be positive");
  PwlDenoiser pwl;
  pwl.zeta = zeta;
  pwl.bound = target.bound();
  const double lo = target.range_min();
  const double range = target.range_max() - lo;
  if (range == 0.0) {
    pwl.a0 = lo;
    return pwl;
  }
  const int k = static_cast<int>(std::ceil(range / zeta));
  const double step = range / k;
  pwl.a0 = lo + step;

  std::vector<double> w(static_cast<std::size_t>(std::max(k - 1, 0)));
  for (int j = 1; j < k; ++j) w[j - 1] = solve_level(target, lo + j * step);

  // s[j] is the slope on [w_j, w_{j+1}], with s_0 = s_{K-1} = 0.
  std::vector<double> s(static_cast<std::size_t>(k), 0.0);
  for (int j = 1; j + 1 < k; ++j) s[j] = step / (w[j] - w[j - 1]);
  for (int j = 1; j < k; ++j) {
    pwl.knots.push_back({s[j] - s[j - 1], w[j - 1]});
  }
  return pwl;
}

FreeEnergySpec FreeEnergySpec::with_measured_norm(Matrix u, Vector h) {
  const double norm = operator_norm(u);
  return FreeEnergySpec{std::move(u), std::move(h), norm};
}

FreeEnergySpec ising_free_energy(const Matrix& a, const Matrix& k, double t,
                                 const Vector& z) {
  require(a.rows() == z.size() && a.cols() == z.size() && k.rows() == a.rows() &&
              k.cols() == a.cols(),
          ErrorCode::ShapeMismatch, "A, K and z disagree in dimension");
  const NoiseLevel nl = noise_level(t);
  return FreeEnergySpec::with_measured_norm(a - k, nl.snr_factor() * z);
}

FreeEnergySpec conditional_free_energy(const BlockIsingModel& model,
                                       const Matrix& k, const Vector& theta,
                                       double t, const Vector& z) {
  require(theta.size() == model.latent_dim() && z.size() == model.dim(),
          ErrorCode::ShapeMismatch, "theta or z has the wrong length");
  require(k.rows() == model.dim() && k.cols() == model.dim(),
          ErrorCode::ShapeMismatch, "K has the wrong shape");
  const NoiseLevel nl = noise_level(t);
  return FreeEnergySpec::with_measured_norm(
      model.a11() - k, model.a12() * theta + nl.snr_factor() * z);
}

namespace {

template <typename F>
FixedPointResult solve(const FreeEnergySpec& spec, const F& f, double pi,
                       const FixedPointOptions& opt) {
  const Matrix& u = spec.interaction;
  const Vector& h = spec.field;
  require(u.rows() == u.cols() && u.rows() == h.size(), ErrorCode::ShapeMismatch,
          "interaction and field disagree in dimension");
  require(pi * pi * spec.a_norm < 1.0, ErrorCode::ContractionViolation,
          "fixed-point map is not a contraction: Pi^2 * A_norm = " +
              std::to_string(pi * pi * spec.a_norm));
  const bool fixed = opt.steps >= 0;
  require(fixed || opt.tol > 0.0, ErrorCode::InvalidArgument,
          "tolerance must be positive");

  auto apply = [&](const Vector& m) {
    Vector pre = u * m + h;
    for (Index i = 0; i < pre.size(); ++i) pre(i) = f(pre(i));
    return pre;
  };
  auto energy_of = [&](const Vector& m) {
    if (!opt.energy || (m.array().abs() >= 1.0).any()) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    return tap_energy(u, h, m);
  };

  FixedPointResult res;
  Vector m = Vector::Zero(h.size());
  if (opt.keep_iterates) res.iterates.push_back(m);
  double prev_energy = energy_of(m);
  if (opt.trace) res.trace.push_back({0, 0.0, prev_energy});

  const int cap = fixed ? opt.steps : opt.max_steps;
  int iter = 0;
  while (iter < cap) {
    Vector next = apply(m);
    const double change = (next - m).template lpNorm<Eigen::Infinity>();
    require(next.allFinite(), ErrorCode::NonFinite, "fixed-point iterate is not finite");
    m = std::move(next);
    ++iter;
    const double e = energy_of(m);
    if (std::isfinite(e) && std::isfinite(prev_energy) && e > prev_energy + 1e-9) {
      ++res.energy_increases;
    }
    prev_energy = e;
    if (opt.trace) res.trace.push_back({iter, change, e});
    if (opt.keep_iterates) res.iterates.push_back(m);
    if (!fixed && change <= opt.tol) {
      res.converged = true;
      break;
    }
  }
  if (fixed) res.converged = true;
  require(res.converged, ErrorCode::NonConvergence,
          "fixed-point iteration did not converge within " +
              std::to_string(opt.max_steps) + " steps");
  res.iterations = iter;
  res.residual = (m - apply(m)).template lpNorm<Eigen::Infinity>();
  res.m = std::move(m);
  return res;
}

}  // namespace

FixedPointResult fixed_point_solve(const FreeEnergySpec& spec,
                                   const ScalarDenoiser& f,
                                   const FixedPointOptions& options) {
  return solve(spec, f, f.bound(), options);
}

FixedPointResult fixed_point_solve(const FreeEnergySpec& spec,
                                   const PwlDenoiser& f,
                                   const FixedPointOptions& options) {
  return solve(spec, f, f.bound, options);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iter,residual,energy\n";
  out.precision(17);
  for (const auto& row : trace) {
    out << row.iter << ',' << row.residual << ',';
    if (std::isfinite(row.energy)) out << row.energy;
    out << '\n';
  }
}

std::pair<Vector, Vector> gauss_hermite_normal(int nodes) {
  require(nodes >= 1, ErrorCode::InvalidArgument, "need at least one node");
  // Golub–Welsch on the Jacobi matrix of the probabilists' Hermite weight.
  Matrix jacobi = Matrix::Zero(nodes, nodes);
  for (int k = 1; k < nodes; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  Vector x = eig.eigenvalues();
  Vector w = eig.eigenvectors().row(0).transpose().array().square();
  return {x, w / w.sum()};
}

double sk_overlap(double beta, double t, int quad_nodes) {
  require(beta >= 0.0 && beta <= 0.25, ErrorCode::InvalidArgument,
          "SK overlap requires beta in [0, 1/4]");
  const NoiseLevel nl = noise_level(t);
  const double snr = nl.lambda * nl.lambda / nl.sigma2;
  const auto [x, w] = gauss_hermite_normal(quad_nodes);
  const double b2 = beta * beta;

  auto map = [&](double q) {
    const double g = b2 * q + snr;
    const double root = std::sqrt(g);
    double acc = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
      const double th = std::tanh(g + root * x(i));
      acc += w(i) * th * th;
    }
    return acc;
  };

  double q = 0.5;
  for (int it = 0; it < 10000; ++it) {
    const double next = map(q);
    if (std::abs(next - q) <= 1e-12) return next;
    q = 0.5 * q + 0.5 * next;
  }
  const double r = std::abs(map(q) - q);
  require(r <= 1e-10, ErrorCode::NonConvergence, "SK overlap did not converge");
  return q;
}

double sk_correction(double beta, double t, int quad_nodes) {
  return beta * beta * (1.0 - sk_overlap(beta, t, quad_nodes));
}

}  // namespace dlab
