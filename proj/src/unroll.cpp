#include "dlab/unroll.hpp"

#include "dlab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace dlab {

const char* net_kind_name(NetKind kind) {
  switch (kind) {
    case NetKind::Generic: return "generic";
    case NetKind::Ising: return "ising";
    case NetKind::Marginal: return "marginal";
    case NetKind::Conditional: return "conditional";
    case NetKind::Sparse: return "sparse";
  }
  return "generic";
}

NetKind net_kind_from_name(const std::string& name) {
  for (NetKind k : {NetKind::Generic, NetKind::Ising, NetKind::Marginal,
                    NetKind::Conditional, NetKind::Sparse}) {
    if (name == net_kind_name(k)) return k;
  }
  throw Error(ErrorCode::Parse, "unknown network kind '" + name + "'");
}

void ResNetWeights::validate() const {
  auto check = [](bool ok, const std::string& what) {
    require(ok, ErrorCode::ShapeMismatch, "weights: " + what);
  };
  check(d >= 1 && D >= 1 && L >= 0 && M >= 0, "dimensions must be positive");
  check(w_in.rows() == D && w_in.cols() >= d + 1, "W_in must be D x (input+1)");
  check(w_out.rows() == d && w_out.cols() == D, "W_out must be d x D");
  check(static_cast<int>(blocks.size()) == L, "block count differs from L");
  for (const auto& b : blocks) {
    check(b.w1.rows() == D && b.w1.cols() == M, "W1 must be D x M");
    check(b.w2.rows() == M && b.w2.cols() == D, "W2 must be M x D");
  }
}

ResNetWeights zero_weights(int d, int theta_dim, int D, int L, int M) {
  ResNetWeights w;
  w.d = d;
  w.m = theta_dim;
  w.D = D;
  w.L = L;
  w.M = M;
  w.w_in = Matrix::Zero(D, d + theta_dim + 1);
  w.w_out = Matrix::Zero(d, D);
  w.blocks.assign(static_cast<std::size_t>(L),
                  ResNetBlock{Matrix::Zero(D, M), Matrix::Zero(M, D)});
  return w;
}

Vector resnet_forward(const ResNetWeights& w, const Vector& z,
                      const Vector& theta, const LayerObserver& observer) {
  require(z.size() == w.d, ErrorCode::ShapeMismatch,
          "input has length " + std::to_string(z.size()) + ", network expects " +
              std::to_string(w.d));
  require(theta.size() == w.theta_dim(), ErrorCode::ShapeMismatch,
          "theta has length " + std::to_string(theta.size()) +
              ", network expects " + std::to_string(w.theta_dim()));
  const Index in = w.w_in.cols();
  Vector u = w.w_in.leftCols(w.d) * z + w.w_in.col(in - 1);
  if (theta.size() > 0) u += w.w_in.middleCols(w.d, theta.size()) * theta;
  if (observer) observer(0, u);
  Vector hidden;
  for (std::size_t l = 0; l < w.blocks.size(); ++l) {
    hidden.noalias() = w.blocks[l].w2 * u;
    hidden = hidden.cwiseMax(0.0);
    u.noalias() += w.blocks[l].w1 * hidden;
    if (observer) observer(static_cast<int>(l) + 1, u);
  }
  return w.w_out * u;
}

namespace {

// Offset and width of the constant channel of a constructed net.
std::pair<Index, Index> ones_channel(const ResNetWeights& w) {
  switch (w.kind) {
    case NetKind::Ising: return {2 * w.d, w.d};
    case NetKind::Marginal: return {2 * (w.d + w.m), w.d + w.m};
    case NetKind::Conditional: return {3 * w.d, w.d};
    case NetKind::Sparse: return {2 * w.m, w.m};
    case NetKind::Generic: break;
  }
  return {0, 0};
}

}  // namespace

Vector resnet_forward_checked(const ResNetWeights& w, const Vector& z,
                              const Vector& theta) {
  const auto [offset, width] = ones_channel(w);
  return resnet_forward(w, z, theta, [&, offset = offset, width = width](
                                         int layer, const Vector& u) {
    for (Index i = offset; i < offset + width; ++i) {
      require(u(i) == 1.0, ErrorCode::InvalidArgument,
              "constant channel drifted at layer " + std::to_string(layer));
    }
  });
}

double weight_norm(const ResNetWeights& w) {
  double norm = std::max(operator_norm(w.w_in), operator_norm(w.w_out));
  for (const auto& b : w.blocks) {
    norm = std::max(norm, operator_norm(b.w1) + operator_norm(b.w2));
  }
  return norm;
}

namespace {

struct FieldTerm {
  Index offset;   // column offset of an n-wide state channel
  double scale;   // coefficient times identity
};

// Fills one residual block implementing it ← f(U it + Σ fields) on the first
// n coordinates, using the ±ReLU pairs for identity and constant terms.
ResNetBlock make_block(const Matrix& u, const std::vector<FieldTerm>& fields,
                       Index ones_offset, Index D, const PwlDenoiser& pwl) {
  const Index n = u.rows();
  const Index nk = static_cast<Index>(pwl.knots.size());
  const Index M = (nk + 4) * n;
  const Matrix eye = Matrix::Identity(n, n);
  ResNetBlock b{Matrix::Zero(D, M), Matrix::Zero(M, D)};
  for (Index j = 0; j < nk; ++j) {
    const Index r = j * n;
    b.w2.block(r, 0, n, n) = u;
    for (const auto& f : fields) b.w2.block(r, f.offset, n, n) += f.scale * eye;
    b.w2.block(r, ones_offset, n, n) = -pwl.knots[j].breakpoint * eye;
    b.w1.block(0, r, n, n) = pwl.knots[j].slope * eye;
  }
  const Index base = nk * n;
  b.w2.block(base, 0, n, n) = eye;
  b.w2.block(base + n, 0, n, n) = -eye;
  b.w2.block(base + 2 * n, ones_offset, n, n) = eye;
  b.w2.block(base + 3 * n, ones_offset, n, n) = -eye;
  b.w1.block(0, base, n, n) = -eye;
  b.w1.block(0, base + n, n, n) = eye;
  b.w1.block(0, base + 2 * n, n, n) = pwl.a0 * eye;
  b.w1.block(0, base + 3 * n, n, n) = -pwl.a0 * eye;
  return b;
}

void require_contraction(const Matrix& u, double pi, const char* what) {
  const double norm = operator_norm(u);
  require(pi * pi * norm < 1.0, ErrorCode::ContractionViolation,
          std::string(what) + ": Pi^2 * ||U||_op = " +
              std::to_string(pi * pi * norm) + " is not below 1");
}

void fill_blocks(ResNetWeights& w, int L, const ResNetBlock& block) {
  require(L >= 0, ErrorCode::InvalidArgument, "L must be >= 0");
  w.L = L;
  w.M = static_cast<int>(block.w1.cols());
  w.blocks.assign(static_cast<std::size_t>(L), block);
}

int knot_blocks(const PwlDenoiser& pwl) {
  return static_cast<int>(pwl.knots.size()) + 4;
}

}  // namespace

ResNetWeights unroll_ising(const Matrix& a, const Matrix& k, double t, int L,
                           const PwlDenoiser& pwl) {
  const NoiseLevel nl = noise_level(t);
  const Index d = a.rows();
  require(a.cols() == d && k.rows() == d && k.cols() == d, ErrorCode::ShapeMismatch,
          "A and K must be d x d");
  const Matrix u = a - k;
  require_contraction(u, pwl.bound, "unroll_ising");

  ResNetWeights w;
  w.kind = NetKind::Ising;
  w.d = static_cast<int>(d);
  w.m = 0;
  w.D = static_cast<int>(3 * d);
  w.t = t;
  w.zeta = pwl.zeta;
  w.w_in = Matrix::Zero(3 * d, d + 1);
  w.w_in.block(d, 0, d, d) = Matrix::Identity(d, d) / nl.sigma2;
  w.w_in.block(2 * d, d, d, 1).setOnes();
  fill_blocks(w, L, make_block(u, {{d, nl.lambda}}, 2 * d, 3 * d, pwl));
  w.M = knot_blocks(pwl) * static_cast<int>(d);
  w.w_out = Matrix::Zero(d, 3 * d);
  w.w_out.block(0, 0, d, d) = Matrix::Identity(d, d) * (nl.lambda / nl.sigma2);
  w.w_out.block(0, d, d, d) = -Matrix::Identity(d, d);
  w.bound = ising_norm_bound(pwl.zeta, t, w.d);
  return w;
}

ResNetWeights unroll_marginal(const BlockIsingModel& model, const Matrix& k,
                              double t, int L, const PwlDenoiser& pwl) {
  const NoiseLevel nl = noise_level(t);
  const Index d = model.dim(), m = model.latent_dim(), n = d + m;
  require(k.rows() == n && k.cols() == n, ErrorCode::ShapeMismatch,
          "K must be (d+m) x (d+m)");
  const Matrix u = model.joint_coupling() - k;
  require_contraction(u, pwl.bound, "unroll_marginal");

  ResNetWeights w;
  w.kind = NetKind::Marginal;
  w.d = static_cast<int>(d);
  w.m = static_cast<int>(m);
  w.D = static_cast<int>(3 * n);
  w.t = t;
  w.zeta = pwl.zeta;
  w.w_in = Matrix::Zero(3 * n, d + 1);
  w.w_in.block(n, 0, d, d) = Matrix::Identity(d, d) / nl.sigma2;
  w.w_in.block(2 * n, d, n, 1).setOnes();
  fill_blocks(w, L, make_block(u, {{n, nl.lambda}}, 2 * n, 3 * n, pwl));
  w.M = knot_blocks(pwl) * static_cast<int>(n);
  w.w_out = Matrix::Zero(d, 3 * n);
  w.w_out.block(0, 0, d, d) = Matrix::Identity(d, d) * (nl.lambda / nl.sigma2);
  w.w_out.block(0, n, d, d) = -Matrix::Identity(d, d);
  w.bound = marginal_norm_bound(pwl.zeta, t, w.d, w.m);
  return w;
}

ResNetWeights unroll_conditional(const Matrix& a11, const Matrix& a12,
                                 const Matrix& k, double t, int L,
                                 const PwlDenoiser& pwl) {
  const NoiseLevel nl = noise_level(t);
  const Index d = a11.rows(), m = a12.cols();
  require(a11.cols() == d && a12.rows() == d && k.rows() == d && k.cols() == d,
          ErrorCode::ShapeMismatch, "A11, K must be d x d and A12 d x m");
  const Matrix u = a11 - k;
  require_contraction(u, pwl.bound, "unroll_conditional");

  ResNetWeights w;
  w.kind = NetKind::Conditional;
  w.d = static_cast<int>(d);
  w.m = static_cast<int>(m);
  w.D = static_cast<int>(4 * d);
  w.t = t;
  w.zeta = pwl.zeta;
  w.w_in = Matrix::Zero(4 * d, d + m + 1);
  w.w_in.block(d, 0, d, d) = Matrix::Identity(d, d) / nl.sigma2;
  w.w_in.block(2 * d, d, d, m) = a12;
  w.w_in.block(3 * d, d + m, d, 1).setOnes();
  fill_blocks(w, L, make_block(u, {{d, nl.lambda}, {2 * d, 1.0}}, 3 * d, 4 * d, pwl));
  w.M = knot_blocks(pwl) * static_cast<int>(d);
  w.w_out = Matrix::Zero(d, 4 * d);
  w.w_out.block(0, 0, d, d) = Matrix::Identity(d, d) * (nl.lambda / nl.sigma2);
  w.w_out.block(0, d, d, d) = -Matrix::Identity(d, d);
  w.bound = conditional_norm_bound(pwl.zeta, t, w.d, operator_norm(a12));
  return w;
}

ResNetWeights unroll_sparse(const SparseCodingModel& model, const Matrix& k_t,
                            double t, int L, const PwlDenoiser& pwl) {
  const NoiseLevel nl = noise_level(t);
  const Matrix& a = model.dictionary();
  const Index d = a.rows(), m = a.cols();
  require(k_t.rows() == m && k_t.cols() == m, ErrorCode::ShapeMismatch,
          "K_t must be m x m");
  const double tau_bar2 = sparse_effective_noise(model, t);
  const double tau = model.noise_sd();
  const double denom = nl.sigma2 + tau * tau * nl.lambda * nl.lambda;
  const Matrix u = k_t - a.transpose() * a / tau_bar2;
  const double pi = std::max(pwl.bound, model.support_bound());
  require_contraction(u, pi, "unroll_sparse");

  ResNetWeights w;
  w.kind = NetKind::Sparse;
  w.d = static_cast<int>(d);
  w.m = static_cast<int>(m);
  w.D = static_cast<int>(3 * m + d);
  w.t = t;
  w.zeta = pwl.zeta;
  w.w_in = Matrix::Zero(3 * m + d, d + 1);
  w.w_in.block(m, 0, m, d) = a.transpose() / (tau_bar2 * nl.lambda);
  w.w_in.block(2 * m, d, m, 1).setOnes();
  w.w_in.block(3 * m, 0, d, d) = Matrix::Identity(d, d);
  fill_blocks(w, L, make_block(u, {{m, 1.0}}, 2 * m, 3 * m + d, pwl));
  w.M = knot_blocks(pwl) * static_cast<int>(m);
  w.w_out = Matrix::Zero(d, 3 * m + d);
  w.w_out.block(0, 0, d, m) = a * (nl.lambda / denom);
  w.w_out.block(0, 3 * m, d, d) = -Matrix::Identity(d, d) / denom;
  w.bound = sparse_norm_bound(model, pwl.zeta, t, operator_norm(u),
                              pwl.max_breakpoint());
  return w;
}

ResNetWeights unroll_sparse(const SparseCodingModel& model, double c_t,
                            double t, int L, const PwlDenoiser& pwl) {
  const Index m = model.latent_dim();
  return unroll_sparse(model, Matrix::Identity(m, m) * c_t, t, L, pwl);
}

namespace {

double knot_factor(double zeta, double range) {
  require(zeta > 0.0, ErrorCode::InvalidArgument, "zeta must be positive");
  return std::ceil(range / zeta) - 1.0;
}

}  // namespace

double ising_norm_bound(double zeta, double t, int d) {
  const NoiseLevel nl = noise_level(t);
  return knot_factor(zeta, 2.0) * (4.0 + std::log(std::ceil(1.0 / zeta))) + 8.0 +
         1.0 / nl.sigma2 + std::sqrt(static_cast<double>(d));
}

double marginal_norm_bound(double zeta, double t, int d, int m) {
  return ising_norm_bound(zeta, t, d + m);
}

double conditional_norm_bound(double zeta, double t, int d, double a12_norm) {
  const NoiseLevel nl = noise_level(t);
  return knot_factor(zeta, 2.0) *
             (std::log(std::ceil(1.0 / zeta)) + 4.0 + a12_norm) +
         8.0 + 1.0 / nl.sigma2 + a12_norm + std::sqrt(static_cast<double>(d));
}

double sparse_norm_bound(const SparseCodingModel& model, double zeta, double t,
                         double a_norm, double w_zeta) {
  const NoiseLevel nl = noise_level(t);
  const double pi = model.support_bound();
  const double dict = operator_norm(model.dictionary());
  const double tau_bar2 = sparse_effective_noise(model, t);
  return knot_factor(zeta, 2.0 * pi) * (a_norm + 1.0 + 2.0 * pi * pi + w_zeta) +
         2.0 * pi + 6.0 + (dict + 1.0) / nl.sigma2 +
         dict / (tau_bar2 * nl.lambda) +
         std::sqrt(static_cast<double>(model.latent_dim()));
}

TruncationSpec TruncationSpec::ising(double t, int d) {
  const NoiseLevel nl = noise_level(t);
  return {nl.lambda / nl.sigma2 * std::sqrt(static_cast<double>(d)),
          1.0 / nl.sigma2, true};
}

TruncationSpec TruncationSpec::sparse(const SparseCodingModel& model, double t) {
  const NoiseLevel nl = noise_level(t);
  const double tau = model.noise_sd();
  const double denom = nl.sigma2 + tau * tau * nl.lambda * nl.lambda;
  const double radius = std::sqrt(static_cast<double>(model.latent_dim())) *
                        operator_norm(model.dictionary()) *
                        model.support_bound() * nl.lambda / denom;
  require(radius > 0.0, ErrorCode::InvalidArgument,
          "sparse truncation radius must be positive");
  return {radius, 1.0 / denom, true};
}

Vector truncate(const TruncationSpec& spec, const Vector& f_value,
                const Vector& z) {
  require(f_value.size() == z.size(), ErrorCode::ShapeMismatch,
          "score and input lengths differ");
  if (!spec.enabled) return f_value;
  return project_to_ball(f_value + spec.shift * z, spec.radius) - spec.shift * z;
}

}  // namespace dlab
