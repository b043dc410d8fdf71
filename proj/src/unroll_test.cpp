#include "dlab/unroll.hpp"
#include "dlab/models.hpp"
#include "dlab/rng.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

#include <cmath>

using namespace dlab;

namespace {

double lam(double t) { return std::exp(-t); }
double s2(double t) { return 1 - std::exp(-2 * t); }

ResNetWeights random_net(int d, int theta, int D, int L, int M, std::uint64_t seed) {
  Rng rng(seed, 0);
  ResNetWeights w = zero_weights(d, theta, D, L, M);
  w.w_in = rng.normal_vector(D * (d + theta + 1)).reshaped(D, d + theta + 1);
  for (auto& b : w.blocks) {
    b.w1 = rng.normal_vector(D * M).reshaped(D, M) / 3.0;
    b.w2 = rng.normal_vector(M * D).reshaped(M, D) / 3.0;
  }
  w.w_out = rng.normal_vector(d * D).reshaped(d, D);
  return w;
}

double ising_B(double zeta, double t, int d) {
  return (std::ceil(2 / zeta) - 1) * (4 + std::log(std::ceil(1 / zeta))) + 8 + 1 / s2(t) +
         std::sqrt(static_cast<double>(d));
}

}  // namespace

TEST_CASE("forward: zero blocks reduce to the affine map") {
  ResNetWeights w = random_net(3, 0, 6, 2, 5, 1);
  for (auto& b : w.blocks) {
    b.w1.setZero();
    b.w2.setZero();
  }
  Vector z(3);
  z << 0.3, -1.0, 2.0;
  Vector in(4);
  in << z, 1.0;
  CHECK((resnet_forward(w, z) - w.w_out * (w.w_in * in)).norm() < 1e-14);
  ResNetWeights w0 = w;
  w0.blocks.clear();
  w0.L = 0;
  CHECK((resnet_forward(w0, z) - w.w_out * (w.w_in * in)).norm() < 1e-14);
}

TEST_CASE("forward: straight-line oracle") {
  Rng rng(2, 2);
  for (int rep = 0; rep < 20; ++rep) {
    const ResNetWeights w = random_net(4, rep % 2, 7, 3, 9, 10 + rep);
    const Vector z = rng.normal_vector(4);
    const Vector th = rng.normal_vector(rep % 2);
    const Vector a = resnet_forward(w, z, th), b = oracle::resnet(w, z, th);
    CHECK((a - b).lpNorm<Eigen::Infinity>() <= 1e-14 * (1 + b.lpNorm<Eigen::Infinity>()) * 10);
  }
  const ResNetWeights w = random_net(4, 0, 7, 3, 9, 3);
  CHECK_THROWS_AS(resnet_forward(w, Vector::Zero(3)), Error);
}

TEST_CASE("weight norm") {
  ResNetWeights w = zero_weights(3, 0, 3, 1, 3);
  w.w_in = Matrix::Identity(3, 4);
  w.blocks[0].w1 = Matrix::Identity(3, 3);
  w.blocks[0].w2 = Matrix::Identity(3, 3);
  w.w_out = Matrix::Identity(3, 3);
  CHECK(std::abs(weight_norm(w) - 2.0) < 1e-10);
  CHECK(std::abs(operator_norm(Matrix::Identity(3, 3)) - 1.0) < 1e-12);
  Matrix dg = Matrix::Zero(2, 2);
  dg.diagonal() << 3, 1;
  CHECK(std::abs(operator_norm(dg) - 3.0) < 1e-10);
  Rng rng(4, 4);
  const Matrix r = rng.normal_vector(400).reshaped(20, 20);
  CHECK(std::abs(operator_norm(r) - oracle::spectral_norm(r)) < 1e-8);
}

TEST_CASE("unroll ising: forward equals the pwl trace") {
  const int d = 3, L = 4;
  const double zeta = 0.1, t = 0.7;
  const Matrix a = random_coupling(d, 0.6, 5);
  const PwlDenoiser pwl = build_pwl(ScalarDenoiser::tanh(), zeta);
  const ResNetWeights w = unroll_ising(a, Matrix::Zero(d, d), t, L, pwl);
  CHECK(w.D == 3 * d);
  CHECK(w.M == static_cast<int>(pwl.knots.size() + 4) * d);
  Rng rng(6, 6);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Vector z = 2.0 * rng.normal_vector(d);
    const Vector m = oracle::picard(a, lam(t) * z / s2(t), [&](double x) { return pwl(x); }, L);
    const Vector ref = (lam(t) * m - z) / s2(t);
    worst = std::max(worst, (resnet_forward_checked(w, z) - ref).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-9);
  CHECK(weight_norm(w) <= ising_B(zeta, t, d));
  CHECK(std::abs(ising_norm_bound(zeta, t, d) - ising_B(zeta, t, d)) < 1e-12);
  const ResNetWeights w0 = unroll_ising(a, Matrix::Zero(d, d), t, 0, pwl);
  CHECK(resnet_forward(w0, Vector::Zero(d)).norm() == 0.0);
}

TEST_CASE("unroll ising: SK correction and contraction check") {
  const int d = 4;
  const Matrix a = random_coupling(d, 0.5, 7);
  const Matrix k = 0.1 * Matrix::Identity(d, d);
  const PwlDenoiser pwl = build_pwl(ScalarDenoiser::tanh(), 0.05);
  const ResNetWeights w = unroll_ising(a, k, 0.4, 5, pwl);
  Rng rng(8, 8);
  const Vector z = rng.normal_vector(d);
  const Vector m = oracle::picard(a - k, lam(0.4) * z / s2(0.4), [&](double x) { return pwl(x); }, 5);
  CHECK((resnet_forward(w, z) - (lam(0.4) * m - z) / s2(0.4)).lpNorm<Eigen::Infinity>() < 1e-9);
  try {
    unroll_ising(random_coupling(d, 1.2, 1), Matrix::Zero(d, d), 0.4, 3, pwl);
    FAIL("contraction");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ContractionViolation);
  }
}

TEST_CASE("unroll marginal") {
  const int d = 3, m = 2, L = 5;
  const double t = 0.5, zeta = 0.1;
  const Matrix j = random_coupling(d + m, 0.5, 11);
  const BlockIsingModel b(j.topLeftCorner(d, d), j.topRightCorner(d, m), j.bottomRightCorner(m, m));
  const PwlDenoiser pwl = build_pwl(ScalarDenoiser::tanh(), zeta);
  const ResNetWeights w = unroll_marginal(b, Matrix::Zero(d + m, d + m), t, L, pwl);
  CHECK(w.D == 3 * (d + m));
  Rng rng(12, 0);
  for (int i = 0; i < 200; ++i) {
    const Vector z = 2.0 * rng.normal_vector(d);
    Vector h = Vector::Zero(d + m);
    h.head(d) = lam(t) * z / s2(t);
    const Vector mm = oracle::picard(j, h, [&](double x) { return pwl(x); }, L);
    const Vector ref = (lam(t) * mm.head(d) - z) / s2(t);
    CHECK((resnet_forward_checked(w, z) - ref).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
  CHECK(weight_norm(w) <= ising_B(zeta, t, d + m));

  const BlockIsingModel none(j.topLeftCorner(d, d), Matrix::Zero(d, 0), Matrix::Zero(0, 0));
  const ResNetWeights wm = unroll_marginal(none, Matrix::Zero(d, d), t, L, pwl);
  const ResNetWeights wi = unroll_ising(j.topLeftCorner(d, d), Matrix::Zero(d, d), t, L, pwl);
  for (int i = 0; i < 20; ++i) {
    const Vector z = rng.normal_vector(d);
    CHECK((resnet_forward(wm, z) - resnet_forward(wi, z)).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("unroll conditional") {
  const int d = 3, m = 2, L = 4;
  const double t = 0.9, zeta = 0.1;
  const Matrix j = random_coupling(d + m, 0.5, 13);
  const Matrix a11 = j.topLeftCorner(d, d), a12 = j.topRightCorner(d, m);
  const PwlDenoiser pwl = build_pwl(ScalarDenoiser::tanh(), zeta);
  const ResNetWeights w = unroll_conditional(a11, a12, Matrix::Zero(d, d), t, L, pwl);
  CHECK(w.D == 4 * d);
  CHECK(w.theta_dim() == m);
  Rng rng(14, 0);
  for (int i = 0; i < 200; ++i) {
    const Vector z = 2.0 * rng.normal_vector(d);
    const Vector th = oracle::spins(static_cast<unsigned>(i) % 4, m);
    const Vector mm = oracle::picard(a11, lam(t) * z / s2(t) + a12 * th,
                                     [&](double x) { return pwl(x); }, L);
    const Vector ref = (lam(t) * mm - z) / s2(t);
    CHECK((resnet_forward_checked(w, z, th) - ref).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
  const double a12n = oracle::spectral_norm(a12);
  const double B = (std::ceil(2 / zeta) - 1) * (std::log(std::ceil(1 / zeta)) + 4 + a12n) + 8 +
                   1 / s2(t) + a12n + std::sqrt(3.0);
  CHECK(weight_norm(w) <= B);

  const ResNetWeights w0 = unroll_conditional(a11, Matrix::Zero(d, m), Matrix::Zero(d, d), t, L, pwl);
  const Vector z = rng.normal_vector(d);
  CHECK((resnet_forward(w0, z, oracle::spins(0, m)) - resnet_forward(w0, z, oracle::spins(3, m)))
            .norm() == 0.0);
}

TEST_CASE("unroll sparse") {
  const int d = 4, m = 3, L = 6;
  const double t = 0.6, tau = 0.5, zeta = 0.05;
  Rng rng(15, 0);
  const Matrix a = rng.normal_vector(d * m).reshaped(d, m) * 0.4;
  const SparseCodingModel model(a, {{-1.0, 0.5}, {1.0, 0.5}}, tau);
  const double tb2 = tau * tau + s2(t) / (lam(t) * lam(t));
  const double nu = a.colwise().squaredNorm().mean() / tb2;
  const PwlDenoiser pwl = build_pwl(posterior_scalar(model.prior(), nu), zeta);
  const ResNetWeights w = unroll_sparse(model, nu, t, L, pwl);
  CHECK(w.D == 3 * m + d);
  const Matrix u = nu * Matrix::Identity(m, m) - a.transpose() * a / tb2;
  const double denom = s2(t) + tau * tau * lam(t) * lam(t);
  for (int i = 0; i < 200; ++i) {
    const Vector z = 2.0 * rng.normal_vector(d);
    const Vector e = oracle::picard(u, a.transpose() * z / (lam(t) * tb2),
                                    [&](double x) { return pwl(x); }, L);
    const Vector ref = -z / denom + lam(t) / denom * a * e;
    CHECK((resnet_forward_checked(w, z) - ref).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
  const double un = oracle::spectral_norm(u);
  const double B = sparse_norm_bound(model, zeta, t, un, pwl.max_breakpoint());
  CHECK(weight_norm(w) <= B);
  // Matrix overload with the same tilt gives the same network action.
  const ResNetWeights wk = unroll_sparse(model, Matrix(nu * Matrix::Identity(m, m)), t, L, pwl);
  const Vector z = rng.normal_vector(d);
  CHECK((resnet_forward(wk, z) - resnet_forward(w, z)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("truncation") {
  const int d = 4;
  const double t = 0.5;
  const TruncationSpec spec = TruncationSpec::ising(t, d);
  CHECK(std::abs(spec.radius - lam(t) / s2(t) * 2.0) < 1e-14);
  CHECK(std::abs(spec.shift - 1 / s2(t)) < 1e-14);
  const IsingModel model(random_coupling(d, 0.4, 3));
  Rng rng(16, 0);
  for (int i = 0; i < 50; ++i) {
    const Vector z = 3.0 * rng.normal_vector(d);
    const Vector s = exact_score(model, t, z);
    CHECK((truncate(spec, s, z) - s).norm() < 1e-12);
  }
  const Vector z = rng.normal_vector(d);
  Vector dir = rng.normal_vector(d);
  dir *= 2 * spec.radius / dir.norm();
  const Vector f = dir - spec.shift * z;
  const Vector p = truncate(spec, f, z);
  CHECK(std::abs((p + spec.shift * z).norm() - spec.radius) < 1e-12);
  for (int i = 0; i < 200; ++i) {
    const Vector zz = rng.normal_vector(d);
    const Vector f1 = 10 * rng.normal_vector(d), f2 = 10 * rng.normal_vector(d);
    CHECK((truncate(spec, f1, zz) - truncate(spec, f2, zz)).norm() <= (f1 - f2).norm() + 1e-12);
  }
  CHECK((truncate(TruncationSpec::none(), f, z) - f).norm() == 0.0);
}
