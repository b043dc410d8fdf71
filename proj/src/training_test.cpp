#include "dlab/training.hpp"
#include "dlab/models.hpp"
#include "dlab/rng.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace dlab;

namespace {

TrainData ising_data(int d, std::size_t n, std::uint64_t seed) {
  const IsingModel model(random_coupling(d, 0.3, seed));
  return make_train_data(sample(model, n, seed), seed + 1);
}

double& coord(ResNetWeights& w, int which, int r, int c) {
  const int nb = static_cast<int>(w.blocks.size());
  if (which == 0) return w.w_in(r % w.w_in.rows(), c % w.w_in.cols());
  if (which == 1) return w.w_out(r % w.w_out.rows(), c % w.w_out.cols());
  auto& b = w.blocks[(which - 2) / 2 % nb];
  Matrix& m = (which % 2 == 0) ? b.w1 : b.w2;
  return m(r % m.rows(), c % m.cols());
}

double hand_loss(const ResNetWeights& w, const TrainData& data, double t,
                 const TruncationSpec& spec) {
  const double lam = std::exp(-t), sig = std::sqrt(1 - std::exp(-2 * t));
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector z = lam * data.x[i] + sig * data.g[i];
    Vector f = oracle::resnet(w, z);
    if (spec.enabled) {
      Vector v = f + spec.shift * z;
      if (v.norm() > spec.radius) v *= spec.radius / v.norm();
      f = v - spec.shift * z;
    }
    acc += (data.g[i] / sig + f).squaredNorm();
  }
  return acc / (data.size() * data.x[0].size());
}

}  // namespace

TEST_CASE("loss: zero network on zero noise") {
  TrainData data = ising_data(3, 10, 1);
  for (auto& g : data.g) g.setZero();
  const ResNetWeights w = zero_weights(3, 0, 9, 2, 8);
  CHECK(erm_loss(w, data, full_batch(data), 0.5, TruncationSpec::none()) == 0.0);
}

TEST_CASE("loss: hand instance") {
  Vector x1(2), x2(2), g1(2), g2(2);
  x1 << 1, -1;
  x2 << -1, -1;
  g1 << 0.3, -1.2;
  g2 << 0.7, 0.1;
  TrainData data{{x1, x2}, {g1, g2}, {}};
  const ResNetWeights w = init_weights(2, 0, {6, 2, 5}, 2.0, 4);
  for (bool trunc : {false, true}) {
    const TruncationSpec spec = trunc ? TruncationSpec::ising(0.3, 2) : TruncationSpec::none();
    CHECK(std::abs(erm_loss(w, data, full_batch(data), 0.3, spec) - hand_loss(w, data, 0.3, spec)) <
          1e-12);
  }
  CHECK_THROWS_AS(erm_loss(zero_weights(3, 0, 6, 1, 4), data, full_batch(data), 0.3,
                           TruncationSpec::none()),
                  Error);
}

TEST_CASE("gradient: finite differences") {
  const TrainData data = ising_data(3, 40, 2);
  for (bool trunc : {false, true}) {
    const double t = 0.6;
    const TruncationSpec spec = trunc ? TruncationSpec::ising(t, 3) : TruncationSpec::none();
    const ResNetWeights w = init_weights(3, 0, {9, 2, 12}, 1.5, 7);
    const Batch batch = full_batch(data);
    const ResNetWeights g = erm_grad(w, data, batch, t, spec);
    Rng rng(3, 3);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const int which = static_cast<int>(rng.bits() % 6);
      const int r = static_cast<int>(rng.bits() % 64), c = static_cast<int>(rng.bits() % 64);
      ResNetWeights wp = w, wm = w, gg = g;
      const double h = 1e-5;
      coord(wp, which, r, c) += h;
      coord(wm, which, r, c) -= h;
      const double fd = (erm_loss(wp, data, batch, t, spec) - erm_loss(wm, data, batch, t, spec)) / (2 * h);
      const double an = coord(gg, which, r, c);
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-3, std::abs(an)));
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("gradient: zero output map and batch order") {
  const TrainData data = ising_data(2, 16, 3);
  ResNetWeights w = init_weights(2, 0, {6, 2, 5}, 1.0, 8);
  w.w_out.setZero();
  const ResNetWeights g = erm_grad(w, data, full_batch(data), 0.5, TruncationSpec::none());
  for (const auto& b : g.blocks) CHECK(b.w1.norm() == 0.0);

  const ResNetWeights w2 = init_weights(2, 0, {6, 2, 5}, 1.0, 9);
  Batch fwd = full_batch(data), rev = fwd;
  std::reverse(rev.begin(), rev.end());
  const ResNetWeights a = erm_grad(w2, data, fwd, 0.5, TruncationSpec::ising(0.5, 2));
  const ResNetWeights b = erm_grad(w2, data, rev, 0.5, TruncationSpec::ising(0.5, 2));
  CHECK((a.w_in - b.w_in).norm() < 1e-12);
  CHECK((a.w_out - b.w_out).norm() < 1e-12);
}

TEST_CASE("per-sample loss bound under truncation") {
  const TrainData data = ising_data(4, 200, 4);
  const ResNetWeights w = init_weights(4, 0, {12, 2, 16}, 5.0, 1);
  for (double t : {0.2, 1.0}) {
    const double lam = std::exp(-t), s2 = 1 - std::exp(-2 * t);
    const auto losses = erm_sample_losses(w, data, full_batch(data), t, TruncationSpec::ising(t, 4));
    for (double l : losses) CHECK(l <= 4 * 4 * lam * lam / (s2 * s2) + 1e-9);
  }
}

TEST_CASE("projection keeps the norm bound") {
  ResNetWeights w = init_weights(3, 0, {9, 3, 10}, 30.0, 2);
  project_weights(w, 2.0);
  CHECK(weight_norm(w) <= 2.0 + 1e-9);
}

TEST_CASE("training: zero steps, determinism and descent") {
  const int d = 3;
  const TrainData data = ising_data(d, 300, 5);
  const double t = 0.5;
  const Matrix a = random_coupling(d, 0.3, 5);
  const ResNetWeights init = unroll_ising(a, Matrix::Zero(d, d), t, 3, build_pwl(ScalarDenoiser::tanh(), 0.2));
  TrainConfig cfg;
  cfg.steps = 0;
  cfg.bound = 1e6;
  const TrainResult r0 = train_score(data, t, {init.D, init.L, init.M}, cfg, TruncationSpec::ising(t, d), init);
  CHECK((r0.weights.w_in - init.w_in).norm() == 0.0);
  CHECK((r0.weights.w_out - init.w_out).norm() == 0.0);
  CHECK(r0.weights.kind == init.kind);

  TrainConfig c2;
  c2.steps = 40;
  c2.learning_rate = 0.02;
  c2.bound = 10.0;
  c2.seed = 3;
  c2.batch_size = 64;
  const TrainResult a1 = train_score(data, t, {3 * d, 2, 12}, c2, TruncationSpec::ising(t, d));
  const TrainResult a2 = train_score(data, t, {3 * d, 2, 12}, c2, TruncationSpec::ising(t, d));
  CHECK(a1.loss_trace == a2.loss_trace);
  CHECK(a1.loss_trace.size() == 41);
  CHECK(weight_norm(a1.weights) <= 10.0 + 1e-9);

  TrainConfig c3 = c2;
  c3.batch_size = 0;
  c3.steps = 200;
  const TrainResult a3 = train_score(data, t, {3 * d, 2, 12}, c3, TruncationSpec::ising(t, d));
  CHECK(a3.loss_trace.back() < a3.loss_trace.front());
}

TEST_CASE("training: divergence") {
  const TrainData data = ising_data(2, 50, 6);
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.learning_rate = 1e4;
  cfg.bound = 1e12;
  cfg.truncation = false;
  try {
    train_score(data, 0.05, {6, 2, 8}, cfg, TruncationSpec::none());
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Divergence);
  }
}
