#include "dlab/models.hpp"
#include "dlab/rng.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

#include <cmath>

using namespace dlab;

namespace {

Matrix random_sym(int d, double scale, std::uint64_t seed) {
  Rng rng(seed, 7);
  Matrix a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = scale * rng.normal();
  }
  return a;
}

Vector random_vec(int d, double scale, Rng& rng) { return scale * rng.normal_vector(d); }

}  // namespace

TEST_CASE("enumeration: zero coupling is uniform") {
  const auto p = enumerate_distribution(IsingModel(Matrix::Zero(2, 2)));
  REQUIRE(p.size() == 4);
  for (double q : p.probs) CHECK(q == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("enumeration: two-spin hand values") {
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  const auto p = enumerate_distribution(IsingModel(a));
  const double e = std::exp(1.0), z = 2 * e + 2 / e;
  CHECK(std::abs(p.prob_of(0b11) - e / z) < 1e-15);
  CHECK(std::abs(p.prob_of(0b00) - e / z) < 1e-15);
  CHECK(std::abs(p.prob_of(0b01) - (1 / e) / z) < 1e-15);
  CHECK(std::abs(p.prob_of(0b10) - (1 / e) / z) < 1e-15);
}

TEST_CASE("enumeration: normalization and brute force at d = 8") {
  const Matrix a = random_sym(8, 0.3, 1);
  const auto p = enumerate_distribution(IsingModel(a));
  const auto ref = oracle::ising_probs(a);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum += p.probs[i];
    CHECK(std::abs(p.probs[i] - ref[p.states[i]]) < 1e-14);
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("enumeration rejects d > 22") {
  CHECK_THROWS_AS(enumerate_distribution(IsingModel(Matrix::Zero(23, 23))), Error);
  try {
    enumerate_distribution(IsingModel(Matrix::Zero(23, 23)));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionTooLarge);
  }
}

TEST_CASE("models validate their inputs") {
  Matrix asym(2, 2);
  asym << 0, 1, 0.5, 0;
  CHECK_THROWS_AS(IsingModel{asym}, Error);
  CHECK_THROWS_AS(IsingModel{Matrix(0, 0)}, Error);
  CHECK_THROWS_AS(SparseCodingModel(Matrix::Ones(2, 2), {{1.0, 0.5}, {-1.0, 0.4}}, 1.0), Error);
  CHECK_THROWS_AS(SparseCodingModel(Matrix::Ones(2, 2), {{1.0, 1.0}}, 0.0), Error);
  CHECK_THROWS_AS(SparseCodingModel(Matrix::Ones(2, 2), {{2.0, 1.0}}, 1.0, 1.0), Error);
}

TEST_CASE("sampling: zero coupling mean and determinism") {
  const IsingModel m(Matrix::Zero(1, 1));
  const auto xs = sample(m, 100000, 42);
  double mean = 0.0;
  for (const auto& x : xs) mean += x(0);
  mean /= xs.size();
  CHECK(std::abs(mean) <= 0.02);
  CHECK(sample(m, 0, 1).empty());
  const auto a = sample(IsingModel(random_sym(4, 0.2, 3)), 50, 9);
  const auto b = sample(IsingModel(random_sym(4, 0.2, 3)), 50, 9);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("sampling: frequencies follow the table") {
  Matrix a(2, 2);
  a << 0, 0.8, 0.8, 0;
  const IsingModel m(a);
  const auto p = oracle::ising_probs(a);
  const auto xs = sample(m, 200000, 5);
  std::vector<double> freq(4, 0.0);
  for (const auto& x : xs) freq[code_from_spins(x)] += 1.0 / xs.size();
  for (int s = 0; s < 4; ++s) {
    const double se = std::sqrt(p[s] * (1 - p[s]) / xs.size());
    CHECK(std::abs(freq[s] - p[s]) < 5 * se);
  }
}

TEST_CASE("denoiser: zero coupling is coordinatewise tanh") {
  const IsingModel m(Matrix::Zero(3, 3));
  Vector z(3);
  z << 0.4, -1.3, 2.0;
  const double t = 0.7, lam = std::exp(-t), s2 = 1 - std::exp(-2 * t);
  const Vector mt = exact_denoiser(m, t, z);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(mt(i) - std::tanh(lam * z(i) / s2)) < 1e-14);
  CHECK(exact_denoiser(m, t, Vector::Zero(3)).norm() == 0.0);
}

TEST_CASE("denoiser and score match brute force and Tweedie") {
  Rng rng(11, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 3 + rep % 3;
    const Matrix a = random_sym(d, 0.3, 100 + rep);
    const IsingModel m(a);
    const double t = 0.2 + 0.3 * rep;
    const Vector z = random_vec(d, 1.5, rng);
    const Vector mt = exact_denoiser(m, t, z);
    CHECK((mt - oracle::ising_denoiser(a, t, z)).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(mt.lpNorm<Eigen::Infinity>() <= 1.0);
    const Vector s = exact_score(m, t, z);
    const double lam = std::exp(-t), s2 = 1 - std::exp(-2 * t);
    CHECK((s * s2 + z - lam * mt).lpNorm<Eigen::Infinity>() < 1e-14);
  }
}

TEST_CASE("score equals the gradient of the enumerated log density") {
  Rng rng(12, 0);
  const Matrix a = random_sym(4, 0.25, 77);
  const IsingModel m(a);
  for (double t : {0.3, 1.0}) {
    const Vector z = random_vec(4, 1.0, rng);
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& v) { return oracle::ising_log_density(a, t, v); }, z, 1e-4);
    CHECK((exact_score(m, t, z) - fd).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("large t denoiser tends to the prior mean") {
  const Matrix a = random_sym(5, 0.3, 8);
  const Vector field = Vector::Constant(5, 0.2);
  const IsingModel m(a);
  const auto p = enumerate_distribution(m);
  Vector prior_mean = Vector::Zero(5);
  for (std::size_t i = 0; i < p.size(); ++i) prior_mean += p.probs[i] * p.spins(i);
  const Vector mt = exact_denoiser(m, 20.0, field);
  CHECK((mt - prior_mean).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("posterior streaming path agrees with the table") {
  const Matrix a = random_sym(17, 0.05, 21);
  IsingPosterior post(a);
  Rng rng(3, 3);
  const Vector h = rng.normal_vector(17);
  const Vector ref = oracle::ising_mean(a, h);
  CHECK((post.mean(h) - ref).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("block models: conditional and marginal denoisers") {
  const int d = 3, m = 2;
  const Matrix j = random_sym(d + m, 0.3, 31);
  const BlockIsingModel b(j.topLeftCorner(d, d), j.topRightCorner(d, m),
                          j.bottomRightCorner(m, m));
  Rng rng(5, 5);
  const Vector z = rng.normal_vector(d);
  const double t = 0.6, lam = std::exp(-t), s2 = 1 - std::exp(-2 * t);

  // Marginal: first d coordinates of the joint posterior mean with field on x only.
  Matrix joint = j;
  Vector h = Vector::Zero(d + m);
  h.head(d) = lam * z / s2;
  const Vector ref = oracle::ising_mean(joint, h).head(d);
  CHECK((exact_marginal_denoiser(b, t, z) - ref).lpNorm<Eigen::Infinity>() < 1e-12);

  Vector theta(m);
  theta << 1, -1;
  const Vector hc = lam * z / s2 + j.topRightCorner(d, m) * theta;
  const Vector refc = oracle::ising_mean(j.topLeftCorner(d, d), hc);
  CHECK((exact_conditional_denoiser(b, theta, t, z) - refc).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK_THROWS_AS(exact_conditional_denoiser(b, Vector::Ones(3), t, z), Error);

  const BlockIsingModel indep(j.topLeftCorner(d, d), Matrix::Zero(d, m),
                              j.bottomRightCorner(m, m));
  Vector theta2(m);
  theta2 << -1, -1;
  CHECK((exact_conditional_denoiser(indep, theta, t, z) -
         exact_conditional_denoiser(indep, theta2, t, z))
            .norm() == 0.0);

  const BlockIsingModel none(j.topLeftCorner(d, d), Matrix::Zero(d, 0), Matrix::Zero(0, 0));
  CHECK((exact_marginal_denoiser(none, t, z) -
         exact_denoiser(IsingModel(j.topLeftCorner(d, d)), t, z))
            .lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("joint sampling follows the joint table") {
  const Matrix j = random_sym(3, 0.4, 2);
  const BlockIsingModel b(j.topLeftCorner(2, 2), j.topRightCorner(2, 1),
                          j.bottomRightCorner(1, 1));
  const auto p = oracle::ising_probs(j);
  const auto draws = sample_joint(b, 100000, 4);
  std::vector<double> freq(8, 0.0);
  for (const auto& s : draws) {
    Vector full(3);
    full << s.x, s.theta;
    freq[code_from_spins(full)] += 1.0 / draws.size();
  }
  for (int s = 0; s < 8; ++s) {
    CHECK(std::abs(freq[s] - p[s]) < 5 * std::sqrt(p[s] * (1 - p[s]) / draws.size()));
  }
}

TEST_CASE("sparse coding: Gaussian and Dirac limits") {
  const SparseCodingModel zero(Matrix::Zero(4, 3), {{-1, 0.5}, {1, 0.5}}, 0.5);
  Rng rng(9, 9);
  const Vector z = rng.normal_vector(4);
  const double t = 0.8, lam = std::exp(-t), s2 = 1 - std::exp(-2 * t);
  const double var = 0.25 * lam * lam + s2;
  CHECK((sparse_exact_score(zero, t, z) + z / var).lpNorm<Eigen::Infinity>() < 1e-15);

  const SparseCodingModel dirac(rng.normal_vector(12).reshaped(4, 3), {{0.0, 1.0}}, 0.5);
  CHECK(sparse_exact_posterior_mean(dirac, t, z).norm() == 0.0);
  CHECK((sparse_exact_score(dirac, t, z) + z / var).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("sparse coding: score matches the mixture density") {
  Rng rng(10, 1);
  for (int rep = 0; rep < 5; ++rep) {
    Matrix a = rng.normal_vector(12).reshaped(4, 3) / 2.0;
    const std::vector<double> atoms{-1.0, 1.0}, probs{0.5, 0.5};
    const SparseCodingModel m(a, {{-1.0, 0.5}, {1.0, 0.5}}, 0.4);
    const double t = 0.3 + 0.4 * rep;
    const Vector z = rng.normal_vector(4);
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& v) { return oracle::sparse_log_density(a, atoms, probs, 0.4, t, v); },
        z, 1e-4);
    CHECK((sparse_exact_score(m, t, z) - fd).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(sparse_exact_posterior_mean(m, t, z).lpNorm<Eigen::Infinity>() <= 1.0);
  }
}

TEST_CASE("sparse coding: support cap") {
  std::vector<PriorAtom> prior;
  for (int i = 0; i < 4; ++i) prior.push_back({-1.0 + i * 2.0 / 3.0, 0.25});
  const SparseCodingModel big(Matrix::Ones(2, 12), prior, 1.0);
  try {
    sparse_exact_posterior_mean(big, 0.5, Vector::Zero(2));
    FAIL("expected support-too-large");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SupportTooLarge);
  }
}

TEST_CASE("random couplings") {
  const Matrix a = random_coupling(6, 0.3, 4);
  CHECK(is_symmetric(a));
  CHECK(a.diagonal().norm() == 0.0);
  CHECK(std::abs(oracle::spectral_norm(a) - 0.3) < 1e-12);
  const Matrix s = sk_coupling(6, 0.2, 4);
  CHECK(is_symmetric(s));
  CHECK(s.diagonal().norm() == 0.0);
}
