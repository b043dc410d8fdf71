#include "dlab/training.hpp"

#include "dlab/rng.hpp"
#include "dlab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dlab {

TrainData make_train_data(std::vector<Vector> x, std::uint64_t seed,
                          std::vector<Vector> theta) {
  require(!x.empty(), ErrorCode::EmptyInput, "training set is empty");
  require(theta.empty() || theta.size() == x.size(), ErrorCode::ShapeMismatch,
          "theta must be given for every sample or none");
  TrainData data;
  Rng rng(seed, 0);
  data.g.reserve(x.size());
  for (const auto& xi : x) data.g.push_back(rng.normal_vector(xi.size()));
  data.x = std::move(x);
  data.theta = std::move(theta);
  return data;
}

Batch full_batch(const TrainData& data) {
  Batch b(data.size());
  std::iota(b.begin(), b.end(), std::size_t{0});
  return b;
}

namespace {

// Forward state for a batch with samples as columns.
struct Tape {
  Matrix input;               // (in+1) × n
  std::vector<Matrix> u;      // u⁽⁰⁾ .. u⁽ᴸ⁾, D × n
  std::vector<Matrix> pre;    // W₂ u⁽ˡ⁻¹⁾, M × n
  Matrix z;                   // d × n
  Matrix out;                 // truncated network output, d × n
  Matrix residual;            // g/σ + out
};

Tape forward(const ResNetWeights& w, const TrainData& data, const Batch& batch,
             double t, const TruncationSpec& spec) {
  require(!batch.empty(), ErrorCode::EmptyInput, "batch is empty");
  const NoiseLevel nl = noise_level(t);
  const Index n = static_cast<Index>(batch.size());
  const int d = w.d, th = w.theta_dim();
  require(data.theta.empty() ? th == 0 : th > 0, ErrorCode::ShapeMismatch,
          "theta presence does not match the network input");
  Tape tape;
  tape.input = Matrix::Zero(d + th + 1, n);
  tape.z.resize(d, n);
  Matrix g(d, n);
  for (Index c = 0; c < n; ++c) {
    const std::size_t i = batch[c];
    require(i < data.size(), ErrorCode::InvalidArgument, "batch index out of range");
    require(data.x[i].size() == d && data.g[i].size() == d, ErrorCode::ShapeMismatch,
            "sample dimension does not match the network");
    tape.z.col(c) = nl.lambda * data.x[i] + nl.sigma() * data.g[i];
    g.col(c) = data.g[i];
    tape.input.col(c).head(d) = tape.z.col(c);
    if (th > 0) {
      require(data.theta[i].size() == th, ErrorCode::ShapeMismatch,
              "theta length does not match the network");
      tape.input.col(c).segment(d, th) = data.theta[i];
    }
    tape.input(d + th, c) = 1.0;
  }
  tape.u.push_back(w.w_in * tape.input);
  for (const auto& b : w.blocks) {
    tape.pre.push_back(b.w2 * tape.u.back());
    tape.u.push_back(tape.u.back() + b.w1 * tape.pre.back().cwiseMax(0.0));
  }
  tape.out = w.w_out * tape.u.back();
  if (spec.enabled) {
    for (Index c = 0; c < n; ++c) {
      const Vector zc = tape.z.col(c);
      tape.out.col(c) = truncate(spec, tape.out.col(c), zc);
    }
  }
  tape.residual = g / nl.sigma() + tape.out;
  return tape;
}

}  // namespace

std::vector<double> erm_sample_losses(const ResNetWeights& w, const TrainData& data,
                                      const Batch& batch, double t,
                                      const TruncationSpec& spec) {
  w.validate();
  const Tape tape = forward(w, data, batch, t, spec);
  std::vector<double> out(batch.size());
  for (Index c = 0; c < tape.residual.cols(); ++c) out[c] = tape.residual.col(c).squaredNorm();
  return out;
}

double erm_loss(const ResNetWeights& w, const TrainData& data, const Batch& batch,
                double t, const TruncationSpec& spec) {
  w.validate();
  const Tape tape = forward(w, data, batch, t, spec);
  return tape.residual.squaredNorm() / (static_cast<double>(batch.size()) * w.d);
}

ResNetWeights erm_grad(const ResNetWeights& w, const TrainData& data,
                       const Batch& batch, double t, const TruncationSpec& spec,
                       double* loss) {
  w.validate();
  const Tape tape = forward(w, data, batch, t, spec);
  const double scale = 1.0 / (static_cast<double>(batch.size()) * w.d);
  if (loss) *loss = tape.residual.squaredNorm() * scale;

  Matrix d_out = 2.0 * scale * tape.residual;
  if (spec.enabled) {
    // Raw network output before truncation, recomputed per column.
    const Matrix raw = w.w_out * tape.u.back();
    for (Index c = 0; c < d_out.cols(); ++c) {
      const Vector v = raw.col(c) + spec.shift * tape.z.col(c);
      const double nv = v.norm();
      if (nv > spec.radius) {
        const Vector vh = v / nv;
        const Vector gcol = d_out.col(c);
        d_out.col(c) = (spec.radius / nv) * (gcol - vh * vh.dot(gcol));
      }
    }
  }

  ResNetWeights grad = w;
  grad.w_out = d_out * tape.u.back().transpose();
  Matrix du = w.w_out.transpose() * d_out;
  for (int l = w.L - 1; l >= 0; --l) {
    const auto& b = w.blocks[l];
    const Matrix& pre = tape.pre[l];
    const Matrix act = pre.cwiseMax(0.0);
    grad.blocks[l].w1 = du * act.transpose();
    Matrix dpre = b.w1.transpose() * du;
    dpre = dpre.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    grad.blocks[l].w2 = dpre * tape.u[l].transpose();
    du += b.w2.transpose() * dpre;
  }
  grad.w_in = du * tape.input.transpose();
  return grad;
}

ResNetWeights init_weights(int d, int theta_dim, const TrainDims& dims,
                           double init_scale, std::uint64_t seed) {
  require(d >= 1 && dims.D >= 1 && dims.L >= 0 && dims.M >= 1,
          ErrorCode::InvalidArgument, "network dimensions must be positive");
  ResNetWeights w = zero_weights(d, theta_dim, dims.D, dims.L, dims.M);
  Rng rng(seed, 1);
  const double s = init_scale / std::sqrt(static_cast<double>(dims.D));
  auto fill = [&](Matrix& m) {
    for (Index j = 0; j < m.cols(); ++j) {
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = s * (2.0 * rng.uniform() - 1.0);
    }
  };
  fill(w.w_in);
  for (auto& b : w.blocks) {
    fill(b.w1);
    fill(b.w2);
  }
  fill(w.w_out);
  return w;
}

namespace {

// Dense SVD: exact and cheap at training sizes, and never underestimates the
// way an early-stopped power iteration can.
double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

}  // namespace

void project_weights(ResNetWeights& w, double bound) {
  auto shrink = [bound](Matrix& m) {
    const double n = spectral_norm(m);
    if (n > bound) m *= bound / n;
  };
  shrink(w.w_in);
  shrink(w.w_out);
  for (auto& b : w.blocks) {
    const double n = spectral_norm(b.w1) + spectral_norm(b.w2);
    if (n > bound) {
      b.w1 *= bound / n;
      b.w2 *= bound / n;
    }
  }
}

TrainResult train_score(const TrainData& data, double t, const TrainDims& dims,
                        const TrainConfig& config, const TruncationSpec& spec,
                        std::optional<ResNetWeights> init) {
  require(config.learning_rate > 0.0 && config.steps >= 0 && config.bound > 0.0,
          ErrorCode::InvalidArgument, "learning rate and B must be positive");
  require(data.size() > 0, ErrorCode::EmptyInput, "training set is empty");
  noise_level(t);
  const int d = static_cast<int>(data.x.front().size());
  const int th = data.theta.empty() ? 0 : static_cast<int>(data.theta.front().size());
  TrainResult res;
  res.weights = init ? *init : init_weights(d, th, dims, config.init_scale, config.seed);
  res.weights.t = t;
  res.weights.validate();
  const TruncationSpec active = config.truncation ? spec : TruncationSpec::none();

  Batch all = full_batch(data);
  const std::size_t bs =
      config.batch_size == 0 ? data.size() : std::min(config.batch_size, data.size());
  std::size_t cursor = 0, epoch = 0;
  Batch order = all;

  auto check = [&](double loss, int step) {
    if (!std::isfinite(loss) || loss > config.divergence_threshold) {
      throw Error(ErrorCode::Divergence,
                  "training loss " + std::to_string(loss) + " at step " +
                      std::to_string(step) + " exceeds the divergence threshold");
    }
  };

  for (int step = 0; step < config.steps; ++step) {
    Batch batch;
    if (bs == data.size()) {
      batch = all;
    } else {
      if (cursor == 0) {
        order = all;
        Rng rng(config.seed, 2 + epoch);
        std::shuffle(order.begin(), order.end(), rng.engine());
      }
      const std::size_t end = std::min(cursor + bs, order.size());
      batch.assign(order.begin() + cursor, order.begin() + end);
      cursor = end == order.size() ? 0 : end;
      if (cursor == 0) ++epoch;
    }
    double loss = 0.0;
    const ResNetWeights grad = erm_grad(res.weights, data, batch, t, active, &loss);
    check(loss, step);
    res.loss_trace.push_back(loss);
    const double lr = config.learning_rate;
    res.weights.w_in -= lr * grad.w_in;
    res.weights.w_out -= lr * grad.w_out;
    for (std::size_t l = 0; l < res.weights.blocks.size(); ++l) {
      res.weights.blocks[l].w1 -= lr * grad.blocks[l].w1;
      res.weights.blocks[l].w2 -= lr * grad.blocks[l].w2;
    }
    project_weights(res.weights, config.bound);
  }
  const double final_loss = erm_loss(res.weights, data, all, t, active);
  check(final_loss, config.steps);
  res.loss_trace.push_back(final_loss);
  if (!init || config.steps > 0) {
    res.weights.bound = config.bound;
    res.weights.kind = NetKind::Generic;
  }
  return res;
}

}  // namespace dlab
