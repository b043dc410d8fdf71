#include "dlab/dlab.h"

#include "dlab/diffusion.hpp"
#include "dlab/io.hpp"
#include "dlab/metrics.hpp"
#include "dlab/models.hpp"
#include "dlab/oracles.hpp"
#include "dlab/rng.hpp"
#include "dlab/training.hpp"
#include "dlab/unroll.hpp"
#include "dlab/variational.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct dl_model {
  dlab::Model model;
};
struct dl_grid {
  dlab::TimeGrid grid;
};
struct dl_weights {
  std::vector<dlab::ResNetWeights> nets;
};
struct dl_score {
  dlab::ScoreOracle oracle;
};

namespace {

thread_local std::string g_last_error;

dl_status to_status(dlab::ErrorCode code) {
  using dlab::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return DL_ERR_INVALID_ARGUMENT;
    case ErrorCode::DimensionTooLarge: return DL_ERR_DIMENSION_TOO_LARGE;
    case ErrorCode::NonpositiveTime: return DL_ERR_NONPOSITIVE_TIME;
    case ErrorCode::ShapeMismatch: return DL_ERR_SHAPE_MISMATCH;
    case ErrorCode::ContractionViolation: return DL_ERR_CONTRACTION_VIOLATION;
    case ErrorCode::NonConvergence: return DL_ERR_NON_CONVERGENCE;
    case ErrorCode::NonFinite: return DL_ERR_NON_FINITE;
    case ErrorCode::Divergence: return DL_ERR_DIVERGENCE;
    case ErrorCode::SupportTooLarge: return DL_ERR_SUPPORT_TOO_LARGE;
    case ErrorCode::EmptyInput: return DL_ERR_EMPTY_INPUT;
    case ErrorCode::Io: return DL_ERR_IO;
    case ErrorCode::Parse: return DL_ERR_PARSE;
    case ErrorCode::BoundaryArgument: return DL_ERR_BOUNDARY_ARGUMENT;
  }
  return DL_ERR_INTERNAL;
}

template <typename F>
dl_status guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return DL_OK;
  } catch (const dlab::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DL_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  dlab::require(p != nullptr, dlab::ErrorCode::InvalidArgument,
                std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dlab::Vector vec(const double* p, dlab::Index n) {
  dlab::Vector v(n);
  for (dlab::Index i = 0; i < n; ++i) v(i) = p[i];
  return v;
}

dlab::Matrix row_major(const double* p, dlab::Index rows, dlab::Index cols) {
  dlab::Matrix m(rows, cols);
  for (dlab::Index i = 0; i < rows; ++i) {
    for (dlab::Index j = 0; j < cols; ++j) m(i, j) = p[i * cols + j];
  }
  return m;
}

std::vector<dlab::PriorAtom> prior_from(const double* atoms, const double* probs, int n) {
  need(atoms, "atoms");
  need(probs, "probs");
  dlab::require(n >= 1, dlab::ErrorCode::EmptyInput, "prior has no atoms");
  std::vector<dlab::PriorAtom> prior;
  for (int i = 0; i < n; ++i) prior.push_back({atoms[i], probs[i]});
  return prior;
}

template <typename T>
void emit(T** out, T* value) {
  *out = value;
}

const dlab::ResNetWeights& net_at(const dl_weights* w, size_t index) {
  need(w, "weights");
  dlab::require(index < w->nets.size(), dlab::ErrorCode::InvalidArgument,
                "network index out of range");
  return w->nets[index];
}

dlab::Matrix correction_matrix(const dl_unroll_config& cfg, double t, dlab::Index n) {
  const double c = cfg.sk ? dlab::sk_correction(cfg.beta, t) : 0.0;
  return dlab::Matrix::Identity(n, n) * c;
}

dlab::ResNetWeights unroll_one(const dlab::Model& model, const dl_unroll_config& cfg,
                               double t) {
  using namespace dlab;
  if (const auto* ising = std::get_if<IsingModel>(&model)) {
    const PwlDenoiser pwl = build_pwl(ScalarDenoiser::tanh(), cfg.zeta);
    return unroll_ising(ising->coupling(), correction_matrix(cfg, t, ising->dim()), t,
                        cfg.L, pwl);
  }
  if (const auto* block = std::get_if<BlockIsingModel>(&model)) {
    const PwlDenoiser pwl = build_pwl(ScalarDenoiser::tanh(), cfg.zeta);
    if (cfg.conditional) {
      return unroll_conditional(block->a11(), block->a12(),
                                correction_matrix(cfg, t, block->dim()), t, cfg.L, pwl);
    }
    return unroll_marginal(*block,
                           correction_matrix(cfg, t, block->dim() + block->latent_dim()),
                           t, cfg.L, pwl);
  }
  const auto& sparse = std::get<SparseCodingModel>(model);
  const double nu = sparse_default_nu(sparse, t);
  const PwlDenoiser pwl = build_pwl(posterior_scalar(sparse.prior(), nu), cfg.zeta);
  return unroll_sparse(sparse, nu, t, cfg.L, pwl);
}

}  // namespace

extern "C" {

const char* dl_version(void) { return "0.1.0"; }

const char* dl_status_string(dl_status status) {
  switch (status) {
    case DL_OK: return "ok";
    case DL_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case DL_ERR_DIMENSION_TOO_LARGE: return "dimension-too-large";
    case DL_ERR_NONPOSITIVE_TIME: return "nonpositive-time";
    case DL_ERR_SHAPE_MISMATCH: return "shape-mismatch";
    case DL_ERR_CONTRACTION_VIOLATION: return "contraction-violation";
    case DL_ERR_NON_CONVERGENCE: return "non-convergence";
    case DL_ERR_NON_FINITE: return "non-finite";
    case DL_ERR_DIVERGENCE: return "divergence";
    case DL_ERR_SUPPORT_TOO_LARGE: return "support-too-large";
    case DL_ERR_EMPTY_INPUT: return "empty-input";
    case DL_ERR_IO: return "io";
    case DL_ERR_PARSE: return "parse";
    case DL_ERR_BOUNDARY_ARGUMENT: return "boundary-argument";
    case DL_ERR_INTERNAL: return "internal";
  }
  return "internal";
}

const char* dl_last_error(void) { return g_last_error.c_str(); }

void dl_string_free(char* s) { std::free(s); }

/* ---- models ---- */

dl_status dl_model_from_json(const char* json, dl_model** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    emit(out, new dl_model{dlab::model_from_json(json)});
  });
}

dl_status dl_model_load(const char* path, dl_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    emit(out, new dl_model{dlab::model_from_json(dlab::read_file(path))});
  });
}

dl_status dl_model_save(const dl_model* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    dlab::write_file(path, dlab::model_to_json(model->model) + "\n");
  });
}

dl_status dl_model_to_json(const dl_model* model, char** out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    *out = dup_string(dlab::model_to_json(model->model));
  });
}

dl_status dl_model_ising(const double* coupling, int dim, dl_model** out) {
  return guard([&] {
    need(coupling, "coupling");
    need(out, "out");
    dlab::require(dim >= 1, dlab::ErrorCode::InvalidArgument, "dim must be >= 1");
    emit(out, new dl_model{dlab::IsingModel(row_major(coupling, dim, dim))});
  });
}

dl_status dl_model_ising_random(int dim, double op_norm, uint64_t seed, dl_model** out) {
  return guard([&] {
    need(out, "out");
    emit(out, new dl_model{dlab::IsingModel(dlab::random_coupling(dim, op_norm, seed))});
  });
}

dl_status dl_model_ising_sk(int dim, double beta, uint64_t seed, dl_model** out) {
  return guard([&] {
    need(out, "out");
    emit(out, new dl_model{dlab::IsingModel(dlab::sk_coupling(dim, beta, seed))});
  });
}

dl_status dl_model_block_random(int d, int m, double op_norm, uint64_t seed,
                                dl_model** out) {
  return guard([&] {
    need(out, "out");
    dlab::require(d >= 1 && m >= 0, dlab::ErrorCode::InvalidArgument,
                  "block model needs d >= 1 and m >= 0");
    const dlab::Matrix j = dlab::random_coupling(d + m, op_norm, seed);
    emit(out, new dl_model{dlab::BlockIsingModel(j.topLeftCorner(d, d), j.topRightCorner(d, m),
                                                 j.bottomRightCorner(m, m))});
  });
}

dl_status dl_model_sparse(const double* dictionary, int d, int m, const double* atoms,
                          const double* probs, int n_atoms, double tau, dl_model** out) {
  return guard([&] {
    need(dictionary, "dictionary");
    need(out, "out");
    dlab::require(d >= 1 && m >= 1, dlab::ErrorCode::InvalidArgument,
                  "dictionary must be non-empty");
    emit(out, new dl_model{dlab::SparseCodingModel(row_major(dictionary, d, m),
                                                   prior_from(atoms, probs, n_atoms), tau)});
  });
}

dl_status dl_model_sparse_random(int d, int m, const double* atoms, const double* probs,
                                 int n_atoms, double tau, uint64_t seed, dl_model** out) {
  return guard([&] {
    need(out, "out");
    dlab::require(d >= 1 && m >= 1, dlab::ErrorCode::InvalidArgument,
                  "dictionary must be non-empty");
    dlab::Rng rng(seed, 0);
    dlab::Matrix a(d, m);
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < m; ++j) a(i, j) = sd * rng.normal();
    }
    emit(out, new dl_model{dlab::SparseCodingModel(a, prior_from(atoms, probs, n_atoms), tau)});
  });
}

void dl_model_free(dl_model* model) { delete model; }

int dl_model_dim(const dl_model* model) {
  return model ? dlab::model_dim(model->model) : 0;
}

int dl_model_latent_dim(const dl_model* model) {
  if (!model) return 0;
  if (const auto* b = std::get_if<dlab::BlockIsingModel>(&model->model)) return b->latent_dim();
  if (const auto* s = std::get_if<dlab::SparseCodingModel>(&model->model)) return s->latent_dim();
  return 0;
}

const char* dl_model_type(const dl_model* model) {
  if (!model) return "";
  if (std::holds_alternative<dlab::IsingModel>(model->model)) return "ising";
  if (std::holds_alternative<dlab::BlockIsingModel>(model->model)) return "block_ising";
  return "sparse_coding";
}

dl_status dl_model_hash(const dl_model* model, char** out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    *out = dup_string(dlab::hex64(dlab::fnv1a64(dlab::model_to_json(model->model))));
  });
}

dl_status dl_model_sample(const dl_model* model, size_t n, uint64_t seed, double* out,
                          double* theta_out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    const int d = dlab::model_dim(model->model);
    std::vector<dlab::Vector> xs, thetas;
    if (const auto* ising = std::get_if<dlab::IsingModel>(&model->model)) {
      xs = dlab::sample(*ising, n, seed);
    } else if (const auto* block = std::get_if<dlab::BlockIsingModel>(&model->model)) {
      for (auto& s : dlab::sample_joint(*block, n, seed)) {
        xs.push_back(std::move(s.x));
        thetas.push_back(std::move(s.theta));
      }
    } else {
      xs = dlab::sparse_sample(std::get<dlab::SparseCodingModel>(model->model), n, seed);
    }
    for (size_t i = 0; i < xs.size(); ++i) {
      for (int j = 0; j < d; ++j) out[i * d + j] = xs[i](j);
    }
    if (theta_out) {
      for (size_t i = 0; i < thetas.size(); ++i) {
        const auto m = thetas[i].size();
        for (dlab::Index j = 0; j < m; ++j) theta_out[i * m + j] = thetas[i](j);
      }
    }
  });
}

/* ---- grids ---- */

dl_status dl_grid_two_phase(double kappa, int n0, int n, dl_grid** out) {
  return guard([&] {
    need(out, "out");
    emit(out, new dl_grid{dlab::two_phase_grid(kappa, n0, n)});
  });
}

dl_status dl_grid_uniform(double horizon, double delta, int n, dl_grid** out) {
  return guard([&] {
    need(out, "out");
    emit(out, new dl_grid{dlab::uniform_grid(horizon, delta, n)});
  });
}

dl_status dl_grid_from_json(const char* json, dl_grid** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    emit(out, new dl_grid{dlab::grid_from_json(json)});
  });
}

dl_status dl_grid_load(const char* path, dl_grid** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    emit(out, new dl_grid{dlab::grid_from_json(dlab::read_file(path))});
  });
}

void dl_grid_free(dl_grid* grid) { delete grid; }
int dl_grid_steps(const dl_grid* grid) { return grid ? grid->grid.n : 0; }
double dl_grid_horizon(const dl_grid* grid) { return grid ? grid->grid.horizon : 0.0; }
double dl_grid_delta(const dl_grid* grid) { return grid ? grid->grid.delta : 0.0; }

dl_status dl_grid_times(const dl_grid* grid, double* out) {
  return guard([&] {
    need(grid, "grid");
    need(out, "out");
    std::copy(grid->grid.times.begin(), grid->grid.times.end(), out);
  });
}

dl_status dl_grid_gaps(const dl_grid* grid, double* out) {
  return guard([&] {
    need(grid, "grid");
    need(out, "out");
    std::copy(grid->grid.gaps.begin(), grid->grid.gaps.end(), out);
  });
}

dl_status dl_grid_to_json(const dl_grid* grid, char** out) {
  return guard([&] {
    need(grid, "grid");
    need(out, "out");
    *out = dup_string(dlab::grid_to_json(grid->grid));
  });
}

/* ---- networks ---- */

void dl_unroll_config_default(dl_unroll_config* cfg) {
  if (!cfg) return;
  cfg->L = 8;
  cfg->zeta = 0.05;
  cfg->sk = 0;
  cfg->beta = 0.0;
  cfg->conditional = 0;
}

dl_status dl_weights_load(const char* path, dl_weights** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    emit(out, new dl_weights{dlab::weights_from_json(dlab::read_file(path))});
  });
}

dl_status dl_weights_from_json(const char* json, dl_weights** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    emit(out, new dl_weights{dlab::weights_from_json(json)});
  });
}

dl_status dl_weights_to_json(const dl_weights* w, char** out) {
  return guard([&] {
    need(w, "weights");
    need(out, "out");
    *out = dup_string(w->nets.size() == 1 ? dlab::weights_to_json(w->nets.front())
                                          : dlab::weights_bundle_to_json(w->nets));
  });
}

dl_status dl_weights_save(const dl_weights* w, const char* path) {
  return guard([&] {
    need(w, "weights");
    need(path, "path");
    dlab::write_file(path, (w->nets.size() == 1 ? dlab::weights_to_json(w->nets.front())
                                                : dlab::weights_bundle_to_json(w->nets)) +
                               "\n");
  });
}

void dl_weights_free(dl_weights* w) { delete w; }

size_t dl_weights_count(const dl_weights* w) { return w ? w->nets.size() : 0; }

dl_status dl_weights_info(const dl_weights* w, size_t index, dl_net_info* out) {
  return guard([&] {
    need(out, "out");
    const auto& n = net_at(w, index);
    std::memset(out, 0, sizeof *out);
    std::strncpy(out->kind, dlab::net_kind_name(n.kind), sizeof out->kind - 1);
    out->d = n.d;
    out->m = n.m;
    out->theta_dim = n.theta_dim();
    out->D = n.D;
    out->L = n.L;
    out->M = n.M;
    out->bound = n.bound;
    out->t = n.t;
    out->zeta = n.zeta;
  });
}

dl_status dl_weights_norm(const dl_weights* w, size_t index, double* out) {
  return guard([&] {
    need(out, "out");
    *out = dlab::weight_norm(net_at(w, index));
  });
}

dl_status dl_weights_forward(const dl_weights* w, size_t index, const double* z,
                             const double* theta, double* out) {
  return guard([&] {
    const auto& n = net_at(w, index);
    need(z, "z");
    need(out, "out");
    dlab::Vector th;
    if (n.theta_dim() > 0) {
      need(theta, "theta");
      th = vec(theta, n.theta_dim());
    }
    const dlab::Vector y = dlab::resnet_forward(n, vec(z, n.d), th);
    std::copy(y.data(), y.data() + y.size(), out);
  });
}

dl_status dl_unroll(const dl_model* model, const dl_unroll_config* cfg, double t,
                    dl_weights** out) {
  return guard([&] {
    need(model, "model");
    need(cfg, "config");
    need(out, "out");
    emit(out, new dl_weights{{unroll_one(model->model, *cfg, t)}});
  });
}

dl_status dl_unroll_grid(const dl_model* model, const dl_unroll_config* cfg,
                         const dl_grid* grid, dl_weights** out) {
  return guard([&] {
    need(model, "model");
    need(cfg, "config");
    need(grid, "grid");
    need(out, "out");
    std::vector<dlab::ResNetWeights> nets;
    const auto& g = grid->grid;
    for (int k = 0; k < g.n; ++k) nets.push_back(unroll_one(model->model, *cfg, g.horizon - g.times[k]));
    emit(out, new dl_weights{std::move(nets)});
  });
}

/* ---- training ---- */

void dl_train_config_default(dl_train_config* cfg) {
  if (!cfg) return;
  const dlab::TrainConfig def;
  cfg->D = 0;
  cfg->L = 4;
  cfg->M = 32;
  cfg->learning_rate = def.learning_rate;
  cfg->steps = def.steps;
  cfg->batch_size = def.batch_size;
  cfg->bound = def.bound;
  cfg->truncation = def.truncation ? 1 : 0;
  cfg->seed = 0;
  cfg->init_scale = def.init_scale;
  cfg->n_samples = 2000;
  cfg->data_seed = 1;
  cfg->conditional = 0;
}

dl_status dl_train(const dl_model* model, double t, const dl_train_config* cfg,
                   dl_weights** out, double* loss_trace) {
  return guard([&] {
    need(model, "model");
    need(cfg, "config");
    need(out, "out");
    using namespace dlab;
    const int d = model_dim(model->model);
    std::vector<Vector> xs, thetas;
    if (const auto* ising = std::get_if<IsingModel>(&model->model)) {
      xs = sample(*ising, cfg->n_samples, cfg->data_seed);
    } else if (const auto* block = std::get_if<BlockIsingModel>(&model->model)) {
      for (auto& s : sample_joint(*block, cfg->n_samples, cfg->data_seed)) {
        xs.push_back(std::move(s.x));
        if (cfg->conditional) thetas.push_back(std::move(s.theta));
      }
    } else {
      require(!cfg->conditional, ErrorCode::InvalidArgument,
              "sparse coding has no conditional score");
      xs = sparse_sample(std::get<SparseCodingModel>(model->model), cfg->n_samples,
                         cfg->data_seed);
    }
    const TrainData data = make_train_data(std::move(xs), cfg->data_seed + 1, std::move(thetas));
    TrainConfig tc;
    tc.learning_rate = cfg->learning_rate;
    tc.steps = cfg->steps;
    tc.batch_size = cfg->batch_size;
    tc.bound = cfg->bound;
    tc.truncation = cfg->truncation != 0;
    tc.seed = cfg->seed;
    tc.init_scale = cfg->init_scale;
    const TrainDims dims{cfg->D > 0 ? cfg->D : 3 * d, cfg->L, cfg->M};
    const TrainResult res = train_score(data, t, dims, tc, default_truncation(model->model)(t));
    if (loss_trace) std::copy(res.loss_trace.begin(), res.loss_trace.end(), loss_trace);
    emit(out, new dl_weights{{res.weights}});
  });
}

/* ---- scores ---- */

void dl_vi_config_default(dl_vi_config* cfg) {
  if (!cfg) return;
  cfg->sk = 0;
  cfg->beta = 0.0;
  cfg->zeta = 0.0;
  cfg->steps = -1;
  cfg->tol = 1e-10;
  cfg->conditional = 0;
}

dl_status dl_score_exact(const dl_model* model, int conditional, dl_score** out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    emit(out, new dl_score{dlab::exact_score_oracle(model->model, conditional != 0)});
  });
}

dl_status dl_score_vi(const dl_model* model, const dl_vi_config* cfg, dl_score** out) {
  return guard([&] {
    need(model, "model");
    need(cfg, "config");
    need(out, "out");
    dlab::ViConfig vc;
    vc.correction = cfg->sk ? dlab::ViConfig::Correction::Sk : dlab::ViConfig::Correction::None;
    vc.beta = cfg->beta;
    vc.zeta = cfg->zeta;
    vc.steps = cfg->steps;
    vc.tol = cfg->tol;
    vc.conditional = cfg->conditional != 0;
    emit(out, new dl_score{dlab::vi_score_oracle(model->model, vc)});
  });
}

dl_status dl_score_network(const dl_weights* w, const dl_model* model, int truncate,
                           int trained, dl_score** out) {
  return guard([&] {
    need(w, "weights");
    need(out, "out");
    std::function<dlab::TruncationSpec(double)> trunc;
    if (truncate) {
      need(model, "model");
      trunc = dlab::default_truncation(model->model);
    }
    emit(out, new dl_score{dlab::network_score_oracle(
                  w->nets, trained ? dlab::Provenance::Trained : dlab::Provenance::Unrolled,
                  trunc)});
  });
}

void dl_score_free(dl_score* score) { delete score; }
int dl_score_dim(const dl_score* score) { return score ? score->oracle.dim : 0; }
int dl_score_theta_dim(const dl_score* score) { return score ? score->oracle.theta_dim : 0; }

const char* dl_score_provenance(const dl_score* score) {
  return score ? dlab::provenance_name(score->oracle.provenance) : "";
}

dl_status dl_score_eval(const dl_score* score, double t, const double* z,
                        const double* theta, double* out) {
  return guard([&] {
    need(score, "score");
    need(z, "z");
    need(out, "out");
    const auto& o = score->oracle;
    dlab::Vector th;
    if (o.theta_dim > 0) {
      need(theta, "theta");
      th = vec(theta, o.theta_dim);
    }
    const dlab::Vector s = o(t, vec(z, o.dim), th);
    std::copy(s.data(), s.data() + s.size(), out);
  });
}

/* ---- sampling ---- */

dl_status dl_sample(const dl_score* score, const dl_grid* grid, size_t n_chains,
                    uint64_t seed, const double* theta, int threads, double* out) {
  return guard([&] {
    need(score, "score");
    need(grid, "grid");
    need(out, "out");
    dlab::SampleOptions opt;
    opt.n_chains = n_chains;
    opt.seed = seed;
    opt.threads = threads;
    if (score->oracle.theta_dim > 0) {
      need(theta, "theta");
      opt.theta = vec(theta, score->oracle.theta_dim);
    }
    const auto ys = dlab::ddpm_sample(score->oracle, grid->grid, opt);
    const int d = score->oracle.dim;
    for (size_t c = 0; c < ys.size(); ++c) {
      for (int j = 0; j < d; ++j) out[c * d + j] = ys[c](j);
    }
  });
}

/* ---- metrics ---- */

dl_status dl_eval_score_mse(const dl_score* candidate, const dl_score* reference,
                            const dl_model* model, double t, size_t n_mc, uint64_t seed,
                            double* mean, double* std_error) {
  return guard([&] {
    need(candidate, "candidate");
    need(reference, "reference");
    need(model, "model");
    need(mean, "mean");
    const auto est = dlab::score_mse(candidate->oracle, reference->oracle, model->model, t,
                                     n_mc, seed);
    *mean = est.mean;
    if (std_error) *std_error = est.std_error;
  });
}

namespace {

dlab::DiscreteDistribution spin_reference(const dlab::Model& model, double t) {
  using namespace dlab;
  DiscreteDistribution p;
  if (const auto* ising = std::get_if<IsingModel>(&model)) {
    p = enumerate_distribution(*ising);
  } else if (const auto* block = std::get_if<BlockIsingModel>(&model)) {
    p = leading_marginal(enumerate_distribution(block->joint()), block->dim());
  } else {
    throw Error(ErrorCode::InvalidArgument, "rounded metrics need a spin model");
  }
  return t > 0.0 ? rounded_noised_distribution(p, t) : p;
}

std::vector<dlab::Vector> rows(const double* samples, size_t n, int d) {
  std::vector<dlab::Vector> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(vec(samples + i * d, d));
  return out;
}

}  // namespace

dl_status dl_eval_rounded(const dl_model* model, double t, const double* samples, size_t n,
                          double pseudo_count, double* kl, double* tv) {
  return guard([&] {
    need(model, "model");
    need(samples, "samples");
    const int d = dlab::model_dim(model->model);
    const auto p = spin_reference(model->model, t);
    const auto codes = dlab::round_to_codes(rows(samples, n, d));
    if (kl) *kl = dlab::discrete_kl(p, codes, pseudo_count).value;
    if (tv) *tv = dlab::tv(p, codes).value;
  });
}

dl_status dl_eval_samples(const dl_model* model, double t, const double* samples, size_t n,
                          uint64_t seed, char** report_json) {
  return guard([&] {
    need(model, "model");
    need(samples, "samples");
    need(report_json, "out");
    using namespace dlab;
    const int d = model_dim(model->model);
    const auto ys = rows(samples, n, d);
    EvalReport r;
    r.n = n;
    const Moments mo = sample_moments(ys);
    r.mean = mo.mean;
    r.variance = mo.covariance.diagonal();
    r.metadata["model_hash"] = hex64(fnv1a64(model_to_json(model->model)));
    r.metadata["t"] = std::to_string(t);
    if (const auto* sc = std::get_if<SparseCodingModel>(&model->model)) {
      const std::size_t n_ref = std::min<std::size_t>(n, 2000);
      auto ref = sparse_sample(*sc, n_ref, seed);
      if (t > 0.0) {
        const NoiseLevel nl = noise_level(t);
        Rng rng(seed, 1);
        for (auto& x : ref) x = nl.lambda * x + nl.sigma() * rng.normal_vector(d);
      }
      const std::vector<Vector> head(ys.begin(), ys.begin() + static_cast<long>(n_ref));
      r.energy_distance = energy_distance(head, ref);
    } else {
      const auto p = spin_reference(model->model, t);
      const auto codes = round_to_codes(ys);
      r.kl = discrete_kl(p, codes, 0.5).value;
      r.tv = tv(p, codes).value;
      r.metadata["rounding"] = "sign, artifact convention";
      r.metadata["pseudo_count"] = "0.5";
    }
    r.validate();
    *report_json = dup_string(report_to_json(r));
  });
}

}  // extern "C"
