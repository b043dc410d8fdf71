// dlab: command-line driver over the C API.

#include "dlab/dlab.h"

#include "CLI11.hpp"
#include "json.hpp"
#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#ifndef DLAB_GIT_HASH
#define DLAB_GIT_HASH "unknown"
#endif

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
  std::string cls;
  Failure(std::string c, const std::string& msg) : std::runtime_error(msg), cls(std::move(c)) {}
};

void check(dl_status s) {
  if (s != DL_OK) throw Failure(dl_status_string(s), dl_last_error());
}

[[noreturn]] void bad_arg(const std::string& msg) { throw Failure("invalid-argument", msg); }

template <typename T, void (*F)(T*)>
struct Free {
  void operator()(T* p) const { F(p); }
};
using ModelPtr = std::unique_ptr<dl_model, Free<dl_model, dl_model_free>>;
using GridPtr = std::unique_ptr<dl_grid, Free<dl_grid, dl_grid_free>>;
using WeightsPtr = std::unique_ptr<dl_weights, Free<dl_weights, dl_weights_free>>;
using ScorePtr = std::unique_ptr<dl_score, Free<dl_score, dl_score_free>>;

std::string take(char* s) {
  std::string out(s ? s : "");
  dl_string_free(s);
  return out;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Failure("io", "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::string tok;
  std::istringstream in(text);
  while (std::getline(in, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      bad_arg(std::string("cannot parse ") + what + " entry '" + tok + "'");
    }
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- run context ----

struct Run {
  std::string command;
  fs::path out_dir;
  json manifest = json::object();

  fs::path resolve(const std::string& p) const {
    const fs::path q(p);
    return q.is_absolute() ? q : out_dir / q;
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = resolve(name);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out || !(out << content)) throw Failure("io", "cannot write " + p.string());
    manifest["outputs"].push_back(
        {{"path", p.string()}, {"bytes", content.size()}, {"fnv1a", hex64(fnv1a(content))}});
  }

  void input(const std::string& path) {
    if (path.empty()) return;
    const std::string content = slurp(path);
    manifest["inputs"].push_back({{"path", path}, {"fnv1a", hex64(fnv1a(content))}});
  }

  void seed(const std::string& name, std::uint64_t value) { manifest["seeds"][name] = value; }
};

ModelPtr load_model(Run& run, const std::string& path) {
  if (path.empty()) bad_arg("--model is required");
  run.input(path);
  dl_model* m = nullptr;
  check(dl_model_load(path.c_str(), &m));
  ModelPtr model(m);
  run.manifest["model"] = json::parse(take([&] {
    char* s = nullptr;
    check(dl_model_to_json(model.get(), &s));
    return s;
  }()));
  char* h = nullptr;
  check(dl_model_hash(model.get(), &h));
  run.manifest["model_hash"] = take(h);
  return model;
}

std::vector<std::string> spin_header(int d, bool rounded) {
  std::vector<std::string> cols{"chain"};
  for (int j = 1; j <= d; ++j) cols.push_back("y_" + std::to_string(j));
  if (rounded) {
    for (int j = 1; j <= d; ++j) cols.push_back("r_" + std::to_string(j));
  }
  return cols;
}

bool is_spin(const dl_model* m) { return std::string(dl_model_type(m)) != "sparse_coding"; }

// ---- shared options ----

struct GridOpts {
  double kappa = 0.0;
  int n0 = 0, n = 0;
  std::string file;

  void add(CLI::App* app) {
    app->add_option("--kappa", kappa, "uniform-phase step of the two-phase grid");
    app->add_option("--n0", n0, "number of uniform steps");
    app->add_option("--n", n, "total number of steps");
    app->add_option("--grid", file, "grid JSON (instead of --kappa/--n0/--n)");
  }
  bool given() const { return !file.empty() || kappa > 0.0; }

  GridPtr make(Run& run) const {
    dl_grid* g = nullptr;
    if (!file.empty()) {
      run.input(file);
      check(dl_grid_load(file.c_str(), &g));
    } else if (kappa > 0.0) {
      check(dl_grid_two_phase(kappa, n0, n, &g));
    } else {
      bad_arg("a grid needs --grid or --kappa/--n0/--n");
    }
    GridPtr grid(g);
    char* s = nullptr;
    check(dl_grid_to_json(grid.get(), &s));
    run.manifest["grid"] = json::parse(take(s));
    return grid;
  }
};

std::vector<double> grid_times(const dl_grid* g) {
  std::vector<double> t(dl_grid_steps(g) + 1);
  check(dl_grid_times(g, t.data()));
  return t;
}

struct ScoreOpts {
  std::string spec = "exact";
  bool conditional = false;
  std::string theta;
  double vi_zeta = 0.0;
  double sk_beta = 0.0;
  int vi_steps = -1;
  bool no_truncate = false;
  int L = 8;
  double zeta = 0.05;

  void add(CLI::App* app, const char* name = "--score") {
    app->add_option(name, spec, "exact | vi | unrolled[:w.json] | trained:w.json");
    app->add_flag("--conditional", conditional, "block models: conditional score given theta");
    app->add_option("--theta", theta, "conditioning values, comma separated");
    app->add_option("--vi-zeta", vi_zeta, "vi: iterate the pwl denoiser with this budget");
    app->add_option("--sk-beta", sk_beta, "SK correction inverse temperature (0: none)");
    app->add_option("--vi-steps", vi_steps, "vi: fixed number of iterations (-1: solve)");
    app->add_flag("--no-truncate", no_truncate, "skip truncation of network scores");
    app->add_option("--L", L, "unrolled depth when unrolling on the fly");
    app->add_option("--zeta", zeta, "pwl budget when unrolling on the fly");
  }

  dl_unroll_config unroll_config() const {
    dl_unroll_config c;
    dl_unroll_config_default(&c);
    c.L = L;
    c.zeta = zeta;
    c.sk = sk_beta > 0.0;
    c.beta = sk_beta;
    c.conditional = conditional;
    return c;
  }

  // Bare "unrolled" unrolls at every grid time, or at `t` without a grid.
  ScorePtr make(Run& run, const std::string& which, const dl_model* model,
                const dl_grid* grid, double t = 0.0) const {
    dl_score* s = nullptr;
    const auto colon = which.find(':');
    const std::string kind = which.substr(0, colon);
    const std::string path = colon == std::string::npos ? "" : which.substr(colon + 1);
    if (kind == "exact") {
      check(dl_score_exact(model, conditional, &s));
    } else if (kind == "vi") {
      dl_vi_config c;
      dl_vi_config_default(&c);
      c.sk = sk_beta > 0.0;
      c.beta = sk_beta;
      c.zeta = vi_zeta;
      c.steps = vi_steps;
      c.conditional = conditional;
      check(dl_score_vi(model, &c, &s));
    } else if (kind == "unrolled" || kind == "trained") {
      dl_weights* w = nullptr;
      if (!path.empty()) {
        run.input(path);
        check(dl_weights_load(path.c_str(), &w));
      } else if (kind == "unrolled" && grid) {
        const dl_unroll_config c = unroll_config();
        check(dl_unroll_grid(model, &c, grid, &w));
      } else if (kind == "unrolled" && t > 0.0) {
        const dl_unroll_config c = unroll_config();
        check(dl_unroll(model, &c, t, &w));
      } else {
        bad_arg("score '" + which + "' needs a weight file");
      }
      WeightsPtr weights(w);
      check(dl_score_network(weights.get(), model, no_truncate ? 0 : 1, kind == "trained", &s));
    } else {
      bad_arg("unknown score '" + which + "'");
    }
    return ScorePtr(s);
  }

  std::vector<double> theta_for(const dl_score* s) const {
    const std::vector<double> th = parse_list(theta, "theta");
    const int need = dl_score_theta_dim(s);
    if (static_cast<int>(th.size()) != need) {
      bad_arg("score expects " + std::to_string(need) + " theta values, got " +
              std::to_string(th.size()));
    }
    return th;
  }
};

// ---- subcommands ----

struct GenModel {
  std::string type = "ising";
  int d = 4, m = 2;
  double norm = 0.3, beta = 0.2, tau = 0.5;
  std::string prior = "-1:0.25,0:0.5,1:0.25";
  std::string coupling;
  std::uint64_t seed = 0;
  std::string out = "model.json";
  CLI::Option* d_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--type", type, "ising | sk | block | sparse")
        ->check(CLI::IsMember({"ising", "sk", "block", "sparse"}));
    d_opt = app->add_option("--d", d, "observed dimension");
    app->add_option("--m", m, "latent dimension (block, sparse)");
    app->add_option("--norm", norm, "operator norm of the random coupling");
    app->add_option("--beta", beta, "SK inverse temperature");
    app->add_option("--tau", tau, "sparse coding noise level");
    app->add_option("--prior", prior, "sparse prior atoms as value:prob,...");
    app->add_option("--coupling", coupling, "explicit Ising coupling, row-major");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--out", out, "model JSON");
  }

  void operator()(Run& run) const {
    run.seed("seed", seed);
    dl_model* raw = nullptr;
    if (type == "ising" && !coupling.empty()) {
      const auto a = parse_list(coupling, "coupling");
      const int dim = static_cast<int>(std::lround(std::sqrt(static_cast<double>(a.size()))));
      if (dim * dim != static_cast<int>(a.size())) bad_arg("coupling must be a square matrix");
      if (d_opt->count() > 0 && dim != d) {
        bad_arg("--coupling has dimension " + std::to_string(dim) + " but --d is " +
                std::to_string(d));
      }
      check(dl_model_ising(a.data(), dim, &raw));
    } else if (type == "ising") {
      check(dl_model_ising_random(d, norm, seed, &raw));
    } else if (type == "sk") {
      check(dl_model_ising_sk(d, beta, seed, &raw));
    } else if (type == "block") {
      check(dl_model_block_random(d, m, norm, seed, &raw));
    } else {
      std::vector<double> atoms, probs;
      std::istringstream in(prior);
      std::string tok;
      while (std::getline(in, tok, ',')) {
        const auto c = tok.find(':');
        if (c == std::string::npos) bad_arg("prior entries look like value:prob");
        atoms.push_back(parse_list(tok.substr(0, c), "prior").at(0));
        probs.push_back(parse_list(tok.substr(c + 1), "prior").at(0));
      }
      check(dl_model_sparse_random(d, m, atoms.data(), probs.data(),
                                   static_cast<int>(atoms.size()), tau, seed, &raw));
    }
    ModelPtr model(raw);
    char* s = nullptr;
    check(dl_model_to_json(model.get(), &s));
    const std::string text = take(s);
    run.manifest["model"] = json::parse(text);
    char* h = nullptr;
    check(dl_model_hash(model.get(), &h));
    const std::string hash = take(h);
    run.manifest["model_hash"] = hash;
    run.write(out, text + "\n");
    std::cout << dl_model_type(model.get()) << " d=" << dl_model_dim(model.get())
              << " m=" << dl_model_latent_dim(model.get()) << " hash=" << hash << "\n";
  }
};

struct Schedule {
  GridOpts grid;
  std::string out;

  void add(CLI::App* app) {
    grid.add(app);
    app->add_option("--out", out, "also write the grid as JSON");
  }

  void operator()(Run& run) const {
    GridPtr g = grid.make(run);
    const auto t = grid_times(g.get());
    std::vector<double> gaps(dl_grid_steps(g.get()));
    check(dl_grid_gaps(g.get(), gaps.data()));
    std::cout << "# kappa=" << g17(grid.kappa) << " n0=" << grid.n0 << " n=" << grid.n
              << " T=" << g17(dl_grid_horizon(g.get()))
              << " delta=" << g17(dl_grid_delta(g.get())) << "\n";
    std::cout << "k,t_k,gamma_k\n";
    for (std::size_t k = 0; k < t.size(); ++k) {
      std::cout << k << "," << g17(t[k]) << "," << (k < gaps.size() ? g17(gaps[k]) : "") << "\n";
    }
    if (!out.empty()) {
      char* s = nullptr;
      check(dl_grid_to_json(g.get(), &s));
      run.write(out, take(s) + "\n");
    }
  }
};

struct Sample {
  std::string model;
  GridOpts grid;
  ScoreOpts score;
  std::size_t chains = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "samples.csv";

  void add(CLI::App* app) {
    app->add_option("--model", model, "model JSON")->required();
    grid.add(app);
    score.add(app);
    app->add_option("--chains", chains, "number of chains");
    app->add_option("--seed", seed, "random seed; chain c uses stream c");
    app->add_option("--threads", threads, "worker threads");
    app->add_option("--out", out, "samples CSV");
  }

  void operator()(Run& run) const {
    ModelPtr m = load_model(run, model);
    GridPtr g = grid.make(run);
    ScorePtr s = score.make(run, score.spec, m.get(), g.get());
    const auto th = score.theta_for(s.get());
    const int d = dl_score_dim(s.get());
    std::vector<double> ys(chains * d);
    check(dl_sample(s.get(), g.get(), chains, seed, th.empty() ? nullptr : th.data(), threads,
                    ys.data()));
    run.seed("seed", seed);
    run.manifest["score"] = {{"spec", score.spec}, {"provenance", dl_score_provenance(s.get())}};
    if (!th.empty()) run.manifest["theta"] = th;
    const bool rounded = is_spin(m.get());
    if (rounded) {
      run.manifest["rounding"] =
          "r_j = sign(y_j) with sign(0) = +1; an artifact reporting convention";
    }
    std::ostringstream csv;
    const auto cols = spin_header(d, rounded);
    for (std::size_t j = 0; j < cols.size(); ++j) csv << (j ? "," : "") << cols[j];
    csv << "\n";
    for (std::size_t c = 0; c < chains; ++c) {
      csv << c;
      for (int j = 0; j < d; ++j) csv << "," << g17(ys[c * d + j]);
      if (rounded) {
        for (int j = 0; j < d; ++j) csv << "," << (ys[c * d + j] >= 0.0 ? 1 : -1);
      }
      csv << "\n";
    }
    run.write(out, csv.str());
    std::cout << "wrote " << chains << " chains (d=" << d << ") to " << run.resolve(out).string()
              << "\n";
  }
};

struct Train {
  std::string model;
  double t = 0.5;
  GridOpts grid;
  std::string dims = "3d,4,32";
  int steps = 1000;
  double lr = 1e-2;
  double bound = 50.0;
  std::size_t batch = 0;
  std::uint64_t seed = 0, data_seed = 1;
  std::size_t n_samples = 2000;
  double init_scale = 1.0;
  bool no_truncate = false, conditional = false;
  std::string out = "weights.json", trace;

  void add(CLI::App* app) {
    app->add_option("--model", model, "model JSON")->required();
    app->add_option("--t", t, "diffusion time");
    grid.add(app);
    app->add_option("--dims", dims, "D,L,M; D may be written as <k>d");
    app->add_option("--steps", steps, "gradient steps");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--B", bound, "norm bound");
    app->add_option("--batch", batch, "minibatch size (0: full batch)");
    app->add_option("--seed", seed, "initialization and minibatch seed");
    app->add_option("--data-seed", data_seed, "training data seed");
    app->add_option("--n-samples", n_samples, "training set size");
    app->add_option("--init-scale", init_scale, "initialization scale");
    app->add_flag("--no-truncate", no_truncate, "train without output truncation");
    app->add_flag("--conditional", conditional, "block models: train the conditional score");
    app->add_option("--out", out, "weights JSON");
    app->add_option("--trace", trace, "loss trace CSV");
  }

  dl_train_config config(int d) const {
    dl_train_config c;
    dl_train_config_default(&c);
    std::vector<std::string> parts;
    std::istringstream in(dims);
    for (std::string tok; std::getline(in, tok, ',');) parts.push_back(tok);
    if (parts.size() != 3) bad_arg("--dims expects D,L,M");
    try {
      if (!parts[0].empty() && parts[0].back() == 'd') {
        const std::string k = parts[0].substr(0, parts[0].size() - 1);
        c.D = (k.empty() ? 1 : std::stoi(k)) * d;
      } else {
        c.D = std::stoi(parts[0]);
      }
      c.L = std::stoi(parts[1]);
      c.M = std::stoi(parts[2]);
    } catch (const std::exception&) {
      bad_arg("cannot parse --dims '" + dims + "'");
    }
    c.learning_rate = lr;
    c.steps = steps;
    c.batch_size = batch;
    c.bound = bound;
    c.truncation = !no_truncate;
    c.seed = seed;
    c.init_scale = init_scale;
    c.n_samples = n_samples;
    c.data_seed = data_seed;
    c.conditional = conditional;
    return c;
  }

  void operator()(Run& run) const {
    ModelPtr m = load_model(run, model);
    const dl_train_config c = config(dl_model_dim(m.get()));
    run.seed("seed", seed);
    run.seed("data_seed", data_seed);
    std::vector<double> ts{t};
    if (grid.given()) {
      GridPtr g = grid.make(run);
      const auto times = grid_times(g.get());
      const double T = dl_grid_horizon(g.get());
      ts.clear();
      for (std::size_t k = 0; k + 1 < times.size(); ++k) ts.push_back(T - times[k]);
    }
    json nets = json::array();
    std::ostringstream tr;
    tr << "t,step,loss\n";
    for (double tk : ts) {
      std::vector<double> losses(c.steps + 1);
      dl_weights* w = nullptr;
      check(dl_train(m.get(), tk, &c, &w, losses.data()));
      WeightsPtr weights(w);
      char* s = nullptr;
      check(dl_weights_to_json(weights.get(), &s));
      nets.push_back(json::parse(take(s)));
      for (std::size_t i = 0; i < losses.size(); ++i) {
        tr << g17(tk) << "," << i << "," << g17(losses[i]) << "\n";
      }
      std::cout << "t=" << g17(tk) << " loss " << g17(losses.front()) << " -> "
                << g17(losses.back()) << "\n";
    }
    const json doc = nets.size() == 1 ? nets.front() : json{{"networks", nets}};
    run.write(out, doc.dump(1) + "\n");
    if (!trace.empty()) run.write(trace, tr.str());
  }
};

struct Unroll {
  std::string model;
  double t = 0.5;
  GridOpts grid;
  int L = 8;
  double zeta = 0.05, sk_beta = 0.0;
  bool conditional = false;
  std::string out = "weights.json";

  void add(CLI::App* app) {
    app->add_option("--model", model, "model JSON")->required();
    app->add_option("--t", t, "diffusion time");
    grid.add(app);
    app->add_option("--L", L, "number of residual blocks");
    app->add_option("--zeta", zeta, "pwl approximation budget");
    app->add_option("--sk-beta", sk_beta, "SK correction inverse temperature (0: none)");
    app->add_flag("--conditional", conditional, "block models: conditional network");
    app->add_option("--out", out, "weights JSON");
  }

  void operator()(Run& run) const {
    ModelPtr m = load_model(run, model);
    dl_unroll_config c;
    dl_unroll_config_default(&c);
    c.L = L;
    c.zeta = zeta;
    c.sk = sk_beta > 0.0;
    c.beta = sk_beta;
    c.conditional = conditional;
    dl_weights* w = nullptr;
    if (grid.given()) {
      GridPtr g = grid.make(run);
      check(dl_unroll_grid(m.get(), &c, g.get(), &w));
    } else {
      check(dl_unroll(m.get(), &c, t, &w));
    }
    WeightsPtr weights(w);
    std::cout << "t,kind,D,M,norm,bound\n";
    for (std::size_t i = 0; i < dl_weights_count(weights.get()); ++i) {
      dl_net_info info;
      double norm = 0.0;
      check(dl_weights_info(weights.get(), i, &info));
      check(dl_weights_norm(weights.get(), i, &norm));
      std::cout << g17(info.t) << "," << info.kind << "," << info.D << "," << info.M << ","
                << g17(norm) << "," << g17(info.bound) << "\n";
    }
    char* s = nullptr;
    check(dl_weights_to_json(weights.get(), &s));
    run.write(out, take(s) + "\n");
  }
};

std::vector<double> read_samples(const std::string& path, int d, std::size_t& n) {
  std::istringstream in(slurp(path));
  std::string line;
  if (!std::getline(in, line)) throw Failure("empty-input", path + " is empty");
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    for (std::string c; std::getline(h, c, ',');) header.push_back(c);
  }
  std::vector<int> cols;
  for (int j = 1; j <= d; ++j) {
    auto it = std::find(header.begin(), header.end(), "y_" + std::to_string(j));
    if (it == header.end()) throw Failure("parse", path + " lacks column y_" + std::to_string(j));
    cols.push_back(static_cast<int>(it - header.begin()));
  }
  std::vector<double> ys;
  n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream r(line);
    for (std::string c; std::getline(r, c, ',');) cells.push_back(c);
    for (int c : cols) {
      if (c >= static_cast<int>(cells.size())) throw Failure("parse", "short row in " + path);
      ys.push_back(parse_list(cells[c], "sample").at(0));
    }
    ++n;
  }
  return ys;
}

void flatten(const json& j, const std::string& prefix, std::ostringstream& csv) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), csv);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      flatten(j[i], prefix + "_" + std::to_string(i + 1), csv);
    }
  } else if (j.is_number_float()) {
    csv << prefix << "," << g17(j.get<double>()) << "\n";
  } else if (j.is_string()) {
    csv << prefix << "," << j.get<std::string>() << "\n";
  } else {
    csv << prefix << "," << j.dump() << "\n";
  }
}

struct Eval {
  std::string model, samples;
  double delta = 0.0, t = 0.5;
  ScoreOpts score;
  std::string reference = "exact";
  std::size_t n_mc = 2000;
  std::uint64_t seed = 0;
  std::string out = "report.json";

  void add(CLI::App* app) {
    app->add_option("--model", model, "model JSON")->required();
    app->add_option("--samples", samples, "samples CSV to compare against the model");
    app->add_option("--delta", delta, "compare samples with the model noised to this time");
    score.spec.clear();
    score.add(app);
    app->add_option("--reference", reference, "reference score for --score");
    app->add_option("--t", t, "time at which scores are compared");
    app->add_option("--n-mc", n_mc, "Monte Carlo points for the score error");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--out", out, "report JSON (a flat CSV is written alongside)");
  }

  void operator()(Run& run) const {
    if (samples.empty() && score.spec.empty()) bad_arg("eval needs --samples and/or --score");
    ModelPtr m = load_model(run, model);
    run.seed("seed", seed);
    json report = json::object();
    if (!samples.empty()) {
      run.input(samples);
      std::size_t n = 0;
      const auto ys = read_samples(samples, dl_model_dim(m.get()), n);
      char* s = nullptr;
      check(dl_eval_samples(m.get(), delta, ys.data(), n, seed, &s));
      report = json::parse(take(s));
      report["metadata"]["samples"] = samples;
      report["metadata"]["delta"] = g17(delta);
    }
    if (!score.spec.empty()) {
      ScorePtr cand = score.make(run, score.spec, m.get(), nullptr, t);
      ScorePtr ref = score.make(run, reference, m.get(), nullptr, t);
      double mean = 0.0, se = 0.0;
      check(dl_eval_score_mse(cand.get(), ref.get(), m.get(), t, n_mc, seed, &mean, &se));
      report["score_mse_per_dim"] = mean;
      report["score_mse_stderr"] = se;
      report["metadata"]["score"] = score.spec;
      report["metadata"]["reference"] = reference;
      report["metadata"]["score_provenance"] = dl_score_provenance(cand.get());
      report["metadata"]["t"] = g17(t);
      report["metadata"]["n_mc"] = n_mc;
    }
    report["metadata"]["seed"] = seed;
    run.write(out, report.dump(1) + "\n");
    std::ostringstream csv;
    csv << "key,value\n";
    flatten(report, "", csv);
    run.write(fs::path(out).replace_extension(".csv").string(), csv.str());
    for (const char* key : {"score_mse_per_dim", "kl", "tv", "energy_distance"}) {
      if (report.contains(key) && !report[key].is_null()) {
        std::cout << key << "=" << g17(report[key].get<double>()) << "\n";
      }
    }
  }
};

struct Sweep {
  std::string model;
  std::string kappas = "0.2,0.1,0.05";
  double T = 5.0, delta = 0.05;
  int seeds = 20;
  std::uint64_t seed = 0;
  std::size_t chains = 100000;
  int threads = 1;
  double pseudo = 0.5;
  ScoreOpts score;
  std::string out = "sweep.csv", runs = "sweep_runs.csv", plot;

  void add(CLI::App* app) {
    app->add_option("--model", model, "spin model JSON")->required();
    app->add_option("--kappa", kappas, "comma separated step sizes");
    app->add_option("--T", T, "horizon; T - 1 must be a multiple of every kappa");
    app->add_option("--delta", delta, "target terminal gap");
    app->add_option("--seeds", seeds, "repetitions per kappa");
    app->add_option("--seed", seed, "base seed; repetition r uses seed + r");
    app->add_option("--chains", chains, "chains per repetition");
    app->add_option("--threads", threads, "worker threads");
    app->add_option("--pseudo-count", pseudo, "KL smoothing per state");
    score.add(app);
    app->add_option("--out", out, "summary CSV");
    app->add_option("--runs", runs, "per-repetition CSV");
    app->add_option("--plot", plot, "SVG plot of the median KL");
  }

  void operator()(Run& run) const {
    ModelPtr m = load_model(run, model);
    if (!is_spin(m.get())) bad_arg("sweep measures rounded KL and needs a spin model");
    std::vector<double> ks = parse_list(kappas, "kappa");
    if (ks.empty()) bad_arg("--kappa is empty");
    std::sort(ks.begin(), ks.end(), std::greater<>());
    if (seeds < 1) bad_arg("--seeds must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) bad_arg("--delta must lie in (0, 1)");
    run.seed("base_seed", seed);
    run.manifest["seeds"]["repetitions"] = seeds;

    std::ostringstream sum, per;
    sum << "kappa,n0,n,T,delta,median_kl,mean_kl,min_kl,max_kl,median_tv,nonincreasing\n";
    per << "kappa,rep,seed,kl,tv\n";
    svg::Series series{"median rounded KL", {}, {}};
    json grids = json::array();
    double prev = INFINITY;
    bool monotone = true;
    for (double kappa : ks) {
      const double q = (T - 1.0) / kappa;
      const int n0 = static_cast<int>(std::lround(q));
      if (n0 < 1 || std::abs(q - n0) > 1e-9 * std::max(1.0, q)) {
        bad_arg("T - 1 = " + g17(T - 1.0) + " is not a multiple of kappa " + g17(kappa));
      }
      const int tail = std::max(1, static_cast<int>(std::lround(std::log(1.0 / delta) /
                                                                std::log1p(kappa))));
      dl_grid* graw = nullptr;
      check(dl_grid_two_phase(kappa, n0, n0 + tail, &graw));
      GridPtr g(graw);
      const double dlt = dl_grid_delta(g.get());
      grids.push_back({{"kappa", kappa}, {"n0", n0}, {"n", n0 + tail}, {"delta", dlt}});
      ScorePtr s = score.make(run, score.spec, m.get(), g.get());
      const auto th = score.theta_for(s.get());
      const int d = dl_score_dim(s.get());
      std::vector<double> kls, tvs, ys(chains * d);
      for (int r = 0; r < seeds; ++r) {
        const std::uint64_t sd = seed + static_cast<std::uint64_t>(r);
        check(dl_sample(s.get(), g.get(), chains, sd, th.empty() ? nullptr : th.data(), threads,
                        ys.data()));
        double kl = 0.0, tv = 0.0;
        check(dl_eval_rounded(m.get(), dlt, ys.data(), chains, pseudo, &kl, &tv));
        kls.push_back(kl);
        tvs.push_back(tv);
        per << g17(kappa) << "," << r << "," << sd << "," << g17(kl) << "," << g17(tv) << "\n";
      }
      const double med = median(kls);
      const bool ok = med <= prev;
      monotone = monotone && ok;
      prev = med;
      double mean = 0.0;
      for (double v : kls) mean += v / kls.size();
      sum << g17(kappa) << "," << n0 << "," << n0 + tail << "," << g17(T) << "," << g17(dlt)
          << "," << g17(med) << "," << g17(mean) << ","
          << g17(*std::min_element(kls.begin(), kls.end())) << ","
          << g17(*std::max_element(kls.begin(), kls.end())) << "," << g17(median(tvs)) << ","
          << (ok ? 1 : 0) << "\n";
      series.x.push_back(kappa);
      series.y.push_back(med);
      std::cout << "kappa=" << g17(kappa) << " n0=" << n0 << " n=" << n0 + tail
                << " delta=" << g17(dlt) << " median_kl=" << g17(med) << "\n";
    }
    run.manifest["grids"] = grids;
    run.manifest["rounding"] = "sign(y) with sign(0) = +1; an artifact reporting convention";
    run.manifest["monotone_median_kl"] = monotone;
    run.write(out, sum.str());
    run.write(runs, per.str());
    if (!plot.empty()) {
      run.write(plot, svg::line_plot({series}, {"Rounded KL vs step size", "kappa",
                                                "median KL", true}));
    }
    std::cout << "median KL non-increasing as kappa shrinks: " << (monotone ? "yes" : "no")
              << "\n";
  }
};

// ---- driver ----

std::string section_config(const CLI::App& app, const std::string& sub) {
  std::istringstream in(app.config_to_str(true, false));
  std::ostringstream out;
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const auto dot = key.find('.');
    if (dot == std::string::npos || key.substr(0, dot) == sub) out << line << "\n";
  }
  return out.str();
}

int run_cli(const std::vector<std::string>& args);

struct Replay {
  std::string manifest;
  void add(CLI::App* app) {
    app->add_option("manifest", manifest, "manifest JSON written by an earlier run")->required();
  }
};

int replay(const Replay& r, const fs::path& out_dir) {
  const json man = json::parse(slurp(r.manifest));
  const std::string command = man.at("command").get<std::string>();
  const fs::path cfg = fs::temp_directory_path() / ("dlab-replay-" + hex64(fnv1a(man.dump())) + ".toml");
  {
    std::ofstream o(cfg);
    o << man.at("config").get<std::string>();
    if (!o) throw Failure("io", "cannot write " + cfg.string());
  }
  std::vector<std::string> args{"dlab", "--config", cfg.string(), "--out-dir", out_dir.string(),
                                command};
  fs::path model_copy;
  for (const auto& in : man.value("inputs", json::array())) {
    const std::string path = in.at("path").get<std::string>();
    std::string content;
    bool same = false;
    if (fs::exists(path)) {
      content = slurp(path);
      same = hex64(fnv1a(content)) == in.at("fnv1a").get<std::string>();
    }
    if (same) continue;
    const bool is_model = man.contains("model") && man.contains("model_hash") &&
                          path == man.value("model_path", std::string());
    if (!is_model) throw Failure("io", "input " + path + " is missing or has changed");
    model_copy = fs::temp_directory_path() / ("dlab-replay-" + man["model_hash"].get<std::string>() + ".json");
    std::ofstream o(model_copy);
    o << man["model"].dump() << "\n";
    args.push_back("--model");
    args.push_back(model_copy.string());
  }
  const int rc = run_cli(args);
  fs::remove(cfg);
  if (!model_copy.empty()) fs::remove(model_copy);
  return rc;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Diffusion score laboratory: exact, variational and unrolled scores"};
  app.set_config("--config", "", "TOML configuration; [subcommand] sections");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  std::string out_dir = ".";
  app.add_option("--out-dir", out_dir, "output directory (DLAB_OUTPUT_DIR overrides)");
  app.set_version_flag("--version", std::string(dl_version()) + " (" DLAB_GIT_HASH ")");

  GenModel gen;
  Schedule sched;
  Sample samp;
  Train train;
  Unroll unroll;
  Eval eval;
  Sweep sweep;
  Replay rep;
  gen.add(app.add_subcommand("gen-model", "write a random or explicit model"));
  sched.add(app.add_subcommand("schedule", "print a two-phase time grid"));
  samp.add(app.add_subcommand("sample", "run the reverse sampler"));
  train.add(app.add_subcommand("train", "fit a network score by ERM"));
  unroll.add(app.add_subcommand("unroll", "write analytically unrolled networks"));
  eval.add(app.add_subcommand("eval", "score error and sample metrics"));
  sweep.add(app.add_subcommand("sweep", "rounded KL across step sizes"));
  rep.add(app.add_subcommand("replay", "rerun a command from its manifest"));

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: usage: " << msg << "\n";
    return 2;
  }

  if (const char* env = std::getenv("DLAB_OUTPUT_DIR"); env && *env) out_dir = env;
  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "replay") return replay(rep, out_dir);
    fs::create_directories(out_dir);
    Run run;
    run.command = name;
    run.out_dir = out_dir;
    run.manifest["tool"] = "dlab";
    run.manifest["version"] = dl_version();
    run.manifest["git"] = DLAB_GIT_HASH;
    run.manifest["command"] = name;
    run.manifest["argv"] = std::vector<std::string>(args.begin() + 1, args.end());
    run.manifest["config"] = section_config(app, name);
    run.manifest["seeds"] = json::object();
    std::string primary;
    if (name == "gen-model") {
      gen(run);
      primary = gen.out;
    } else if (name == "schedule") {
      sched(run);
      primary = sched.out;
    } else if (name == "sample") {
      run.manifest["model_path"] = samp.model;
      run.manifest["threads"] = samp.threads;
      samp(run);
      primary = samp.out;
    } else if (name == "train") {
      run.manifest["model_path"] = train.model;
      train(run);
      primary = train.out;
    } else if (name == "unroll") {
      run.manifest["model_path"] = unroll.model;
      unroll(run);
      primary = unroll.out;
    } else if (name == "eval") {
      run.manifest["model_path"] = eval.model;
      eval(run);
      primary = eval.out;
    } else {
      run.manifest["model_path"] = sweep.model;
      run.manifest["threads"] = sweep.threads;
      sweep(run);
      primary = sweep.out;
    }
    fs::path man = primary.empty() ? fs::path(name + ".manifest.json")
                                   : fs::path(primary).replace_extension(".manifest.json");
    const fs::path p = run.resolve(man.string());
    std::ofstream o(p);
    if (!(o << run.manifest.dump(1) << "\n")) throw Failure("io", "cannot write " + p.string());
    return 0;
  } catch (const Failure& f) {
    std::string msg = f.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << f.cls << ": " << msg << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: parse: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) { return run_cli(std::vector<std::string>(argv, argv + argc)); }
