#include "dlab/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dlab {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix flat_matrix(const json& data, Index rows, Index cols, const char* what) {
  require(data.is_array() && static_cast<Index>(data.size()) == rows * cols,
          ErrorCode::Parse, std::string(what) + ": expected " +
                                std::to_string(rows * cols) + " entries");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = data[i * cols + j].get<double>();
  }
  return m;
}

// Accepts a flat row-major array or a list of rows.
Matrix matrix_field(const json& doc, const char* key, Index rows, Index cols) {
  require(doc.contains(key), ErrorCode::Parse, std::string("missing '") + key + "'");
  const json& v = doc.at(key);
  if (v.is_object()) {
    return flat_matrix(v.at("data"), v.at("rows").get<Index>(), v.at("cols").get<Index>(), key);
  }
  if (!v.empty() && v.front().is_array()) {
    json flat = json::array();
    for (const auto& row : v) {
      require(static_cast<Index>(row.size()) == cols, ErrorCode::Parse,
              std::string(key) + ": ragged rows");
      for (const auto& x : row) flat.push_back(x);
    }
    return flat_matrix(flat, rows, cols, key);
  }
  return flat_matrix(v, rows, cols, key);
}

Matrix matrix_object(const json& v, const char* what) {
  require(v.is_object(), ErrorCode::Parse, std::string(what) + " must be an object");
  return flat_matrix(v.at("data"), v.at("rows").get<Index>(), v.at("cols").get<Index>(), what);
}

template <typename F>
auto parse(const std::string& text, F&& body) {
  try {
    return body(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

}  // namespace

std::string model_to_json(const Model& model) {
  json doc;
  if (const auto* ising = std::get_if<IsingModel>(&model)) {
    doc = {{"type", "ising"}, {"dim", ising->dim()}};
    doc["coupling"] = matrix_json(ising->coupling())["data"];
  } else if (const auto* block = std::get_if<BlockIsingModel>(&model)) {
    doc = {{"type", "block_ising"}, {"d", block->dim()}, {"m", block->latent_dim()}};
    doc["a11"] = matrix_json(block->a11())["data"];
    doc["a12"] = matrix_json(block->a12())["data"];
    doc["a22"] = matrix_json(block->a22())["data"];
  } else {
    const auto& sc = std::get<SparseCodingModel>(model);
    doc = {{"type", "sparse_coding"}, {"d", sc.dim()}, {"m", sc.latent_dim()}};
    doc["dictionary"] = matrix_json(sc.dictionary())["data"];
    json prior = json::array();
    for (const auto& a : sc.prior()) prior.push_back({{"value", a.value}, {"prob", a.prob}});
    doc["prior"] = prior;
    doc["tau"] = sc.noise_sd();
    doc["support_bound"] = sc.support_bound();
  }
  return doc.dump(2);
}

Model model_from_json(const std::string& text) {
  return parse(text, [](const json& doc) -> Model {
    const std::string type = doc.at("type").get<std::string>();
    if (type == "ising") {
      const Index d = doc.at("dim").get<Index>();
      return IsingModel(matrix_field(doc, "coupling", d, d));
    }
    if (type == "block_ising") {
      const Index d = doc.at("d").get<Index>(), m = doc.at("m").get<Index>();
      return BlockIsingModel(matrix_field(doc, "a11", d, d), matrix_field(doc, "a12", d, m),
                             matrix_field(doc, "a22", m, m));
    }
    if (type == "sparse_coding") {
      const Index d = doc.at("d").get<Index>(), m = doc.at("m").get<Index>();
      std::vector<PriorAtom> prior;
      for (const auto& a : doc.at("prior")) {
        prior.push_back({a.at("value").get<double>(), a.at("prob").get<double>()});
      }
      return SparseCodingModel(matrix_field(doc, "dictionary", d, m), std::move(prior),
                               doc.at("tau").get<double>(),
                               doc.value("support_bound", 0.0));
    }
    throw Error(ErrorCode::Parse, "unknown model type '" + type + "'");
  });
}

std::string grid_to_json(const TimeGrid& grid) {
  json doc = {{"kind", grid.kind == TimeGrid::Kind::TwoPhase ? "two_phase" : "uniform"},
              {"kappa", grid.kappa},
              {"n0", grid.n0},
              {"n", grid.n},
              {"T", grid.horizon},
              {"delta", grid.delta},
              {"times", grid.times},
              {"gaps", grid.gaps}};
  return doc.dump(2);
}

TimeGrid grid_from_json(const std::string& text) {
  return parse(text, [](const json& doc) {
    TimeGrid g;
    g.kind = doc.at("kind").get<std::string>() == "uniform" ? TimeGrid::Kind::Uniform
                                                            : TimeGrid::Kind::TwoPhase;
    g.kappa = doc.at("kappa").get<double>();
    g.n0 = doc.at("n0").get<int>();
    g.n = doc.at("n").get<int>();
    g.horizon = doc.at("T").get<double>();
    g.delta = doc.at("delta").get<double>();
    g.times = doc.at("times").get<std::vector<double>>();
    g.gaps = doc.at("gaps").get<std::vector<double>>();
    g.validate();
    return g;
  });
}

std::string pwl_to_json(const PwlDenoiser& pwl) {
  json pairs = json::array();
  for (const auto& k : pwl.knots) pairs.push_back({k.slope, k.breakpoint});
  json doc = {{"a0", pwl.a0}, {"pairs", pairs}, {"zeta", pwl.zeta}, {"Pi", pwl.bound}};
  return doc.dump(2);
}

PwlDenoiser pwl_from_json(const std::string& text) {
  return parse(text, [](const json& doc) {
    PwlDenoiser p;
    p.a0 = doc.at("a0").get<double>();
    p.zeta = doc.value("zeta", 0.0);
    p.bound = doc.value("Pi", 1.0);
    for (const auto& pr : doc.at("pairs")) {
      require(pr.is_array() && pr.size() == 2, ErrorCode::Parse, "pairs must be [a_j, w_j]");
      p.knots.push_back({pr[0].get<double>(), pr[1].get<double>()});
    }
    return p;
  });
}

namespace {

json weights_doc(const ResNetWeights& w) {
  json header = {{"kind", net_kind_name(w.kind)},
                 {"d", w.d},
                 {"m", w.m},
                 {"theta_dim", w.theta_dim()},
                 {"D", w.D},
                 {"L", w.L},
                 {"M", w.M},
                 {"B", w.bound},
                 {"t", w.t},
                 {"zeta", w.zeta}};
  json blocks = json::array();
  for (const auto& b : w.blocks) blocks.push_back({{"w1", matrix_json(b.w1)}, {"w2", matrix_json(b.w2)}});
  return {{"header", header}, {"w_in", matrix_json(w.w_in)}, {"blocks", blocks},
          {"w_out", matrix_json(w.w_out)}};
}

ResNetWeights weights_from_doc(const json& doc) {
  const json& h = doc.at("header");
  ResNetWeights w;
  w.kind = net_kind_from_name(h.at("kind").get<std::string>());
  w.d = h.at("d").get<int>();
  w.m = h.value("m", 0);
  w.D = h.at("D").get<int>();
  w.L = h.at("L").get<int>();
  w.M = h.at("M").get<int>();
  w.bound = h.value("B", 0.0);
  w.t = h.value("t", 0.0);
  w.zeta = h.value("zeta", 0.0);
  w.w_in = matrix_object(doc.at("w_in"), "w_in");
  w.w_out = matrix_object(doc.at("w_out"), "w_out");
  for (const auto& b : doc.at("blocks")) {
    w.blocks.push_back({matrix_object(b.at("w1"), "w1"), matrix_object(b.at("w2"), "w2")});
  }
  if (h.contains("theta_dim")) {
    require(h.at("theta_dim").get<int>() == w.theta_dim(), ErrorCode::ShapeMismatch,
            "header theta_dim disagrees with W_in");
  }
  w.validate();
  return w;
}

}  // namespace

std::string weights_to_json(const ResNetWeights& w) { return weights_doc(w).dump(); }

std::string weights_bundle_to_json(const std::vector<ResNetWeights>& nets) {
  json arr = json::array();
  for (const auto& w : nets) arr.push_back(weights_doc(w));
  return json{{"networks", arr}}.dump();
}

std::vector<ResNetWeights> weights_from_json(const std::string& text) {
  return parse(text, [](const json& doc) {
    std::vector<ResNetWeights> out;
    if (doc.contains("networks")) {
      for (const auto& n : doc.at("networks")) out.push_back(weights_from_doc(n));
    } else {
      out.push_back(weights_from_doc(doc));
    }
    require(!out.empty(), ErrorCode::EmptyInput, "weight bundle is empty");
    return out;
  });
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json doc = {{"score_mse_per_dim", number_or_null(r.score_mse_per_dim)},
              {"score_mse_stderr", number_or_null(r.score_mse_stderr)},
              {"kl", number_or_null(r.kl)},
              {"tv", number_or_null(r.tv)},
              {"energy_distance", number_or_null(r.energy_distance)},
              {"n", r.n},
              {"metadata", r.metadata}};
  doc["mean"] = std::vector<double>(r.mean.data(), r.mean.data() + r.mean.size());
  doc["variance"] = std::vector<double>(r.variance.data(), r.variance.data() + r.variance.size());
  return doc.dump(2);
}

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream head, row;
  head << "score_mse_per_dim,score_mse_stderr,kl,tv,energy_distance,n";
  row << csv_number(r.score_mse_per_dim) << ',' << csv_number(r.score_mse_stderr) << ','
      << csv_number(r.kl) << ',' << csv_number(r.tv) << ','
      << csv_number(r.energy_distance) << ',' << r.n;
  for (Index i = 0; i < r.mean.size(); ++i) {
    head << ",mean_" << i + 1;
    row << ',' << csv_number(r.mean(i));
  }
  for (Index i = 0; i < r.variance.size(); ++i) {
    head << ",var_" << i + 1;
    row << ',' << csv_number(r.variance(i));
  }
  for (const auto& [k, v] : r.metadata) {
    head << ',' << k;
    row << ',' << v;
  }
  return head.str() + "\n" + row.str() + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write '" + path + "'");
  out << text;
  require(static_cast<bool>(out), ErrorCode::Io, "write to '" + path + "' failed");
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace dlab
