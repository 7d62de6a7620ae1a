#pragma once

// Experiment configuration: a JSON document (comments allowed) describing the
// combination matrix, per-agent cost models, step sizes and run controls.
// Every problem is reported as ErrorCode::Config with the offending field
// path, or the line and column for syntax errors.

#include "wcdiff/cost_models.hpp"
#include "wcdiff/diffusion.hpp"
#include "wcdiff/error.hpp"
#include "wcdiff/graph.hpp"
#include "wcdiff/linalg.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace wcdiff {

using json = nlohmann::json;

struct ModelSpec {
  std::string kind;  // "quadratic" or "logistic"
  // quadratic
  Vector w_o;
  Matrix r_u;
  double sigma_v2 = 0.0;
  // logistic
  double rho = 0.0;
  FeatureMap features = FeatureMap::Affine;
  std::vector<PointCluster> clusters;
  std::size_t population = 0;
  std::uint64_t data_seed = 1;
};

struct RunControls {
  Index iterations = 1;
  Index monte_carlo_runs = 20;
  double burn_in_fraction = 0.5;
  Index stride = 10;
  unsigned threads = 0;
};

struct ExperimentConfig {
  std::string name;
  Matrix matrix;
  std::vector<ModelSpec> models;  // one per agent once "count" is expanded
  std::optional<StepSizeProfile> steps;
  std::optional<RunControls> run;
  std::optional<std::uint64_t> seed;
  /// Pareto points per S sub-network, for analysis without cost models.
  std::vector<Vector> pareto_points;
  std::string output_dir;
  json document;  // as parsed, echoed on failures

  Index agents() const { return matrix.rows(); }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::Config, where.empty() ? what : where + ": " + what);
}

inline std::string field(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline std::string item(const std::string& parent, std::size_t i) {
  return parent + "[" + std::to_string(i) + "]";
}

inline double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) config_error(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) config_error(where, "expected a finite number");
  return v;
}

inline Index get_count(const json& j, const std::string& where, Index min) {
  if (!j.is_number_integer()) config_error(where, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < min) config_error(where, "must be >= " + std::to_string(min));
  return static_cast<Index>(v);
}

inline const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline const json& require(const json& obj, const char* key, const std::string& parent) {
  const json* j = find(obj, key);
  if (!j) config_error(field(parent, key), "missing required field");
  return *j;
}

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  if (!obj.is_object()) config_error(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) config_error(field(where, key), "unknown field");
  }
}

inline Vector get_vector(const json& j, const std::string& where) {
  if (j.is_number()) return Vector::Constant(1, get_number(j, where));
  if (!j.is_array() || j.empty()) config_error(where, "expected a number or a non-empty array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = get_number(j[i], item(where, i));
  return v;
}

inline Matrix get_rows(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) config_error(where, "expected an array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = item(where, r);
    if (!j[r].is_array()) config_error(row, "expected an array");
    if (j[r].size() != cols) {
      config_error(row, "has " + std::to_string(j[r].size()) + " entries, expected " +
                            std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Index>(r), static_cast<Index>(c)) = get_number(j[r][c], item(row, c));
    }
  }
  return m;
}

}  // namespace detail

/// Whitespace- and/or comma-delimited matrix text; '#' starts a comment.
inline Matrix parse_matrix_text(const std::string& text, const std::string& origin = "matrix") {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& ch : line) {
      if (ch == ',' || ch == ';' || ch == '\t' || ch == '\r') ch = ' ';
    }
    std::istringstream cells(line);
    std::vector<double> row;
    std::string token;
    while (cells >> token) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size() || !std::isfinite(v)) {
        detail::config_error(origin + " line " + std::to_string(line_no),
                             "cannot read '" + token + "' as a number");
      }
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      detail::config_error(origin + " line " + std::to_string(line_no),
                           "has " + std::to_string(row.size()) + " entries, expected " +
                               std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) detail::config_error(origin, "no matrix entries found");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
  }
  return m;
}

inline Matrix load_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) detail::config_error("combination_matrix.file", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_matrix_text(buf.str(), path.filename().string());
}

namespace detail {

inline PointCluster parse_cluster(const json& j, const std::string& where) {
  check_keys(j, {"label", "weight", "shape", "center", "stddev", "r_min", "r_max", "axes"}, where);
  PointCluster c;
  c.label = get_number(require(j, "label", where), field(where, "label"));
  if (c.label != 1.0 && c.label != -1.0) config_error(field(where, "label"), "must be +1 or -1");
  if (const json* w = find(j, "weight")) {
    c.weight = get_number(*w, field(where, "weight"));
    if (!(c.weight > 0.0)) config_error(field(where, "weight"), "must be > 0");
  }
  std::string shape = "gaussian";
  if (const json* s = find(j, "shape")) {
    if (!s->is_string()) config_error(field(where, "shape"), "expected a string");
    shape = s->get<std::string>();
  }
  if (const json* ctr = find(j, "center")) {
    const Vector v = get_vector(*ctr, field(where, "center"));
    if (v.size() != 2) config_error(field(where, "center"), "expected [x, y]");
    c.center_x = v(0);
    c.center_y = v(1);
  }
  if (shape == "gaussian") {
    c.shape = PointCluster::Shape::Gaussian;
    if (const json* s = find(j, "stddev")) c.stddev = get_number(*s, field(where, "stddev"));
    if (!(c.stddev >= 0.0)) config_error(field(where, "stddev"), "must be >= 0");
  } else if (shape == "ring") {
    c.shape = PointCluster::Shape::Ring;
    c.r_min = get_number(require(j, "r_min", where), field(where, "r_min"));
    c.r_max = get_number(require(j, "r_max", where), field(where, "r_max"));
    if (!(c.r_min >= 0.0 && c.r_max > c.r_min)) {
      config_error(field(where, "r_max"), "need 0 <= r_min < r_max");
    }
    if (const json* ax = find(j, "axes")) {
      const Vector v = get_vector(*ax, field(where, "axes"));
      if (v.size() != 2 || !(v(0) > 0.0 && v(1) > 0.0)) {
        config_error(field(where, "axes"), "expected two positive semi-axis scales");
      }
      c.axis_x = v(0);
      c.axis_y = v(1);
    }
  } else {
    config_error(field(where, "shape"), "unknown shape '" + shape + "' (gaussian|ring)");
  }
  return c;
}

inline ModelSpec parse_model(const json& j, const std::string& where) {
  if (!j.is_object()) config_error(where, "expected an object");
  ModelSpec m;
  const json& kind = require(j, "kind", where);
  if (!kind.is_string()) config_error(field(where, "kind"), "expected a string");
  m.kind = kind.get<std::string>();
  if (m.kind == "quadratic") {
    check_keys(j, {"kind", "count", "w_o", "sigma_u2", "r_u", "sigma_v2"}, where);
    m.w_o = get_vector(require(j, "w_o", where), field(where, "w_o"));
    const Index dim = m.w_o.size();
    const json* su = find(j, "sigma_u2");
    const json* ru = find(j, "r_u");
    if ((su == nullptr) == (ru == nullptr)) {
      config_error(where, "give exactly one of sigma_u2 or r_u");
    }
    if (su) {
      const double s = get_number(*su, field(where, "sigma_u2"));
      if (!(s > 0.0)) config_error(field(where, "sigma_u2"), "must be > 0");
      m.r_u = s * Matrix::Identity(dim, dim);
    } else if (ru->is_array() && !ru->empty() && (*ru)[0].is_array()) {
      m.r_u = get_rows(*ru, field(where, "r_u"));
    } else {
      // a list of numbers is the diagonal
      const Vector d = get_vector(*ru, field(where, "r_u"));
      m.r_u = d.asDiagonal();
    }
    if (m.r_u.rows() != dim || m.r_u.cols() != dim) {
      config_error(field(where, "r_u"), "must be " + std::to_string(dim) + "x" + std::to_string(dim) +
                                            " to match w_o");
    }
    m.sigma_v2 = get_number(require(j, "sigma_v2", where), field(where, "sigma_v2"));
    if (m.sigma_v2 < 0.0) config_error(field(where, "sigma_v2"), "must be >= 0");
  } else if (m.kind == "logistic") {
    check_keys(j, {"kind", "count", "rho", "features", "clusters", "population", "data_seed"}, where);
    m.rho = get_number(require(j, "rho", where), field(where, "rho"));
    if (m.rho < 0.0) config_error(field(where, "rho"), "must be >= 0");
    if (const json* f = find(j, "features")) {
      const std::string name = f->is_string() ? f->get<std::string>() : "";
      if (name == "affine") {
        m.features = FeatureMap::Affine;
      } else if (name == "elliptic") {
        m.features = FeatureMap::Elliptic;
      } else {
        config_error(field(where, "features"), "expected \"affine\" or \"elliptic\"");
      }
    }
    const json& clusters = require(j, "clusters", where);
    if (!clusters.is_array() || clusters.empty()) {
      config_error(field(where, "clusters"), "expected a non-empty array");
    }
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      m.clusters.push_back(parse_cluster(clusters[i], item(field(where, "clusters"), i)));
    }
    m.population = static_cast<std::size_t>(
        get_count(require(j, "population", where), field(where, "population"), 1));
    if (const json* ds = find(j, "data_seed")) {
      if (!ds->is_number_unsigned()) config_error(field(where, "data_seed"), "expected an unsigned integer");
      m.data_seed = ds->get<std::uint64_t>();
    }
  } else {
    config_error(field(where, "kind"), "unknown model kind '" + m.kind + "' (quadratic|logistic)");
  }
  return m;
}

}  // namespace detail

/// Builds a configuration from a parsed document. Relative matrix file paths
/// resolve against `base_dir`.
inline ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  check_keys(doc,
             {"name", "combination_matrix", "models", "step_sizes", "run", "pareto_points",
              "output_dir"},
             "");
  ExperimentConfig cfg;
  cfg.document = doc;
  if (const json* n = find(doc, "name")) {
    if (!n->is_string()) config_error("name", "expected a string");
    cfg.name = n->get<std::string>();
  }

  const json& a = require(doc, "combination_matrix", "");
  if (a.is_array()) {
    cfg.matrix = get_rows(a, "combination_matrix");
  } else if (a.is_object()) {
    check_keys(a, {"file"}, "combination_matrix");
    const json& f = require(a, "file", "combination_matrix");
    if (!f.is_string()) config_error("combination_matrix.file", "expected a path string");
    std::filesystem::path p = f.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    cfg.matrix = load_matrix_file(p);
  } else {
    config_error("combination_matrix", "expected an array of rows or {\"file\": path}");
  }
  if (cfg.matrix.rows() != cfg.matrix.cols()) {
    config_error("combination_matrix", "must be square, got " + std::to_string(cfg.matrix.rows()) +
                                           "x" + std::to_string(cfg.matrix.cols()));
  }
  const Index n = cfg.matrix.rows();

  if (const json* models = find(doc, "models")) {
    if (!models->is_array()) config_error("models", "expected an array");
    for (std::size_t i = 0; i < models->size(); ++i) {
      const auto where = item("models", i);
      const json& entry = (*models)[i];
      Index count = 1;
      if (entry.is_object()) {
        if (const json* c = find(entry, "count")) count = get_count(*c, field(where, "count"), 1);
      }
      const ModelSpec spec = parse_model(entry, where);
      for (Index r = 0; r < count; ++r) cfg.models.push_back(spec);
    }
    if (static_cast<Index>(cfg.models.size()) != n) {
      config_error("models", "describe " + std::to_string(cfg.models.size()) + " agents but the matrix has " +
                                 std::to_string(n));
    }
    for (std::size_t k = 1; k < cfg.models.size(); ++k) {
      const auto dim = [](const ModelSpec& s) {
        return s.kind == "quadratic" ? s.w_o.size() : feature_dimension(s.features);
      };
      if (dim(cfg.models[k]) != dim(cfg.models[0])) {
        config_error("models", "agent " + std::to_string(k + 1) + " has parameter dimension " +
                                   std::to_string(dim(cfg.models[k])) + ", agent 1 has " +
                                   std::to_string(dim(cfg.models[0])));
      }
    }
  }

  if (const json* st = find(doc, "step_sizes")) {
    check_keys(*st, {"mu_max", "tau"}, "step_sizes");
    StepSizeProfile p;
    p.mu_max = get_number(require(*st, "mu_max", "step_sizes"), "step_sizes.mu_max");
    if (p.mu_max < 0.0) config_error("step_sizes.mu_max", "must be >= 0");
    p.tau = Vector::Ones(n);
    if (const json* tau = find(*st, "tau")) {
      if (tau->is_number()) {
        p.tau.setConstant(get_number(*tau, "step_sizes.tau"));
      } else {
        p.tau = get_vector(*tau, "step_sizes.tau");
        if (p.tau.size() != n) {
          config_error("step_sizes.tau", "has " + std::to_string(p.tau.size()) + " entries, expected " +
                                             std::to_string(n));
        }
      }
    }
    for (Index k = 0; k < n; ++k) {
      if (!(p.tau(k) > 0.0 && p.tau(k) <= 1.0)) {
        config_error(item("step_sizes.tau", static_cast<std::size_t>(k)), "must lie in (0, 1]");
      }
    }
    cfg.steps = p;
  }

  if (const json* run = find(doc, "run")) {
    check_keys(*run, {"iterations", "monte_carlo_runs", "seed", "burn_in_fraction", "stride", "threads"},
               "run");
    RunControls rc;
    if (const json* it = find(*run, "iterations")) rc.iterations = get_count(*it, "run.iterations", 1);
    if (const json* mc = find(*run, "monte_carlo_runs")) {
      rc.monte_carlo_runs = get_count(*mc, "run.monte_carlo_runs", 1);
    }
    if (const json* b = find(*run, "burn_in_fraction")) {
      rc.burn_in_fraction = get_number(*b, "run.burn_in_fraction");
      if (!(rc.burn_in_fraction >= 0.0 && rc.burn_in_fraction < 1.0)) {
        config_error("run.burn_in_fraction", "must lie in [0, 1)");
      }
    }
    if (const json* s = find(*run, "stride")) rc.stride = get_count(*s, "run.stride", 1);
    if (const json* t = find(*run, "threads")) rc.threads = static_cast<unsigned>(get_count(*t, "run.threads", 0));
    if (const json* seed = find(*run, "seed")) {
      if (!seed->is_number_unsigned()) config_error("run.seed", "expected an unsigned integer");
      cfg.seed = seed->get<std::uint64_t>();
    }
    cfg.run = rc;
  }

  if (const json* pp = find(doc, "pareto_points")) {
    if (!pp->is_array()) config_error("pareto_points", "expected an array");
    for (std::size_t i = 0; i < pp->size(); ++i) {
      cfg.pareto_points.push_back(get_vector((*pp)[i], item("pareto_points", i)));
    }
  }

  if (const json* out = find(doc, "output_dir")) {
    if (!out->is_string()) config_error("output_dir", "expected a string");
    cfg.output_dir = out->get<std::string>();
  }
  return cfg;
}

/// Parses JSON text; syntax errors carry line and column.
inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::filesystem::path& base_dir = {},
                                          const std::string& origin = "config") {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min(text.size(), e.byte > 0 ? e.byte - 1 : 0);
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    if (const auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw Error(ErrorCode::Config, origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                                       ": " + msg);
  }
  return parse_config(doc, base_dir);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.parent_path(), path.string());
}

// --- building runtime objects -------------------------------------------

inline CombinationMatrix combination(const ExperimentConfig& cfg) {
  return CombinationMatrix::validate(cfg.matrix);
}

/// Cost models, one per agent. Logistic populations are drawn from
/// stream (data_seed, agent) and do not depend on the run seed.
inline ModelList build_models(const ExperimentConfig& cfg) {
  if (cfg.models.empty()) detail::config_error("models", "missing model specification");
  ModelList out;
  for (std::size_t k = 0; k < cfg.models.size(); ++k) {
    const ModelSpec& s = cfg.models[k];
    const std::string where = "agent " + std::to_string(k + 1);
    try {
      if (s.kind == "quadratic") {
        out.push_back(std::make_shared<QuadraticCost>(s.r_u, s.sigma_v2, s.w_o));
      } else {
        Rng rng = make_stream(s.data_seed, 0xDA7A, static_cast<std::uint64_t>(k));
        out.push_back(std::make_shared<LogisticCost>(
            s.rho, make_population(s.clusters, s.features, s.population, rng)));
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Config) throw;
      detail::config_error(where, e.what());
    }
  }
  return out;
}

inline const StepSizeProfile& require_steps(const ExperimentConfig& cfg) {
  if (!cfg.steps) detail::config_error("step_sizes", "missing required section");
  return *cfg.steps;
}

inline const RunControls& require_run(const ExperimentConfig& cfg) {
  if (!cfg.run) detail::config_error("run", "missing required section");
  return *cfg.run;
}

inline std::uint64_t require_seed(const ExperimentConfig& cfg) {
  if (!cfg.seed) detail::config_error("run.seed", "missing; a seed is required (or pass --seed)");
  return *cfg.seed;
}

}  // namespace wcdiff
