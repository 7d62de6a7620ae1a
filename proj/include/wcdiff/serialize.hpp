#pragma once

// JSON forms of the analysis output and MSD report. Agent and sub-network
// ids are 1-based in every external file.

#include "wcdiff/config.hpp"
#include "wcdiff/influence.hpp"
#include "wcdiff/performance.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace wcdiff {

struct AgentMatrix {
  Index agent = 0;  // 0-based internally
  Matrix value;
};

/// Structure and limiting behaviour of one network.
struct AnalysisOutput {
  std::string name;
  Index agents = 0;
  bool strongly_connected = false;
  std::vector<std::vector<Index>> components;  // topological order
  std::vector<char> component_is_sender;
  std::vector<std::vector<Index>> s_subnetworks;
  std::vector<std::vector<Index>> r_subnetworks;
  std::vector<Index> canonical_order;
  std::vector<Vector> perron;
  std::optional<double> t_rr_spectral_radius;  // absent when group R is empty
  std::optional<double> rcond;
  std::optional<Matrix> w;  // rows: S agents, cols: R agents, canonical order
  Matrix a_infinity;        // original agent order
  std::vector<InfluenceVector> c;
  std::vector<Vector> pareto_points;
  std::vector<Vector> limit_points;  // per agent, empty if not computed
  std::optional<double> fixed_point_residual;
  std::vector<std::vector<double>> q;  // per S sub-network, when step sizes are known
  std::vector<AgentMatrix> hessians;
  std::vector<AgentMatrix> noise_covariances;
};

namespace detail {

inline json ids_to_json(const std::vector<Index>& ids) {
  json out = json::array();
  for (Index i : ids) out.push_back(i + 1);
  return out;
}

inline std::vector<Index> ids_from_json(const json& j) {
  std::vector<Index> out;
  for (const auto& v : j) out.push_back(v.get<Index>() - 1);
  return out;
}

inline json vec_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Vector vec_from_json(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

inline json mat_to_json(const Matrix& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline Matrix mat_from_json(const json& j, Index cols_if_empty = 0) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j[0].size()) : cols_if_empty;
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

inline json opt_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> opt_number_from(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

inline json agent_matrices_to_json(const std::vector<AgentMatrix>& list) {
  json out = json::array();
  for (const auto& m : list) out.push_back({{"id", m.agent + 1}, {"value", mat_to_json(m.value)}});
  return out;
}

inline std::vector<AgentMatrix> agent_matrices_from_json(const json& j) {
  std::vector<AgentMatrix> out;
  for (const auto& e : j) out.push_back({e.at("id").get<Index>() - 1, mat_from_json(e.at("value"))});
  return out;
}

}  // namespace detail

inline json to_json(const AnalysisOutput& a) {
  using namespace detail;
  json j;
  j["name"] = a.name;
  j["agents"] = a.agents;
  j["strongly_connected"] = a.strongly_connected;
  json comps = json::array();
  for (std::size_t c = 0; c < a.components.size(); ++c) {
    comps.push_back({{"id", c + 1},
                     {"type", a.component_is_sender[c] ? "S" : "R"},
                     {"members", ids_to_json(a.components[c])}});
  }
  j["components"] = comps;
  j["s_subnetworks"] = json::array();
  for (const auto& s : a.s_subnetworks) j["s_subnetworks"].push_back(ids_to_json(s));
  j["r_subnetworks"] = json::array();
  for (const auto& r : a.r_subnetworks) j["r_subnetworks"].push_back(ids_to_json(r));
  j["canonical_order"] = ids_to_json(a.canonical_order);
  j["perron_vectors"] = json::array();
  for (const auto& p : a.perron) j["perron_vectors"].push_back(vec_to_json(p));
  j["t_rr_spectral_radius"] = opt_number(a.t_rr_spectral_radius);
  j["rcond"] = opt_number(a.rcond);
  if (a.w) {
    const auto n_gs = static_cast<std::ptrdiff_t>(a.w->rows());
    j["w"] = {{"rows", ids_to_json({a.canonical_order.begin(), a.canonical_order.begin() + n_gs})},
              {"cols", ids_to_json({a.canonical_order.begin() + n_gs, a.canonical_order.end()})},
              {"values", mat_to_json(*a.w)}};
  }
  j["a_infinity"] = mat_to_json(a.a_infinity);
  j["influence_vectors"] = json::array();
  for (const auto& c : a.c) j["influence_vectors"].push_back({{"id", c.agent + 1}, {"c", vec_to_json(c.c)}});
  if (!a.pareto_points.empty()) {
    j["pareto_points"] = json::array();
    for (const auto& p : a.pareto_points) j["pareto_points"].push_back(vec_to_json(p));
  }
  if (!a.limit_points.empty()) {
    j["limit_points"] = json::array();
    for (std::size_t k = 0; k < a.limit_points.size(); ++k) {
      j["limit_points"].push_back({{"id", k + 1}, {"value", vec_to_json(a.limit_points[k])}});
    }
  }
  if (a.fixed_point_residual) j["fixed_point_residual"] = *a.fixed_point_residual;
  if (!a.q.empty()) j["q_weights"] = a.q;
  if (!a.hessians.empty()) j["hessians"] = agent_matrices_to_json(a.hessians);
  if (!a.noise_covariances.empty()) j["noise_covariances"] = agent_matrices_to_json(a.noise_covariances);
  return j;
}

inline AnalysisOutput analysis_from_json(const json& j) {
  using namespace detail;
  AnalysisOutput a;
  a.name = j.at("name").get<std::string>();
  a.agents = j.at("agents").get<Index>();
  a.strongly_connected = j.at("strongly_connected").get<bool>();
  for (const auto& c : j.at("components")) {
    a.components.push_back(ids_from_json(c.at("members")));
    a.component_is_sender.push_back(c.at("type").get<std::string>() == "S");
  }
  for (const auto& s : j.at("s_subnetworks")) a.s_subnetworks.push_back(ids_from_json(s));
  for (const auto& r : j.at("r_subnetworks")) a.r_subnetworks.push_back(ids_from_json(r));
  a.canonical_order = ids_from_json(j.at("canonical_order"));
  for (const auto& p : j.at("perron_vectors")) a.perron.push_back(vec_from_json(p));
  a.t_rr_spectral_radius = opt_number_from(j, "t_rr_spectral_radius");
  a.rcond = opt_number_from(j, "rcond");
  if (j.contains("w")) {
    const auto& w = j.at("w");
    a.w = mat_from_json(w.at("values"), static_cast<Index>(w.at("cols").size()));
  }
  a.a_infinity = mat_from_json(j.at("a_infinity"));
  for (const auto& c : j.at("influence_vectors")) {
    a.c.push_back({c.at("id").get<Index>() - 1, vec_from_json(c.at("c"))});
  }
  if (j.contains("pareto_points")) {
    for (const auto& p : j.at("pareto_points")) a.pareto_points.push_back(vec_from_json(p));
  }
  if (j.contains("limit_points")) {
    for (const auto& p : j.at("limit_points")) a.limit_points.push_back(vec_from_json(p.at("value")));
  }
  a.fixed_point_residual = opt_number_from(j, "fixed_point_residual");
  if (j.contains("q_weights")) a.q = j.at("q_weights").get<std::vector<std::vector<double>>>();
  if (j.contains("hessians")) a.hessians = agent_matrices_from_json(j.at("hessians"));
  if (j.contains("noise_covariances")) {
    a.noise_covariances = agent_matrices_from_json(j.at("noise_covariances"));
  }
  return a;
}

/// {subnetworks:[{id, msd_linear, msd_db, ...}], r_agents:[{id, c, msd_linear,
/// msd_db, sim_db?, delta_db?}]}; msd_db is null when the linear MSD is 0.
inline json to_json(const MsdReport& r) {
  using namespace detail;
  json j;
  j["subnetworks"] = json::array();
  for (const auto& s : r.subnetworks) {
    json e{{"id", s.id + 1},
           {"agents", ids_to_json(s.agents)},
           {"w_star", vec_to_json(s.w_star)},
           {"q", s.q},
           {"msd_linear", s.msd_linear},
           {"msd_db", opt_number(s.msd_db)}};
    if (s.sim_db) e["sim_db"] = *s.sim_db;
    j["subnetworks"].push_back(std::move(e));
  }
  j["r_agents"] = json::array();
  for (const auto& a : r.r_agents) {
    json e{{"id", a.agent + 1},
           {"c", vec_to_json(a.c)},
           {"limit_point", vec_to_json(a.limit_point)},
           {"msd_linear", a.msd_linear},
           {"msd_db", opt_number(a.msd_db)}};
    if (a.sim_db) e["sim_db"] = *a.sim_db;
    if (a.delta_db) e["delta_db"] = *a.delta_db;
    j["r_agents"].push_back(std::move(e));
  }
  return j;
}

inline json to_json(const std::vector<ComparisonRow>& rows) {
  using namespace detail;
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"id", r.agent + 1},
                   {"theory_linear", r.theory_linear},
                   {"sim_linear", r.sim_linear},
                   {"theory_db", opt_number(r.theory_db)},
                   {"sim_db", opt_number(r.sim_db)},
                   {"delta_db", opt_number(r.delta_db)},
                   {"half_width_db", r.half_width_db},
                   {"flagged", r.flagged}});
  }
  return out;
}

}  // namespace wcdiff
