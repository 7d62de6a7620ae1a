#pragma once

// Bundled experiment presets. The same documents ship as presets/*.json.

#include "wcdiff/config.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wcdiff::presets {

inline constexpr std::string_view kTwoAgentLogistic = R"json({
  // Leader S (agent 1) separates along x, follower R (agent 2) would
  // separate along y on its own but only listens to S with weight 0.03.
  "name": "two-agent-logistic",
  "combination_matrix": [
    [1.0, 0.03],
    [0.0, 0.97]
  ],
  "models": [
    {"kind": "logistic", "rho": 0.3, "features": "affine", "population": 200, "data_seed": 1,
     "clusters": [
       {"label": 1, "center": [1.0, 0.0], "stddev": 1.0},
       {"label": -1, "center": [-1.0, 0.0], "stddev": 1.0}]},
    {"kind": "logistic", "rho": 0.3, "features": "affine", "population": 200, "data_seed": 1,
     "clusters": [
       {"label": 1, "center": [0.0, 1.0], "stddev": 1.0},
       {"label": -1, "center": [0.0, -1.0], "stddev": 1.0}]}
  ],
  "step_sizes": {"mu_max": 0.001, "tau": 1.0},
  "run": {"iterations": 40000, "monte_carlo_runs": 20, "seed": 1, "burn_in_fraction": 0.5, "stride": 10},
  "output_dir": "out/two-agent-logistic"
}
)json";

inline constexpr std::string_view kFig3Regression = R"json({
  // Two sending sub-networks {1,2,3}, {4,5} and one receiving sub-network
  // {6,7,8}; scalar regression with a symmetric noise/power profile.
  "name": "fig3-regression",
  "combination_matrix": [
    [0.2, 0.2, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.4, 0.1, 0.0, 0.0, 0.2, 0.0, 0.4],
    [0.3, 0.4, 0.1, 0.0, 0.0, 0.1, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.4, 0.3, 0.3, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.6, 0.7, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.3, 0.2],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.5, 0.3],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.1]
  ],
  "models": [
    {"kind": "quadratic", "count": 3, "w_o": 1.0, "sigma_u2": 1.0, "sigma_v2": 0.01},
    {"kind": "quadratic", "count": 2, "w_o": 1.5, "sigma_u2": 1.0, "sigma_v2": 0.01},
    {"kind": "quadratic", "count": 3, "w_o": 1.25, "sigma_u2": 1.0, "sigma_v2": 0.01}
  ],
  "step_sizes": {"mu_max": 0.0005, "tau": 1.0},
  "run": {"iterations": 100000, "monte_carlo_runs": 20, "seed": 1, "burn_in_fraction": 0.5, "stride": 10},
  "output_dir": "out/fig3-regression"
}
)json";

inline constexpr std::string_view kFullyConnected = R"json({
  // Elliptic classifier over A = 11^T / 8. Agents 1-5: +1 inside an ellipse
  // with semi-axes (2, 1), -1 in a ring around it. Agents 6-8 also see far-away
  // +1 outliers, which here reach everybody.
  "name": "fully-connected",
  "combination_matrix": [
    [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125],
    [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125],
    [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125],
    [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125],
    [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125],
    [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125],
    [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125],
    [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125]
  ],
  "models": [
    {"kind": "logistic", "count": 5, "rho": 0.01, "features": "elliptic", "population": 300, "data_seed": 7,
     "clusters": [
       {"label": 1, "shape": "ring", "r_min": 0.0, "r_max": 1.0, "axes": [2.0, 1.0]},
       {"label": -1, "shape": "ring", "r_min": 1.2, "r_max": 2.2, "axes": [2.0, 1.0]}]},
    {"kind": "logistic", "count": 3, "rho": 0.01, "features": "elliptic", "population": 300, "data_seed": 7,
     "clusters": [
       {"label": 1, "shape": "ring", "r_min": 0.0, "r_max": 1.0, "axes": [2.0, 1.0]},
       {"label": -1, "shape": "ring", "r_min": 1.2, "r_max": 2.2, "axes": [2.0, 1.0]},
       {"label": 1, "weight": 0.2, "center": [3.5, 3.5], "stddev": 0.5}]}
  ],
  "step_sizes": {"mu_max": 0.01, "tau": 1.0},
  "run": {"iterations": 20000, "monte_carlo_runs": 4, "seed": 1, "burn_in_fraction": 0.75, "stride": 10},
  "output_dir": "out/fully-connected"
}
)json";

inline constexpr std::string_view kEllipticWeak = R"json({
  // Same classifier data over the weakly-connected three sub-network
  // topology: the outliers stay inside the receiving group.
  "name": "elliptic-weak",
  "combination_matrix": [
    [0.2, 0.2, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.4, 0.1, 0.0, 0.0, 0.2, 0.0, 0.4],
    [0.3, 0.4, 0.1, 0.0, 0.0, 0.1, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.4, 0.3, 0.3, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.6, 0.7, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.3, 0.2],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.5, 0.3],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.1]
  ],
  "models": [
    {"kind": "logistic", "count": 5, "rho": 0.01, "features": "elliptic", "population": 300, "data_seed": 7,
     "clusters": [
       {"label": 1, "shape": "ring", "r_min": 0.0, "r_max": 1.0, "axes": [2.0, 1.0]},
       {"label": -1, "shape": "ring", "r_min": 1.2, "r_max": 2.2, "axes": [2.0, 1.0]}]},
    {"kind": "logistic", "count": 3, "rho": 0.01, "features": "elliptic", "population": 300, "data_seed": 7,
     "clusters": [
       {"label": 1, "shape": "ring", "r_min": 0.0, "r_max": 1.0, "axes": [2.0, 1.0]},
       {"label": -1, "shape": "ring", "r_min": 1.2, "r_max": 2.2, "axes": [2.0, 1.0]},
       {"label": 1, "weight": 0.2, "center": [3.5, 3.5], "stddev": 0.5}]}
  ],
  "step_sizes": {"mu_max": 0.01, "tau": 1.0},
  "run": {"iterations": 20000, "monte_carlo_runs": 4, "seed": 1, "burn_in_fraction": 0.75, "stride": 10},
  "output_dir": "out/elliptic-weak"
}
)json";

/// (name, document) for every bundled preset.
inline const std::vector<std::pair<std::string, std::string_view>>& all() {
  static const std::vector<std::pair<std::string, std::string_view>> list{
      {"preset-two-agent-logistic", kTwoAgentLogistic},
      {"preset-fig3-regression", kFig3Regression},
      {"preset-fully-connected", kFullyConnected},
      {"preset-elliptic-weak", kEllipticWeak},
  };
  return list;
}

inline const std::string_view* find(std::string_view name) {
  for (const auto& [n, doc] : all()) {
    if (n == name) return &doc;
  }
  return nullptr;
}

inline ExperimentConfig load(std::string_view name) {
  const auto* doc = find(name);
  if (!doc) throw Error(ErrorCode::Config, "unknown preset '" + std::string(name) + "'");
  return parse_config_text(std::string(*doc), {}, std::string(name));
}

}  // namespace wcdiff::presets
