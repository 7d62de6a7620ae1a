#pragma once

// analyze / simulate / msd: turn a configuration into result files plus a
// short human-readable summary.

#include "wcdiff/config.hpp"
#include "wcdiff/diffusion.hpp"
#include "wcdiff/influence.hpp"
#include "wcdiff/performance.hpp"
#include "wcdiff/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace wcdiff {

namespace fs = std::filesystem;

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string fmt(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string db_text(const std::optional<double>& db) {
  return db ? fmt(*db, 2) + " dB" : std::string("0 (linear)");
}

inline std::string ids_text(const std::vector<Index>& ids) {
  std::string s = "{";
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + std::to_string(ids[i] + 1);
  return s + "}";
}

inline std::string vec_text(const Vector& v, int digits = 4) {
  std::string s = v.size() == 1 ? "" : "(";
  for (Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v(i), digits);
  return v.size() == 1 ? s : s + ")";
}

}  // namespace detail

inline AnalysisOutput analyze(const ExperimentConfig& cfg) {
  const auto a = combination(cfg);
  const auto part = classify(a);
  const auto infl = influence_matrix(part);

  AnalysisOutput out;
  out.name = cfg.name;
  out.agents = part.n;
  out.strongly_connected = part.strongly_connected();
  out.components = part.condensation.components;
  for (std::size_t c = 0; c < out.components.size(); ++c) {
    out.component_is_sender.push_back(!part.condensation.has_inbound(static_cast<Index>(c)));
  }
  out.s_subnetworks = part.senders;
  out.r_subnetworks = part.receivers;
  out.canonical_order = part.order;
  for (const auto& p : infl.perron) out.perron.push_back(p.entries);
  if (part.n_gr > 0) {
    out.t_rr_spectral_radius = infl.t_rr_spectral_radius;
    out.rcond = infl.rcond;
    out.w = infl.w;
  }
  out.a_infinity = limiting_power(part, infl).original;
  out.c = influence_vectors(infl.w, part);

  if (cfg.steps) {
    out.q = q_weights(part, infl.perron, cfg.steps->mus()).per_subnetwork;
  }
  if (!cfg.models.empty()) {
    // Pareto points depend on the step sizes only through their ratios.
    const auto steps = cfg.steps.value_or(StepSizeProfile::uniform(part.n, 1.0));
    const auto bundle = theoretical_msd(a, build_models(cfg), steps, cfg.seed.value_or(0));
    for (const auto& s : bundle.report.subnetworks) out.pareto_points.push_back(s.w_star);
    out.limit_points = bundle.limits.per_agent;
    out.fixed_point_residual = fixed_point_residual(a, bundle.limits);
    for (Index k = 0; k < part.n; ++k) {
      out.hessians.push_back({k, bundle.hessians[static_cast<std::size_t>(k)]});
      out.noise_covariances.push_back({k, bundle.covariances[static_cast<std::size_t>(k)]});
    }
  } else if (!cfg.pareto_points.empty()) {
    if (cfg.pareto_points.size() != part.senders.size()) {
      throw Error(ErrorCode::Config, "pareto_points: network has " +
                                         std::to_string(part.senders.size()) +
                                         " sending sub-networks, got " +
                                         std::to_string(cfg.pareto_points.size()) + " points");
    }
    const auto lp = receiving_limit_points(infl.w, cfg.pareto_points, part);
    out.pareto_points = cfg.pareto_points;
    out.limit_points = lp.per_agent;
    out.fixed_point_residual = fixed_point_residual(a, lp);
  }
  return out;
}

inline void print_summary(std::ostream& os, const AnalysisOutput& a) {
  using namespace detail;
  os << "network" << (a.name.empty() ? "" : " " + a.name) << ": " << a.agents << " agents, ";
  if (a.strongly_connected) {
    os << "strongly-connected, R group empty\n";
  } else {
    os << a.s_subnetworks.size() << " sending and " << a.r_subnetworks.size()
       << " receiving sub-network(s)\n";
  }
  for (std::size_t s = 0; s < a.s_subnetworks.size(); ++s) {
    os << "  S" << s + 1 << " " << ids_text(a.s_subnetworks[s]) << "  perron " << vec_text(a.perron[s])
       << "\n";
  }
  for (std::size_t r = 0; r < a.r_subnetworks.size(); ++r) {
    os << "  R" << r + 1 << " " << ids_text(a.r_subnetworks[r]) << "\n";
  }
  if (a.w) {
    os << "  rho(T_RR) = " << fmt(*a.t_rr_spectral_radius, 4) << ", rcond(I - T_RR) = "
       << fmt(*a.rcond, 3) << "\n  W =\n";
    for (Index i = 0; i < a.w->rows(); ++i) {
      os << "   ";
      for (Index j = 0; j < a.w->cols(); ++j) os << " " << fmt((*a.w)(i, j), 4);
      os << "\n";
    }
  }
  for (const auto& c : a.c) os << "  c_" << c.agent + 1 << " = " << vec_text(c.c) << "\n";
  if (!a.limit_points.empty()) {
    os << "  limit points:";
    for (std::size_t k = 0; k < a.limit_points.size(); ++k) {
      os << " " << k + 1 << ":" << vec_text(a.limit_points[k]);
    }
    os << "\n";
  }
}

inline fs::path output_dir(const ExperimentConfig& cfg, const std::optional<fs::path>& override_dir) {
  if (override_dir) return *override_dir;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return "out";
}

inline AnalysisOutput cmd_analyze(const ExperimentConfig& cfg, const fs::path& out_dir,
                                  std::ostream& log) {
  require_seed(cfg);
  auto a = analyze(cfg);
  detail::write_json(out_dir / "analysis.json", to_json(a));
  print_summary(log, a);
  log << "wrote " << (out_dir / "analysis.json").string() << "\n";
  return a;
}

struct SimulationResult {
  TheoryBundle theory;
  std::vector<Trajectory> runs;
  std::vector<MsdEstimate> estimates;
  std::vector<Vector> tail_mean;  // per agent, averaged over runs
  json summary;
};

/// Monte-Carlo diffusion measured against the theoretical limit points.
inline SimulationResult simulate(const ExperimentConfig& cfg) {
  const auto a = combination(cfg);
  const auto models = build_models(cfg);
  const auto& steps = require_steps(cfg);
  const auto& rc = require_run(cfg);
  const auto seed = require_seed(cfg);

  SimulationResult res;
  res.theory = theoretical_msd(a, models, steps, seed);
  RunOptions opt;
  opt.iterations = rc.iterations;
  opt.stride = rc.stride;
  opt.seed = seed;
  opt.reference = res.theory.limits.per_agent;
  const auto burn = static_cast<Index>(rc.burn_in_fraction * static_cast<double>(rc.iterations));
  if (burn < rc.iterations) opt.average_after = burn;
  res.runs = monte_carlo(a, models, steps, opt, rc.monte_carlo_runs, rc.threads);

  const Index n = a.size();
  res.tail_mean.assign(static_cast<std::size_t>(n), Vector::Zero(models.front()->dimension()));
  for (const auto& t : res.runs) {
    for (std::size_t k = 0; k < t.tail_mean.size(); ++k) res.tail_mean[k] += t.tail_mean[k];
  }
  for (auto& v : res.tail_mean) v /= static_cast<double>(res.runs.size());
  if (res.runs.size() >= 2) res.estimates = estimate_msd(res.runs, rc.burn_in_fraction);

  using namespace detail;
  json& s = res.summary;
  s["name"] = cfg.name;
  s["seed"] = seed;
  s["mu_max"] = steps.mu_max;
  s["iterations"] = rc.iterations;
  s["monte_carlo_runs"] = rc.monte_carlo_runs;
  s["stride"] = rc.stride;
  s["burn_in_fraction"] = rc.burn_in_fraction;
  s["agents"] = json::array();
  for (Index k = 0; k < n; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    json e{{"id", k + 1},
           {"type", res.theory.partition.is_receiver(k) ? "R" : "S"},
           {"limit_point", vec_to_json(res.theory.limits.per_agent[ku])},
           {"tail_mean", vec_to_json(res.tail_mean[ku])},
           {"theory_msd_linear", res.theory.report.per_agent[ku]},
           {"theory_msd_db", opt_number(to_db_or_none(res.theory.report.per_agent[ku]))}};
    if (!res.estimates.empty()) {
      e["sim_msd_linear"] = res.estimates[ku].mean;
      e["sim_msd_db"] = opt_number(to_db_or_none(res.estimates[ku].mean));
      e["sim_half_width_linear"] = res.estimates[ku].half_width;
    }
    s["agents"].push_back(std::move(e));
  }
  return res;
}

inline SimulationResult cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_dir,
                                     std::ostream& log) {
  auto res = simulate(cfg);
  for (std::size_t r = 0; r < res.runs.size(); ++r) {
    std::ostringstream csv;
    write_run_csv(csv, res.runs[r]);
    detail::write_text(out_dir / "runs" / ("run_" + std::to_string(r + 1) + ".csv"), csv.str());
  }
  std::ostringstream curve;
  write_learning_curve(curve, res.runs);
  detail::write_text(out_dir / "learning_curve.csv", curve.str());
  detail::write_json(out_dir / "summary.json", res.summary);

  log << "simulated " << res.runs.size() << " run(s) x " << cfg.run->iterations << " iterations\n";
  for (const auto& e : res.summary["agents"]) {
    log << "  agent " << e["id"].get<Index>() << " (" << e["type"].get<std::string>() << ")  tail mean "
        << detail::vec_text(detail::vec_from_json(e["tail_mean"])) << "  limit "
        << detail::vec_text(detail::vec_from_json(e["limit_point"]));
    if (e.contains("sim_msd_db")) {
      log << "  MSD sim " << detail::db_text(detail::opt_number_from(e, "sim_msd_db")) << " theory "
          << detail::db_text(detail::opt_number_from(e, "theory_msd_db"));
    }
    log << "\n";
  }
  log << "wrote " << out_dir.string() << "/{runs/, learning_curve.csv, summary.json}\n";
  return res;
}

struct MsdResult {
  TheoryBundle theory;
  std::vector<ComparisonRow> comparison;  // empty without simulation
  json report;
};

inline MsdResult msd(const ExperimentConfig& cfg, bool with_sim) {
  MsdResult res;
  if (with_sim) {
    auto sim = simulate(cfg);
    res.theory = std::move(sim.theory);
    if (sim.estimates.empty()) {
      throw Error(ErrorCode::Config, "run.monte_carlo_runs: --with-sim needs at least 2 runs");
    }
    res.comparison = compare(res.theory.report, sim.estimates);
  } else {
    res.theory = theoretical_msd(combination(cfg), build_models(cfg), require_steps(cfg),
                                 require_seed(cfg));
  }
  res.report = to_json(res.theory.report);
  if (!res.comparison.empty()) res.report["comparison"] = to_json(res.comparison);
  return res;
}

inline MsdResult cmd_msd(const ExperimentConfig& cfg, const fs::path& out_dir, bool with_sim,
                         std::ostream& log) {
  require_seed(cfg);
  auto res = msd(cfg, with_sim);
  detail::write_json(out_dir / "msd_report.json", res.report);
  using detail::db_text;
  for (const auto& s : res.theory.report.subnetworks) {
    log << "  S" << s.id + 1 << " " << detail::ids_text(s.agents) << "  MSD " << db_text(s.msd_db);
    if (s.sim_db) log << "  sim " << db_text(s.sim_db);
    log << "\n";
  }
  for (const auto& r : res.theory.report.r_agents) {
    log << "  agent " << r.agent + 1 << "  c = " << detail::vec_text(r.c) << "  MSD " << db_text(r.msd_db);
    if (r.sim_db) log << "  sim " << db_text(r.sim_db);
    if (r.delta_db) log << "  delta " << detail::fmt(*r.delta_db, 2) << " dB";
    log << "\n";
  }
  for (const auto& row : res.comparison) {
    if (row.flagged) log << "  agent " << row.agent + 1 << ": |delta| above 1.5 dB\n";
  }
  log << "wrote " << (out_dir / "msd_report.json").string() << "\n";
  return res;
}

}  // namespace wcdiff
