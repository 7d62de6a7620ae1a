#pragma once

// Adapt-then-combine diffusion over a combination matrix, Monte-Carlo
// harness, the constant-Hessian long-term error model, steady-state MSD
// estimation and CSV export of trajectories.

#include "wcdiff/cost_models.hpp"
#include "wcdiff/error.hpp"
#include "wcdiff/graph.hpp"
#include "wcdiff/linalg.hpp"
#include "wcdiff/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace wcdiff {

inline constexpr double kDivergenceThreshold = 1e12;

struct StepSizeProfile {
  double mu_max = 0.0;
  Vector tau;

  static StepSizeProfile uniform(Index n, double mu_max) {
    return {mu_max, Vector::Ones(n)};
  }

  Index size() const { return tau.size(); }
  double mu(Index k) const { return tau(k) * mu_max; }
  std::vector<double> mus() const {
    std::vector<double> out(static_cast<std::size_t>(tau.size()));
    for (Index k = 0; k < tau.size(); ++k) out[static_cast<std::size_t>(k)] = mu(k);
    return out;
  }

  void validate() const {
    if (!(mu_max >= 0.0) || !std::isfinite(mu_max)) {
      throw Error(ErrorCode::InvalidArgument, "mu_max must be a finite value >= 0");
    }
    for (Index k = 0; k < tau.size(); ++k) {
      if (!(tau(k) > 0.0 && tau(k) <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument,
                    "tau[" + std::to_string(k) + "] must lie in (0, 1]", k, -1, tau(k));
      }
    }
  }
};

/// In-neighbour lists {(l, a_lk) : a_lk > 0} per agent k, ascending l.
struct Topology {
  std::vector<std::vector<std::pair<Index, double>>> in;

  explicit Topology(const CombinationMatrix& a) : in(static_cast<std::size_t>(a.size())) {
    for (Index k = 0; k < a.size(); ++k) {
      for (Index l = 0; l < a.size(); ++l) {
        if (a(l, k) > 0.0) in[static_cast<std::size_t>(k)].emplace_back(l, a(l, k));
      }
    }
  }
  Index size() const { return static_cast<Index>(in.size()); }
};

struct NetworkState {
  std::vector<Vector> w;
  Index iteration = 0;

  static NetworkState zeros(Index agents, Index dimension) {
    return {std::vector<Vector>(static_cast<std::size_t>(agents), Vector::Zero(dimension)), 0};
  }
};

using ModelList = std::vector<ModelPtr>;

namespace detail {

inline void check_models(const ModelList& models, Index agents) {
  if (static_cast<Index>(models.size()) != agents) {
    throw Error(ErrorCode::DimensionMismatch, "need one cost model per agent");
  }
  for (const auto& m : models) {
    if (!m) throw Error(ErrorCode::InvalidArgument, "null cost model");
    if (m->dimension() != models.front()->dimension()) {
      throw Error(ErrorCode::DimensionMismatch, "cost models disagree on dimension");
    }
  }
}

inline Vector combine(const Topology& topo, std::span<const Vector> psi, Index k) {
  const auto& nbrs = topo.in[static_cast<std::size_t>(k)];
  Vector out = nbrs.front().second * psi[static_cast<std::size_t>(nbrs.front().first)];
  for (std::size_t j = 1; j < nbrs.size(); ++j) {
    out.noalias() += nbrs[j].second * psi[static_cast<std::size_t>(nbrs[j].first)];
  }
  return out;
}

inline void check_finite(const Vector& w, Index agent, Index iteration) {
  for (Index i = 0; i < w.size(); ++i) {
    if (!(std::abs(w(i)) <= kDivergenceThreshold)) {
      throw Error(ErrorCode::Diverged,
                  "agent " + std::to_string(agent) + " diverged at iteration " +
                      std::to_string(iteration),
                  agent, iteration, w(i));
    }
  }
}

}  // namespace detail

/// One synchronous ATC round: every agent adapts on a fresh sample, then
/// every agent combines its neighbours' intermediate iterates. Agents with
/// `muted[k]` set see an all-zero observation. When `noise` is non-null it
/// receives the gradient noise s_k = grad_hat J_k(w_k) - grad J_k(w_k).
inline NetworkState atc_step(const NetworkState& state, const Topology& topo,
                             const ModelList& models, std::span<const double> mu,
                             std::span<Rng> rngs, const std::vector<char>* muted = nullptr,
                             std::vector<Vector>* noise = nullptr) {
  const auto n = static_cast<std::size_t>(topo.size());
  std::vector<Vector> psi(n);
  if (noise) noise->resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const CostModel& model = *models[k];
    Sample s = model.draw_sample(rngs[k]);
    if (muted && (*muted)[k]) {
      s.x.setZero();
      s.y = 0.0;
    }
    Vector grad = model.stochastic_gradient(state.w[k], s);
    if (noise) (*noise)[k] = grad - model.true_gradient(state.w[k]);
    psi[k] = state.w[k] - mu[k] * grad;
  }
  NetworkState next{std::vector<Vector>(n), state.iteration + 1};
  for (std::size_t k = 0; k < n; ++k) {
    next.w[k] = detail::combine(topo, psi, static_cast<Index>(k));
    detail::check_finite(next.w[k], static_cast<Index>(k), next.iteration);
  }
  return next;
}

struct RunOptions {
  Index iterations = 1;
  Index stride = 10;
  std::uint64_t seed = 0;
  std::uint64_t run_index = 0;
  /// Per-agent reference (limit) points the squared error is measured
  /// against. Empty means the origin.
  std::vector<Vector> reference;
  bool record_iterates = false;
  std::vector<Index> muted_agents;
  /// When set, every iterate with i > average_after is averaged into
  /// Trajectory::tail_mean.
  std::optional<Index> average_after;
};

struct Trajectory {
  std::uint64_t seed = 0;
  std::uint64_t run_index = 0;
  double mu_max = 0.0;
  Index stride = 1;
  Index agents = 0;
  std::vector<Index> iterations;
  std::vector<std::vector<double>> sq_error;  // [record][agent]
  std::vector<std::vector<Vector>> iterates;  // [record][agent], optional
  std::vector<Vector> tail_mean;              // per agent, see RunOptions::average_after
  NetworkState final_state;

  Index records() const { return static_cast<Index>(iterations.size()); }
  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    if (a.seed != b.seed || a.run_index != b.run_index || a.mu_max != b.mu_max ||
        a.stride != b.stride || a.iterations != b.iterations || a.sq_error != b.sq_error ||
        a.iterates.size() != b.iterates.size() || a.tail_mean != b.tail_mean) {
      return false;
    }
    for (std::size_t r = 0; r < a.iterates.size(); ++r) {
      for (std::size_t k = 0; k < a.iterates[r].size(); ++k) {
        if (a.iterates[r][k] != b.iterates[r][k]) return false;
      }
    }
    return true;
  }
};

namespace detail {

inline std::vector<Vector> resolve_reference(const RunOptions& opt, Index agents, Index dim) {
  if (opt.reference.empty()) {
    return std::vector<Vector>(static_cast<std::size_t>(agents), Vector::Zero(dim));
  }
  if (static_cast<Index>(opt.reference.size()) != agents) {
    throw Error(ErrorCode::DimensionMismatch, "one reference point per agent required");
  }
  for (const auto& r : opt.reference) {
    if (r.size() != dim) throw Error(ErrorCode::DimensionMismatch, "reference point size");
  }
  return opt.reference;
}

inline std::vector<char> muted_mask(const RunOptions& opt, Index agents) {
  std::vector<char> mask(static_cast<std::size_t>(agents), 0);
  for (Index k : opt.muted_agents) {
    if (k < 0 || k >= agents) throw Error(ErrorCode::InvalidArgument, "muted agent out of range");
    mask[static_cast<std::size_t>(k)] = 1;
  }
  return mask;
}

inline std::vector<Rng> agent_streams(const RunOptions& opt, Index agents) {
  std::vector<Rng> rngs;
  rngs.reserve(static_cast<std::size_t>(agents));
  for (Index k = 0; k < agents; ++k) {
    rngs.push_back(make_stream(opt.seed, opt.run_index, static_cast<std::uint64_t>(k)));
  }
  return rngs;
}

inline bool should_record(Index i, const RunOptions& opt) {
  return i % opt.stride == 0 || i == opt.iterations;
}

inline void record(Trajectory& t, const std::vector<Vector>& err_source_w,
                   const std::vector<Vector>& ref, bool error_is_direct, bool keep_iterates,
                   Index iteration) {
  std::vector<double> sq(err_source_w.size());
  for (std::size_t k = 0; k < err_source_w.size(); ++k) {
    sq[k] = error_is_direct ? err_source_w[k].squaredNorm()
                            : (ref[k] - err_source_w[k]).squaredNorm();
  }
  t.iterations.push_back(iteration);
  t.sq_error.push_back(std::move(sq));
  if (keep_iterates) t.iterates.push_back(err_source_w);
}

inline void check_run_options(const RunOptions& opt) {
  if (opt.iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 1");
  if (opt.stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  if (opt.average_after && (*opt.average_after < 0 || *opt.average_after >= opt.iterations)) {
    throw Error(ErrorCode::InvalidArgument, "average_after must lie in [0, iterations)");
  }
}

}  // namespace detail

/// Single diffusion run from w_{k,-1} = 0; deterministic in (seed, run_index).
inline Trajectory run(const CombinationMatrix& a, const ModelList& models,
                      const StepSizeProfile& steps, const RunOptions& opt) {
  detail::check_run_options(opt);
  const Index n = a.size();
  detail::check_models(models, n);
  if (steps.size() != n) throw Error(ErrorCode::DimensionMismatch, "one tau per agent required");
  steps.validate();
  const Index dim = models.front()->dimension();
  const Topology topo(a);
  const auto ref = detail::resolve_reference(opt, n, dim);
  const auto mask = detail::muted_mask(opt, n);
  auto rngs = detail::agent_streams(opt, n);
  const auto mu = steps.mus();

  Trajectory t;
  t.seed = opt.seed;
  t.run_index = opt.run_index;
  t.mu_max = steps.mu_max;
  t.stride = opt.stride;
  t.agents = n;
  NetworkState state = NetworkState::zeros(n, dim);
  const Index tail_from = opt.average_after.value_or(opt.iterations);
  if (opt.average_after) t.tail_mean.assign(static_cast<std::size_t>(n), Vector::Zero(dim));
  for (Index i = 1; i <= opt.iterations; ++i) {
    state = atc_step(state, topo, models, mu, rngs, &mask);
    if (detail::should_record(i, opt)) {
      detail::record(t, state.w, ref, false, opt.record_iterates, i);
    }
    if (i > tail_from) {
      for (std::size_t k = 0; k < t.tail_mean.size(); ++k) t.tail_mean[k] += state.w[k];
    }
  }
  if (opt.average_after && opt.iterations > tail_from) {
    for (auto& v : t.tail_mean) v /= static_cast<double>(opt.iterations - tail_from);
  }
  t.final_state = std::move(state);
  return t;
}

/// Runs `runs` independent replicas (run_index 0..runs-1) on up to
/// `threads` workers (0 = hardware concurrency). Output is ordered by run
/// index regardless of scheduling.
inline std::vector<Trajectory> monte_carlo(const CombinationMatrix& a, const ModelList& models,
                                           const StepSizeProfile& steps, RunOptions opt,
                                           Index runs, unsigned threads = 0) {
  if (runs < 1) throw Error(ErrorCode::InvalidArgument, "need at least one Monte-Carlo run");
  std::vector<Trajectory> out(static_cast<std::size_t>(runs));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(runs));
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index r = next++; r < runs; r = next++) {
      RunOptions o = opt;
      o.run_index = static_cast<std::uint64_t>(r);
      try {
        out[static_cast<std::size_t>(r)] = run(a, models, steps, o);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(runs));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

/// Constant coefficients of the long-term model: H_k = hessian at the
/// agent's limit point, b_k = -true gradient there, and step sizes.
struct LongTermCoefficients {
  std::vector<Matrix> hessian;
  std::vector<Vector> bias;
  std::vector<double> mu;
};

struct LongTermState {
  std::vector<Vector> error;  // w~'_k
  std::shared_ptr<const LongTermCoefficients> coeffs;
  Index iteration = 0;
};

inline std::shared_ptr<const LongTermCoefficients> long_term_coefficients(
    const ModelList& models, const std::vector<Vector>& limit_points,
    const StepSizeProfile& steps) {
  auto c = std::make_shared<LongTermCoefficients>();
  for (std::size_t k = 0; k < models.size(); ++k) {
    c->hessian.push_back(models[k]->hessian(limit_points[k]));
    c->bias.push_back(-models[k]->true_gradient(limit_points[k]));
  }
  c->mu = steps.mus();
  return c;
}

/// w~'_k <- sum_l a_lk [ (I - mu_l H_l) w~'_l + mu_l s_l - mu_l b_l ].
inline LongTermState long_term_step(const LongTermState& state, const Topology& topo,
                                    std::span<const Vector> noise) {
  const auto& c = *state.coeffs;
  const auto n = state.error.size();
  std::vector<Vector> psi(n);
  for (std::size_t k = 0; k < n; ++k) {
    psi[k] = state.error[k] - c.mu[k] * (c.hessian[k] * state.error[k]) +
             c.mu[k] * (noise[k] - c.bias[k]);
  }
  LongTermState next{std::vector<Vector>(n), state.coeffs, state.iteration + 1};
  for (std::size_t k = 0; k < n; ++k) next.error[k] = detail::combine(topo, psi, static_cast<Index>(k));
  return next;
}

struct CoupledRun {
  Trajectory nonlinear;  // errors relative to the limit points
  Trajectory long_term;  // squared norms of the long-term error state
  /// max over steps, agents and entries of |w~ - w~'|
  double max_deviation = 0.0;
  /// Time-averaged ||w~_k - w~'_k||^2 over recorded steps after burn-in.
  std::vector<double> mean_sq_difference;
};

/// Runs ATC and the long-term model in lockstep; the long-term model is
/// driven by the gradient noise realised along the nonlinear trajectory.
inline CoupledRun run_coupled(const CombinationMatrix& a, const ModelList& models,
                              const StepSizeProfile& steps, const std::vector<Vector>& limit_points,
                              const RunOptions& opt, double burn_in_fraction = 0.5) {
  detail::check_run_options(opt);
  const Index n = a.size();
  detail::check_models(models, n);
  steps.validate();
  const Index dim = models.front()->dimension();
  if (static_cast<Index>(limit_points.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "one limit point per agent required");
  }
  const Topology topo(a);
  const auto mask = detail::muted_mask(opt, n);
  auto rngs = detail::agent_streams(opt, n);
  const auto mu = steps.mus();

  CoupledRun out;
  for (Trajectory* t : {&out.nonlinear, &out.long_term}) {
    t->seed = opt.seed;
    t->run_index = opt.run_index;
    t->mu_max = steps.mu_max;
    t->stride = opt.stride;
    t->agents = n;
  }
  out.mean_sq_difference.assign(static_cast<std::size_t>(n), 0.0);
  const auto burn_start = static_cast<Index>(burn_in_fraction * static_cast<double>(opt.iterations));
  Index averaged = 0;

  NetworkState state = NetworkState::zeros(n, dim);
  LongTermState lt{limit_points, long_term_coefficients(models, limit_points, steps), 0};
  std::vector<Vector> noise;
  for (Index i = 1; i <= opt.iterations; ++i) {
    state = atc_step(state, topo, models, mu, rngs, &mask, &noise);
    lt = long_term_step(lt, topo, noise);
    const bool rec = detail::should_record(i, opt);
    for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
      const Vector diff = (limit_points[k] - state.w[k]) - lt.error[k];
      out.max_deviation = std::max(out.max_deviation, diff.lpNorm<Eigen::Infinity>());
      if (rec && i > burn_start) out.mean_sq_difference[k] += diff.squaredNorm();
    }
    if (rec) {
      if (i > burn_start) ++averaged;
      detail::record(out.nonlinear, state.w, limit_points, false, opt.record_iterates, i);
      detail::record(out.long_term, lt.error, limit_points, true, false, i);
    }
  }
  for (auto& v : out.mean_sq_difference) v /= static_cast<double>(std::max<Index>(averaged, 1));
  out.nonlinear.final_state = std::move(state);
  return out;
}

struct MsdEstimate {
  double mean = 0.0;
  double half_width = 0.0;  // 2 standard errors across runs
};

/// Time average of the squared error after the burn-in window, then averaged
/// across runs. Records [floor(burn_in * records), records) are used.
inline std::vector<MsdEstimate> estimate_msd(std::span<const Trajectory> runs,
                                             double burn_in_fraction = 0.5) {
  if (runs.size() < 2) throw Error(ErrorCode::InsufficientData, "need at least two runs");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "burn_in_fraction must lie in [0, 1)");
  }
  const Index agents = runs.front().agents;
  const auto n_runs = static_cast<double>(runs.size());
  std::vector<std::vector<double>> per_run;
  for (const auto& t : runs) {
    if (t.agents != agents) throw Error(ErrorCode::DimensionMismatch, "runs disagree on agents");
    const Index records = t.records();
    const auto start = static_cast<Index>(std::floor(burn_in_fraction * static_cast<double>(records)));
    if (records - start < 1) throw Error(ErrorCode::InsufficientData, "empty averaging window");
    std::vector<double> avg(static_cast<std::size_t>(agents), 0.0);
    for (Index r = start; r < records; ++r) {
      for (Index k = 0; k < agents; ++k) {
        avg[static_cast<std::size_t>(k)] += t.sq_error[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)];
      }
    }
    for (auto& v : avg) v /= static_cast<double>(records - start);
    per_run.push_back(std::move(avg));
  }
  std::vector<MsdEstimate> out(static_cast<std::size_t>(agents));
  for (std::size_t k = 0; k < out.size(); ++k) {
    double mean = 0.0;
    for (const auto& r : per_run) mean += r[k];
    mean /= n_runs;
    double var = 0.0;
    for (const auto& r : per_run) var += (r[k] - mean) * (r[k] - mean);
    var /= (n_runs - 1.0);
    out[k] = {mean, 2.0 * std::sqrt(var / n_runs)};
  }
  return out;
}

inline std::vector<MsdEstimate> estimate_msd(const std::vector<Trajectory>& runs,
                                             double burn_in_fraction = 0.5) {
  return estimate_msd(std::span<const Trajectory>(runs), burn_in_fraction);
}

/// Time-averaged iterate per agent over the last `window` records of a run
/// that kept iterates.
inline std::vector<Vector> tail_mean_iterates(const Trajectory& t, Index window) {
  if (t.iterates.empty()) throw Error(ErrorCode::InsufficientData, "run did not keep iterates");
  const auto records = static_cast<Index>(t.iterates.size());
  const Index start = std::max<Index>(0, records - window);
  std::vector<Vector> out(t.iterates.back().size(),
                          Vector::Zero(t.iterates.back().front().size()));
  for (Index r = start; r < records; ++r) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += t.iterates[static_cast<std::size_t>(r)][k];
  }
  for (auto& v : out) v /= static_cast<double>(records - start);
  return out;
}

inline void write_run_csv(std::ostream& os, const Trajectory& t) {
  os << "iteration,agent_id,sq_error\n";
  os << std::setprecision(17);
  for (std::size_t r = 0; r < t.iterations.size(); ++r) {
    for (std::size_t k = 0; k < t.sq_error[r].size(); ++k) {
      os << t.iterations[r] << ',' << (k + 1) << ',' << t.sq_error[r][k] << '\n';
    }
  }
}

/// Mean squared error across runs per recorded iteration, in dB.
inline void write_learning_curve(std::ostream& os, std::span<const Trajectory> runs) {
  os << "iteration,agent_id,mean_sq_error_db\n";
  if (runs.empty()) return;
  os << std::setprecision(17);
  const auto& first = runs.front();
  for (std::size_t r = 0; r < first.iterations.size(); ++r) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(first.agents); ++k) {
      double mean = 0.0;
      for (const auto& t : runs) mean += t.sq_error[r][k];
      mean /= static_cast<double>(runs.size());
      os << first.iterations[r] << ',' << (k + 1) << ',';
      if (mean > 0.0) {
        os << 10.0 * std::log10(mean);
      } else {
        os << "-inf";
      }
      os << '\n';
    }
  }
}

}  // namespace wcdiff
