#pragma once

// The acceptance suite: eleven numbered checks over the bundled presets.
// Categories: "structure" (closed-form network algebra), "oracle" (cost
// model gradients) and "simulation" (Monte-Carlo runs).

#include "wcdiff/config.hpp"
#include "wcdiff/diffusion.hpp"
#include "wcdiff/influence.hpp"
#include "wcdiff/performance.hpp"
#include "wcdiff/presets.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace wcdiff::acceptance {

/// W as the checks see it; swappable so a broken solver can be shown to fail.
using WSolver = std::function<Matrix(const NetworkPartition&)>;

inline Matrix default_w_solver(const NetworkPartition& part) { return influence_matrix(part).w; }

struct Options {
  WSolver w_solver = default_w_solver;
  unsigned threads = 0;
};

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Result {
  int id = 0;
  std::string name;
  std::string category;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Lazily shared Monte-Carlo results so criteria 6 and 7 reuse one baseline.
class Context {
 public:
  explicit Context(Options opt) : opt_(std::move(opt)) {}
  const Options& options() const { return opt_; }

  const ExperimentConfig& regression() {
    if (!regression_) regression_ = presets::load("preset-fig3-regression");
    return *regression_;
  }
  const ExperimentConfig& logistic() {
    if (!logistic_) logistic_ = presets::load("preset-two-agent-logistic");
    return *logistic_;
  }

  /// Simulated per-agent MSD (linear) on the regression preset at mu_max * scale.
  const std::vector<MsdEstimate>& regression_msd(double scale) {
    auto& slot = scale == 1.0 ? base_msd_ : half_msd_;
    if (!slot) {
      const auto& cfg = regression();
      StepSizeProfile steps = *cfg.steps;
      steps.mu_max *= scale;
      const auto models = build_models(cfg);
      const auto a = combination(cfg);
      const auto theory = theoretical_msd(a, models, steps, *cfg.seed);
      RunOptions opt;
      opt.iterations = cfg.run->iterations;
      opt.stride = cfg.run->stride;
      opt.seed = *cfg.seed;
      opt.reference = theory.limits.per_agent;
      const auto runs = monte_carlo(a, models, steps, opt, cfg.run->monte_carlo_runs, opt_.threads);
      slot = estimate_msd(runs, cfg.run->burn_in_fraction);
    }
    return *slot;
  }

 private:
  Options opt_;
  std::optional<ExperimentConfig> regression_;
  std::optional<ExperimentConfig> logistic_;
  std::optional<std::vector<MsdEstimate>> base_msd_;
  std::optional<std::vector<MsdEstimate>> half_msd_;
};

struct Criterion {
  int id;
  std::string name;
  std::string category;
  std::function<Outcome(Context&)> check;
};

namespace detail {

inline std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

inline NetworkPartition regression_partition(Context& ctx) {
  return classify(combination(ctx.regression()));
}

// W of the preset network, rounded to four decimals.
inline Matrix reference_w() {
  Matrix w(5, 3);
  w << 0, 0, 0,
       0.4046, 0.5267, 0.7099,
       0.1489, 0.1183, 0.0725,
       0.4466, 0.3550, 0.2176,
       0, 0, 0;
  return w;
}

inline Matrix matrix_power(const Matrix& a, int n) {
  Matrix out = Matrix::Identity(a.rows(), a.cols());
  Matrix base = a;
  for (; n > 0; n >>= 1) {
    if (n & 1) out = out * base;
    base = base * base;
  }
  return out;
}

inline double inf_norm(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

inline Outcome influence_matrix_check(Context& ctx) {
  const auto part = regression_partition(ctx);
  const Matrix w = ctx.options().w_solver(part);
  if (w.rows() != 5 || w.cols() != 3) return {false, "W has the wrong shape"};
  const double err = (w - reference_w()).cwiseAbs().maxCoeff();
  return {err <= 5e-4, "max |W - reference| = " + num(err, 3)};
}

inline Outcome limit_point_check(Context& ctx) {
  const auto part = regression_partition(ctx);
  const Matrix w = ctx.options().w_solver(part);
  const auto lp = receiving_limit_points(w, {Vector{{1.0}}, Vector{{1.5}}}, part);
  const double expected[3] = {1.2233, 1.1775, 1.1088};
  double err = 0.0;
  std::string got;
  for (Index j = 0; j < 3; ++j) {
    err = std::max(err, std::abs(lp.w_bullet(j) - expected[j]));
    got += (j ? ", " : "") + num(lp.w_bullet(j), 6);
  }
  return {err <= 5e-4, "w = (" + got + "), max error " + num(err, 3)};
}

inline Outcome influence_vector_check(Context& ctx) {
  const auto part = regression_partition(ctx);
  const Matrix w = ctx.options().w_solver(part);
  const auto c7 = influence_vector(w, part, 6);
  const double err = std::max(std::abs(c7.c(0) - 0.6450), std::abs(c7.c(1) - 0.3550));
  return {err <= 5e-4, "c_7 = (" + num(c7.c(0), 6) + ", " + num(c7.c(1), 6) + ")"};
}

inline Outcome two_agent_check(Context& ctx) {
  const auto part = classify(combination(ctx.logistic()));
  const Matrix w = ctx.options().w_solver(part);
  if (w.size() != 1) return {false, "W is not 1x1"};
  const double err = std::abs(w(0, 0) - 1.0);
  return {err <= 1e-12, "W = " + num(w(0, 0), 17)};
}

inline Outcome structure_check(Context& ctx) {
  const auto a = combination(ctx.regression());
  const auto part = classify(a);
  const Matrix w = ctx.options().w_solver(part);
  const auto infl = influence_matrix(part);

  const double colsum = (w.colwise().sum().array() - 1.0).abs().maxCoeff();
  const auto lp = receiving_limit_points(w, {Vector{{1.0}}, Vector{{1.5}}}, part);
  const double residual = fixed_point_residual(a, lp);
  InfluenceMatrix used = infl;
  used.w = w;
  const Matrix a_inf = limiting_power(part, used).original;
  const double power_gap = inf_norm(matrix_power(a.weights(), 2000) - a_inf);
  const double absorb = (a_inf * a.weights() - a_inf).cwiseAbs().maxCoeff();

  // Neumann tail: error ratio once the error is well above rounding.
  double worst_ratio = 0.0;
  double prev = -1.0;
  for (Index n = 10; n <= 80; ++n) {
    const double err = (neumann_w(part, n) - w).cwiseAbs().maxCoeff();
    if (prev > 1e-11 && err > 1e-12) worst_ratio = std::max(worst_ratio, err / prev);
    prev = err;
  }
  const double rho = infl.t_rr_spectral_radius;
  const bool ok = colsum <= 1e-10 && residual < 1e-9 && power_gap < 1e-8 && absorb <= 1e-10 &&
                  worst_ratio <= rho + 0.05 && worst_ratio > 0.0;
  return {ok, "colsum " + num(colsum, 2) + ", residual " + num(residual, 2) + ", |A^2000 - A_inf| " +
                  num(power_gap, 2) + ", Neumann ratio " + num(worst_ratio, 4) + " (rho " +
                  num(rho, 4) + ")"};
}

inline Outcome msd_check(Context& ctx) {
  const auto& cfg = ctx.regression();
  auto theory = theoretical_msd(combination(cfg), build_models(cfg), *cfg.steps, *cfg.seed);
  const auto rows = compare(theory.report, ctx.regression_msd(1.0), 1.5);
  double worst = 0.0;
  bool ok = true;
  std::string table;
  for (const auto& r : rows) {
    if (!r.delta_db) return {false, "agent " + std::to_string(r.agent + 1) + " has no dB value"};
    worst = std::max(worst, std::abs(*r.delta_db));
    ok = ok && !r.flagged;
    table += (r.agent ? " " : "") + num(*r.theory_db, 4) + "/" + num(*r.sim_db, 4);
  }
  return {ok, "max |delta| " + num(worst, 3) + " dB; theory/sim dB: " + table};
}

inline Outcome scaling_check(Context& ctx) {
  const auto& base = ctx.regression_msd(1.0);
  const auto& half = ctx.regression_msd(0.5);
  bool ok = true;
  double lo = 1e9, hi = -1e9;
  for (std::size_t k = 0; k < base.size(); ++k) {
    const double shift = to_db(half[k].mean) - to_db(base[k].mean);
    lo = std::min(lo, shift);
    hi = std::max(hi, shift);
    ok = ok && std::abs(shift + 3.0) <= 0.8;
  }
  return {ok, "shift range [" + num(lo, 3) + ", " + num(hi, 3) + "] dB"};
}

inline Outcome leader_follower_check(Context& ctx) {
  const auto& cfg = ctx.logistic();
  const auto a = combination(cfg);
  const auto models = build_models(cfg);
  const auto& steps = *cfg.steps;
  const auto theory = theoretical_msd(a, models, steps, *cfg.seed);
  const Vector& leader = theory.report.subnetworks[0].w_star;
  const Vector own = pareto_solve(ModelList{models[1]}, {1.0});

  RunOptions opt;
  opt.iterations = cfg.run->iterations;
  opt.stride = cfg.run->stride;
  opt.seed = *cfg.seed;
  opt.average_after = static_cast<Index>(cfg.run->burn_in_fraction * static_cast<double>(opt.iterations));
  const auto runs = monte_carlo(a, models, steps, opt, cfg.run->monte_carlo_runs, ctx.options().threads);
  Vector follower = Vector::Zero(leader.size());
  for (const auto& t : runs) follower += t.tail_mean[1];
  follower /= static_cast<double>(runs.size());

  const double bound = 10.0 * std::sqrt(steps.mu_max);
  const double dist = (follower - leader).norm();
  const double own_dist = (own - leader).norm();
  return {dist <= bound && own_dist > bound,
          "|w_R - w_S*| = " + num(dist, 3) + " <= " + num(bound, 3) + "; R's own minimizer is " +
              num(own_dist, 3) + " away"};
}

inline Outcome long_term_check(Context& ctx) {
  // Quadratic: exact agreement under shared noise.
  const auto& reg = ctx.regression();
  const auto a = combination(reg);
  const auto models = build_models(reg);
  const auto theory = theoretical_msd(a, models, *reg.steps, *reg.seed);
  RunOptions opt;
  opt.iterations = 20000;
  opt.stride = reg.run->stride;
  opt.seed = *reg.seed;
  const auto coupled = run_coupled(a, models, *reg.steps, theory.limits.per_agent, opt);
  const bool exact = coupled.max_deviation < 1e-10;

  // Logistic: the steady-state gap between the two models shrinks with mu.
  const auto& lg = ctx.logistic();
  const auto la = combination(lg);
  const auto lmodels = build_models(lg);
  std::vector<double> ms_gap, msd_gap;
  const double burn = lg.run->burn_in_fraction;
  for (double mu : {1e-3, 5e-4, 2.5e-4}) {
    StepSizeProfile steps = *lg.steps;
    steps.mu_max = mu;
    const auto lt = theoretical_msd(la, lmodels, steps, *lg.seed);
    RunOptions o;
    o.iterations = static_cast<Index>(30.0 / mu);
    o.stride = lg.run->stride;
    o.seed = *lg.seed;
    const Index runs = lg.run->monte_carlo_runs;
    std::vector<double> nl(2, 0.0), lin(2, 0.0);
    double sq = 0.0;
    for (Index r = 0; r < runs; ++r) {
      o.run_index = static_cast<std::uint64_t>(r);
      const auto c = run_coupled(la, lmodels, steps, lt.limits.per_agent, o, burn);
      const std::vector<Trajectory> a1{c.nonlinear, c.nonlinear}, b1{c.long_term, c.long_term};
      const auto e_nl = estimate_msd(a1, burn), e_lt = estimate_msd(b1, burn);
      for (std::size_t k = 0; k < 2; ++k) {
        nl[k] += e_nl[k].mean / static_cast<double>(runs);
        lin[k] += e_lt[k].mean / static_cast<double>(runs);
        sq += c.mean_sq_difference[k] / static_cast<double>(runs);
      }
    }
    ms_gap.push_back(sq);
    msd_gap.push_back(std::abs(nl[0] - lin[0]) + std::abs(nl[1] - lin[1]));
  }
  const bool shrinks = ms_gap[1] < ms_gap[0] && ms_gap[2] < ms_gap[1] && msd_gap[1] < msd_gap[0] &&
                       msd_gap[2] < msd_gap[1];
  return {exact && shrinks,
          "quadratic max |dev| " + num(coupled.max_deviation, 2) + "; logistic MSD gap " +
              num(msd_gap[0], 3) + " > " + num(msd_gap[1], 3) + " > " + num(msd_gap[2], 3) +
              ", mean-square gap " + num(ms_gap[0], 3) + " > " + num(ms_gap[1], 3) + " > " +
              num(ms_gap[2], 3)};
}

inline Outcome gradient_oracle_check(Context& ctx) {
  const auto quad = build_models(ctx.regression()).front();
  const auto logi = build_models(ctx.logistic()).front();
  const auto ell = build_models(presets::load("preset-elliptic-weak")).back();
  Rng rng = make_stream(2024, 0, 0);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  auto rel = [](const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1e-8, b.norm()); };
  double worst = 0.0;
  for (const ModelPtr& m : {quad, logi, ell}) {
    for (int i = 0; i < 20; ++i) {
      Vector w(m->dimension());
      for (Index j = 0; j < w.size(); ++j) w(j) = u(rng) * (m->dimension() > 3 ? 0.25 : 1.0);
      worst = std::max(worst, rel(m->true_gradient(w), finite_difference_gradient(*m, w)));
      const Sample s = m->draw_sample(rng);
      worst = std::max(worst, rel(m->stochastic_gradient(w, s), finite_difference_gradient(*m, w, s)));
    }
  }
  // Zero-mean gradient noise: |mean| <= 2 * 4 sqrt(tr G / n).
  const Index n = 100000;
  double worst_noise = 0.0;
  bool noise_ok = true;
  for (const ModelPtr& m : {quad, logi, ell}) {
    Vector w = Vector::Constant(m->dimension(), 0.3);
    const Vector mean_grad = m->true_gradient(w);
    Vector acc = Vector::Zero(m->dimension());
    for (Index i = 0; i < n; ++i) acc += m->stochastic_gradient(w, m->draw_sample(rng)) - mean_grad;
    const double bound = 2.0 * 4.0 * std::sqrt(m->noise_covariance(w)->trace() / static_cast<double>(n));
    const double ratio = (acc / static_cast<double>(n)).norm() / bound;
    worst_noise = std::max(worst_noise, ratio);
    noise_ok = noise_ok && ratio <= 1.0;
  }
  return {worst <= 1e-5 && noise_ok, "max relative gradient error " + num(worst, 2) +
                                         ", noise mean / bound " + num(worst_noise, 3)};
}

inline Outcome isolation_check(Context& ctx) {
  const auto& cfg = ctx.regression();
  const auto a = combination(cfg);
  const auto models = build_models(cfg);
  const auto part = classify(a);
  RunOptions opt;
  opt.iterations = 10000;
  opt.stride = 1;
  opt.seed = *cfg.seed;
  opt.record_iterates = true;
  const auto base = run(a, models, *cfg.steps, opt);
  opt.muted_agents = part.r_agents();
  const auto muted = run(a, models, *cfg.steps, opt);
  std::size_t compared = 0;
  bool same = true;
  bool receivers_moved = false;
  for (std::size_t r = 0; r < base.iterates.size(); ++r) {
    for (Index k = 0; k < part.n; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      if (part.is_receiver(k)) {
        receivers_moved = receivers_moved || base.iterates[r][ku] != muted.iterates[r][ku];
      } else {
        same = same && base.iterates[r][ku] == muted.iterates[r][ku];
        ++compared;
      }
    }
  }
  return {same && receivers_moved, std::to_string(compared) + " S-agent iterates compared, " +
                                       (same ? "all bitwise equal" : "some differ")};
}

}  // namespace detail

inline const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {1, "influence matrix reproduction", "structure", detail::influence_matrix_check},
      {2, "receiving limit points", "structure", detail::limit_point_check},
      {3, "influence vector c_7", "structure", detail::influence_vector_check},
      {4, "two-agent collapse W = 1", "structure", detail::two_agent_check},
      {5, "structural properties of W and A_inf", "structure", detail::structure_check},
      {6, "simulated vs theoretical MSD", "simulation", detail::msd_check},
      {7, "MSD scales with mu_max", "simulation", detail::scaling_check},
      {8, "leader-follower", "simulation", detail::leader_follower_check},
      {9, "long-term model accuracy", "simulation", detail::long_term_check},
      {10, "gradient oracles", "oracle", detail::gradient_oracle_check},
      {11, "S agents isolated from R data", "simulation", detail::isolation_check},
  };
  return list;
}

/// Empty or "all" selects everything; otherwise a category, a criterion
/// number, or a substring of a criterion name.
inline bool selected(const Criterion& c, std::string_view filter) {
  if (filter.empty() || filter == "all") return true;
  if (filter == c.category) return true;
  if (filter == std::to_string(c.id)) return true;
  return c.name.find(filter) != std::string::npos;
}

/// Wall-clock limits where the criterion states one.
inline std::optional<double> time_limit(int id) {
  if (id <= 3) return 1.0;
  if (id == 6) return 120.0;
  return std::nullopt;
}

inline std::vector<Result> run(std::string_view filter, Options opt = {},
                               std::ostream* progress = nullptr) {
  Context ctx(std::move(opt));
  std::vector<Result> out;
  for (const auto& c : criteria()) {
    if (!selected(c, filter)) continue;
    Result r{c.id, c.name, c.category, false, "", 0.0};
    const auto start = std::chrono::steady_clock::now();
    try {
      const Outcome o = c.check(ctx);
      r.passed = o.passed;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (const auto limit = time_limit(c.id); limit && r.seconds > *limit) {
      r.passed = false;
      r.detail += "; took " + detail::num(r.seconds, 3) + " s, limit " + detail::num(*limit, 3) + " s";
    }
    if (progress) {
      *progress << (r.passed ? "PASS" : "FAIL") << "  [" << std::setw(2) << r.id << "] " << r.name
                << " (" << std::fixed << std::setprecision(2) << r.seconds << " s)  " << r.detail
                << std::defaultfloat << "\n"
                << std::flush;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline bool all_passed(const std::vector<Result>& results) {
  for (const auto& r : results) {
    if (!r.passed) return false;
  }
  return !results.empty();
}

}  // namespace wcdiff::acceptance
