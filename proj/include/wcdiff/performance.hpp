#pragma once

// Pareto solutions of the sending sub-networks and closed-form steady-state
// mean-square deviation for every agent, plus comparison against
// Monte-Carlo estimates.

#include "wcdiff/cost_models.hpp"
#include "wcdiff/diffusion.hpp"
#include "wcdiff/error.hpp"
#include "wcdiff/graph.hpp"
#include "wcdiff/influence.hpp"
#include "wcdiff/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wcdiff {

/// q_{s,k} = mu_{s,k} p_{s,k}, grouped by S sub-network in partition order.
struct QWeights {
  std::vector<std::vector<double>> per_subnetwork;
};

inline QWeights q_weights(const NetworkPartition& part, const std::vector<PerronVector>& perron,
                          const std::vector<double>& mu) {
  if (static_cast<Index>(mu.size()) != part.n) {
    throw Error(ErrorCode::DimensionMismatch, "one step size per agent required");
  }
  QWeights q;
  for (std::size_t s = 0; s < part.senders.size(); ++s) {
    std::vector<double> qs;
    const auto& members = part.senders[s];
    for (std::size_t j = 0; j < members.size(); ++j) {
      qs.push_back(mu[static_cast<std::size_t>(members[j])] * perron[s].entries(static_cast<Index>(j)));
    }
    q.per_subnetwork.push_back(std::move(qs));
  }
  return q;
}

struct ParetoOptions {
  double tol = 1e-10;
  Index max_iter = 100;
};

/// Unique zero of sum_k q_k grad J_k(w). Weights are normalized to sum to
/// one first, so the tolerance applies to a convex combination of gradients.
/// All-quadratic sub-networks are solved in closed form; otherwise damped
/// Newton steps with backtracking on the weighted aggregate cost.
inline Vector pareto_solve(std::span<const ModelPtr> models, std::span<const double> q,
                           const ParetoOptions& opt = {}) {
  if (models.empty() || models.size() != q.size()) {
    throw Error(ErrorCode::DimensionMismatch, "pareto_solve: one weight per model required");
  }
  double total = 0.0;
  for (double v : q) {
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidArgument, "pareto_solve: weights must be > 0");
    total += v;
  }
  const Index m = models.front()->dimension();
  std::vector<double> weight(q.begin(), q.end());
  for (auto& v : weight) v /= total;

  auto gradient = [&](const Vector& w) {
    Vector g = Vector::Zero(m);
    for (std::size_t k = 0; k < models.size(); ++k) g += weight[k] * models[k]->true_gradient(w);
    return g;
  };
  auto hessian = [&](const Vector& w) {
    Matrix h = Matrix::Zero(m, m);
    for (std::size_t k = 0; k < models.size(); ++k) h += weight[k] * models[k]->hessian(w);
    return h;
  };
  auto cost = [&](const Vector& w) {
    double c = 0.0;
    for (std::size_t k = 0; k < models.size(); ++k) c += weight[k] * models[k]->loss(w);
    return c;
  };
  auto newton_direction = [&](const Vector& w, const Vector& g) {
    const Eigen::LDLT<Matrix> ldlt(hessian(w));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      throw Error(ErrorCode::SingularAggregateHessian,
                  "aggregate Hessian is not positive definite");
    }
    return Vector(-ldlt.solve(g));
  };

  const bool all_quadratic = std::all_of(models.begin(), models.end(),
                                         [](const ModelPtr& p) { return p->constant_hessian(); });
  Vector w = Vector::Zero(m);
  if (all_quadratic) {
    w += newton_direction(w, gradient(w));
    return w;
  }

  for (Index it = 0; it < opt.max_iter; ++it) {
    const Vector g = gradient(w);
    if (g.norm() < opt.tol) return w;
    Vector d = newton_direction(w, g);
    if (g.dot(d) >= 0.0) d = -g;  // not a descent direction: fall back to steepest descent
    // Armijo on the aggregate cost; near the solution cost differences drown
    // in rounding, so a step that shrinks the gradient is accepted as well.
    const double c0 = cost(w);
    const double g0 = g.norm();
    double t = 1.0;
    while (t > 1e-12) {
      const Vector trial = w + t * d;
      if (cost(trial) <= c0 + 1e-4 * t * g.dot(d) || gradient(trial).norm() < (1.0 - 1e-4 * t) * g0) break;
      t *= 0.5;
    }
    w += t * d;
  }
  if (gradient(w).norm() < opt.tol) return w;
  throw Error(ErrorCode::NoConvergence,
              "pareto_solve: no convergence after " + std::to_string(opt.max_iter) + " iterations",
              opt.max_iter);
}

inline Vector pareto_solve(const ModelList& models, const std::vector<double>& q,
                           const ParetoOptions& opt = {}) {
  return pareto_solve(std::span<const ModelPtr>(models), std::span<const double>(q), opt);
}

/// MSD_s = 1/2 Tr[(sum q H)^{-1} (sum q^2 G)].
inline double msd_subnetwork(std::span<const double> q, std::span<const Matrix> hessians,
                             std::span<const Matrix> covariances) {
  if (q.empty() || q.size() != hessians.size() || q.size() != covariances.size()) {
    throw Error(ErrorCode::DimensionMismatch, "msd_subnetwork: inconsistent agent counts");
  }
  const Index m = hessians.front().rows();
  Matrix h_sum = Matrix::Zero(m, m);
  Matrix g_sum = Matrix::Zero(m, m);
  for (std::size_t k = 0; k < q.size(); ++k) {
    h_sum += q[k] * hessians[k];
    g_sum += q[k] * q[k] * covariances[k];
  }
  const Eigen::LDLT<Matrix> ldlt(h_sum);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1e-300, ldlt.vectorD().maxCoeff())) {
    throw Error(ErrorCode::SingularAggregateHessian,
                "msd_subnetwork: weighted Hessian sum is not positive definite");
  }
  return 0.5 * ldlt.solve(g_sum).trace();
}

inline double msd_subnetwork(const std::vector<double>& q, const std::vector<Matrix>& hessians,
                             const std::vector<Matrix>& covariances) {
  return msd_subnetwork(std::span<const double>(q), std::span<const Matrix>(hessians),
                        std::span<const Matrix>(covariances));
}

/// MSD_R(k) = sum_s c_k(s)^2 MSD_s.
inline double msd_receiving(const Vector& c, std::span<const double> msd_per_subnetwork) {
  if (static_cast<std::size_t>(c.size()) != msd_per_subnetwork.size()) {
    throw Error(ErrorCode::DimensionMismatch, "msd_receiving: c and MSD list differ in size");
  }
  double out = 0.0;
  for (Index s = 0; s < c.size(); ++s) out += c(s) * c(s) * msd_per_subnetwork[static_cast<std::size_t>(s)];
  return out;
}

inline double to_db(double linear) {
  if (!(linear > 0.0)) {
    throw Error(ErrorCode::NonPositive, "to_db: value must be > 0", -1, -1, linear);
  }
  return 10.0 * std::log10(linear);
}

inline std::optional<double> to_db_or_none(double linear) {
  if (linear > 0.0) return to_db(linear);
  return std::nullopt;
}

struct SubnetworkMsd {
  Index id = 0;  // position among S sub-networks
  std::vector<Index> agents;
  Vector w_star;
  std::vector<double> q;
  double msd_linear = 0.0;
  std::optional<double> msd_db;
  std::optional<double> sim_db;
};

struct ReceiverMsd {
  Index agent = -1;
  Vector c;
  Vector limit_point;
  double msd_linear = 0.0;
  std::optional<double> msd_db;
  std::optional<double> sim_db;
  std::optional<double> delta_db;
};

struct MsdReport {
  std::vector<SubnetworkMsd> subnetworks;
  std::vector<ReceiverMsd> r_agents;
  /// Theoretical MSD of every agent (S agents inherit their sub-network's).
  std::vector<double> per_agent;
};

/// Everything the theory needs for one network: structure, influence,
/// Pareto points, limit points and the MSD report.
struct TheoryBundle {
  NetworkPartition partition;
  InfluenceMatrix influence;
  QWeights q;
  LimitPoints limits;
  std::vector<InfluenceVector> c;
  std::vector<Matrix> hessians;     // per agent, at its limit point
  std::vector<Matrix> covariances;  // per agent, at its limit point
  MsdReport report;
};

/// Full closed-form pipeline. Gradient-noise covariances use the model's
/// exact form when available, otherwise `noise_samples` draws from `rng`.
inline TheoryBundle theoretical_msd(const CombinationMatrix& a, const ModelList& models,
                                    const StepSizeProfile& steps, std::uint64_t seed = 0,
                                    Index noise_samples = 1000000) {
  detail::check_models(models, a.size());
  if (steps.size() != a.size()) throw Error(ErrorCode::DimensionMismatch, "one tau per agent required");
  TheoryBundle t;
  t.partition = classify(a);
  t.influence = influence_matrix(t.partition);
  const auto mu = steps.mus();
  t.q = q_weights(t.partition, t.influence.perron, mu);

  std::vector<Vector> w_stars;
  for (std::size_t s = 0; s < t.partition.senders.size(); ++s) {
    ModelList members;
    for (Index k : t.partition.senders[s]) members.push_back(models[static_cast<std::size_t>(k)]);
    w_stars.push_back(pareto_solve(members, t.q.per_subnetwork[s]));
  }
  t.limits = receiving_limit_points(t.influence.w, w_stars, t.partition);
  t.c = influence_vectors(t.influence.w, t.partition);

  Rng rng = make_stream(seed, 0xC0FFEE, 0);
  for (Index k = 0; k < a.size(); ++k) {
    const auto& model = *models[static_cast<std::size_t>(k)];
    const Vector& point = t.limits.per_agent[static_cast<std::size_t>(k)];
    t.hessians.push_back(model.hessian(point));
    t.covariances.push_back(noise_covariance_or_estimate(model, point, rng, noise_samples).g);
  }

  t.report.per_agent.assign(static_cast<std::size_t>(a.size()), 0.0);
  std::vector<double> msd_s;
  for (std::size_t s = 0; s < t.partition.senders.size(); ++s) {
    SubnetworkMsd row;
    row.id = static_cast<Index>(s);
    row.agents = t.partition.senders[s];
    row.w_star = w_stars[s];
    row.q = t.q.per_subnetwork[s];
    std::vector<Matrix> hs;
    std::vector<Matrix> gs;
    for (Index k : row.agents) {
      hs.push_back(t.hessians[static_cast<std::size_t>(k)]);
      gs.push_back(t.covariances[static_cast<std::size_t>(k)]);
    }
    row.msd_linear = msd_subnetwork(row.q, hs, gs);
    row.msd_db = to_db_or_none(row.msd_linear);
    for (Index k : row.agents) t.report.per_agent[static_cast<std::size_t>(k)] = row.msd_linear;
    msd_s.push_back(row.msd_linear);
    t.report.subnetworks.push_back(std::move(row));
  }
  for (const auto& ck : t.c) {
    ReceiverMsd row;
    row.agent = ck.agent;
    row.c = ck.c;
    row.limit_point = t.limits.per_agent[static_cast<std::size_t>(ck.agent)];
    row.msd_linear = msd_receiving(ck.c, msd_s);
    row.msd_db = to_db_or_none(row.msd_linear);
    t.report.per_agent[static_cast<std::size_t>(ck.agent)] = row.msd_linear;
    t.report.r_agents.push_back(std::move(row));
  }
  return t;
}

struct ComparisonRow {
  Index agent = -1;
  double theory_linear = 0.0;
  double sim_linear = 0.0;
  std::optional<double> theory_db;
  std::optional<double> sim_db;
  std::optional<double> delta_db;  // sim - theory
  double half_width_db = 0.0;
  bool flagged = false;
};

/// Per-agent theory vs simulation table; rows whose |delta| exceeds
/// `threshold_db` (or where only one side is zero) are flagged. Also fills
/// sim_db / delta_db into the report.
inline std::vector<ComparisonRow> compare(MsdReport& theory, std::span<const MsdEstimate> estimates,
                                          double threshold_db = 1.5) {
  if (estimates.empty()) throw Error(ErrorCode::InsufficientData, "no Monte-Carlo estimates");
  if (estimates.size() != theory.per_agent.size()) {
    throw Error(ErrorCode::DimensionMismatch, "estimates do not cover the same agents");
  }
  std::vector<ComparisonRow> rows;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    ComparisonRow row;
    row.agent = static_cast<Index>(k);
    row.theory_linear = theory.per_agent[k];
    row.sim_linear = estimates[k].mean;
    row.theory_db = to_db_or_none(row.theory_linear);
    row.sim_db = to_db_or_none(row.sim_linear);
    if (row.theory_db && row.sim_db) {
      row.delta_db = *row.sim_db - *row.theory_db;
      row.flagged = std::abs(*row.delta_db) > threshold_db;
      row.half_width_db =
          to_db(estimates[k].mean + estimates[k].half_width) - *row.sim_db;
    } else {
      row.delta_db = (!row.theory_db && !row.sim_db) ? std::optional<double>(0.0) : std::nullopt;
      row.flagged = row.theory_db.has_value() != row.sim_db.has_value();
    }
    rows.push_back(row);
  }
  for (auto& s : theory.subnetworks) {
    double mean = 0.0;
    for (Index k : s.agents) mean += estimates[static_cast<std::size_t>(k)].mean;
    s.sim_db = to_db_or_none(mean / static_cast<double>(s.agents.size()));
  }
  for (auto& r : theory.r_agents) {
    r.sim_db = rows[static_cast<std::size_t>(r.agent)].sim_db;
    r.delta_db = rows[static_cast<std::size_t>(r.agent)].delta_db;
  }
  return rows;
}

inline std::vector<ComparisonRow> compare(MsdReport& theory,
                                          const std::vector<MsdEstimate>& estimates,
                                          double threshold_db = 1.5) {
  return compare(theory, std::span<const MsdEstimate>(estimates), threshold_db);
}

}  // namespace wcdiff
