#pragma once

// Limiting behaviour of A^n over a weakly-connected network: the influence
// matrix W = T_SR (I - T_RR)^{-1}, the limit A_inf = [Theta, Theta W; 0, 0],
// receiving-agent limit points and per-agent leader influence vectors.

#include "wcdiff/error.hpp"
#include "wcdiff/graph.hpp"
#include "wcdiff/linalg.hpp"

#include <string>
#include <vector>

namespace wcdiff {

/// Below this reciprocal condition number I - T_RR is treated as singular.
inline constexpr double kSingularRcond = 1e-13;

struct InfluenceMatrix {
  Matrix w;      // N_gS x N_gR in canonical agent order
  Matrix theta;  // blockdiag{p_s 1^T}
  std::vector<PerronVector> perron;  // one per S sub-network
  double t_rr_spectral_radius = 0.0;
  /// Reciprocal condition estimate of I - T_RR (1 when group R is empty).
  double rcond = 1.0;
};

inline std::vector<PerronVector> perron_vectors(const NetworkPartition& part) {
  std::vector<PerronVector> out;
  out.reserve(part.senders.size());
  for (std::size_t s = 0; s < part.senders.size(); ++s) {
    const auto [b, e] = part.sender_rows(s);
    out.push_back(perron(part.t_ss.block(b, b, e - b, e - b)));
  }
  return out;
}

inline Matrix assemble_theta(const NetworkPartition& part,
                             const std::vector<PerronVector>& perron) {
  Matrix theta = Matrix::Zero(part.n_gs, part.n_gs);
  for (std::size_t s = 0; s < part.senders.size(); ++s) {
    const auto [b, e] = part.sender_rows(s);
    const Index ns = e - b;
    theta.block(b, b, ns, ns) = perron[s].entries * Vector::Ones(ns).transpose();
  }
  return theta;
}

/// Solves (I - T_RR)^T X = T_SR^T by partial-pivot LU and returns X^T.
inline InfluenceMatrix influence_matrix(const NetworkPartition& part) {
  InfluenceMatrix out;
  out.perron = perron_vectors(part);
  out.theta = assemble_theta(part, out.perron);
  if (part.n_gr == 0) {
    out.w = Matrix::Zero(part.n_gs, 0);
    return out;
  }
  out.t_rr_spectral_radius = spectral_radius(part.t_rr);
  const Matrix lhs = (Matrix::Identity(part.n_gr, part.n_gr) - part.t_rr).transpose();
  const Eigen::PartialPivLU<Matrix> lu(lhs);
  out.rcond = lu.rcond();
  if (out.t_rr_spectral_radius >= 1.0 || !(out.rcond > kSingularRcond)) {
    throw Error(ErrorCode::SingularSystem,
                "I - T_RR is numerically singular (rcond " + std::to_string(out.rcond) +
                    ", rho(T_RR) " + std::to_string(out.t_rr_spectral_radius) + ")",
                -1, -1, out.rcond);
  }
  out.w = lu.solve(part.t_sr.transpose()).transpose();
  return out;
}

/// Partial sum T_SR (I + T_RR + ... + T_RR^{n_terms-1}).
inline Matrix neumann_w(const NetworkPartition& part, Index n_terms) {
  Matrix sum = Matrix::Zero(part.n_gs, part.n_gr);
  Matrix term = part.t_sr;
  for (Index j = 0; j < n_terms; ++j) {
    sum += term;
    term = term * part.t_rr;
  }
  return sum;
}

struct LimitingPower {
  Matrix original;   // agent order of the input matrix
  Matrix canonical;  // S agents first, as in the partition
};

inline LimitingPower limiting_power(const NetworkPartition& part,
                                    const InfluenceMatrix& infl) {
  LimitingPower out;
  out.canonical = Matrix::Zero(part.n, part.n);
  out.canonical.topLeftCorner(part.n_gs, part.n_gs) = infl.theta;
  if (part.n_gr > 0) {
    out.canonical.topRightCorner(part.n_gs, part.n_gr) = infl.theta * infl.w;
  }
  out.original = Matrix::Zero(part.n, part.n);
  for (Index i = 0; i < part.n; ++i) {
    for (Index j = 0; j < part.n; ++j) {
      out.original(part.order[static_cast<std::size_t>(i)],
                   part.order[static_cast<std::size_t>(j)]) = out.canonical(i, j);
    }
  }
  return out;
}

inline LimitingPower limiting_power(const NetworkPartition& part) {
  return limiting_power(part, influence_matrix(part));
}

struct LimitPoints {
  Index dimension = 0;
  std::vector<Vector> w_star_per_subnetwork;
  Vector w_star_stacked;  // N_gS * M, canonical order
  Vector w_bullet;        // N_gR * M, canonical order
  Vector w_infinity;      // [w_star_stacked; w_bullet]
  std::vector<Vector> per_agent;  // indexed by original agent id
};

/// Receiving-agent limit points (W kron I_M)^T W_star, applied one M-block
/// at a time.
inline LimitPoints receiving_limit_points(const Matrix& w,
                                          const std::vector<Vector>& w_stars,
                                          const NetworkPartition& part) {
  if (w_stars.size() != part.senders.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(part.senders.size()) + " Pareto points, got " +
                    std::to_string(w_stars.size()));
  }
  if (w.rows() != part.n_gs || w.cols() != part.n_gr) {
    throw Error(ErrorCode::DimensionMismatch, "W does not match the partition");
  }
  const Index m = w_stars.empty() ? 0 : w_stars.front().size();
  for (const auto& v : w_stars) {
    if (v.size() != m) throw Error(ErrorCode::DimensionMismatch, "Pareto points differ in size");
  }

  LimitPoints lp;
  lp.dimension = m;
  lp.w_star_per_subnetwork = w_stars;
  lp.w_star_stacked.resize(part.n_gs * m);
  for (Index i = 0; i < part.n_gs; ++i) {
    const Index agent = part.order[static_cast<std::size_t>(i)];
    lp.w_star_stacked.segment(i * m, m) =
        w_stars[static_cast<std::size_t>(part.sender_group[static_cast<std::size_t>(agent)])];
  }
  lp.w_bullet = Vector::Zero(part.n_gr * m);
  for (Index j = 0; j < part.n_gr; ++j) {
    for (Index i = 0; i < part.n_gs; ++i) {
      if (w(i, j) != 0.0) lp.w_bullet.segment(j * m, m) += w(i, j) * lp.w_star_stacked.segment(i * m, m);
    }
  }
  lp.w_infinity.resize(part.n * m);
  lp.w_infinity << lp.w_star_stacked, lp.w_bullet;
  lp.per_agent.assign(static_cast<std::size_t>(part.n), Vector());
  for (Index i = 0; i < part.n; ++i) {
    lp.per_agent[static_cast<std::size_t>(part.order[static_cast<std::size_t>(i)])] =
        lp.w_infinity.segment(i * m, m);
  }
  return lp;
}

/// max_k || sum_l a_{lk} w_l - w_k ||_inf over all agents.
inline double fixed_point_residual(const CombinationMatrix& a, const LimitPoints& lp) {
  double worst = 0.0;
  for (Index k = 0; k < a.size(); ++k) {
    Vector mix = Vector::Zero(lp.dimension);
    for (Index l = 0; l < a.size(); ++l) {
      if (a(l, k) > 0.0) mix += a(l, k) * lp.per_agent[static_cast<std::size_t>(l)];
    }
    const Vector diff = mix - lp.per_agent[static_cast<std::size_t>(k)];
    if (diff.size() > 0) worst = std::max(worst, diff.lpNorm<Eigen::Infinity>());
  }
  return worst;
}

struct InfluenceVector {
  Index agent = -1;
  Vector c;  // one entry per S sub-network
};

/// c_k(s): column k of W summed over the rows of S sub-network s.
inline InfluenceVector influence_vector(const Matrix& w, const NetworkPartition& part,
                                        Index agent) {
  if (agent < 0 || agent >= part.n || !part.is_receiver(agent)) {
    throw Error(ErrorCode::NotAnRAgent,
                "agent " + std::to_string(agent) + " is not in group R", agent);
  }
  const Index col = part.position[static_cast<std::size_t>(agent)] - part.n_gs;
  InfluenceVector out{agent, Vector::Zero(static_cast<Index>(part.senders.size()))};
  for (std::size_t s = 0; s < part.senders.size(); ++s) {
    const auto [b, e] = part.sender_rows(s);
    out.c(static_cast<Index>(s)) = w.col(col).segment(b, e - b).sum();
  }
  return out;
}

inline std::vector<InfluenceVector> influence_vectors(const Matrix& w,
                                                      const NetworkPartition& part) {
  std::vector<InfluenceVector> out;
  for (Index agent : part.r_agents()) out.push_back(influence_vector(w, part, agent));
  return out;
}

}  // namespace wcdiff
