#pragma once

// Combination matrices over directed graphs and their decomposition into
// sending (S-type) and receiving (R-type) sub-networks.
//
// Conventions: entry (l, k) of a combination matrix is the weight agent k
// applies to data arriving from agent l, so the directed edge is l -> k and
// the matrix is left-stochastic (columns sum to one). Agent ids are 0-based
// inside the library.

#include "wcdiff/error.hpp"
#include "wcdiff/linalg.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>
#include <utility>
#include <vector>

namespace wcdiff {

inline constexpr double kColumnSumTolerance = 1e-9;

class CombinationMatrix {
 public:
  /// Checks nonnegativity and unit column sums. Columns within
  /// `tolerance` of one are renormalized so they sum to one.
  static CombinationMatrix validate(const Matrix& raw,
                                    double tolerance = kColumnSumTolerance) {
    if (raw.rows() != raw.cols() || raw.rows() < 1) {
      throw Error(ErrorCode::NonSquare,
                  "combination matrix is " + std::to_string(raw.rows()) + "x" +
                      std::to_string(raw.cols()));
    }
    if (!raw.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "combination matrix has non-finite entries");
    }
    const Index n = raw.rows();
    for (Index k = 0; k < n; ++k) {
      for (Index l = 0; l < n; ++l) {
        if (raw(l, k) < 0.0) {
          throw Error(ErrorCode::NegativeWeight,
                      "a(" + std::to_string(l) + "," + std::to_string(k) +
                          ") = " + std::to_string(raw(l, k)),
                      l, k, raw(l, k));
        }
      }
    }
    Matrix w = raw;
    for (Index k = 0; k < n; ++k) {
      const double sum = w.col(k).sum();
      if (std::abs(sum - 1.0) > tolerance) {
        throw Error(ErrorCode::ColumnSumViolation,
                    "column " + std::to_string(k) + " sums to " + std::to_string(sum), k,
                    -1, sum);
      }
      w.col(k) /= sum;
    }
    return CombinationMatrix(std::move(w));
  }

  static CombinationMatrix validate(const std::vector<std::vector<double>>& rows,
                                    double tolerance = kColumnSumTolerance) {
    const auto n = rows.size();
    for (const auto& r : rows) {
      if (r.size() != n) {
        throw Error(ErrorCode::NonSquare, "ragged or non-square combination matrix");
      }
    }
    Matrix m(static_cast<Index>(n), static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
      }
    }
    return validate(m, tolerance);
  }

  Index size() const noexcept { return weights_.rows(); }
  const Matrix& weights() const noexcept { return weights_; }
  double operator()(Index l, Index k) const { return weights_(l, k); }
  bool has_edge(Index from, Index to) const { return weights_(from, to) > 0.0; }

 private:
  explicit CombinationMatrix(Matrix w) : weights_(std::move(w)) {}

  Matrix weights_;
};

struct Condensation {
  /// Strongly-connected components in topological order of the condensation
  /// (senders before receivers); ties broken by smallest member id. Members
  /// are listed in ascending id order.
  std::vector<std::vector<Index>> components;
  std::vector<Index> component_of;
  /// Distinct edges between components, (from, to), sorted.
  std::vector<std::pair<Index, Index>> edges;

  bool has_inbound(Index c) const {
    return std::any_of(edges.begin(), edges.end(),
                       [c](const auto& e) { return e.second == c; });
  }
};

namespace detail {

// Iterative Tarjan over the graph {l -> k : m(l, k) > 0}.
inline std::vector<std::vector<Index>> tarjan(const Matrix& m) {
  const Index n = m.rows();
  std::vector<Index> index(static_cast<std::size_t>(n), -1);
  std::vector<Index> low(static_cast<std::size_t>(n), 0);
  std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
  std::vector<Index> stack;
  std::vector<std::vector<Index>> out;
  Index counter = 0;

  struct Frame {
    Index v;
    Index next;
  };
  for (Index root = 0; root < n; ++root) {
    if (index[static_cast<std::size_t>(root)] >= 0) continue;
    std::vector<Frame> call{{root, 0}};
    index[static_cast<std::size_t>(root)] = low[static_cast<std::size_t>(root)] = counter++;
    stack.push_back(root);
    on_stack[static_cast<std::size_t>(root)] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto v = static_cast<std::size_t>(f.v);
      bool descended = false;
      while (f.next < n) {
        const Index w = f.next++;
        if (m(f.v, w) <= 0.0) continue;
        const auto wu = static_cast<std::size_t>(w);
        if (index[wu] < 0) {
          index[wu] = low[wu] = counter++;
          stack.push_back(w);
          on_stack[wu] = 1;
          call.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[wu]) low[v] = std::min(low[v], index[wu]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        std::vector<Index> comp;
        Index w = -1;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = 0;
          comp.push_back(w);
        } while (w != f.v);
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
      }
      const Index finished = f.v;
      call.pop_back();
      if (!call.empty()) {
        const auto parent = static_cast<std::size_t>(call.back().v);
        low[parent] = std::min(low[parent], low[static_cast<std::size_t>(finished)]);
      }
    }
  }
  return out;
}

}  // namespace detail

/// SCC condensation of the directed graph carried by a nonnegative matrix.
inline Condensation condense(const Matrix& m) {
  auto raw = detail::tarjan(m);
  const auto nc = raw.size();
  std::vector<Index> raw_of(static_cast<std::size_t>(m.rows()));
  for (std::size_t c = 0; c < nc; ++c) {
    for (Index v : raw[c]) raw_of[static_cast<std::size_t>(v)] = static_cast<Index>(c);
  }

  std::vector<std::vector<char>> adj(nc, std::vector<char>(nc, 0));
  std::vector<int> indeg(nc, 0);
  for (Index l = 0; l < m.rows(); ++l) {
    for (Index k = 0; k < m.cols(); ++k) {
      if (m(l, k) <= 0.0) continue;
      const auto a = static_cast<std::size_t>(raw_of[static_cast<std::size_t>(l)]);
      const auto b = static_cast<std::size_t>(raw_of[static_cast<std::size_t>(k)]);
      if (a != b && !adj[a][b]) {
        adj[a][b] = 1;
        ++indeg[b];
      }
    }
  }

  // Kahn's algorithm, smallest leading member first.
  auto key = [&](std::size_t c) { return raw[c].front(); };
  auto cmp = [&](std::size_t a, std::size_t b) { return key(a) > key(b); };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)> ready(cmp);
  for (std::size_t c = 0; c < nc; ++c) {
    if (indeg[c] == 0) ready.push(c);
  }
  std::vector<std::size_t> topo;
  while (!ready.empty()) {
    const auto c = ready.top();
    ready.pop();
    topo.push_back(c);
    for (std::size_t d = 0; d < nc; ++d) {
      if (adj[c][d] && --indeg[d] == 0) ready.push(d);
    }
  }

  std::vector<Index> new_id(nc);
  for (std::size_t i = 0; i < topo.size(); ++i) new_id[topo[i]] = static_cast<Index>(i);

  Condensation out;
  out.components.resize(nc);
  out.component_of.resize(static_cast<std::size_t>(m.rows()));
  for (std::size_t c = 0; c < nc; ++c) {
    out.components[static_cast<std::size_t>(new_id[c])] = raw[c];
  }
  for (Index v = 0; v < m.rows(); ++v) {
    out.component_of[static_cast<std::size_t>(v)] =
        new_id[static_cast<std::size_t>(raw_of[static_cast<std::size_t>(v)])];
  }
  for (std::size_t a = 0; a < nc; ++a) {
    for (std::size_t b = 0; b < nc; ++b) {
      if (adj[a][b]) out.edges.emplace_back(new_id[a], new_id[b]);
    }
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

inline Condensation condense(const CombinationMatrix& a) { return condense(a.weights()); }

/// True when the graph of `block` is strongly connected (a single vertex
/// counts as irreducible).
inline bool is_irreducible(const Matrix& block) {
  return block.rows() >= 1 && detail::tarjan(block).size() == 1;
}

/// Period of an irreducible nonnegative matrix: gcd of cycle lengths, computed
/// from BFS levels as gcd over edges (u, v) of level(u) + 1 - level(v).
/// Returns 0 for a single vertex without a self-loop (no cycles at all).
inline Index period(const Matrix& block) {
  const Index n = block.rows();
  std::vector<Index> level(static_cast<std::size_t>(n), -1);
  std::queue<Index> q;
  level[0] = 0;
  q.push(0);
  while (!q.empty()) {
    const Index u = q.front();
    q.pop();
    for (Index v = 0; v < n; ++v) {
      if (block(u, v) > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
        level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
        q.push(v);
      }
    }
  }
  Index g = 0;
  for (Index u = 0; u < n; ++u) {
    for (Index v = 0; v < n; ++v) {
      if (block(u, v) > 0.0) {
        const Index d = level[static_cast<std::size_t>(u)] + 1 - level[static_cast<std::size_t>(v)];
        g = std::gcd(g, d < 0 ? -d : d);
      }
    }
  }
  return g;
}

inline bool is_primitive(const Matrix& block) {
  return is_irreducible(block) && period(block) == 1;
}

struct PerronVector {
  Vector entries;
  Index iterations = 0;
  double residual = 0.0;
};

/// Perron eigenvector of a left-stochastic primitive block: A p = p,
/// 1^T p = 1, p > 0. Power iteration from the uniform vector.
inline PerronVector perron(const Matrix& block, double tol = 1e-12,
                           Index max_iter = 100000) {
  if (block.rows() != block.cols() || block.rows() < 1) {
    throw Error(ErrorCode::NonSquare, "perron: block must be square");
  }
  if ((block.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "perron: block has negative entries");
  }
  const Vector colsum = block.colwise().sum().transpose();
  if ((colsum.array() - 1.0).abs().maxCoeff() > kColumnSumTolerance) {
    throw Error(ErrorCode::InvalidArgument, "perron: block is not left-stochastic");
  }
  if (!is_primitive(block)) {
    throw Error(ErrorCode::NonPrimitiveSource, "perron: block is not primitive");
  }
  const Index n = block.rows();
  Vector p = Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (Index it = 1; it <= max_iter; ++it) {
    Vector next = block * p;
    const double residual = (next - p).lpNorm<Eigen::Infinity>();
    next /= next.sum();
    p = std::move(next);
    if (residual < tol) {
      return {p, it, (block * p - p).lpNorm<Eigen::Infinity>()};
    }
  }
  throw Error(ErrorCode::NoConvergence,
              "perron: no convergence after " + std::to_string(max_iter) + " iterations",
              max_iter);
}

/// Spectral radius of a nonnegative square matrix. Each irreducible diagonal
/// block B of the SCC condensation is handled by power iteration on B + I
/// with Collatz-Wielandt bounds min_i (Bx)_i/x_i <= rho(B) <= max_i (Bx)_i/x_i;
/// the result is the largest block radius.
inline double spectral_radius(const Matrix& t, double tol = 1e-12,
                              Index max_iter = 1000000) {
  if (t.rows() != t.cols()) throw Error(ErrorCode::NonSquare, "spectral_radius: not square");
  if (t.size() == 0) return 0.0;
  if ((t.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "spectral_radius: negative entries");
  }
  const Condensation cond = condense(t);
  double rho = 0.0;
  for (const auto& comp : cond.components) {
    const Matrix b = submatrix(t, comp, comp);
    if (b.rows() == 1) {
      rho = std::max(rho, b(0, 0));
      continue;
    }
    const Matrix shifted = b + Matrix::Identity(b.rows(), b.cols());
    Vector x = Vector::Ones(b.rows());
    bool converged = false;
    for (Index it = 0; it < max_iter; ++it) {
      Vector y = shifted * x;
      const Vector ratio = y.cwiseQuotient(x);
      const double lo = ratio.minCoeff();
      const double hi = ratio.maxCoeff();
      x = y / y.maxCoeff();
      if (hi - lo <= tol * std::max(1.0, hi)) {
        rho = std::max(rho, 0.5 * (lo + hi) - 1.0);
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw Error(ErrorCode::NoConvergence, "spectral_radius: no convergence", max_iter);
    }
  }
  return rho;
}

inline Matrix permute(const Matrix& a, const std::vector<Index>& order) {
  return submatrix(a, order, order);
}

/// Canonical split of a combination matrix into S-type and R-type
/// sub-networks. After the symmetric permutation `order`, the matrix reads
/// [T_SS T_SR; 0 T_RR] with T_SS block diagonal and T_RR block upper
/// triangular.
struct NetworkPartition {
  Index n = 0;
  Condensation condensation;
  std::vector<Index> s_type_ids;  // indices into condensation.components
  std::vector<Index> r_type_ids;
  std::vector<std::vector<Index>> senders;    // member ids per S sub-network
  std::vector<std::vector<Index>> receivers;  // member ids per R sub-network
  std::vector<Index> order;     // canonical position -> agent id
  std::vector<Index> position;  // agent id -> canonical position
  /// For every agent: index of its S sub-network, or -1 for R-type agents.
  std::vector<Index> sender_group;
  Matrix permuted;
  Matrix t_ss;
  Matrix t_sr;
  Matrix t_rr;
  Index n_gs = 0;
  Index n_gr = 0;

  bool strongly_connected() const { return senders.size() == 1 && receivers.empty(); }
  bool is_receiver(Index agent) const {
    return sender_group[static_cast<std::size_t>(agent)] < 0;
  }
  std::vector<Index> s_agents() const {
    return {order.begin(), order.begin() + n_gs};
  }
  std::vector<Index> r_agents() const {
    return {order.begin() + n_gs, order.end()};
  }
  /// Rows of T_SS / T_SR that belong to S sub-network `s`.
  std::pair<Index, Index> sender_rows(std::size_t s) const {
    Index begin = 0;
    for (std::size_t i = 0; i < s; ++i) begin += static_cast<Index>(senders[i].size());
    return {begin, begin + static_cast<Index>(senders[s].size())};
  }
};

inline NetworkPartition classify(const CombinationMatrix& a) {
  NetworkPartition part;
  part.n = a.size();
  part.condensation = condense(a);
  const auto& comps = part.condensation.components;

  for (std::size_t c = 0; c < comps.size(); ++c) {
    const auto id = static_cast<Index>(c);
    if (part.condensation.has_inbound(id)) {
      part.r_type_ids.push_back(id);
      continue;
    }
    const Matrix block = submatrix(a.weights(), comps[c], comps[c]);
    if (!is_primitive(block)) {
      throw Error(ErrorCode::NonPrimitiveSource,
                  "source sub-network " + std::to_string(c) +
                      " is not primitive (periodic or without self-loop)",
                  id);
    }
    part.s_type_ids.push_back(id);
  }

  part.sender_group.assign(static_cast<std::size_t>(part.n), -1);
  for (std::size_t s = 0; s < part.s_type_ids.size(); ++s) {
    const auto& members = comps[static_cast<std::size_t>(part.s_type_ids[s])];
    part.senders.push_back(members);
    for (Index v : members) part.sender_group[static_cast<std::size_t>(v)] = static_cast<Index>(s);
    part.order.insert(part.order.end(), members.begin(), members.end());
  }
  part.n_gs = static_cast<Index>(part.order.size());
  for (Index r : part.r_type_ids) {
    const auto& members = comps[static_cast<std::size_t>(r)];
    part.receivers.push_back(members);
    part.order.insert(part.order.end(), members.begin(), members.end());
  }
  part.n_gr = part.n - part.n_gs;

  part.position.resize(static_cast<std::size_t>(part.n));
  for (std::size_t i = 0; i < part.order.size(); ++i) {
    part.position[static_cast<std::size_t>(part.order[i])] = static_cast<Index>(i);
  }

  part.permuted = permute(a.weights(), part.order);
  part.t_ss = part.permuted.topLeftCorner(part.n_gs, part.n_gs);
  part.t_sr = part.permuted.topRightCorner(part.n_gs, part.n_gr);
  part.t_rr = part.permuted.bottomRightCorner(part.n_gr, part.n_gr);

  for (std::size_t r = 0; r < part.receivers.size(); ++r) {
    const auto& members = part.receivers[r];
    const Matrix block = submatrix(a.weights(), members, members);
    if (spectral_radius(block) >= 1.0 - 1e-12) {
      throw Error(ErrorCode::IsolatedRAgent,
                  "receiving sub-network " + std::to_string(r) + " has spectral radius 1",
                  part.r_type_ids[r]);
    }
  }
  return part;
}

}  // namespace wcdiff
