#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "wcdiff/influence.hpp"

using namespace wcdiff;
using Catch::Matchers::WithinAbs;

namespace {

NetworkPartition example_partition() {
  return classify(CombinationMatrix::validate(fixtures::three_subnetworks()));
}

Matrix power(const Matrix& a, int n) {
  Matrix out = Matrix::Identity(a.rows(), a.cols());
  Matrix base = a;
  while (n > 0) {
    if (n & 1) out = out * base;
    base = base * base;
    n >>= 1;
  }
  return out;
}

}  // namespace

TEST_CASE("influence matrix of the example network", "[influence]") {
  const auto part = example_partition();
  const auto infl = influence_matrix(part);
  const Matrix expected = fixtures::three_subnetworks_w();
  REQUIRE(infl.w.rows() == 5);
  REQUIRE(infl.w.cols() == 3);
  CHECK((infl.w - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THAT(infl.t_rr_spectral_radius, WithinAbs(0.7117531669289094, 1e-10));
  CHECK(infl.rcond > 0.1);
  // every column of [T_SS T_SR]-style influence sums to one
  for (Index j = 0; j < 3; ++j) CHECK_THAT(infl.w.col(j).sum(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("a transposed influence matrix fails the same comparison", "[influence]") {
  const auto infl = influence_matrix(example_partition());
  // Solving (I - T_RR) X = T_SR^T instead of the transposed system.
  const auto part = example_partition();
  const Matrix wrong =
      part.t_sr * (Matrix::Identity(3, 3) - part.t_rr.transpose()).inverse();
  CHECK((wrong - fixtures::three_subnetworks_w()).cwiseAbs().maxCoeff() > 1e-3);
  CHECK((infl.w - fixtures::three_subnetworks_w()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Neumann series converges to W", "[influence]") {
  const auto part = example_partition();
  const auto infl = influence_matrix(part);
  CHECK((neumann_w(part, 200) - infl.w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((neumann_w(part, 3) - infl.w).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("limiting power matches brute-force A^n", "[influence]") {
  const auto part = example_partition();
  const auto lim = limiting_power(part);
  const Matrix brute = power(fixtures::three_subnetworks(), 2000);
  CHECK((lim.original - brute).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(lim.original.rightCols(3).bottomRows(3).isZero());
}

TEST_CASE("limiting power on random weakly connected networks", "[influence][property]") {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 15; ++trial) {
    // two primitive sources feeding a random receiving tail
    const int ns1 = 2 + trial % 3, ns2 = 1 + trial % 2, nr = 2 + trial % 4;
    const int n = ns1 + ns2 + nr;
    Matrix a = Matrix::Zero(n, n);
    a.topLeftCorner(ns1, ns1) = fixtures::random_left_stochastic(ns1, 0.7, rng);
    a.block(ns1, ns1, ns2, ns2) = fixtures::random_left_stochastic(ns2, 0.7, rng);
    Matrix tail = Matrix::Zero(n, nr);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < nr; ++k) {
      for (int l = 0; l < n; ++l) {
        if (u(rng) < 0.5 || l == ns1 + ns2 + k) tail(l, k) = 0.05 + u(rng);
      }
      tail(k % (ns1 + ns2), k) += 0.1;
      tail.col(k) /= tail.col(k).sum();
    }
    a.rightCols(nr) = tail;
    NetworkPartition part;
    try {
      part = classify(CombinationMatrix::validate(a));
    } catch (const Error&) {
      continue;  // random receiver may have turned into a source
    }
    ++checked;
    const auto lim = limiting_power(part);
    CHECK((lim.original - power(a, 4000)).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK(checked >= 5);
}

TEST_CASE("W is invariant under relabelling of agents", "[influence][property]") {
  const Matrix a = fixtures::three_subnetworks();
  const std::vector<Index> relabel{6, 3, 0, 7, 4, 1, 5, 2};  // new position -> old id
  const auto part = classify(CombinationMatrix::validate(permute(a, relabel)));
  const auto infl = influence_matrix(part);
  const Matrix expected = fixtures::three_subnetworks_w();
  // Compare entry by original agent ids.
  for (Index i = 0; i < part.n_gs; ++i) {
    for (Index j = 0; j < part.n_gr; ++j) {
      const Index from = relabel[static_cast<std::size_t>(part.order[static_cast<std::size_t>(i)])];
      const Index to =
          relabel[static_cast<std::size_t>(part.order[static_cast<std::size_t>(part.n_gs + j)])];
      CHECK_THAT(infl.w(i, j), WithinAbs(expected(from, to - 5), 1e-12));
    }
  }
}

TEST_CASE("receiving limit points and fixed-point residual", "[influence]") {
  const auto a = CombinationMatrix::validate(fixtures::three_subnetworks());
  const auto part = classify(a);
  const auto infl = influence_matrix(part);
  Vector w1(1), w2(1);
  w1 << 1.0;
  w2 << 1.5;
  const auto lp = receiving_limit_points(infl.w, {w1, w2}, part);
  REQUIRE(lp.w_bullet.size() == 3);
  CHECK_THAT(lp.w_bullet(0), WithinAbs(1.2232824427480915, 1e-12));
  CHECK_THAT(lp.w_bullet(1), WithinAbs(1.1774809160305342, 1e-12));
  CHECK_THAT(lp.w_bullet(2), WithinAbs(1.1087786259541985, 1e-12));
  CHECK(fixed_point_residual(a, lp) < 1e-12);
  CHECK(lp.per_agent[3](0) == 1.5);

  SECTION("dimension checks") {
    Vector w3(2);
    w3 << 1.0, 2.0;
    CHECK_THROWS_AS(receiving_limit_points(infl.w, {w1}, part), Error);
    CHECK_THROWS_AS(receiving_limit_points(infl.w, {w1, w3}, part), Error);
    CHECK_THROWS_AS(receiving_limit_points(infl.w.leftCols(2), {w1, w2}, part), Error);
  }
}

TEST_CASE("vector limit points combine block by block", "[influence]") {
  const auto a = CombinationMatrix::validate(fixtures::three_subnetworks());
  const auto part = classify(a);
  const auto infl = influence_matrix(part);
  Vector w1(3), w2(3);
  w1 << 1.0, -2.0, 0.5;
  w2 << 0.0, 4.0, 1.0;
  const auto lp = receiving_limit_points(infl.w, {w1, w2}, part);
  // Kronecker form for reference
  Matrix kron = Matrix::Zero(5 * 3, 3 * 3);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 3; ++j) kron.block(i * 3, j * 3, 3, 3) = infl.w(i, j) * Matrix::Identity(3, 3);
  const Vector expected = kron.transpose() * lp.w_star_stacked;
  CHECK((lp.w_bullet - expected).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(fixed_point_residual(a, lp) < 1e-12);
}

TEST_CASE("influence vectors", "[influence]") {
  const auto part = example_partition();
  const auto infl = influence_matrix(part);
  const auto cs = influence_vectors(infl.w, part);
  REQUIRE(cs.size() == 3);
  CHECK(cs[0].agent == 5);
  CHECK_THAT(cs[0].c(0), WithinAbs(0.5534351145038168, 1e-12));
  CHECK_THAT(cs[0].c(1), WithinAbs(0.4465648854961832, 1e-12));
  CHECK_THAT(cs[1].c(0), WithinAbs(0.6450381679389313, 1e-12));
  CHECK_THAT(cs[1].c(1), WithinAbs(0.3549618320610686, 1e-12));
  CHECK_THAT(cs[2].c(0), WithinAbs(0.7824427480916031, 1e-12));
  CHECK_THAT(cs[2].c(1), WithinAbs(0.21755725190839695, 1e-12));
  for (const auto& c : cs) CHECK_THAT(c.c.sum(), WithinAbs(1.0, 1e-12));

  try {
    influence_vector(infl.w, part, 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotAnRAgent);
    CHECK(e.index() == 2);
  }
  CHECK_THROWS_AS(influence_vector(infl.w, part, 8), Error);
}

TEST_CASE("two-agent network: receiver inherits the sender's limit", "[influence]") {
  const auto part = classify(CombinationMatrix::validate(fixtures::two_agent()));
  const auto infl = influence_matrix(part);
  REQUIRE(infl.w.rows() == 1);
  REQUIRE(infl.w.cols() == 1);
  CHECK_THAT(infl.w(0, 0), WithinAbs(1.0, 1e-14));
}

TEST_CASE("strongly connected network has an empty W", "[influence]") {
  const auto part = classify(CombinationMatrix::validate(fixtures::fully_connected(4)));
  const auto infl = influence_matrix(part);
  CHECK(infl.w.cols() == 0);
  const auto lim = limiting_power(part, infl);
  CHECK((lim.original - fixtures::fully_connected(4)).cwiseAbs().maxCoeff() < 1e-14);
}
