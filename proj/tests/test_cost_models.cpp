#include <catch_amalgamated.hpp>

#include "wcdiff/cost_models.hpp"

using namespace wcdiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<PointCluster> two_blobs() {
  PointCluster pos, neg;
  pos.label = 1.0;
  pos.center_x = 1.0;
  neg.label = -1.0;
  neg.center_x = -1.0;
  return {pos, neg};
}

std::shared_ptr<LogisticCost> small_logistic(double rho, FeatureMap map = FeatureMap::Affine,
                                             std::uint64_t seed = 5) {
  Rng rng = make_stream(seed, 0, 0);
  return std::make_shared<LogisticCost>(rho, make_population(two_blobs(), map, 400, rng));
}

Vector random_point(Rng& rng, Index m, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(m);
  for (Index i = 0; i < m; ++i) v(i) = u(rng);
  return v;
}

double rel_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1e-8, b.norm());
}

}  // namespace

TEST_CASE("quadratic cost basics", "[cost]") {
  Matrix r(2, 2);
  r << 2.0, 0.5, 0.5, 1.0;
  const QuadraticCost q(r, 0.1, Vector{{1.0, -2.0}});
  CHECK(q.true_gradient(q.w_o()).isZero(0.0));
  CHECK((q.hessian(Vector::Zero(2)) - 2.0 * r).isZero(0.0));
  CHECK((q.hessian(Vector{{4.0, 5.0}}) - 2.0 * r).isZero(0.0));
  CHECK(q.constant_hessian());
  CHECK(q.kind() == "quadratic");

  const auto iso = QuadraticCost::isotropic(3.0, 0.01, Vector{{0.0, 0.0, 0.0}});
  CHECK((iso->hessian(Vector::Zero(3)) - 6.0 * Matrix::Identity(3, 3)).isZero(0.0));
}

TEST_CASE("quadratic cost validates its parameters", "[cost]") {
  CHECK_THROWS_AS(QuadraticCost(Matrix::Identity(2, 2), 0.1, Vector::Zero(3)), Error);
  CHECK_THROWS_AS(QuadraticCost(Matrix::Identity(2, 2), -0.1, Vector::Zero(2)), Error);
  Matrix asym(2, 2);
  asym << 1.0, 0.2, 0.0, 1.0;
  CHECK_THROWS_AS(QuadraticCost(asym, 0.1, Vector::Zero(2)), Error);
  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(QuadraticCost(indefinite, 0.1, Vector::Zero(2)), Error);
}

TEST_CASE("scalar quadratic finite differences", "[cost]") {
  // J(w) = (w - 1)^2
  const Vector g = finite_difference_gradient(
      [](const Vector& w) { return (w(0) - 1.0) * (w(0) - 1.0); }, Vector{{3.0}});
  CHECK_THAT(g(0), WithinAbs(4.0, 1e-8));
  CHECK_THROWS_AS(finite_difference_gradient([](const Vector&) { return 0.0; }, Vector{{0.0}}, 0.0),
                  Error);

  const auto q = QuadraticCost::isotropic(1.0, 0.01, Vector{{1.0, 1.0}});
  CHECK(finite_difference_gradient(*q, q->w_o()).norm() < 1e-8);
}

TEST_CASE("gradients match central differences at random points", "[cost][property]") {
  Rng rng = make_stream(11, 0, 0);
  Matrix r(3, 3);
  r << 1.5, 0.2, 0.1, 0.2, 1.0, -0.3, 0.1, -0.3, 2.0;
  const QuadraticCost quad(r, 0.05, Vector{{0.5, -1.0, 2.0}});
  const auto logi = small_logistic(0.1);
  const auto ell = small_logistic(0.05, FeatureMap::Elliptic);
  for (int i = 0; i < 20; ++i) {
    const Vector w = random_point(rng, 3, 2.0);
    CHECK(rel_error(quad.true_gradient(w), finite_difference_gradient(quad, w)) <= 1e-5);
    CHECK(rel_error(logi->true_gradient(w), finite_difference_gradient(*logi, w)) <= 1e-5);

    const Sample sq = quad.draw_sample(rng);
    CHECK(rel_error(quad.stochastic_gradient(w, sq), finite_difference_gradient(quad, w, sq)) <=
          1e-5);
    const Sample sl = logi->draw_sample(rng);
    CHECK(rel_error(logi->stochastic_gradient(w, sl), finite_difference_gradient(*logi, w, sl)) <=
          1e-5);

    const Vector we = random_point(rng, 6, 0.3);
    CHECK(rel_error(ell->true_gradient(we), finite_difference_gradient(*ell, we)) <= 1e-5);
  }
}

TEST_CASE("logistic instantaneous gradient closed forms", "[cost]") {
  const LogisticCost unreg(0.0, {{Vector{{1.0, 0.0}}, 1.0}});
  const Vector e1{{1.0, 0.0}};
  const Vector g = unreg.stochastic_gradient(Vector::Zero(2), {e1, 1.0});
  CHECK_THAT(g(0), WithinAbs(-0.5, 1e-15));
  CHECK_THAT(g(1), WithinAbs(0.0, 1e-15));

  const LogisticCost reg(1.0, {{Vector{{1.0, 0.0}}, 1.0}});
  const Vector h{{0.3, -2.0}};
  const Vector g2 = reg.stochastic_gradient(Vector::Zero(2), {h, -1.0});
  CHECK((g2 - 0.5 * h).norm() < 1e-15);

  // gamma h^T w = 10: tiny data term, still matches the sample loss slope.
  const Vector w{{10.0, 0.0}};
  const Sample s{e1, 1.0};
  const Vector g3 = unreg.stochastic_gradient(w, s);
  CHECK_THAT(-g3(0), WithinRel(std::exp(-10.0) / (1.0 + std::exp(-10.0)), 1e-12));
  CHECK(rel_error(g3, finite_difference_gradient(unreg, w, s)) < 1e-6);
}

TEST_CASE("logistic gradient stays finite for huge margins", "[cost]") {
  const LogisticCost m(0.0, {{Vector{{1.0}}, 1.0}});
  for (double w : {-1e4, -800.0, 800.0, 1e4}) {
    const Vector g = m.stochastic_gradient(Vector{{w}}, {Vector{{1.0}}, 1.0});
    CHECK(std::isfinite(g(0)));
    CHECK(std::isfinite(m.loss(Vector{{w}})));
  }
  CHECK_THAT(m.stochastic_gradient(Vector{{-1e4}}, {Vector{{1.0}}, 1.0})(0), WithinAbs(-1.0, 1e-15));
}

TEST_CASE("logistic Hessian at the origin and by finite differences", "[cost]") {
  const double rho = 0.2;
  const auto m = small_logistic(rho);
  Matrix second = Matrix::Zero(3, 3);
  for (const auto& s : m->population()) second += s.x * s.x.transpose();
  second /= static_cast<double>(m->population().size());
  const Matrix expected = rho * Matrix::Identity(3, 3) + 0.25 * second;
  CHECK((m->hessian(Vector::Zero(3)) - expected).cwiseAbs().maxCoeff() < 1e-12);

  const Vector w{{0.3, -0.7, 0.4}};
  const Matrix h = m->hessian(w);
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  Matrix fd(3, 3);
  for (Index j = 0; j < 3; ++j) {
    Vector up = w, down = w;
    up(j) += 1e-5;
    down(j) -= 1e-5;
    fd.col(j) = (m->true_gradient(up) - m->true_gradient(down)) / 2e-5;
  }
  CHECK((fd - h).cwiseAbs().maxCoeff() < 1e-7);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  CHECK(es.eigenvalues().minCoeff() >= rho - 1e-12);
}

TEST_CASE("logistic model validation", "[cost]") {
  CHECK_THROWS_AS(LogisticCost(0.1, {}), Error);
  CHECK_THROWS_AS(LogisticCost(-1.0, {{Vector{{1.0}}, 1.0}}), Error);
  CHECK_THROWS_AS(LogisticCost(0.1, {{Vector{{1.0}}, 1.0}, {Vector{{1.0, 2.0}}, -1.0}}), Error);
  Rng rng(1);
  PointCluster bad;
  bad.label = 0.5;
  CHECK_THROWS_AS(draw_points({bad}, 3, rng), Error);
  CHECK_THROWS_AS(draw_points({}, 3, rng), Error);
}

TEST_CASE("feature maps", "[cost]") {
  CHECK(features(FeatureMap::Affine, 2.0, 3.0) == Vector{{1.0, 2.0, 3.0}});
  CHECK(features(FeatureMap::Elliptic, 2.0, 3.0) == Vector{{5.0, 2.0, 3.0, 4.0, 9.0, 6.0}});
  CHECK(feature_dimension(FeatureMap::Elliptic) == 6);
}

TEST_CASE("ring clusters stay inside their annulus", "[cost]") {
  PointCluster ring;
  ring.shape = PointCluster::Shape::Ring;
  ring.r_min = 1.0;
  ring.r_max = 1.5;
  ring.axis_x = 2.0;
  ring.axis_y = 1.0;
  ring.center_x = 0.5;
  Rng rng(3);
  for (const auto& p : draw_points({ring}, 2000, rng)) {
    const double dx = (p.x - 0.5) / 2.0, dy = p.y;
    const double r = std::sqrt(dx * dx + dy * dy);
    CHECK(r >= 1.0 - 1e-12);
    CHECK(r <= 1.5 + 1e-12);
  }
}

TEST_CASE("quadratic noise covariance: exact form and sampler agree", "[cost]") {
  const double su2 = 2.0, sv2 = 0.05;
  const auto q = QuadraticCost::isotropic(su2, sv2, Vector{{1.0}});
  // At w_o the noise is -2 u v, so G = 4 sigma_u^2 sigma_v^2.
  const Matrix exact = *q->noise_covariance(q->w_o());
  CHECK_THAT(exact(0, 0), WithinRel(4.0 * su2 * sv2, 1e-14));
  Rng rng = make_stream(21, 0, 0);
  const auto est = noise_covariance_at(*q, q->w_o(), 1000000, rng);
  CHECK_THAT(est.g(0, 0), WithinRel(4.0 * su2 * sv2, 0.05));

  // Away from w_o: G grows and matches 4 sv2 R + 4 (x'Rx) R + 4 R x x' R.
  Matrix r(2, 2);
  r << 1.0, 0.3, 0.3, 0.5;
  const QuadraticCost q2(r, sv2, Vector{{1.0, 1.0}});
  const Vector w{{0.5, 1.8}};
  const Matrix g_exact = *q2.noise_covariance(w);
  const Matrix g_floor = 4.0 * sv2 * r;
  const Eigen::SelfAdjointEigenSolver<Matrix> gap(g_exact - g_floor);
  CHECK(gap.eigenvalues().minCoeff() >= -1e-12);
  CHECK(gap.eigenvalues().maxCoeff() > 0.1);
  const auto g_mc = noise_covariance_at(q2, w, 1000000, rng);
  CHECK((g_mc.g - g_exact).cwiseAbs().maxCoeff() < 0.05 * g_exact.cwiseAbs().maxCoeff());
}

TEST_CASE("logistic noise covariance matches the sampler", "[cost]") {
  const auto m = small_logistic(0.1);
  const Vector w{{0.1, 0.8, -0.2}};
  const Matrix exact = *m->noise_covariance(w);
  CHECK((exact - exact.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  Rng rng = make_stream(4, 0, 0);
  const auto est = noise_covariance_at(*m, w, 400000, rng);
  CHECK((est.g - exact).cwiseAbs().maxCoeff() < 0.03 * exact.cwiseAbs().maxCoeff());
}

TEST_CASE("deterministic model has zero noise covariance", "[cost]") {
  const auto q = QuadraticCost::isotropic(1.0, 0.0, Vector{{2.0}});
  Rng rng(8);
  CHECK(noise_covariance_at(*q, q->w_o(), 1000, rng).g.isZero(0.0));
  CHECK(noise_covariance_or_estimate(*q, q->w_o(), rng).g.isZero(0.0));
}

TEST_CASE("noise_covariance_at needs enough samples", "[cost]") {
  const auto q = QuadraticCost::isotropic(1.0, 0.1, Vector{{2.0}});
  Rng rng(8);
  CHECK_THROWS_AS(noise_covariance_at(*q, q->w_o(), 999, rng), Error);
}

TEST_CASE("gradient noise is zero-mean within the CLT bound", "[cost][property]") {
  const Index n = 100000;
  Matrix r(2, 2);
  r << 1.0, 0.2, 0.2, 0.7;
  const auto quad = std::make_shared<QuadraticCost>(r, 0.02, Vector{{1.0, -1.0}});
  const auto logi = small_logistic(0.1);
  const std::vector<std::pair<ModelPtr, Vector>> cases{
      {quad, Vector{{0.3, 0.4}}}, {quad, quad->w_o()}, {logi, Vector{{0.2, 1.1, -0.4}}}};
  Rng rng = make_stream(99, 0, 0);
  for (const auto& [model, w] : cases) {
    const Vector mean_grad = model->true_gradient(w);
    Vector acc = Vector::Zero(model->dimension());
    for (Index i = 0; i < n; ++i) acc += model->stochastic_gradient(w, model->draw_sample(rng)) - mean_grad;
    const double bound = 2.0 * 4.0 * std::sqrt(model->noise_covariance(w)->trace() / static_cast<double>(n));
    CHECK((acc / static_cast<double>(n)).norm() <= bound);
  }
}

TEST_CASE("sampling is reproducible per stream", "[cost]") {
  const auto q = QuadraticCost::isotropic(1.0, 0.1, Vector{{1.0, 2.0}});
  Rng a = make_stream(1, 2, 3), b = make_stream(1, 2, 3), c = make_stream(1, 2, 4);
  const Sample sa = q->draw_sample(a), sb = q->draw_sample(b), sc = q->draw_sample(c);
  CHECK(sa.x == sb.x);
  CHECK(sa.y == sb.y);
  CHECK(sa.x != sc.x);
}
