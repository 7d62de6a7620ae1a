#pragma once

// Per-agent stochastic cost models. A model exposes its true gradient,
// Hessian and loss, plus an instantaneous gradient evaluated on one streaming
// sample. Sampling always goes through a caller-owned generator.

#include "wcdiff/error.hpp"
#include "wcdiff/linalg.hpp"
#include "wcdiff/random.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

namespace wcdiff {

/// One streaming observation: a regressor / feature vector and a scalar
/// target (a measurement for regression, a +-1 label for classification).
struct Sample {
  Vector x;
  double y = 0.0;
};

class CostModel {
 public:
  virtual ~CostModel() = default;

  virtual std::string_view kind() const = 0;
  virtual Index dimension() const = 0;
  virtual Sample draw_sample(Rng& rng) const = 0;

  virtual double loss(const Vector& w) const = 0;
  virtual double sample_loss(const Vector& w, const Sample& s) const = 0;
  virtual Vector true_gradient(const Vector& w) const = 0;
  virtual Vector stochastic_gradient(const Vector& w, const Sample& s) const = 0;
  virtual Matrix hessian(const Vector& w) const = 0;

  /// Exact covariance of the gradient noise at `w` when the model can
  /// compute it; empty otherwise.
  virtual std::optional<Matrix> noise_covariance(const Vector& /*w*/) const {
    return std::nullopt;
  }
  virtual bool constant_hessian() const { return false; }
};

using ModelPtr = std::shared_ptr<const CostModel>;

/// Mean-square-error cost E(d - u^T w)^2 with d = u^T w_o + v,
/// u ~ N(0, R_u), v ~ N(0, sigma_v^2).
class QuadraticCost final : public CostModel {
 public:
  QuadraticCost(Matrix r_u, double sigma_v2, Vector w_o)
      : r_u_(std::move(r_u)), sigma_v2_(sigma_v2), w_o_(std::move(w_o)) {
    if (r_u_.rows() != r_u_.cols() || r_u_.rows() != w_o_.size() || w_o_.size() < 1) {
      throw Error(ErrorCode::DimensionMismatch, "quadratic cost: R_u and w_o sizes differ");
    }
    if (sigma_v2_ < 0.0 || !std::isfinite(sigma_v2_)) {
      throw Error(ErrorCode::InvalidArgument, "quadratic cost: sigma_v2 must be >= 0");
    }
    if (max_abs(r_u_ - r_u_.transpose()) > 1e-12) {
      throw Error(ErrorCode::InvalidArgument, "quadratic cost: R_u must be symmetric");
    }
    Eigen::LLT<Matrix> llt(r_u_);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::InvalidArgument, "quadratic cost: R_u must be positive definite");
    }
    chol_ = llt.matrixL();
  }

  /// Scalar-power convenience: R_u = sigma_u2 * I.
  static std::shared_ptr<QuadraticCost> isotropic(double sigma_u2, double sigma_v2, Vector w_o) {
    const Index m = w_o.size();
    return std::make_shared<QuadraticCost>(sigma_u2 * Matrix::Identity(m, m), sigma_v2,
                                           std::move(w_o));
  }

  std::string_view kind() const override { return "quadratic"; }
  Index dimension() const override { return w_o_.size(); }
  bool constant_hessian() const override { return true; }

  const Matrix& r_u() const { return r_u_; }
  double sigma_v2() const { return sigma_v2_; }
  const Vector& w_o() const { return w_o_; }

  Sample draw_sample(Rng& rng) const override {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(dimension());
    for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    Sample s{chol_ * z, 0.0};
    const double v = std::sqrt(sigma_v2_) * normal(rng);
    s.y = s.x.dot(w_o_) + v;
    return s;
  }

  double loss(const Vector& w) const override {
    const Vector e = w - w_o_;
    return e.dot(r_u_ * e) + sigma_v2_;
  }
  double sample_loss(const Vector& w, const Sample& s) const override {
    const double e = s.y - s.x.dot(w);
    return e * e;
  }
  Vector true_gradient(const Vector& w) const override { return 2.0 * r_u_ * (w - w_o_); }
  Vector stochastic_gradient(const Vector& w, const Sample& s) const override {
    return -2.0 * (s.y - s.x.dot(w)) * s.x;
  }
  Matrix hessian(const Vector& /*w*/) const override { return 2.0 * r_u_; }

  /// For Gaussian regressors: 4 sigma_v^2 R + 4 (x^T R x) R + 4 R x x^T R
  /// with x = w - w_o.
  std::optional<Matrix> noise_covariance(const Vector& w) const override {
    const Vector x = w - w_o_;
    const Vector rx = r_u_ * x;
    return Matrix(4.0 * sigma_v2_ * r_u_ + 4.0 * x.dot(rx) * r_u_ + 4.0 * rx * rx.transpose());
  }

 private:
  Matrix r_u_;
  double sigma_v2_;
  Vector w_o_;
  Matrix chol_;
};

namespace detail {

/// 1 / (1 + e^z) without overflow.
inline double logistic_tail(double z) {
  if (z > 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

/// ln(1 + e^z) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace detail

/// Class-conditional point cloud in the plane used to build logistic
/// training populations.
struct PointCluster {
  enum class Shape { Gaussian, Ring };
  double label = 1.0;   // +1 or -1
  double weight = 1.0;  // relative sampling probability
  Shape shape = Shape::Gaussian;
  double center_x = 0.0;
  double center_y = 0.0;
  double stddev = 1.0;  // Gaussian
  double r_min = 0.0;   // Ring: radius range, uniform over the area
  double r_max = 1.0;
  double axis_x = 1.0;  // Ring: ellipse semi-axis scaling
  double axis_y = 1.0;
};

enum class FeatureMap {
  Affine,    // h = (1, x, y)
  Elliptic,  // h = (5, x, y, x^2, y^2, xy)
};

inline Vector features(FeatureMap map, double x, double y) {
  if (map == FeatureMap::Affine) return Vector{{1.0, x, y}};
  return Vector{{5.0, x, y, x * x, y * y, x * y}};
}

inline Index feature_dimension(FeatureMap map) { return map == FeatureMap::Affine ? 3 : 6; }

struct LabeledPoint {
  double x;
  double y;
  double label;
};

inline std::vector<LabeledPoint> draw_points(const std::vector<PointCluster>& clusters,
                                             std::size_t count, Rng& rng) {
  if (clusters.empty()) throw Error(ErrorCode::InvalidArgument, "no point clusters given");
  std::vector<double> weights;
  for (const auto& c : clusters) {
    if (!(c.weight > 0.0)) throw Error(ErrorCode::InvalidArgument, "cluster weight must be > 0");
    if (c.label != 1.0 && c.label != -1.0) {
      throw Error(ErrorCode::InvalidArgument, "cluster label must be +1 or -1");
    }
    weights.push_back(c.weight);
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<LabeledPoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& c = clusters[pick(rng)];
    LabeledPoint p{c.center_x, c.center_y, c.label};
    if (c.shape == PointCluster::Shape::Gaussian) {
      p.x += c.stddev * normal(rng);
      p.y += c.stddev * normal(rng);
    } else {
      const double r2 = c.r_min * c.r_min + unit(rng) * (c.r_max * c.r_max - c.r_min * c.r_min);
      const double r = std::sqrt(r2);
      const double theta = 2.0 * 3.14159265358979323846 * unit(rng);
      p.x += c.axis_x * r * std::cos(theta);
      p.y += c.axis_y * r * std::sin(theta);
    }
    out.push_back(p);
  }
  return out;
}

inline std::vector<Sample> make_population(const std::vector<PointCluster>& clusters,
                                           FeatureMap map, std::size_t count, Rng& rng) {
  std::vector<Sample> out;
  out.reserve(count);
  for (const auto& p : draw_points(clusters, count, rng)) {
    out.push_back({features(map, p.x, p.y), p.label});
  }
  return out;
}

/// Regularized logistic cost (rho/2)||w||^2 + E ln(1 + exp(-gamma h^T w)).
/// The expectation runs over a finite population of labeled feature vectors;
/// streaming samples are drawn uniformly from it, so the true gradient,
/// Hessian and gradient-noise covariance are exact population averages.
class LogisticCost final : public CostModel {
 public:
  LogisticCost(double rho, std::vector<Sample> population)
      : rho_(rho), population_(std::move(population)) {
    if (population_.empty()) throw Error(ErrorCode::InvalidArgument, "logistic: empty population");
    if (rho_ < 0.0) throw Error(ErrorCode::InvalidArgument, "logistic: rho must be >= 0");
    const Index m = population_.front().x.size();
    for (const auto& s : population_) {
      if (s.x.size() != m) throw Error(ErrorCode::DimensionMismatch, "logistic: feature sizes differ");
    }
  }

  std::string_view kind() const override { return "logistic"; }
  Index dimension() const override { return population_.front().x.size(); }
  double rho() const { return rho_; }
  const std::vector<Sample>& population() const { return population_; }

  Sample draw_sample(Rng& rng) const override {
    std::uniform_int_distribution<std::size_t> pick(0, population_.size() - 1);
    return population_[pick(rng)];
  }

  double sample_loss(const Vector& w, const Sample& s) const override {
    return 0.5 * rho_ * w.squaredNorm() + detail::softplus(-s.y * s.x.dot(w));
  }
  double loss(const Vector& w) const override {
    double acc = 0.0;
    for (const auto& s : population_) acc += detail::softplus(-s.y * s.x.dot(w));
    return 0.5 * rho_ * w.squaredNorm() + acc / static_cast<double>(population_.size());
  }

  /// -gamma h / (1 + exp(gamma h^T w)) + rho w
  Vector stochastic_gradient(const Vector& w, const Sample& s) const override {
    return -s.y * detail::logistic_tail(s.y * s.x.dot(w)) * s.x + rho_ * w;
  }
  Vector true_gradient(const Vector& w) const override {
    return data_gradient_mean(w) + rho_ * w;
  }
  Matrix hessian(const Vector& w) const override {
    const Index m = dimension();
    Matrix h = Matrix::Zero(m, m);
    for (const auto& s : population_) {
      const double sig = detail::logistic_tail(-s.x.dot(w));
      h.selfadjointView<Eigen::Lower>().rankUpdate(s.x, sig * (1.0 - sig));
    }
    h = h.selfadjointView<Eigen::Lower>();
    h /= static_cast<double>(population_.size());
    h.diagonal().array() += rho_;
    return h;
  }
  std::optional<Matrix> noise_covariance(const Vector& w) const override {
    const Index m = dimension();
    Matrix second = Matrix::Zero(m, m);
    for (const auto& s : population_) {
      const Vector g = data_term(w, s);
      second.selfadjointView<Eigen::Lower>().rankUpdate(g, 1.0);
    }
    second = second.selfadjointView<Eigen::Lower>();
    second /= static_cast<double>(population_.size());
    const Vector mean = data_gradient_mean(w);
    return Matrix(second - mean * mean.transpose());
  }

 private:
  static Vector data_term(const Vector& w, const Sample& s) {
    return -s.y * detail::logistic_tail(s.y * s.x.dot(w)) * s.x;
  }
  Vector data_gradient_mean(const Vector& w) const {
    Vector g = Vector::Zero(dimension());
    for (const auto& s : population_) {
      g.noalias() += (-s.y * detail::logistic_tail(s.y * s.x.dot(w))) * s.x;
    }
    return g / static_cast<double>(population_.size());
  }

  double rho_;
  std::vector<Sample> population_;
};

/// Gradient-noise covariance estimate at a point.
struct NoiseCovariance {
  Matrix g;
};

/// Empirical covariance of s = stochastic_gradient(point) - true_gradient(point).
inline NoiseCovariance noise_covariance_at(const CostModel& model, const Vector& point,
                                           Index n_samples, Rng& rng) {
  if (n_samples < 1000) {
    throw Error(ErrorCode::InvalidArgument, "noise_covariance_at needs at least 1000 samples");
  }
  const Index m = model.dimension();
  const Vector mean_grad = model.true_gradient(point);
  Matrix acc = Matrix::Zero(m, m);
  for (Index i = 0; i < n_samples; ++i) {
    const Vector s = model.stochastic_gradient(point, model.draw_sample(rng)) - mean_grad;
    acc.selfadjointView<Eigen::Lower>().rankUpdate(s, 1.0);
  }
  acc = acc.selfadjointView<Eigen::Lower>();
  return {acc / static_cast<double>(n_samples)};
}

/// Exact covariance when the model provides it, otherwise the empirical
/// estimate from `fallback_samples` draws.
inline NoiseCovariance noise_covariance_or_estimate(const CostModel& model, const Vector& point,
                                                    Rng& rng, Index fallback_samples = 1000000) {
  if (auto g = model.noise_covariance(point)) return {*g};
  return noise_covariance_at(model, point, fallback_samples, rng);
}

inline Matrix hessian_at(const CostModel& model, const Vector& point) {
  return model.hessian(point);
}

/// Central differences of a scalar function.
template <typename F>
  requires std::is_invocable_r_v<double, F&, const Vector&>
Vector finite_difference_gradient(F&& f, const Vector& point, double eps = 1e-6) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite differences need eps > 0");
  Vector g(point.size());
  Vector probe = point;
  for (Index i = 0; i < point.size(); ++i) {
    probe(i) = point(i) + eps;
    const double up = f(probe);
    probe(i) = point(i) - eps;
    const double down = f(probe);
    probe(i) = point(i);
    g(i) = (up - down) / (2.0 * eps);
  }
  return g;
}

inline Vector finite_difference_gradient(const CostModel& model, const Vector& point,
                                         double eps = 1e-6) {
  return finite_difference_gradient([&](const Vector& w) { return model.loss(w); }, point, eps);
}

inline Vector finite_difference_gradient(const CostModel& model, const Vector& point,
                                         const Sample& sample, double eps = 1e-6) {
  return finite_difference_gradient(
      [&](const Vector& w) { return model.sample_loss(w, sample); }, point, eps);
}

}  // namespace wcdiff
