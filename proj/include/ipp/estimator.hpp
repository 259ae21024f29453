#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ipp/errors.hpp"
#include "ipp/randfield.hpp"

namespace ipp {

struct PredictionSet {
  std::vector<Point> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.empty()) throw InvalidInput("prediction set is empty");
    if (points.size() != weights.size())
      throw InvalidInput("prediction points and weights differ in length");
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("prediction weight must be >= 0");
  }
};

// g(alpha) = alpha' Q alpha - 2 cross' alpha + prior, with Q = C_Theta,
// cross = b_{x,Theta} and prior = phi(x, x).
struct QuadraticForm {
  Eigen::MatrixXd gram;
  Eigen::VectorXd cross;
  double prior = 0.0;
};

// alpha* = C^{-1} b via Cholesky.
inline Eigen::VectorXd lls_coefficients(const Eigen::MatrixXd& c, const Eigen::VectorXd& b) {
  if (c.rows() != c.cols() || c.rows() != b.size())
    throw InvalidInput("lls_coefficients: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw InternalError("covariance matrix is not positive definite");
  return llt.solve(b);
}

// f_x(S) = phi(x,x) - b' C_S^{-1} b. Returned unclamped.
inline double mse(const RandomFieldModel& model, const Point& x, std::span<const Point> s) {
  const double prior = model.prior_variance(x);
  if (s.empty()) return prior;
  const Eigen::MatrixXd c = covariance_matrix(model, s);
  const Eigen::VectorXd b = cross_covariance(model, x, s);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw InternalError("covariance matrix is not positive definite");
  return prior - b.dot(llt.solve(b));
}

inline double total_weighted_error(const RandomFieldModel& model, const PredictionSet& omega,
                                   std::span<const Point> s) {
  if (s.empty()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i)
      acc += omega.weights[i] * model.prior_variance(omega.points[i]);
    return acc;
  }
  const Eigen::MatrixXd c = covariance_matrix(model, s);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw InternalError("covariance matrix is not positive definite");
  double acc = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (omega.weights[i] == 0.0) continue;
    const Eigen::VectorXd b = cross_covariance(model, omega.points[i], s);
    acc += omega.weights[i] * (model.prior_variance(omega.points[i]) - b.dot(llt.solve(b)));
  }
  return acc;
}

inline QuadraticForm make_quadratic_form(const RandomFieldModel& model, const Point& x,
                                         std::span<const Point> theta) {
  return {covariance_matrix(model, theta), cross_covariance(model, x, theta),
          model.prior_variance(x)};
}

inline double g_eval(const QuadraticForm& q, const Eigen::VectorXd& alpha) {
  if (alpha.size() != q.cross.size()) throw InvalidInput("g_eval: dimension mismatch");
  return alpha.dot(q.gram * alpha) - 2.0 * q.cross.dot(alpha) + q.prior;
}

// Minimize g over alpha supported on `support`; solves only the |support| subsystem.
inline std::pair<Eigen::VectorXd, double> restricted_optimal_g(const QuadraticForm& q,
                                                               std::span<const int> support) {
  const Eigen::Index m = q.cross.size();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  if (support.empty()) return {alpha, q.prior};
  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd sub(k, k);
  Eigen::VectorXd rhs(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    if (support[a] < 0 || support[a] >= m) throw InvalidInput("support index out of range");
    rhs(a) = q.cross(support[a]);
    for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = q.gram(support[a], support[b]);
  }
  const Eigen::VectorXd local = lls_coefficients(sub, rhs);
  for (Eigen::Index a = 0; a < k; ++a) alpha(support[a]) = local(a);
  return {alpha, q.prior - rhs.dot(local)};
}

// Precomputed C_Theta and all b_{x_i,Theta} so subset errors cost one small
// Cholesky each. Shared by the solver, the baselines and the oracles.
class SubsetErrorEvaluator {
 public:
  SubsetErrorEvaluator(const RandomFieldModel& model, std::span<const Point> theta,
                       const PredictionSet& omega)
      : gram_(covariance_matrix(model, theta)),
        cross_(static_cast<Eigen::Index>(theta.size()), static_cast<Eigen::Index>(omega.size())),
        prior_(static_cast<Eigen::Index>(omega.size())),
        weights_(static_cast<Eigen::Index>(omega.size())) {
    omega.validate();
    for (std::size_t i = 0; i < omega.size(); ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      cross_.col(col) = cross_covariance(model, omega.points[i], theta);
      prior_(col) = model.prior_variance(omega.points[i]);
      weights_(col) = omega.weights[i];
    }
  }

  const Eigen::MatrixXd& gram() const { return gram_; }
  // Column i is b_{x_i, Theta}.
  const Eigen::MatrixXd& cross() const { return cross_; }
  const Eigen::VectorXd& prior() const { return prior_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::Index num_observations() const { return gram_.rows(); }
  Eigen::Index num_predictions() const { return cross_.cols(); }

  double empty_error() const { return weights_.dot(prior_); }

  double operator()(std::span<const int> subset) const {
    if (subset.empty()) return empty_error();
    const auto k = static_cast<Eigen::Index>(subset.size());
    Eigen::MatrixXd sub(k, k);
    Eigen::MatrixXd rhs(k, cross_.cols());
    for (Eigen::Index a = 0; a < k; ++a) {
      rhs.row(a) = cross_.row(subset[a]);
      for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = gram_(subset[a], subset[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sub);
    if (llt.info() != Eigen::Success) throw InternalError("covariance matrix is not positive definite");
    const Eigen::MatrixXd sol = llt.solve(rhs);
    const Eigen::VectorXd explained = (rhs.array() * sol.array()).colwise().sum().transpose();
    return weights_.dot(prior_ - explained);
  }

  QuadraticForm form(Eigen::Index i) const { return {gram_, cross_.col(i), prior_(i)}; }

 private:
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd cross_;
  Eigen::VectorXd prior_;
  Eigen::VectorXd weights_;
};

}  // namespace ipp
