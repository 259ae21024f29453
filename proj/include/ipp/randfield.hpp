#pragma once

#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ipp/errors.hpp"

namespace ipp {

struct Point {
  std::vector<double> coords;

  Point() = default;
  Point(std::initializer_list<double> c) : coords(c) {}
  explicit Point(std::vector<double> c) : coords(std::move(c)) {}

  std::size_t dim() const { return coords.size(); }
  bool operator==(const Point&) const = default;
};

inline double distance(const Point& a, const Point& b) {
  if (a.dim() != b.dim()) {
    throw InvalidInput("point dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                       std::to_string(b.dim()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a.coords[i] - b.coords[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// phi(h) = sigma0^2 exp(-h^2 / (2 L^2))
struct SquaredExponential {
  double sigma0 = 1.0;
  double length_scale = 1.0;
};

// phi(h) = c (1 - 3h/(2a) + (h/a)^3 / 2) for h <= a, else 0
struct Spherical {
  double sill = 0.01519;
  double range = 439.2;
};

using Kernel = std::variant<SquaredExponential, Spherical>;

inline void validate(const Kernel& k) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SquaredExponential>) {
          if (!(p.sigma0 > 0.0) || !(p.length_scale > 0.0) || !std::isfinite(p.sigma0) ||
              !std::isfinite(p.length_scale))
            throw InvalidInput("squared exponential kernel needs sigma0 > 0 and L > 0");
        } else {
          if (!(p.sill > 0.0) || !(p.range > 0.0) || !std::isfinite(p.sill) ||
              !std::isfinite(p.range))
            throw InvalidInput("spherical kernel needs c > 0 and a > 0");
        }
      },
      k);
}

// Isotropic evaluation on the separation distance h.
inline double kernel_at_distance(const Kernel& k, double h) {
  return std::visit(
      [h](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SquaredExponential>) {
          return p.sigma0 * p.sigma0 * std::exp(-h * h / (2.0 * p.length_scale * p.length_scale));
        } else {
          if (h > p.range) return 0.0;
          const double r = h / p.range;
          return p.sill * (1.0 - 1.5 * r + 0.5 * r * r * r);
        }
      },
      k);
}

inline double kernel_eval(const Kernel& k, const Point& x, const Point& y) {
  return kernel_at_distance(k, distance(x, y));
}

// phi(x, x); the same for every x since both kernels are stationary.
inline double kernel_variance(const Kernel& k) { return kernel_at_distance(k, 0.0); }

struct RandomFieldModel {
  Kernel kernel = SquaredExponential{};
  double noise_variance = 0.25;

  RandomFieldModel() = default;
  RandomFieldModel(Kernel k, double sigma2) : kernel(k), noise_variance(sigma2) { validate(); }

  void validate() const {
    ipp::validate(kernel);
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
      throw InvalidInput("noise variance must be positive");
  }

  double prior_variance(const Point& x) const { return kernel_eval(kernel, x, x); }
};

inline void require_distinct(std::span<const Point> pts) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (pts[i] == pts[j])
        throw InvalidInput("duplicate observation point at indices " + std::to_string(i) + " and " +
                           std::to_string(j));
}

// Noise-free Gram matrix K_ij = phi(x_i, x_j).
inline Eigen::MatrixXd kernel_matrix(const Kernel& k, std::span<const Point> pts) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = kernel_eval(k, pts[i], pts[i]);
    for (Eigen::Index j = i + 1; j < n; ++j) out(i, j) = out(j, i) = kernel_eval(k, pts[i], pts[j]);
  }
  return out;
}

// C_S = K_S + sigma^2 I.
inline Eigen::MatrixXd covariance_matrix(const RandomFieldModel& model, std::span<const Point> pts) {
  if (pts.empty()) throw InvalidInput("covariance_matrix: empty point set");
  require_distinct(pts);
  Eigen::MatrixXd c = kernel_matrix(model.kernel, pts);
  c.diagonal().array() += model.noise_variance;
  return c;
}

// b_{x,S}; no noise term because the noise is uncorrelated with the process.
inline Eigen::VectorXd cross_covariance(const RandomFieldModel& model, const Point& x,
                                        std::span<const Point> pts) {
  Eigen::VectorXd b(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i)
    b(static_cast<Eigen::Index>(i)) = kernel_eval(model.kernel, x, pts[i]);
  return b;
}

// Largest correlation phi(h)/phi(0) over distinct pairs of the given points.
inline double max_correlation(const Kernel& k, std::span<const Point> pts) {
  double best = 0.0;
  const double var = kernel_variance(k);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      best = std::max(best, kernel_eval(k, pts[i], pts[j]) / var);
  return best;
}

}  // namespace ipp
