#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ipp {

// Operator-splitting solver for
//
//   minimize  1/2 x'Px + q'x   subject to  l <= Ax <= u
//
// with P positive semidefinite (dense, small) and A sparse. The iteration is
// the relaxed ADMM of Stellato et al. (OSQP) with a directly factored
// quasi-definite system P + sigma I + A' diag(rho) A.
//
// The iterate's multipliers are handed to a caller-supplied dual function at
// regular intervals. Any multiplier vector gives a valid lower bound there, so
// the best value seen is reported even when the iteration is cut short.

struct AdmmSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double relaxation = 1.6;
  double eps_abs = 1e-8;
  double eps_rel = 1e-6;
  // Stop once bound and primal objective agree to this relative tolerance
  // and the primal residual is small.
  double gap_rel = 1e-7;
  int max_iter = 4000;
  int check_every = 25;
  bool adaptive_rho = true;
  double rho_eq_scale = 1e3;
};

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  SparseRowMatrix A;
  Eigen::VectorXd l, u;
  double constant = 0.0;
};

enum class AdmmStatus { Solved, MaxIterations, Cutoff, TimeLimit };

struct AdmmResult {
  Eigen::VectorXd x, y, z;
  AdmmStatus status = AdmmStatus::MaxIterations;
  int iterations = 0;
  double bound = -std::numeric_limits<double>::infinity();
  double primal_objective = std::numeric_limits<double>::infinity();
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
};

using DualBoundFn = std::function<double(const Eigen::VectorXd& y)>;

class AdmmQp {
 public:
  AdmmQp(const QpProblem& qp, AdmmSettings settings) : qp_(qp), s_(settings) {
    n_ = qp.P.rows();
    m_ = qp.A.rows();
    At_ = qp.A.transpose();
    rho_ = s_.rho;
  }

  AdmmResult solve(const DualBoundFn& dual_bound, double cutoff,
                   const Eigen::VectorXd* x0 = nullptr, const Eigen::VectorXd* y0 = nullptr,
                   std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt) {
    AdmmResult r;
    Eigen::VectorXd x = x0 && x0->size() == n_ ? *x0 : Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd y = y0 && y0->size() == m_ ? *y0 : Eigen::VectorXd::Zero(m_);
    Eigen::VectorXd z = (qp_.A * x).cwiseMax(qp_.l).cwiseMin(qp_.u);
    factor();

    Eigen::VectorXd xt(n_), zt(m_), rhs(n_), ax(m_), px(n_), aty(n_);
    const double a = s_.relaxation;
    for (int it = 1; it <= s_.max_iter; ++it) {
      rhs.noalias() = s_.sigma * x - qp_.q;
      rhs.noalias() += At_ * (rho_vec_.cwiseProduct(z) - y);
      xt = llt_.solve(rhs);
      zt.noalias() = qp_.A * xt;
      x = a * xt + (1.0 - a) * x;
      const Eigen::VectorXd zr = a * zt + (1.0 - a) * z;
      const Eigen::VectorXd znew =
          (zr + y.cwiseQuotient(rho_vec_)).cwiseMax(qp_.l).cwiseMin(qp_.u);
      y += rho_vec_.cwiseProduct(zr - znew);
      z = znew;
      r.iterations = it;

      if (it % s_.check_every != 0 && it != s_.max_iter) continue;

      ax.noalias() = qp_.A * x;
      px.noalias() = qp_.P * x;
      aty.noalias() = At_ * y;
      const double prim = (ax - z).lpNorm<Eigen::Infinity>();
      const double dual = (px + qp_.q + aty).lpNorm<Eigen::Infinity>();
      const double prim_scale = std::max(ax.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>());
      const double dual_scale = std::max({px.lpNorm<Eigen::Infinity>(), aty.lpNorm<Eigen::Infinity>(),
                                          qp_.q.lpNorm<Eigen::Infinity>()});
      const double eps_prim = s_.eps_abs + s_.eps_rel * prim_scale;
      const double eps_dual = s_.eps_abs + s_.eps_rel * dual_scale;
      r.primal_residual = prim;
      r.dual_residual = dual;
      r.primal_objective = 0.5 * x.dot(px) + qp_.q.dot(x) + qp_.constant;

      const double b = dual_bound(y);
      r.bound = std::max(r.bound, b);
      if (r.bound >= cutoff) {
        r.status = AdmmStatus::Cutoff;
        break;
      }
      if (prim <= eps_prim && dual <= eps_dual) {
        r.status = AdmmStatus::Solved;
        break;
      }
      const double gap = r.primal_objective - r.bound;
      if (prim <= 1e3 * eps_prim && gap <= s_.gap_rel * std::max(1.0, std::abs(r.bound))) {
        r.status = AdmmStatus::Solved;
        break;
      }
      if (deadline && std::chrono::steady_clock::now() > *deadline) {
        r.status = AdmmStatus::TimeLimit;
        break;
      }
      if (s_.adaptive_rho && m_ > 0) {
        const double pn = prim / std::max(prim_scale, 1e-12);
        const double dn = dual / std::max(dual_scale, 1e-12);
        if (pn > 0.0 && dn > 0.0) {
          const double proposal = std::clamp(rho_ * std::sqrt(pn / dn), 1e-6, 1e6);
          if (proposal > 5.0 * rho_ || proposal < 0.2 * rho_) {
            rho_ = proposal;
            factor();
          }
        }
      }
    }
    r.x = std::move(x);
    r.y = std::move(y);
    r.z = std::move(z);
    return r;
  }

 private:
  void factor() {
    rho_vec_.resize(m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const bool eq = std::abs(qp_.u(i) - qp_.l(i)) < 1e-12;
      rho_vec_(i) = eq ? rho_ * s_.rho_eq_scale : rho_;
    }
    Eigen::MatrixXd k = qp_.P;
    k.diagonal().array() += s_.sigma;
    if (m_ > 0) k += Eigen::MatrixXd(At_ * rho_vec_.asDiagonal() * qp_.A);
    llt_.compute(k);
  }

  const QpProblem& qp_;
  AdmmSettings s_;
  Eigen::Index n_ = 0, m_ = 0;
  SparseRowMatrix At_;
  double rho_ = 0.1;
  Eigen::VectorXd rho_vec_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace ipp
