#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ipp/errors.hpp"
#include "ipp/estimator.hpp"
#include "ipp/graphs.hpp"
#include "ipp/randfield.hpp"

namespace ipp {

enum class Sense { LessEqual, Equal };

// sum_k coef_k * z_{var_k}  (<= | =)  rhs, over binary variables only.
struct LinearConstraint {
  std::vector<std::pair<int, double>> terms;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;

  double activity(std::span<const double> z) const {
    double a = 0.0;
    for (auto [j, c] : terms) a += c * z[j];
    return a;
  }
  double violation(std::span<const double> z) const {
    const double a = activity(z);
    return sense == Sense::Equal ? std::abs(a - rhs) : std::max(0.0, a - rhs);
  }
};

// Visit indicator of one observation point: the sum of the listed binaries,
// or the constant 1 when the point is always measured.
struct Indicator {
  std::vector<int> binaries;
  bool always_on = false;

  double value(std::span<const double> z) const {
    if (always_on) return 1.0;
    double v = 0.0;
    for (int j : binaries) v += z[j];
    return v;
  }
};

// One prediction point's term w * g(alpha) with g(alpha) = alpha' C alpha -
// 2 cross' alpha + prior. link_bound bounds |alpha_v| at every restricted
// optimum and turns the indicator link into -m y_v <= alpha_v <= m y_v.
struct ObjectiveBlock {
  double weight = 0.0;
  Eigen::VectorXd cross;
  double prior = 0.0;
  double link_bound = 1.0;
};

// Append-only pool of lazily generated cuts; duplicate rows are ignored.
class CutPool {
 public:
  bool add(const LinearConstraint& c) {
    std::lock_guard lock(mu_);
    if (!keys_.insert(key(c)).second) return false;
    cuts_.push_back(c);
    return true;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return cuts_.size();
  }
  std::vector<LinearConstraint> snapshot() const {
    std::lock_guard lock(mu_);
    return cuts_;
  }

 private:
  static std::string key(const LinearConstraint& c) {
    auto t = c.terms;
    std::sort(t.begin(), t.end());
    std::string k = std::to_string(static_cast<int>(c.sense)) + ":" + std::to_string(c.rhs);
    for (auto [j, v] : t) k += "|" + std::to_string(j) + "*" + std::to_string(v);
    return k;
  }
  mutable std::mutex mu_;
  std::vector<LinearConstraint> cuts_;
  std::set<std::string> keys_;
};

using Assignment = std::vector<int>;

struct MiqpModel {
  int num_binaries = 0;
  std::vector<double> binary_lower;  // presolve may pin entries
  std::vector<double> binary_upper;
  Eigen::MatrixXd gram;               // C_Theta, shared by every block
  std::vector<ObjectiveBlock> blocks; // one per prediction point
  std::vector<Indicator> indicators;  // one per observation point
  std::vector<LinearConstraint> constraints;

  // Violated constraints for an integer assignment that satisfies every
  // linear row; empty when the assignment is acceptable.
  std::function<std::vector<LinearConstraint>(std::span<const int>)> cut_generator;
  // Optional: turn a fractional relaxation point into an integer candidate.
  std::function<std::optional<Assignment>(std::span<const double>)> rounding_heuristic;
  // Optional: among equal objectives, is `a` strictly preferred to `b`?
  std::function<bool(std::span<const int>, std::span<const int>)> prefer;

  std::shared_ptr<CutPool> cut_pool = std::make_shared<CutPool>();

  int num_observations() const { return static_cast<int>(gram.rows()); }
  int num_predictions() const { return static_cast<int>(blocks.size()); }
  int num_continuous() const { return num_observations() * num_predictions(); }

  // Continuous variable [alpha_i]_v has index i * M + v.
  int continuous_index(int block, int vertex) const { return block * num_observations() + vertex; }

  // (observation point whose indicator gates the variable, continuous index).
  std::vector<std::pair<int, int>> indicator_links() const {
    std::vector<std::pair<int, int>> links;
    for (int i = 0; i < num_predictions(); ++i)
      for (int v = 0; v < num_observations(); ++v)
        if (!indicators[v].always_on) links.emplace_back(v, continuous_index(i, v));
    return links;
  }

  // Observation points measured under an integer assignment.
  std::vector<int> support(std::span<const int> assignment) const {
    std::vector<double> z(assignment.begin(), assignment.end());
    std::vector<int> s;
    for (int v = 0; v < num_observations(); ++v)
      if (indicators[v].value(z) > 0.5) s.push_back(v);
    return s;
  }

  // Objective with alpha optimal on the support (restricted solve per block).
  double support_objective(std::span<const int> sup) const {
    double acc = 0.0;
    if (sup.empty()) {
      for (const auto& b : blocks) acc += b.weight * b.prior;
      return acc;
    }
    const auto k = static_cast<Eigen::Index>(sup.size());
    Eigen::MatrixXd sub(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index c = 0; c < k; ++c) sub(a, c) = gram(sup[a], sup[c]);
    Eigen::LLT<Eigen::MatrixXd> llt(sub);
    if (llt.info() != Eigen::Success) throw InternalError("covariance matrix is not positive definite");
    Eigen::VectorXd rhs(k);
    for (const auto& b : blocks) {
      if (b.weight == 0.0) continue;
      for (Eigen::Index a = 0; a < k; ++a) rhs(a) = b.cross(sup[a]);
      acc += b.weight * (b.prior - rhs.dot(llt.solve(rhs)));
    }
    return acc;
  }

  double integer_objective(std::span<const int> assignment) const {
    return support_objective(support(assignment));
  }

  // Bounds, model rows and pooled cuts all satisfied within tol.
  bool satisfies_rows(std::span<const int> assignment, double tol = 1e-9) const {
    if (static_cast<int>(assignment.size()) != num_binaries) return false;
    std::vector<double> z(assignment.begin(), assignment.end());
    for (int j = 0; j < num_binaries; ++j)
      if (z[j] < binary_lower[j] - tol || z[j] > binary_upper[j] + tol) return false;
    for (const auto& c : constraints)
      if (c.violation(z) > tol) return false;
    for (const auto& c : cut_pool->snapshot())
      if (c.violation(z) > tol) return false;
    return true;
  }
};

// max_i ||b_{x_i,Theta}||_2 / sigma^2, floored to 1 when every b vanishes.
// Valid for every subset S because lambda_min(C_S) >= sigma^2.
inline double big_m_bound(const RandomFieldModel& field, std::span<const Point> theta,
                          const PredictionSet& omega) {
  double best = 0.0;
  for (const Point& x : omega.points)
    best = std::max(best, cross_covariance(field, x, theta).norm() / field.noise_variance);
  return best > 0.0 ? best : 1.0;
}

struct SparseSsInstance {
  RandomFieldModel field;
  std::vector<Point> theta;
  PredictionSet omega;
  int k = 1;

  void validate() const {
    field.validate();
    omega.validate();
    if (theta.empty()) throw InvalidInput("observation set is empty");
    require_distinct(theta);
    if (k < 1 || k > static_cast<int>(theta.size()))
      throw InvalidInput("cardinality k must satisfy 1 <= k <= M");
  }
};

struct IppInstance {
  RandomFieldModel field;
  ObservationGraph graph;
  PredictionSet omega;
  double budget = 0.0;

  void validate() const {
    field.validate();
    omega.validate();
    if (!(budget > 0.0) || !std::isfinite(budget)) throw InvalidInput("budget must be positive");
    const double sp = shortest_path_length(graph);
    if (!std::isfinite(sp)) throw InfeasibleInstance("infeasible budget: end unreachable from start");
    if (budget < sp * (1.0 - 1e-12))
      throw InfeasibleInstance("infeasible budget: " + std::to_string(budget) +
                               " < shortest path " + std::to_string(sp));
  }
};

namespace detail {

// Shared objective: blocks with per-prediction link bounds
// ||b_i||_2 / lambda_min(C_Theta). lambda_min(C_S) >= lambda_min(C_Theta) by
// interlacing, so the bound holds on every support and is never looser than
// big_m_bound.
inline void fill_objective(MiqpModel& m, const RandomFieldModel& field,
                           std::span<const Point> theta, const PredictionSet& omega) {
  m.gram = covariance_matrix(field, theta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.gram, Eigen::EigenvaluesOnly);
  const double lam = std::max(es.eigenvalues()(0), field.noise_variance);
  const double fallback = big_m_bound(field, theta, omega);
  for (std::size_t i = 0; i < omega.size(); ++i) {
    ObjectiveBlock b;
    b.weight = omega.weights[i];
    b.cross = cross_covariance(field, omega.points[i], theta);
    b.prior = field.prior_variance(omega.points[i]);
    const double nb = b.cross.norm();
    b.link_bound = nb > 0.0 ? nb / lam : fallback;
    m.blocks.push_back(std::move(b));
  }
}

}  // namespace detail

inline MiqpModel build_sparse_ss(const SparseSsInstance& inst) {
  inst.validate();
  MiqpModel m;
  const int big_m = static_cast<int>(inst.theta.size());
  m.num_binaries = big_m;
  m.binary_lower.assign(big_m, 0.0);
  m.binary_upper.assign(big_m, 1.0);
  detail::fill_objective(m, inst.field, inst.theta, inst.omega);
  LinearConstraint card;
  card.sense = Sense::Equal;
  card.rhs = inst.k;
  for (int v = 0; v < big_m; ++v) {
    card.terms.emplace_back(v, 1.0);
    m.indicators.push_back(Indicator{{v}, false});
  }
  m.constraints.push_back(std::move(card));
  const int k = inst.k;
  m.rounding_heuristic = [k, big_m](std::span<const double> z) -> std::optional<Assignment> {
    std::vector<int> order(big_m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return z[a] > z[b]; });
    Assignment a(big_m, 0);
    for (int q = 0; q < k; ++q) a[order[q]] = 1;
    return a;
  };
  return m;
}

struct IppModel {
  IppInstance instance;
  MiqpModel miqp;
  std::vector<int> arc_of_binary;   // binary j -> graph arc index
  std::vector<int> binary_of_arc;   // graph arc -> binary, or -1 when no variable exists
};

inline std::vector<LinearConstraint> subtour_cuts(const IppModel& m, std::span<const int> assignment);
inline std::optional<Assignment> round_to_path(const IppModel& m, std::span<const double> z);
inline PathSolution extract_path(const IppModel& m, std::span<const int> assignment);

// Arcs into s or out of t carry no variable: no simple s-t path uses them.
// Arcs that cannot lie on any s-t route within budget (shortest-path test)
// are pinned to zero.
inline std::shared_ptr<IppModel> build_ipp(const IppInstance& inst) {
  inst.validate();
  auto out = std::make_shared<IppModel>();
  out->instance = inst;
  const ObservationGraph& g = out->instance.graph;
  MiqpModel& m = out->miqp;
  const int s = g.start(), t = g.end();
  out->binary_of_arc.assign(g.num_arcs(), -1);
  for (int k = 0; k < g.num_arcs(); ++k) {
    const Arc& a = g.arcs()[k];
    if (a.to == s || a.from == t) continue;
    out->binary_of_arc[k] = static_cast<int>(out->arc_of_binary.size());
    out->arc_of_binary.push_back(k);
  }
  m.num_binaries = static_cast<int>(out->arc_of_binary.size());
  m.binary_lower.assign(m.num_binaries, 0.0);
  m.binary_upper.assign(m.num_binaries, 1.0);

  const auto from_s = dijkstra(g, s, true);
  const auto to_t = dijkstra(g, t, false);
  const double budget = inst.budget;
  const double slack = 1e-9 * std::max(1.0, budget);
  for (int j = 0; j < m.num_binaries; ++j) {
    const Arc& a = g.arcs()[out->arc_of_binary[j]];
    if (from_s[a.from] + a.cost + to_t[a.to] > budget + slack) m.binary_upper[j] = 0.0;
  }

  detail::fill_objective(m, inst.field, g.vertices(), inst.omega);

  LinearConstraint len;
  len.rhs = budget;
  for (int j = 0; j < m.num_binaries; ++j) len.terms.emplace_back(j, g.arcs()[out->arc_of_binary[j]].cost);
  m.constraints.push_back(std::move(len));

  LinearConstraint leave_s{{}, Sense::Equal, 1.0}, enter_t{{}, Sense::Equal, 1.0};
  for (int k : g.out_arcs(s))
    if (out->binary_of_arc[k] >= 0) leave_s.terms.emplace_back(out->binary_of_arc[k], 1.0);
  for (int k : g.in_arcs(t))
    if (out->binary_of_arc[k] >= 0) enter_t.terms.emplace_back(out->binary_of_arc[k], 1.0);
  m.constraints.push_back(std::move(leave_s));
  m.constraints.push_back(std::move(enter_t));

  m.indicators.resize(g.num_vertices());
  for (int v = 0; v < g.num_vertices(); ++v) {
    if (v == s || v == t) {
      m.indicators[v].always_on = true;
      continue;
    }
    LinearConstraint flow{{}, Sense::Equal, 0.0}, degree{{}, Sense::LessEqual, 1.0};
    for (int k : g.out_arcs(v)) {
      const int j = out->binary_of_arc[k];
      if (j < 0) continue;
      flow.terms.emplace_back(j, 1.0);
      degree.terms.emplace_back(j, 1.0);
      m.indicators[v].binaries.push_back(j);
    }
    for (int k : g.in_arcs(v)) {
      const int j = out->binary_of_arc[k];
      if (j >= 0) flow.terms.emplace_back(j, -1.0);
    }
    if (!flow.terms.empty()) m.constraints.push_back(std::move(flow));
    if (!degree.terms.empty()) m.constraints.push_back(std::move(degree));
  }

  std::weak_ptr<IppModel> self = out;
  m.cut_generator = [self](std::span<const int> a) {
    auto p = self.lock();
    if (!p) throw InternalError("IPP model released while solving");
    return subtour_cuts(*p, a);
  };
  m.rounding_heuristic = [self](std::span<const double> z) -> std::optional<Assignment> {
    auto p = self.lock();
    if (!p) return std::nullopt;
    return round_to_path(*p, z);
  };
  m.prefer = [self](std::span<const int> a, std::span<const int> b) {
    auto p = self.lock();
    if (!p) return false;
    const PathSolution pa = extract_path(*p, a), pb = extract_path(*p, b);
    if (std::abs(pa.length - pb.length) > 1e-9) return pa.length < pb.length;
    return pa.vertex_sequence < pb.vertex_sequence;
  };
  return out;
}

inline std::vector<int> selected_arcs(const IppModel& m, std::span<const int> assignment) {
  std::vector<int> arcs;
  for (int j = 0; j < m.miqp.num_binaries; ++j)
    if (assignment[j] != 0) arcs.push_back(m.arc_of_binary[j]);
  return arcs;
}

// One subtour elimination row sum_{i,j in S} z_ij <= |S| - 1 per detected cycle.
inline std::vector<LinearConstraint> subtour_cuts(const IppModel& m, std::span<const int> assignment) {
  const ObservationGraph& g = m.instance.graph;
  std::vector<LinearConstraint> cuts;
  for (const auto& cyc : find_subtours(g, selected_arcs(m, assignment))) {
    std::vector<char> in(g.num_vertices(), 0);
    for (int v : cyc) in[v] = 1;
    LinearConstraint c;
    c.rhs = static_cast<double>(cyc.size()) - 1.0;
    for (int j = 0; j < m.miqp.num_binaries; ++j) {
      const Arc& a = g.arcs()[m.arc_of_binary[j]];
      if (in[a.from] && in[a.to]) c.terms.emplace_back(j, 1.0);
    }
    cuts.push_back(std::move(c));
  }
  return cuts;
}

inline Assignment assignment_from_path(const IppModel& m, std::span<const int> seq) {
  const ObservationGraph& g = m.instance.graph;
  Assignment a(m.miqp.num_binaries, 0);
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const int k = g.find_arc(seq[i], seq[i + 1]);
    if (k < 0 || m.binary_of_arc[k] < 0) throw InvalidInput("path uses an arc without a variable");
    a[m.binary_of_arc[k]] = 1;
  }
  return a;
}

// Walk from s, always taking the highest-valued arc whose head can still reach
// t within budget without revisiting the walk.
inline std::optional<Assignment> round_to_path(const IppModel& m, std::span<const double> z) {
  const ObservationGraph& g = m.instance.graph;
  const double budget = m.instance.budget * (1.0 + 1e-12);
  std::vector<char> visited(g.num_vertices(), 0);
  std::vector<int> seq{g.start()};
  visited[g.start()] = 1;
  double spent = 0.0;
  while (seq.back() != g.end()) {
    const int u = seq.back();
    const auto to_t = dijkstra(g, g.end(), false, &visited);
    int best_arc = -1;
    double best_val = -1.0;
    for (int k : g.out_arcs(u)) {
      const Arc& a = g.arcs()[k];
      const int j = m.binary_of_arc[k];
      if (j < 0 || visited[a.to] || m.miqp.binary_upper[j] == 0.0) continue;
      if (spent + a.cost + to_t[a.to] > budget) continue;
      if (z[j] > best_val) {
        best_val = z[j];
        best_arc = k;
      }
    }
    if (best_arc < 0) return std::nullopt;
    const Arc& a = g.arcs()[best_arc];
    spent += a.cost;
    visited[a.to] = 1;
    seq.push_back(a.to);
  }
  return assignment_from_path(m, seq);
}

inline PathSolution extract_path(const IppModel& m, std::span<const int> assignment) {
  if (static_cast<int>(assignment.size()) != m.miqp.num_binaries)
    throw InvalidInput("assignment size mismatch");
  const ObservationGraph& g = m.instance.graph;
  const auto arcs = selected_arcs(m, assignment);
  const SubtourDecomposition dec = decompose_selection(g, arcs);
  if (!dec.cycles.empty()) throw InternalError("assignment contains a subtour");
  PathSolution p;
  p.vertex_sequence = dec.path;
  for (std::size_t i = 0; i + 1 < dec.path.size(); ++i) p.arc_set.push_back(g.find_arc(dec.path[i], dec.path[i + 1]));
  p.length = path_length(g, p.vertex_sequence);
  std::vector<Point> pts;
  for (int v : p.vertex_sequence) pts.push_back(g.vertices()[v]);
  p.objective = total_weighted_error(m.instance.field, m.instance.omega, pts);
  return p;
}

}  // namespace ipp
