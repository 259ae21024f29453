#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ipp/admm.hpp"
#include "ipp/errors.hpp"
#include "ipp/model.hpp"

namespace ipp {

enum class NodeSelection { BestBound, DepthFirst };
enum class Branching { MostFractional, PseudoCost };
enum class SolveStatus { Optimal, TimeoutFeasible, TimeoutNoIncumbent, Infeasible };
enum class EventKind { Node, Cut, Incumbent, Bound };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::TimeoutFeasible: return "timeout-feasible";
    case SolveStatus::TimeoutNoIncumbent: return "timeout-no-incumbent";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "?";
}

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Node: return "node";
    case EventKind::Cut: return "cut";
    case EventKind::Incumbent: return "incumbent";
    case EventKind::Bound: return "bound";
  }
  return "?";
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// One solve-log record. Unset values are +/-infinity.
struct SolveEvent {
  double time = 0.0;
  EventKind kind = EventKind::Node;
  long nodes = 0;
  long cuts = 0;
  double incumbent = kInf;
  double bound = -kInf;
};

struct SolverConfig {
  double time_limit = 60.0;  // seconds
  double gap_tolerance = 1e-6;
  NodeSelection node_selection = NodeSelection::BestBound;
  Branching branching = Branching::MostFractional;
  double qp_abs_tol = 1e-8;
  double qp_rel_tol = 1e-6;
  int max_qp_iterations = 4000;
  std::uint64_t seed = 0;  // the engine draws no random numbers; kept for reproducible configs
  long node_limit = -1;    // negative: unlimited
  double integrality_tol = 1e-6;
  double incumbent_tol = 1e-9;
  bool use_heuristic = true;
  long log_node_every = 100;
  std::function<void(const SolveEvent&)> on_event;
};

struct SolveState {
  std::optional<Assignment> incumbent;
  double incumbent_objective = kInf;
  Eigen::MatrixXd incumbent_alpha;  // N x M, zero off the measured support
  double global_lower_bound = -kInf;
  double gap = kInf;
  long nodes_explored = 0;
  long cuts_added = 0;
  SolveStatus status = SolveStatus::TimeoutNoIncumbent;
  double wall_time = 0.0;
  std::vector<SolveEvent> log;
};

inline double relative_gap(double ub, double lb) {
  if (!std::isfinite(ub) || !std::isfinite(lb)) return kInf;
  return std::max(0.0, ub - lb) / std::max(std::abs(ub), 1e-10);
}

// ---------------------------------------------------------------------------
// Bound propagation over the binary rows.

// Tightens [lo, hi] on binaries from activity bounds until a fixed point.
// Returns false when some row cannot be satisfied.
inline bool propagate(std::span<const LinearConstraint* const> rows, std::vector<double>& lo,
                      std::vector<double>& hi, double tol = 1e-9) {
  for (int pass = 0; pass < 100; ++pass) {
    bool changed = false;
    for (const LinearConstraint* row : rows) {
      double minact = 0.0, maxact = 0.0;
      for (auto [j, a] : row->terms) {
        minact += std::min(a * lo[j], a * hi[j]);
        maxact += std::max(a * lo[j], a * hi[j]);
      }
      const double scale = tol * std::max(1.0, std::abs(row->rhs));
      if (minact > row->rhs + scale) return false;
      if (row->sense == Sense::Equal && maxact < row->rhs - scale) return false;
      for (auto [j, a] : row->terms) {
        if (lo[j] == hi[j] || a == 0.0) continue;
        // Raising the term from its minimum to its maximum costs |a|.
        if (minact + std::abs(a) > row->rhs + scale) {
          if (a > 0) hi[j] = 0.0; else lo[j] = 1.0;
          changed = true;
        } else if (row->sense == Sense::Equal && maxact - std::abs(a) < row->rhs - scale) {
          if (a > 0) lo[j] = 1.0; else hi[j] = 0.0;
          changed = true;
        }
        if (changed && lo[j] == hi[j]) {
          // activity bounds are stale now; restart this row on the next pass
          break;
        }
      }
    }
    if (!changed) return true;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Continuous relaxation at a node.

// Multipliers keyed by row identity so children can warm start from parents
// whose variable layout differs.
struct WarmStart {
  Eigen::MatrixXd alpha;    // N x M
  Eigen::VectorXd z;        // all binaries
  Eigen::MatrixXd y_upper;  // N x M, link rows alpha - m y <= 0
  Eigen::MatrixXd y_lower;  // N x M, link rows alpha + m y >= 0
  Eigen::VectorXd y_model;  // model rows
  std::vector<double> y_cut;
  Eigen::VectorXd y_box;
};

enum class RelaxStatus { Solved, IterationLimit, Infeasible, Cutoff, TimeLimit };

struct RelaxationResult {
  RelaxStatus status = RelaxStatus::Solved;
  double value = -kInf;  // valid lower bound on every completion of the node
  Eigen::MatrixXd alpha;
  std::vector<double> z;
  int iterations = 0;
  std::shared_ptr<WarmStart> warm;
};

// Solves the convex relaxation: binaries in [lo, hi], big-M indicator links,
// model rows and the given cuts. The reported value is the Lagrangian dual
// function at the final multipliers with the binary box kept explicit, so it
// is a lower bound whether or not the iteration converged.
inline RelaxationResult qp_relax(const MiqpModel& model, std::span<const double> lo,
                                 std::span<const double> hi,
                                 std::span<const LinearConstraint> cuts, const SolverConfig& cfg,
                                 double cutoff = kInf, const WarmStart* warm = nullptr,
                                 std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt) {
  const int big_m = model.num_observations();
  const int n_pred = model.num_predictions();
  const int nb = model.num_binaries;
  RelaxationResult res;
  res.alpha = Eigen::MatrixXd::Zero(n_pred, big_m);
  res.z.assign(lo.begin(), lo.end());

  std::vector<int> free_vars, free_pos(nb, -1);
  for (int j = 0; j < nb; ++j) {
    if (lo[j] > hi[j]) {
      res.status = RelaxStatus::Infeasible;
      res.value = kInf;
      return res;
    }
    if (lo[j] != hi[j]) {
      free_pos[j] = static_cast<int>(free_vars.size());
      free_vars.push_back(j);
    }
  }

  // Indicator state per observation point.
  std::vector<double> fixed_sum(big_m, 0.0);
  std::vector<std::vector<int>> free_bins(big_m);
  std::vector<int> active_vertices;
  std::vector<int> vpos(big_m, -1);
  for (int v = 0; v < big_m; ++v) {
    const Indicator& ind = model.indicators[v];
    bool on = ind.always_on;
    for (int j : ind.binaries) {
      if (free_pos[j] >= 0) {
        free_bins[v].push_back(j);
        on = true;
      } else {
        fixed_sum[v] += lo[j];
      }
    }
    if (fixed_sum[v] > 0.0) on = true;
    if (on) {
      vpos[v] = static_cast<int>(active_vertices.size());
      active_vertices.push_back(v);
    }
  }
  std::vector<int> active_blocks;
  for (int i = 0; i < n_pred; ++i)
    if (model.blocks[i].weight > 0.0) active_blocks.push_back(i);

  const int na = static_cast<int>(active_vertices.size());
  const int nblk = static_cast<int>(active_blocks.size());
  const int n_alpha = na * nblk;
  const int n = n_alpha + static_cast<int>(free_vars.size());
  auto alpha_col = [&](int bi, int pos) { return bi * na + pos; };
  auto z_col = [&](int j) { return n_alpha + free_pos[j]; };

  double wmax = 0.0, cmax = 0.0;
  for (int i : active_blocks) wmax = std::max(wmax, model.blocks[i].weight);
  for (int v : active_vertices) cmax = std::max(cmax, model.gram(v, v));
  const double scale = (wmax > 0.0 && cmax > 0.0) ? 1.0 / (2.0 * wmax * cmax) : 1.0;

  double constant = 0.0;
  for (const auto& b : model.blocks) constant += b.weight * b.prior;

  Eigen::MatrixXd c_act(na, na);
  for (int a = 0; a < na; ++a)
    for (int b = 0; b < na; ++b) c_act(a, b) = model.gram(active_vertices[a], active_vertices[b]);
  Eigen::LLT<Eigen::MatrixXd> c_llt;
  if (na > 0) c_llt.compute(c_act);

  QpProblem qp;
  qp.P = Eigen::MatrixXd::Zero(n, n);
  qp.q = Eigen::VectorXd::Zero(n);
  qp.constant = constant * scale;
  for (int bi = 0; bi < nblk; ++bi) {
    const ObjectiveBlock& blk = model.blocks[active_blocks[bi]];
    const double w2 = 2.0 * blk.weight * scale;
    qp.P.block(bi * na, bi * na, na, na) = w2 * c_act;
    for (int a = 0; a < na; ++a) qp.q(alpha_col(bi, a)) = -w2 * blk.cross(active_vertices[a]);
  }

  // Rows.
  enum class RowKind { LinkUpper, LinkLower, Model, Cut, Box };
  struct RowTag {
    RowKind kind;
    int a, b;  // (block, vertex) for links; index otherwise
  };
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> lv, uv;
  std::vector<RowTag> tags;
  auto add_row = [&](std::vector<std::pair<int, double>> coeffs, double l, double u, RowTag tag) {
    double norm = 0.0;
    for (auto& [c, v] : coeffs) norm = std::max(norm, std::abs(v));
    const double s = norm > 0.0 ? 1.0 / norm : 1.0;
    const int r = static_cast<int>(tags.size());
    for (auto& [c, v] : coeffs) trip.emplace_back(r, c, v * s);
    lv.push_back(std::isfinite(l) ? l * s : l);
    uv.push_back(std::isfinite(u) ? u * s : u);
    tags.push_back(tag);
  };

  for (int bi = 0; bi < nblk; ++bi) {
    const int i = active_blocks[bi];
    const double m = model.blocks[i].link_bound;
    for (int v : active_vertices) {
      if (model.indicators[v].always_on) continue;
      std::vector<std::pair<int, double>> up{{alpha_col(bi, vpos[v]), 1.0}}, dn{{alpha_col(bi, vpos[v]), 1.0}};
      for (int j : free_bins[v]) {
        up.emplace_back(z_col(j), -m);
        dn.emplace_back(z_col(j), m);
      }
      add_row(std::move(up), -kInf, m * fixed_sum[v], {RowKind::LinkUpper, i, v});
      add_row(std::move(dn), -m * fixed_sum[v], kInf, {RowKind::LinkLower, i, v});
    }
  }

  auto add_linear = [&](const LinearConstraint& c, RowKind kind, int idx) -> bool {
    std::vector<std::pair<int, double>> coeffs;
    double fixed = 0.0;
    for (auto [j, a] : c.terms) {
      if (free_pos[j] >= 0) coeffs.emplace_back(z_col(j), a);
      else fixed += a * lo[j];
    }
    const double rhs = c.rhs - fixed;
    const double tol = 1e-9 * std::max(1.0, std::abs(c.rhs));
    if (coeffs.empty()) {
      if (rhs < -tol) return false;
      if (c.sense == Sense::Equal && rhs > tol) return false;
      return true;
    }
    add_row(std::move(coeffs), c.sense == Sense::Equal ? rhs : -kInf, rhs, {kind, idx, 0});
    return true;
  };
  for (std::size_t r = 0; r < model.constraints.size(); ++r)
    if (!add_linear(model.constraints[r], RowKind::Model, static_cast<int>(r))) {
      res.status = RelaxStatus::Infeasible;
      res.value = kInf;
      return res;
    }
  for (std::size_t r = 0; r < cuts.size(); ++r)
    if (!add_linear(cuts[r], RowKind::Cut, static_cast<int>(r))) {
      res.status = RelaxStatus::Infeasible;
      res.value = kInf;
      return res;
    }
  const int first_box = static_cast<int>(tags.size());
  for (int j : free_vars) add_row({{z_col(j), 1.0}}, lo[j], hi[j], {RowKind::Box, j, 0});

  const int nrows = static_cast<int>(tags.size());
  qp.A.resize(nrows, n);
  qp.A.setFromTriplets(trip.begin(), trip.end());
  qp.A.makeCompressed();
  qp.l = Eigen::Map<Eigen::VectorXd>(lv.data(), nrows);
  qp.u = Eigen::Map<Eigen::VectorXd>(uv.data(), nrows);

  // Dual function. Box-row multipliers are dropped and the box [lo, hi] is
  // minimized over exactly instead.
  const SparseRowMatrix at_full = qp.A.transpose();
  auto dual_bound = [&](const Eigen::VectorXd& y) -> double {
    Eigen::VectorXd yp = y;
    double support = 0.0;
    for (int r = 0; r < nrows; ++r) {
      if (r >= first_box) {
        yp(r) = 0.0;
        continue;
      }
      if (yp(r) > 0.0) {
        if (!std::isfinite(qp.u(r))) yp(r) = 0.0;
        else support -= qp.u(r) * yp(r);
      } else if (yp(r) < 0.0) {
        if (!std::isfinite(qp.l(r))) yp(r) = 0.0;
        else support -= qp.l(r) * yp(r);
      }
    }
    const Eigen::VectorXd aty = at_full * yp;
    double val = qp.constant + support;
    for (int bi = 0; bi < nblk; ++bi) {
      const double w2 = 2.0 * model.blocks[active_blocks[bi]].weight * scale;
      const Eigen::VectorXd r = qp.q.segment(bi * na, na) + aty.segment(bi * na, na);
      val -= 0.5 * r.dot(c_llt.solve(r)) / w2;
    }
    for (int j : free_vars) {
      const double c = aty(z_col(j));
      val += std::min(c * lo[j], c * hi[j]);
    }
    return val;
  };

  if (n == 0) {
    res.value = qp.constant / scale;
    return res;
  }

  Eigen::VectorXd x0, y0;
  if (warm) {
    x0 = Eigen::VectorXd::Zero(n);
    y0 = Eigen::VectorXd::Zero(nrows);
    for (int bi = 0; bi < nblk; ++bi)
      for (int a = 0; a < na; ++a) x0(alpha_col(bi, a)) = warm->alpha(active_blocks[bi], active_vertices[a]);
    for (int j : free_vars) x0(z_col(j)) = warm->z(j);
    for (int r = 0; r < nrows; ++r) {
      const RowTag& t = tags[r];
      double v = 0.0;
      switch (t.kind) {
        case RowKind::LinkUpper: v = warm->y_upper(t.a, t.b); break;
        case RowKind::LinkLower: v = warm->y_lower(t.a, t.b); break;
        case RowKind::Model: v = warm->y_model(t.a); break;
        case RowKind::Cut: v = t.a < static_cast<int>(warm->y_cut.size()) ? warm->y_cut[t.a] : 0.0; break;
        case RowKind::Box: v = warm->y_box(t.a); break;
      }
      y0(r) = v;
    }
  }

  AdmmSettings st;
  st.eps_abs = cfg.qp_abs_tol;
  st.eps_rel = cfg.qp_rel_tol;
  st.max_iter = cfg.max_qp_iterations;
  AdmmQp solver(qp, st);
  const double scaled_cutoff = std::isfinite(cutoff) ? cutoff * scale : kInf;
  AdmmResult ar = solver.solve(dual_bound, scaled_cutoff, warm ? &x0 : nullptr, warm ? &y0 : nullptr, deadline);

  res.iterations = ar.iterations;
  res.value = ar.bound / scale;
  switch (ar.status) {
    case AdmmStatus::Solved: res.status = RelaxStatus::Solved; break;
    case AdmmStatus::MaxIterations: res.status = RelaxStatus::IterationLimit; break;
    case AdmmStatus::Cutoff: res.status = RelaxStatus::Cutoff; break;
    case AdmmStatus::TimeLimit: res.status = RelaxStatus::TimeLimit; break;
  }
  for (int bi = 0; bi < nblk; ++bi)
    for (int a = 0; a < na; ++a) res.alpha(active_blocks[bi], active_vertices[a]) = ar.x(alpha_col(bi, a));
  for (int j : free_vars) res.z[j] = std::clamp(ar.x(z_col(j)), lo[j], hi[j]);

  auto ws = std::make_shared<WarmStart>();
  ws->alpha = res.alpha;
  ws->z = Eigen::Map<const Eigen::VectorXd>(res.z.data(), nb);
  ws->y_upper = Eigen::MatrixXd::Zero(n_pred, big_m);
  ws->y_lower = Eigen::MatrixXd::Zero(n_pred, big_m);
  ws->y_model = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.constraints.size()));
  ws->y_cut.assign(cuts.size(), 0.0);
  ws->y_box = Eigen::VectorXd::Zero(nb);
  for (int r = 0; r < nrows; ++r) {
    const RowTag& t = tags[r];
    const double v = ar.y(r);
    switch (t.kind) {
      case RowKind::LinkUpper: ws->y_upper(t.a, t.b) = v; break;
      case RowKind::LinkLower: ws->y_lower(t.a, t.b) = v; break;
      case RowKind::Model: ws->y_model(t.a) = v; break;
      case RowKind::Cut: ws->y_cut[t.a] = v; break;
      case RowKind::Box: ws->y_box(t.a) = v; break;
    }
  }
  res.warm = std::move(ws);
  return res;
}

// Convenience overload: fixing[j] in {-1 (free), 0, 1}, merged with the
// model's own bounds, no propagation.
inline RelaxationResult qp_relax(const MiqpModel& model, std::span<const std::int8_t> fixing,
                                 const SolverConfig& cfg = {}) {
  std::vector<double> lo = model.binary_lower, hi = model.binary_upper;
  for (int j = 0; j < model.num_binaries; ++j)
    if (fixing[j] >= 0) lo[j] = hi[j] = fixing[j];
  const auto cuts = model.cut_pool->snapshot();
  return qp_relax(model, lo, hi, cuts, cfg);
}

// ---------------------------------------------------------------------------
// Branching.

struct PseudoCosts {
  std::vector<double> down_sum, up_sum;
  std::vector<int> down_n, up_n;

  explicit PseudoCosts(int n = 0) : down_sum(n, 0.0), up_sum(n, 0.0), down_n(n, 0), up_n(n, 0) {}

  void record(int j, bool up, double delta_per_unit) {
    if (!std::isfinite(delta_per_unit)) return;
    (up ? up_sum : down_sum)[j] += std::max(0.0, delta_per_unit);
    ++(up ? up_n : down_n)[j];
  }
};

// Index of the variable to branch on, or -1 when every free entry of z is
// integral within tol. Ties go to the lowest index.
inline int select_branch_variable(std::span<const double> z, std::span<const double> lo,
                                  std::span<const double> hi, Branching rule, double tol,
                                  const PseudoCosts* pc = nullptr) {
  int best = -1;
  double best_score = -1.0;
  double avg_down = 1.0, avg_up = 1.0;
  if (rule == Branching::PseudoCost && pc) {
    double sd = 0, su = 0;
    int nd = 0, nu = 0;
    for (std::size_t j = 0; j < pc->down_n.size(); ++j) {
      sd += pc->down_sum[j];
      nd += pc->down_n[j];
      su += pc->up_sum[j];
      nu += pc->up_n[j];
    }
    if (nd > 0) avg_down = sd / nd;
    if (nu > 0) avg_up = su / nu;
  }
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (lo[j] == hi[j]) continue;
    const double f = z[j] - std::floor(z[j]);
    const double frac = std::min(f, 1.0 - f);
    if (frac <= tol) continue;
    double score = frac;
    if (rule == Branching::PseudoCost && pc) {
      const double d = pc->down_n[j] ? pc->down_sum[j] / pc->down_n[j] : avg_down;
      const double u = pc->up_n[j] ? pc->up_sum[j] / pc->up_n[j] : avg_up;
      score = std::max(d * f, 1e-6) * std::max(u * (1.0 - f), 1e-6);
    }
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(j);
    }
  }
  return best;
}

struct BnbNode {
  std::vector<std::int8_t> fixing;  // -1 free
  double bound = -kInf;
  int depth = 0;
  long id = 0;
  std::shared_ptr<const WarmStart> warm;
  // How this node was created, for pseudo-cost updates.
  int branch_var = -1;
  bool branch_up = false;
  double branch_frac = 0.0;
  double parent_value = -kInf;
};

// Two children of `node` split on variable j; the 0-child comes first.
inline std::pair<BnbNode, BnbNode> branch(const BnbNode& node, int j, double zj, double node_value) {
  BnbNode down = node, up = node;
  down.fixing[j] = 0;
  up.fixing[j] = 1;
  for (BnbNode* c : {&down, &up}) {
    c->depth = node.depth + 1;
    c->branch_var = j;
    c->parent_value = node_value;
    c->bound = std::max(node.bound, node_value);
  }
  down.branch_up = false;
  down.branch_frac = zj;
  up.branch_up = true;
  up.branch_frac = 1.0 - zj;
  return {std::move(down), std::move(up)};
}

// ---------------------------------------------------------------------------
// Integer candidates.

struct CandidateOutcome {
  bool accepted = false;
  double objective = kInf;
  std::vector<LinearConstraint> cuts;  // newly pooled cuts
};

// Runs the lazy-cut generator on an integral, row-feasible assignment. Cuts
// go into the model's pool and reject the candidate; otherwise the objective
// is evaluated with exactly optimal coefficients on the measured support.
inline CandidateOutcome on_integer_candidate(const MiqpModel& model, std::span<const int> assignment) {
  CandidateOutcome out;
  if (model.cut_generator) {
    for (auto& c : model.cut_generator(assignment))
      if (model.cut_pool->add(c)) out.cuts.push_back(std::move(c));
    if (!out.cuts.empty()) return out;
  }
  out.accepted = true;
  out.objective = model.integer_objective(assignment);
  return out;
}

inline Eigen::MatrixXd optimal_coefficients(const MiqpModel& model, std::span<const int> assignment) {
  const auto sup = model.support(assignment);
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(model.num_predictions(), model.num_observations());
  for (int i = 0; i < model.num_predictions(); ++i) {
    const auto& b = model.blocks[i];
    QuadraticForm q{model.gram, b.cross, b.prior};
    alpha.row(i) = restricted_optimal_g(q, sup).first.transpose();
  }
  return alpha;
}

// ---------------------------------------------------------------------------
// The search.

class BranchAndBound {
 public:
  BranchAndBound(const MiqpModel& model, SolverConfig cfg) : model_(model), cfg_(std::move(cfg)), pc_(model.num_binaries) {}

  SolveState run() {
    start_ = Clock::now();
    deadline_ = start_ + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg_.time_limit));
    empty_error_ = 0.0;
    for (const auto& b : model_.blocks) empty_error_ += b.weight * b.prior;

    BnbNode root;
    root.fixing.assign(model_.num_binaries, -1);
    push(std::move(root));

    bool timed_out = false;
    while (!open_.empty()) {
      if (Clock::now() > deadline_ || (cfg_.node_limit >= 0 && state_.nodes_explored >= cfg_.node_limit)) {
        timed_out = true;
        break;
      }
      if (state_.incumbent && relative_gap(state_.incumbent_objective, lower_bound()) <= cfg_.gap_tolerance) break;
      BnbNode node = pop();
      if (node.bound >= prune_threshold()) {
        close(node.bound);
        continue;
      }
      process(std::move(node));
      update_bound_log();
    }

    if (!timed_out) {
      // Exhausted or gap closed.
      state_.status = state_.incumbent ? SolveStatus::Optimal : SolveStatus::Infeasible;
    } else {
      state_.status = state_.incumbent ? SolveStatus::TimeoutFeasible : SolveStatus::TimeoutNoIncumbent;
    }
    state_.global_lower_bound = lower_bound();
    state_.gap = relative_gap(state_.incumbent_objective, state_.global_lower_bound);
    if (state_.incumbent) state_.incumbent_alpha = optimal_coefficients(model_, *state_.incumbent);
    state_.wall_time = elapsed();
    emit(EventKind::Bound);
    return std::move(state_);
  }

 private:
  using Clock = std::chrono::steady_clock;

  struct QueueKey {
    double bound;
    int depth;
    long id;
  };
  struct KeyLess {
    NodeSelection sel;
    bool operator()(const QueueKey& a, const QueueKey& b) const {
      if (sel == NodeSelection::DepthFirst) {
        if (a.depth != b.depth) return a.depth > b.depth;
        return a.id > b.id;
      }
      if (a.bound != b.bound) return a.bound < b.bound;
      if (a.depth != b.depth) return a.depth > b.depth;
      return a.id > b.id;
    }
  };

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  void emit(EventKind k) {
    SolveEvent e;
    e.time = elapsed();
    e.kind = k;
    e.nodes = state_.nodes_explored;
    e.cuts = state_.cuts_added;
    e.incumbent = state_.incumbent_objective;
    e.bound = last_logged_bound_;
    state_.log.push_back(e);
    if (cfg_.on_event) cfg_.on_event(e);
  }

  // Nodes with bound at or above this value cannot improve the incumbent by
  // more than the gap tolerance. Without an incumbent, anything above the
  // empty-support objective (an upper bound on every feasible point) is infeasible.
  double prune_threshold() const {
    if (state_.incumbent) {
      const double ub = state_.incumbent_objective;
      return ub - cfg_.gap_tolerance * std::max(std::abs(ub), 1e-10);
    }
    return empty_error_ + 1e-9 * std::max(1.0, std::abs(empty_error_));
  }

  double lower_bound() const {
    double lb = std::min(closed_floor_, state_.incumbent_objective);
    if (!open_bounds_.empty()) lb = std::min(lb, *open_bounds_.begin());
    return lb;
  }

  void update_bound_log() {
    const double lb = lower_bound();
    if (lb > last_logged_bound_) {
      last_logged_bound_ = lb;
      state_.global_lower_bound = lb;
      emit(EventKind::Bound);
    }
  }

  void close(double bound) { closed_floor_ = std::min(closed_floor_, bound); }

  void push(BnbNode n) {
    n.id = next_id_++;
    if (open_.size() > 20000) n.warm.reset();
    const QueueKey key{n.bound, n.depth, n.id};
    open_bounds_.insert(n.bound);
    open_.emplace(key, std::move(n));
  }

  BnbNode pop() {
    auto it = open_.begin();
    BnbNode n = std::move(it->second);
    open_.erase(it);
    open_bounds_.erase(open_bounds_.find(n.bound));
    return n;
  }

  void consider_incumbent(const Assignment& a, double obj) {
    const double ub = state_.incumbent_objective;
    bool take = obj < ub - cfg_.incumbent_tol;
    if (!take && state_.incumbent && std::abs(obj - ub) <= cfg_.incumbent_tol && model_.prefer)
      take = model_.prefer(a, *state_.incumbent);
    if (!take) return;
    state_.incumbent = a;
    state_.incumbent_objective = std::min(obj, ub);
    emit(EventKind::Incumbent);
  }

  // Returns true if new cuts were pooled.
  bool try_candidate(const Assignment& a) {
    if (!model_.satisfies_rows(a)) return false;
    CandidateOutcome c = on_integer_candidate(model_, a);
    if (!c.accepted) {
      state_.cuts_added += static_cast<long>(c.cuts.size());
      if (!c.cuts.empty()) emit(EventKind::Cut);
      return !c.cuts.empty();
    }
    consider_incumbent(a, c.objective);
    return false;
  }

  void process(BnbNode node) {
    ++state_.nodes_explored;
    if (cfg_.log_node_every > 0 && (state_.nodes_explored == 1 || state_.nodes_explored % cfg_.log_node_every == 0))
      emit(EventKind::Node);

    const int nb = model_.num_binaries;
    for (int round = 0; round < 1000; ++round) {
      std::vector<double> lo = model_.binary_lower, hi = model_.binary_upper;
      for (int j = 0; j < nb; ++j) {
        if (node.fixing[j] < 0) continue;
        if (node.fixing[j] < lo[j] || node.fixing[j] > hi[j]) {
          close(kInf);
          return;
        }
        lo[j] = hi[j] = node.fixing[j];
      }
      const auto cuts = model_.cut_pool->snapshot();
      std::vector<const LinearConstraint*> rows;
      for (const auto& c : model_.constraints) rows.push_back(&c);
      for (const auto& c : cuts) rows.push_back(&c);
      if (!propagate(rows, lo, hi)) {
        close(kInf);
        return;
      }

      bool all_fixed = true;
      for (int j = 0; j < nb; ++j) all_fixed = all_fixed && lo[j] == hi[j];
      if (all_fixed) {
        Assignment a(nb);
        for (int j = 0; j < nb; ++j) a[j] = static_cast<int>(lo[j]);
        if (!model_.satisfies_rows(a)) {
          close(kInf);
          return;
        }
        CandidateOutcome c = on_integer_candidate(model_, a);
        if (!c.accepted) {
          state_.cuts_added += static_cast<long>(c.cuts.size());
          emit(EventKind::Cut);
          continue;  // re-propagate: the new cut excludes this point
        }
        consider_incumbent(a, c.objective);
        close(std::max(node.bound, c.objective));
        return;
      }

      RelaxationResult rel = qp_relax(model_, lo, hi, cuts, cfg_, prune_threshold(), node.warm.get(), deadline_);
      const double value = std::max(node.bound, rel.value);
      if (node.branch_var >= 0 && std::isfinite(rel.value) && node.branch_frac > 0.0)
        pc_.record(node.branch_var, node.branch_up, (rel.value - node.parent_value) / node.branch_frac);

      if (rel.status == RelaxStatus::Infeasible || value >= prune_threshold()) {
        close(value);
        return;
      }

      if (cfg_.use_heuristic && model_.rounding_heuristic) {
        if (auto cand = model_.rounding_heuristic(rel.z)) try_candidate(*cand);
        if (value >= prune_threshold()) {
          close(value);
          return;
        }
      }

      int j = select_branch_variable(rel.z, lo, hi, cfg_.branching, cfg_.integrality_tol, &pc_);
      if (j < 0) {
        Assignment a(nb);
        for (int q = 0; q < nb; ++q) a[q] = static_cast<int>(std::lround(rel.z[q]));
        if (try_candidate(a)) continue;  // cuts pooled: re-solve this node
        if (value >= prune_threshold()) {
          close(value);
          return;
        }
        // Integral but not provably optimal here: split on the first free binary.
        for (int q = 0; q < nb && j < 0; ++q)
          if (lo[q] != hi[q]) j = q;
      }

      // Children inherit the propagated fixings.
      BnbNode base = node;
      for (int q = 0; q < nb; ++q)
        if (lo[q] == hi[q]) base.fixing[q] = static_cast<std::int8_t>(lo[q]);
      base.warm = rel.warm;
      auto [down, up] = branch(base, j, rel.z[j], value);
      if (rel.z[j] >= 0.5) {
        push(std::move(down));
        push(std::move(up));
      } else {
        push(std::move(up));
        push(std::move(down));
      }
      return;
    }
    throw InternalError("cut loop did not terminate");
  }

  const MiqpModel& model_;
  SolverConfig cfg_;
  PseudoCosts pc_;
  SolveState state_;
  Clock::time_point start_, deadline_;
  double empty_error_ = 0.0;
  double closed_floor_ = kInf;
  double last_logged_bound_ = -kInf;
  long next_id_ = 0;
  std::map<QueueKey, BnbNode, KeyLess> open_{KeyLess{cfg_.node_selection}};
  std::multiset<double> open_bounds_;
};

inline SolveState solve(const MiqpModel& model, const SolverConfig& cfg = {}) {
  if (cfg.gap_tolerance <= 0.0 || cfg.qp_abs_tol <= 0.0 || cfg.qp_rel_tol <= 0.0 || cfg.integrality_tol <= 0.0)
    throw InvalidInput("solver tolerances must be positive");
  if (static_cast<int>(model.binary_lower.size()) != model.num_binaries ||
      static_cast<int>(model.binary_upper.size()) != model.num_binaries ||
      static_cast<int>(model.indicators.size()) != model.num_observations())
    throw InvalidInput("malformed model");
  return BranchAndBound(model, cfg).run();
}

}  // namespace ipp
