#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "ipp/errors.hpp"
#include "ipp/estimator.hpp"
#include "ipp/graphs.hpp"
#include "ipp/model.hpp"
#include "ipp/solver.hpp"

namespace ipp {

struct PathSearchResult {
  std::optional<PathSolution> best;
  SolveStatus status = SolveStatus::TimeoutNoIncumbent;
  long nodes = 0;
  double root_bound = -kInf;
  double wall_time = 0.0;
  std::vector<SolveEvent> log;
};

namespace detail {

inline SubsetErrorEvaluator path_evaluator(const IppInstance& inst) {
  return SubsetErrorEvaluator(inst.field, inst.graph.vertices(), inst.omega);
}

// Shorter first, then lexicographic vertex sequence.
inline bool path_preferred(const std::vector<int>& a, double la, const std::vector<int>& b, double lb) {
  if (std::abs(la - lb) > 1e-9) return la < lb;
  return a < b;
}

// Error of the path plus every vertex that could still be appended on the
// way to t (head distance + distance to t within the remaining budget, both
// avoiding the path). f is nonincreasing under set growth, so this bounds
// every completion. Infinite when t is out of reach.
inline double completion_bound(const ObservationGraph& g, const SubsetErrorEvaluator& eval,
                               std::span<const int> path, std::span<const char> visited, double remaining) {
  const int head = path.back();
  if (head == g.end()) return eval(path);
  std::vector<char> blocked(visited.begin(), visited.end());
  blocked[head] = 0;
  const auto from_head = dijkstra(g, head, true, &blocked);
  blocked[head] = 1;
  const auto to_t = dijkstra(g, g.end(), false, &blocked);
  if (from_head[g.end()] > remaining) return kInf;
  std::vector<int> reach(path.begin(), path.end());
  for (int v = 0; v < g.num_vertices(); ++v)
    if (!visited[v] && from_head[v] + to_t[v] <= remaining) reach.push_back(v);
  return eval(reach);
}

class PathBnb {
 public:
  PathBnb(const IppInstance& inst, double time_limit)
      : inst_(inst), g_(inst.graph), eval_(path_evaluator(inst)), budget_(inst.budget * (1.0 + 1e-12)) {
    start_ = Clock::now();
    deadline_ = start_ + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(time_limit));
  }

  PathSearchResult run() {
    visited_.assign(g_.num_vertices(), 0);
    path_ = {g_.start()};
    visited_[g_.start()] = 1;
    res_.root_bound = bound_of(0.0);
    log(EventKind::Bound, res_.root_bound);
    if (std::isfinite(res_.root_bound)) dfs(0.0, res_.root_bound);
    res_.status = timed_out_ ? (res_.best ? SolveStatus::TimeoutFeasible : SolveStatus::TimeoutNoIncumbent)
                             : (res_.best ? SolveStatus::Optimal : SolveStatus::Infeasible);
    res_.wall_time = elapsed();
    return std::move(res_);
  }

 private:
  using Clock = std::chrono::steady_clock;

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  void log(EventKind k, double bound = -kInf) {
    SolveEvent e;
    e.time = elapsed();
    e.kind = k;
    e.nodes = res_.nodes;
    e.incumbent = res_.best ? res_.best->objective : kInf;
    e.bound = bound;
    res_.log.push_back(e);
  }

  double bound_of(double spent) {
    return completion_bound(g_, eval_, path_, visited_, budget_ - spent);
  }

  void dfs(double spent, double bound) {
    if (timed_out_ || Clock::now() > deadline_) {
      timed_out_ = true;
      return;
    }
    ++res_.nodes;
    if (res_.nodes % 1000 == 0) log(EventKind::Node);
    const int head = path_.back();
    if (head == g_.end()) {
      const double obj = eval_(path_);
      const bool better = !res_.best || obj < res_.best->objective - 1e-12 ||
                          (std::abs(obj - res_.best->objective) <= 1e-12 &&
                           path_preferred(path_, spent, res_.best->vertex_sequence, res_.best->length));
      if (better) {
        PathSolution p;
        p.vertex_sequence = path_;
        for (std::size_t i = 0; i + 1 < path_.size(); ++i) p.arc_set.push_back(g_.find_arc(path_[i], path_[i + 1]));
        p.length = spent;
        p.objective = obj;
        res_.best = std::move(p);
        log(EventKind::Incumbent);
      }
      return;
    }
    if (res_.best && bound >= res_.best->objective - 1e-12) return;

    struct Child {
      double bound;
      int arc;
    };
    std::vector<Child> children;
    for (int k : g_.out_arcs(head)) {
      const Arc& a = g_.arcs()[k];
      if (visited_[a.to] || spent + a.cost > budget_) continue;
      visited_[a.to] = 1;
      path_.push_back(a.to);
      const double b = bound_of(spent + a.cost);
      path_.pop_back();
      visited_[a.to] = 0;
      if (std::isfinite(b)) children.push_back({b, k});
    }
    std::stable_sort(children.begin(), children.end(), [](const Child& x, const Child& y) { return x.bound < y.bound; });
    for (const Child& c : children) {
      if (res_.best && c.bound >= res_.best->objective - 1e-12) continue;
      const Arc& a = g_.arcs()[c.arc];
      visited_[a.to] = 1;
      path_.push_back(a.to);
      dfs(spent + a.cost, c.bound);
      path_.pop_back();
      visited_[a.to] = 0;
      if (timed_out_) return;
    }
  }

  const IppInstance& inst_;
  const ObservationGraph& g_;
  SubsetErrorEvaluator eval_;
  double budget_;
  Clock::time_point start_, deadline_;
  std::vector<char> visited_;
  std::vector<int> path_;
  PathSearchResult res_;
  bool timed_out_ = false;
};

}  // namespace detail

// Depth-first path-space branch and bound with the reachable-set bound;
// children are explored in ascending bound order.
inline PathSearchResult bnb_paths(const IppInstance& inst, double time_limit) {
  inst.validate();
  return detail::PathBnb(inst, time_limit).run();
}

struct PathEnumerationResult {
  PathSolution best;
  long paths_evaluated = 0;
};

// Exhaustive DFS over every simple s-t path within budget.
// Throws InvalidInput when more than `cap` search nodes would be needed.
inline PathEnumerationResult brute_force_ipp(const IppInstance& inst, long cap = 10'000'000) {
  inst.validate();
  const ObservationGraph& g = inst.graph;
  const auto eval = detail::path_evaluator(inst);
  const auto to_t = dijkstra(g, g.end(), false);
  const double budget = inst.budget * (1.0 + 1e-12);
  PathEnumerationResult out;
  bool have = false;
  long nodes = 0;
  std::vector<char> visited(g.num_vertices(), 0);
  std::vector<int> path{g.start()};
  visited[g.start()] = 1;

  auto rec = [&](auto&& self, double spent) -> void {
    if (++nodes > cap) throw InvalidInput("brute_force_ipp: enumeration cap exceeded");
    const int head = path.back();
    if (head == g.end()) {
      ++out.paths_evaluated;
      const double obj = eval(path);
      if (!have || obj < out.best.objective - 1e-12 ||
          (std::abs(obj - out.best.objective) <= 1e-12 &&
           detail::path_preferred(path, spent, out.best.vertex_sequence, out.best.length))) {
        have = true;
        out.best.vertex_sequence = path;
        out.best.length = spent;
        out.best.objective = obj;
      }
      return;
    }
    for (int k : g.out_arcs(head)) {
      const Arc& a = g.arcs()[k];
      if (visited[a.to] || spent + a.cost + to_t[a.to] > budget) continue;
      visited[a.to] = 1;
      path.push_back(a.to);
      self(self, spent + a.cost);
      path.pop_back();
      visited[a.to] = 0;
    }
  };
  rec(rec, 0.0);
  if (!have) throw InfeasibleInstance("no s-t path within budget");
  out.best.arc_set.clear();
  for (std::size_t i = 0; i + 1 < out.best.vertex_sequence.size(); ++i)
    out.best.arc_set.push_back(g.find_arc(out.best.vertex_sequence[i], out.best.vertex_sequence[i + 1]));
  out.best.length = path_length(g, out.best.vertex_sequence);
  return out;
}

// Length of the longest simple s-t path (the Hamiltonian length when one exists).
inline double longest_simple_path_length(const ObservationGraph& g, long cap = 50'000'000) {
  std::vector<char> visited(g.num_vertices(), 0);
  visited[g.start()] = 1;
  double best = -1.0;
  long nodes = 0;
  auto rec = [&](auto&& self, int u, double len) -> void {
    if (++nodes > cap) throw InvalidInput("longest_simple_path_length: cap exceeded");
    if (u == g.end()) {
      best = std::max(best, len);
      return;
    }
    for (int k : g.out_arcs(u)) {
      const Arc& a = g.arcs()[k];
      if (visited[a.to]) continue;
      visited[a.to] = 1;
      self(self, a.to, len + a.cost);
      visited[a.to] = 0;
    }
  };
  rec(rec, g.start(), 0.0);
  return best;
}

// Grows the path from s one arc at a time, taking the step whose measured set
// (path + candidate + t) has the smallest error among steps that can still
// reach t within budget.
inline PathSolution greedy_path(const IppInstance& inst) {
  inst.validate();
  const ObservationGraph& g = inst.graph;
  const auto eval = detail::path_evaluator(inst);
  const double budget = inst.budget * (1.0 + 1e-12);
  std::vector<char> visited(g.num_vertices(), 0);
  std::vector<int> path{g.start()};
  visited[g.start()] = 1;
  double spent = 0.0;
  while (path.back() != g.end()) {
    const auto to_t = dijkstra(g, g.end(), false, &visited);
    int best = -1;
    double best_obj = kInf;
    for (int k : g.out_arcs(path.back())) {
      const Arc& a = g.arcs()[k];
      if (visited[a.to] || spent + a.cost + to_t[a.to] > budget) continue;
      path.push_back(a.to);
      if (a.to != g.end()) path.push_back(g.end());
      const double obj = eval(path);
      if (a.to != g.end()) path.pop_back();
      path.pop_back();
      if (obj < best_obj - 1e-12) {
        best_obj = obj;
        best = k;
      }
    }
    if (best < 0) throw InternalError("greedy_path: dead end");
    const Arc& a = g.arcs()[best];
    spent += a.cost;
    visited[a.to] = 1;
    path.push_back(a.to);
  }
  PathSolution p;
  p.vertex_sequence = path;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) p.arc_set.push_back(g.find_arc(path[i], path[i + 1]));
  p.length = path_length(g, path);
  p.objective = eval(path);
  return p;
}

struct SubsetResult {
  std::vector<int> subset;  // ascending indices into Theta
  double objective = 0.0;
  long evaluated = 0;
};

// Exact minimum over all k-subsets, lexicographic order, first minimum kept.
inline SubsetResult brute_force_ss(const SparseSsInstance& inst, long cap = 5'000'000) {
  inst.validate();
  const int m = static_cast<int>(inst.theta.size());
  const int k = inst.k;
  double count = 1.0;
  for (int i = 0; i < k; ++i) count = count * (m - i) / (i + 1);
  if (count > static_cast<double>(cap)) throw InvalidInput("brute_force_ss: C(M,k) exceeds cap");
  const SubsetErrorEvaluator eval(inst.field, inst.theta, inst.omega);
  SubsetResult out;
  out.objective = kInf;
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    const double obj = eval(idx);
    ++out.evaluated;
    if (obj < out.objective - 1e-12) {
      out.objective = obj;
      out.subset = idx;
    }
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

// k rounds, each adding the point with the smallest resulting error.
inline SubsetResult greedy_ss(const SparseSsInstance& inst) {
  inst.validate();
  const int m = static_cast<int>(inst.theta.size());
  const SubsetErrorEvaluator eval(inst.field, inst.theta, inst.omega);
  SubsetResult out;
  std::vector<char> used(m, 0);
  for (int round = 0; round < inst.k; ++round) {
    int best = -1;
    double best_obj = kInf;
    for (int v = 0; v < m; ++v) {
      if (used[v]) continue;
      out.subset.push_back(v);
      const double obj = eval(out.subset);
      ++out.evaluated;
      out.subset.pop_back();
      if (obj < best_obj - 1e-12) {
        best_obj = obj;
        best = v;
      }
    }
    used[best] = 1;
    out.subset.push_back(best);
    out.objective = best_obj;
  }
  std::sort(out.subset.begin(), out.subset.end());
  return out;
}

}  // namespace ipp
