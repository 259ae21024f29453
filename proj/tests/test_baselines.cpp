#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.hpp"

using namespace ipp;
using fixtures::grid_instance;
using fixtures::rel_diff;
using fixtures::ss_instance;

namespace {

// Every simple s-t path of the graph, regardless of budget.
std::vector<std::vector<int>> all_simple_paths(const ObservationGraph& g) {
  std::vector<std::vector<int>> out;
  std::vector<int> path{g.start()};
  std::vector<char> seen(g.num_vertices(), 0);
  seen[g.start()] = 1;
  auto rec = [&](auto&& self) -> void {
    if (path.back() == g.end()) {
      out.push_back(path);
      return;
    }
    for (int k : g.out_arcs(path.back())) {
      const int v = g.arcs()[k].to;
      if (seen[v]) continue;
      seen[v] = 1;
      path.push_back(v);
      self(self);
      path.pop_back();
      seen[v] = 0;
    }
  };
  rec(rec);
  return out;
}

}  // namespace

TEST(BruteForceIpp, PathCounts) {
  EXPECT_EQ(brute_force_ipp(grid_instance(2, 2.0, 3, 1)).paths_evaluated, 2);
  EXPECT_EQ(brute_force_ipp(grid_instance(3, 4.0, 3, 1)).paths_evaluated, 6);
  EXPECT_EQ(brute_force_ipp(grid_instance(3, 6.0, 3, 1)).paths_evaluated, 10);
  EXPECT_EQ(brute_force_ipp(grid_instance(3, 8.0, 3, 1)).paths_evaluated, 12);
  EXPECT_EQ(brute_force_ipp(grid_instance(3, 7.5, 3, 1)).paths_evaluated, 10);
}

TEST(BruteForceIpp, ShortestBudgetPicksBestGeodesic) {
  const auto in = grid_instance(3, 4.0, 4, 13);
  double best = kInf;
  for (const auto& p : all_simple_paths(in.graph)) {
    if (p.size() != 5) continue;
    std::vector<Point> pts;
    for (int v : p) pts.push_back(in.graph.vertices()[v]);
    best = std::min(best, total_weighted_error(in.field, in.omega, pts));
  }
  EXPECT_NEAR(brute_force_ipp(in).best.objective, best, 1e-12);
}

TEST(BruteForceIpp, NoPathBeatsTheOracle) {
  const auto in = grid_instance(3, 6.0, 4, 21);
  const auto res = brute_force_ipp(in);
  for (const auto& p : all_simple_paths(in.graph)) {
    if (path_length(in.graph, p) > in.budget) continue;
    std::vector<Point> pts;
    for (int v : p) pts.push_back(in.graph.vertices()[v]);
    EXPECT_LE(res.best.objective, total_weighted_error(in.field, in.omega, pts) + 1e-12);
  }
  EXPECT_DOUBLE_EQ(res.best.length, path_length(in.graph, res.best.vertex_sequence));
}

TEST(BruteForceIpp, CapIsEnforced) {
  EXPECT_THROW(brute_force_ipp(grid_instance(3, 8.0, 3, 1), 5), InvalidInput);
}

TEST(PathBnb, RootBoundBelowOptimum) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = grid_instance(3, 6.0, 4, seed);
    const auto res = bnb_paths(in, 60.0);
    ASSERT_TRUE(res.best);
    EXPECT_LE(res.root_bound, res.best->objective + 1e-12);
    EXPECT_EQ(res.status, SolveStatus::Optimal);
  }
}

TEST(PathBnb, BoundIsMonotoneAlongEveryPath) {
  for (double budget : {4.0, 6.0, 8.0}) {
    const auto in = grid_instance(3, budget, 4, 5);
    const SubsetErrorEvaluator eval(in.field, in.graph.vertices(), in.omega);
    const auto& g = in.graph;
    for (const auto& p : all_simple_paths(g)) {
      if (path_length(g, p) > budget) continue;
      const double obj = eval(p);
      std::vector<char> visited(g.num_vertices(), 0);
      double spent = 0.0;
      for (std::size_t len = 1; len <= p.size(); ++len) {
        visited[p[len - 1]] = 1;
        if (len > 1) spent += g.arcs()[g.find_arc(p[len - 2], p[len - 1])].cost;
        const std::span<const int> prefix(p.data(), len);
        const double b = detail::completion_bound(g, eval, prefix, visited, budget - spent);
        EXPECT_LE(b, obj + 1e-12);
      }
    }
  }
}

TEST(PathBnb, AgreesWithEnumeration) {
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (double budget : {4.0, 6.0, 8.0}) {
      const auto in = grid_instance(3, budget, 4, seed);
      const auto res = bnb_paths(in, 60.0);
      ASSERT_TRUE(res.best);
      EXPECT_LT(rel_diff(res.best->objective, brute_force_ipp(in).best.objective), 1e-12);
    }
}

TEST(PathBnb, AgreesWithMiqp) {
  const auto in = grid_instance(3, 6.0, 4, 77);
  const auto res = bnb_paths(in, 60.0);
  const auto m = build_ipp(in);
  const auto st = solve(m->miqp);
  ASSERT_TRUE(res.best);
  EXPECT_LT(rel_diff(res.best->objective, st.incumbent_objective), 1e-6);
}

TEST(PathBnb, ReturnedPathIsValid) {
  const auto in = grid_instance(4, 9.0, 5, 4);
  const auto res = bnb_paths(in, 60.0);
  ASSERT_TRUE(res.best);
  const auto& seq = res.best->vertex_sequence;
  EXPECT_EQ(seq.front(), in.graph.start());
  EXPECT_EQ(seq.back(), in.graph.end());
  EXPECT_LE(path_length(in.graph, seq), in.budget + 1e-9);
  std::vector<int> sorted = seq;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
}

TEST(GreedyPath, FeasibleAndNoBetterThanOptimum) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = grid_instance(3, 6.0, 4, seed);
    const auto p = greedy_path(in);
    EXPECT_LE(p.length, in.budget + 1e-9);
    EXPECT_EQ(p.vertex_sequence.back(), in.graph.end());
    EXPECT_GE(p.objective, brute_force_ipp(in).best.objective - 1e-12);
  }
}

TEST(BruteForceSs, AllPoints) {
  const auto in = ss_instance(5, 5, 3, 1);
  const auto res = brute_force_ss(in);
  EXPECT_EQ(res.subset, (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(res.evaluated, 1);
}

TEST(BruteForceSs, SinglePointIsDirectScan) {
  const auto in = ss_instance(7, 1, 3, 2);
  double best = kInf;
  int arg = -1;
  for (int v = 0; v < 7; ++v) {
    const std::vector<Point> s{in.theta[v]};
    const double e = total_weighted_error(in.field, in.omega, s);
    if (e < best) {
      best = e;
      arg = v;
    }
  }
  const auto res = brute_force_ss(in);
  EXPECT_EQ(res.subset, std::vector<int>{arg});
  EXPECT_NEAR(res.objective, best, 1e-12);
}

TEST(BruteForceSs, MatchesMiqp) {
  const auto in = ss_instance(6, 3, 5, 42);
  const auto st = solve(build_sparse_ss(in));
  EXPECT_LT(rel_diff(brute_force_ss(in).objective, st.incumbent_objective), 1e-6);
}

TEST(GreedySs, SingleRoundIsExact) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = ss_instance(7, 1, 3, seed);
    EXPECT_EQ(greedy_ss(in).subset, brute_force_ss(in).subset);
  }
}

TEST(GreedySs, NeverBeatsOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = ss_instance(7, 3, 4, seed);
    EXPECT_GE(greedy_ss(in).objective, brute_force_ss(in).objective - 1e-12);
  }
}

TEST(GreedySs, RegressionFixture) {
  const auto in = ss_instance(6, 3, 5, 42);
  const auto res = greedy_ss(in);
  EXPECT_EQ(res.subset, (std::vector<int>{1, 2, 5}));
  EXPECT_NEAR(res.objective, 0.8329412747018445, 1e-12);
}

TEST(LongestPath, GridValues) {
  EXPECT_DOUBLE_EQ(longest_simple_path_length(grid_graph(2)), 2.0);
  EXPECT_DOUBLE_EQ(longest_simple_path_length(grid_graph(3)), 8.0);
  EXPECT_DOUBLE_EQ(longest_simple_path_length(grid_graph(4)), 14.0);
}
