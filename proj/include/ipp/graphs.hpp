#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipp/errors.hpp"
#include "ipp/randfield.hpp"
#include "ipp/rng.hpp"

namespace ipp {

struct Arc {
  int from = 0;
  int to = 0;
  double cost = 0.0;
  bool operator==(const Arc&) const = default;
};

class ObservationGraph {
 public:
  ObservationGraph() = default;
  ObservationGraph(std::vector<Point> vertices, std::vector<Arc> arcs, int start, int end)
      : vertices_(std::move(vertices)), arcs_(std::move(arcs)), start_(start), end_(end) {
    validate();
    index();
  }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  int start() const { return start_; }
  int end() const { return end_; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_arcs() const { return static_cast<int>(arcs_.size()); }

  // Arc indices leaving / entering v.
  const std::vector<int>& out_arcs(int v) const { return out_[v]; }
  const std::vector<int>& in_arcs(int v) const { return in_[v]; }

  // Index of arc u->v, or -1.
  int find_arc(int u, int v) const {
    auto it = arc_index_.find({u, v});
    return it == arc_index_.end() ? -1 : it->second;
  }

 private:
  void validate() const {
    const int m = num_vertices();
    if (m < 2) throw InvalidInput("graph needs at least two vertices");
    if (start_ < 0 || start_ >= m || end_ < 0 || end_ >= m)
      throw InvalidInput("start/end index out of range");
    if (start_ == end_) throw InvalidInput("start and end must differ");
    require_distinct(vertices_);
    for (const Arc& a : arcs_) {
      if (a.from < 0 || a.from >= m || a.to < 0 || a.to >= m)
        throw InvalidInput("arc endpoint out of range");
      if (a.from == a.to) throw InvalidInput("self-loop at vertex " + std::to_string(a.from));
      if (!(a.cost > 0.0) || !std::isfinite(a.cost)) throw InvalidInput("arc cost must be positive");
    }
  }

  void index() {
    out_.assign(vertices_.size(), {});
    in_.assign(vertices_.size(), {});
    for (int k = 0; k < num_arcs(); ++k) {
      const Arc& a = arcs_[k];
      if (!arc_index_.emplace(std::pair{a.from, a.to}, k).second)
        throw InvalidInput("parallel arcs " + std::to_string(a.from) + "->" + std::to_string(a.to));
      out_[a.from].push_back(k);
      in_[a.to].push_back(k);
    }
  }

  std::vector<Point> vertices_;
  std::vector<Arc> arcs_;
  int start_ = 0;
  int end_ = 1;
  std::vector<std::vector<int>> out_, in_;
  std::map<std::pair<int, int>, int> arc_index_;
};

struct PathSolution {
  std::vector<int> vertex_sequence;
  std::vector<int> arc_set;  // arc indices in traversal order
  double length = 0.0;
  double objective = 0.0;
};

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

// Single-source shortest distances. `forward` follows arcs, otherwise runs on
// the reversed graph (distances *to* source). Vertices with blocked[v] set are
// never entered.
inline std::vector<double> dijkstra(const ObservationGraph& g, int source, bool forward = true,
                                    const std::vector<char>* blocked = nullptr) {
  std::vector<double> dist(g.num_vertices(), kUnreachable);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[source] = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    const auto& adj = forward ? g.out_arcs(u) : g.in_arcs(u);
    for (int k : adj) {
      const Arc& a = g.arcs()[k];
      const int v = forward ? a.to : a.from;
      if (blocked && (*blocked)[v]) continue;
      const double nd = d + a.cost;
      if (nd < dist[v]) {
        dist[v] = nd;
        pq.emplace(nd, v);
      }
    }
  }
  return dist;
}

inline double shortest_path_length(const ObservationGraph& g) {
  return dijkstra(g, g.start())[g.end()];
}

// n x n lattice, 4-neighbour arcs in both directions, start (0,0), end (n-1,n-1).
inline ObservationGraph grid_graph(int n, double edge_length = 1.0) {
  if (n < 2) throw InvalidInput("grid_graph needs n >= 2");
  if (!(edge_length > 0.0)) throw InvalidInput("grid edge length must be positive");
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) pts.push_back(Point{c * edge_length, r * edge_length});
  std::vector<Arc> arcs;
  auto id = [n](int r, int c) { return r * n + c; };
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const int u = id(r, c);
      if (c + 1 < n) {
        arcs.push_back({u, id(r, c + 1), edge_length});
        arcs.push_back({id(r, c + 1), u, edge_length});
      }
      if (r + 1 < n) {
        arcs.push_back({u, id(r + 1, c), edge_length});
        arcs.push_back({id(r + 1, c), u, edge_length});
      }
    }
  }
  return ObservationGraph(std::move(pts), std::move(arcs), 0, n * n - 1);
}

struct Rect {
  double xmin = 0.0, xmax = 720.0;
  double ymin = 0.0, ymax = 1240.0;
};

namespace detail {

inline ObservationGraph prm_attempt(const Rect& box, int m, int k, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<Point> pts;
  pts.reserve(m);
  for (int i = 0; i < m; ++i) {
    const double x = rng.uniform(box.xmin, box.xmax);
    const double y = rng.uniform(box.ymin, box.ymax);
    pts.push_back(Point{x, y});
  }
  const int kk = std::min(k, m - 1);
  std::vector<std::pair<int, int>> edges;
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> d(m);
    for (int j = 0; j < m; ++j) d[j] = distance(pts[i], pts[j]);
    order.erase(order.begin() + i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d[a] < d[b]; });
    for (int q = 0; q < kk; ++q) edges.emplace_back(std::min(i, order[q]), std::max(i, order[q]));
    order.resize(m);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<Arc> arcs;
  arcs.reserve(edges.size() * 2);
  for (auto [a, b] : edges) {
    const double c = distance(pts[a], pts[b]);
    arcs.push_back({a, b, c});
    arcs.push_back({b, a, c});
  }
  int s = 0, t = 1;
  double far = -1.0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (const double d = distance(pts[i], pts[j]); d > far) {
        far = d;
        s = i;
        t = j;
      }
  return ObservationGraph(std::move(pts), std::move(arcs), s, t);
}

}  // namespace detail

// Probabilistic roadmap: m uniform samples, each joined (both directions) to
// its k nearest neighbours. Endpoints are the mutually farthest pair. If s and
// t end up disconnected the seed is incremented, up to max_retries times.
inline ObservationGraph prm_graph(const Rect& box, int m, int connection_factor, std::uint64_t seed,
                                  int max_retries = 64) {
  if (m < 2) throw InvalidInput("prm_graph needs at least two vertices");
  if (connection_factor < 1) throw InvalidInput("prm_graph connection factor must be >= 1");
  if (!(box.xmax > box.xmin) || !(box.ymax > box.ymin)) throw InvalidInput("degenerate PRM bounds");
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    ObservationGraph g = detail::prm_attempt(box, m, connection_factor, seed + attempt);
    if (std::isfinite(shortest_path_length(g))) return g;
  }
  throw InfeasibleInstance("prm_graph: start and end disconnected after retries");
}

inline double path_length(const ObservationGraph& g, std::span<const int> seq) {
  if (seq.size() < 2) throw InvalidInput("a path needs at least two vertices");
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const int k = g.find_arc(seq[i], seq[i + 1]);
    if (k < 0)
      throw InvalidInput("missing arc " + std::to_string(seq[i]) + "->" + std::to_string(seq[i + 1]));
    len += g.arcs()[k].cost;
  }
  return len;
}

struct SubtourDecomposition {
  std::vector<int> path;                     // s ... t
  std::vector<std::vector<int>> cycles;      // vertices in cycle order
};

// Splits a degree-feasible arc selection (out(s)=1, in(t)=1, in=out<=1 at the
// interior vertices) into its s-t walk and disjoint directed cycles.
inline SubtourDecomposition decompose_selection(const ObservationGraph& g,
                                                std::span<const int> arc_selection) {
  const int m = g.num_vertices();
  std::vector<int> succ(m, -1), indeg(m, 0), outdeg(m, 0);
  for (int k : arc_selection) {
    if (k < 0 || k >= g.num_arcs()) throw InternalError("arc index out of range");
    const Arc& a = g.arcs()[k];
    succ[a.from] = a.to;
    ++outdeg[a.from];
    ++indeg[a.to];
  }
  for (int v = 0; v < m; ++v) {
    const bool ok = v == g.start()  ? (outdeg[v] == 1 && indeg[v] == 0)
                    : v == g.end() ? (indeg[v] == 1 && outdeg[v] == 0)
                                   : (indeg[v] == outdeg[v] && outdeg[v] <= 1);
    if (!ok) throw InternalError("arc selection violates degree constraints at vertex " + std::to_string(v));
  }
  SubtourDecomposition out;
  std::vector<char> seen(m, 0);
  int v = g.start();
  while (v != -1 && !seen[v]) {
    seen[v] = 1;
    out.path.push_back(v);
    v = succ[v];
  }
  if (out.path.back() != g.end()) throw InternalError("s-t walk does not reach t");
  for (int u = 0; u < m; ++u) {
    if (seen[u] || outdeg[u] == 0) continue;
    std::vector<int> cyc;
    for (int w = u; !seen[w]; w = succ[w]) {
      seen[w] = 1;
      cyc.push_back(w);
    }
    out.cycles.push_back(std::move(cyc));
  }
  return out;
}

inline std::vector<std::vector<int>> find_subtours(const ObservationGraph& g,
                                                   std::span<const int> arc_selection) {
  return decompose_selection(g, arc_selection).cycles;
}

}  // namespace ipp
