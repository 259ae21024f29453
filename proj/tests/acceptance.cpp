// Acceptance checks. `acceptance` runs every criterion, `acceptance N` runs
// one. Each prints a single PASS/FAIL line; the exit code is nonzero if any
// criterion failed.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "ipp/ipp.hpp"

#ifndef IPP_CLI_PATH
#define IPP_CLI_PATH "ipp"
#endif
#ifndef IPP_SAMPLES_DIR
#define IPP_SAMPLES_DIR "samples"
#endif

using namespace ipp;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

PredictionSet random_omega(SplitMix64& rng, int n, const Rect& box) {
  PredictionSet o;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(box.xmin, box.xmax);
    const double y = rng.uniform(box.ymin, box.ymax);
    o.points.push_back(Point{x, y});
    o.weights.push_back(rng.uniform());
  }
  return o;
}

std::vector<Point> random_points(SplitMix64& rng, int m, const Rect& box) {
  std::vector<Point> pts;
  for (int i = 0; i < m; ++i) {
    const double x = rng.uniform(box.xmin, box.xmax);
    const double y = rng.uniform(box.ymin, box.ymax);
    pts.push_back(Point{x, y});
  }
  return pts;
}

IppInstance grid_instance(int n, double budget, int num_predictions, std::uint64_t seed) {
  SplitMix64 rng(seed);
  IppInstance in;
  in.field = RandomFieldModel(SquaredExponential{1.0, 1.0}, 0.25);
  in.graph = grid_graph(n);
  in.omega = random_omega(rng, num_predictions, Rect{0.0, n - 1.0, 0.0, n - 1.0});
  in.budget = budget;
  return in;
}

SparseSsInstance ss_instance(int m, int k, int num_predictions, std::uint64_t seed) {
  SplitMix64 rng(seed);
  SparseSsInstance in;
  in.field = RandomFieldModel(SquaredExponential{1.0, 1.0}, 0.25);
  const Rect box{0.0, 2.0, 0.0, 2.0};
  in.theta = random_points(rng, m, box);
  in.omega = random_omega(rng, num_predictions, box);
  in.k = k;
  return in;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-12); }

// ---------------------------------------------------------------------------

Outcome kernel_constants() {
  const auto t0 = Clock::now();
  const auto g = grid_graph(5);
  const double r1 = max_correlation(SquaredExponential{1.0, 1.0}, g.vertices());
  const double r2 = max_correlation(SquaredExponential{1.0, 0.5}, g.vertices());
  const double dt = since(t0);
  Outcome o;
  o.pass = std::abs(r1 - 0.6065) <= 0.005 && std::abs(r2 - 0.1353) <= 0.005 && dt < 1.0;
  o.detail = fmt("rho_max L=1 %.6f (0.6065+-0.005), L=0.5 %.6f (0.1353+-0.005), %.3fs (<1s)", r1, r2, dt);
  return o;
}

Outcome reformulation_identity() {
  const auto t0 = Clock::now();
  SplitMix64 rng(2024);
  double worst = 0.0;
  long checks = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const bool se = inst % 2 == 0;
    const RandomFieldModel field = se ? RandomFieldModel(SquaredExponential{1.0, inst % 4 == 0 ? 1.0 : 0.5}, 0.25)
                                      : RandomFieldModel(Spherical{0.01519, 439.2}, 0.002);
    const Rect box = se ? Rect{0, 3, 0, 3} : Rect{0, 720, 0, 1240};
    const int m = 1 + static_cast<int>(rng.next() % 10);
    const int n = 1 + static_cast<int>(rng.next() % 5);
    const auto theta = random_points(rng, m, box);
    const auto omega = random_omega(rng, n, box);
    for (const Point& x : omega.points) {
      const auto q = make_quadratic_form(field, x, theta);
      for (int mask = 0; mask < (1 << m); ++mask) {
        std::vector<int> sup;
        std::vector<Point> pts;
        for (int v = 0; v < m; ++v)
          if (mask >> v & 1) {
            sup.push_back(v);
            pts.push_back(theta[v]);
          }
        // g evaluated in full (alpha' C_Theta alpha - 2 b' alpha + phi) at the
        // support-restricted minimizer, against f built from C_S directly.
        const double g = g_eval(q, restricted_optimal_g(q, sup).first);
        const double f = mse(field, x, pts);
        worst = std::max(worst, std::abs(g - f));
        ++checks;
      }
    }
  }
  const double dt = since(t0);
  Outcome o;
  o.pass = worst <= 1e-9 && dt < 30.0;
  o.detail = fmt("200 instances, %ld subset checks, max |min g - f| %.3e (<=1e-9), %.2fs (<30s)", checks, worst, dt);
  return o;
}

struct CertificateStats {
  int instances = 0;
  int agree = 0;
  double worst_rel = 0.0;
  double worst_trace_excess = -kInf;  // max over traces of (bound - oracle)
  double worst_final_gap = 0.0;
  int optimal = 0;
};

CertificateStats sparse_ss_sweep() {
  CertificateStats s;
  for (int m = 5; m <= 8; ++m)
    for (int k = 1; k <= 4; ++k)
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto in = ss_instance(m, k, 5, 1000 * m + 100 * k + seed);
        const double oracle = brute_force_ss(in).objective;
        const auto st = solve(build_sparse_ss(in));
        ++s.instances;
        const double r = rel(st.incumbent_objective, oracle);
        s.worst_rel = std::max(s.worst_rel, r);
        if (r <= 1e-6) ++s.agree;
        for (const auto& e : st.log) s.worst_trace_excess = std::max(s.worst_trace_excess, e.bound - oracle);
        s.worst_trace_excess = std::max(s.worst_trace_excess, st.global_lower_bound - oracle);
        if (st.status == SolveStatus::Optimal) {
          ++s.optimal;
          s.worst_final_gap = std::max(s.worst_final_gap, st.gap);
        }
      }
  return s;
}

struct IppSweepStats : CertificateStats {
  int bnb_agree = 0;
};

IppSweepStats ipp_sweep() {
  IppSweepStats s;
  for (int n : {2, 3}) {
    const auto g = grid_graph(n);
    const double lo = shortest_path_length(g);
    const double hi = longest_simple_path_length(g);
    for (double b = lo; b <= hi + 1e-9; b += 1.0)
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto in = grid_instance(n, b, 4, 100 * n + 10 * static_cast<int>(b) + seed);
        const double oracle = brute_force_ipp(in).best.objective;
        const auto bnb = bnb_paths(in, 600.0);
        const auto model = build_ipp(in);
        const auto st = solve(model->miqp);
        ++s.instances;
        const double r = rel(st.incumbent_objective, oracle);
        s.worst_rel = std::max(s.worst_rel, r);
        if (r <= 1e-6) ++s.agree;
        if (bnb.best && rel(st.incumbent_objective, bnb.best->objective) <= 1e-6) ++s.bnb_agree;
        for (const auto& e : st.log) s.worst_trace_excess = std::max(s.worst_trace_excess, e.bound - oracle);
        s.worst_trace_excess = std::max(s.worst_trace_excess, st.global_lower_bound - oracle);
        if (st.status == SolveStatus::Optimal) {
          ++s.optimal;
          s.worst_final_gap = std::max(s.worst_final_gap, st.gap);
        }
      }
  }
  return s;
}

Outcome sparse_ss_optimality() {
  const auto t0 = Clock::now();
  const auto s = sparse_ss_sweep();
  const double dt = since(t0);
  Outcome o;
  o.pass = s.agree == s.instances && dt < 300.0;
  o.detail = fmt("%d/%d instances within 1e-6 rel of subset oracle (worst %.2e), %.1fs (<300s)", s.agree,
                 s.instances, s.worst_rel, dt);
  return o;
}

Outcome ipp_optimality() {
  const auto t0 = Clock::now();
  const auto s = ipp_sweep();
  const double dt = since(t0);
  Outcome o;
  o.pass = s.agree == s.instances && s.bnb_agree == s.instances && dt < 600.0;
  o.detail = fmt("%d/%d match path oracle within 1e-6 rel (worst %.2e), %d/%d match bnb_paths, %.1fs (<600s)",
                 s.agree, s.instances, s.worst_rel, s.bnb_agree, s.instances, dt);
  return o;
}

Outcome saturated_budget() {
  double worst = 0.0;
  int count = 0;
  for (int n : {3, 5}) {
    const double ham = n * n - 1.0;  // boustrophedon length on odd grids
    for (double b : {ham, ham + 2.0})
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto in = grid_instance(n, b, 5, 500 + 10 * n + seed);
        const auto model = build_ipp(in);
        const auto st = solve(model->miqp);
        const double full = total_weighted_error(in.field, in.omega, in.graph.vertices());
        const double d = st.status == SolveStatus::Optimal ? std::abs(st.incumbent_objective - full) : kInf;
        worst = std::max(worst, d);
        ++count;
      }
  }
  Outcome o;
  o.pass = worst <= 1e-7;
  o.detail = fmt("%d instances (3x3, 5x5; B >= Hamiltonian length), max |opt - error(Theta)| %.3e (<=1e-7)", count,
                 worst);
  return o;
}

Outcome certificate_soundness() {
  const auto a = sparse_ss_sweep();
  const auto b = ipp_sweep();
  const double excess = std::max(a.worst_trace_excess, b.worst_trace_excess);
  const double gap = std::max(a.worst_final_gap, b.worst_final_gap);
  Outcome o;
  o.pass = excess <= 1e-7 && gap <= 1e-6;
  o.detail = fmt("%d instances (%d optimal), max(bound - oracle) %.3e (<=1e-7), max final gap %.3e (<=1e-6)",
                 a.instances + b.instances, a.optimal + b.optimal, excess, gap);
  return o;
}

Outcome anytime_monotonicity() {
  const auto in = grid_instance(5, 14.0, 5, 7);
  const auto model = build_ipp(in);
  SolverConfig cfg;
  cfg.time_limit = 10.0;
  const auto st = solve(model->miqp, cfg);
  bool inc_ok = true, bound_ok = true;
  double inc = kInf, lb = -kInf;
  int incs = 0, bounds = 0;
  for (const auto& e : st.log) {
    inc_ok = inc_ok && e.incumbent <= inc;
    bound_ok = bound_ok && e.bound >= lb;
    inc = e.incumbent;
    lb = e.bound;
    incs += e.kind == EventKind::Incumbent;
    bounds += e.kind == EventKind::Bound;
  }
  bool sol_ok = true;
  std::string sol = "no incumbent";
  if (st.incumbent) {
    try {
      const auto p = extract_path(*model, *st.incumbent);
      sol_ok = p.vertex_sequence.front() == in.graph.start() && p.vertex_sequence.back() == in.graph.end() &&
               p.length <= in.budget + 1e-9;
      sol = fmt("valid s-t path, length %.0f", p.length);
    } catch (const std::exception& e) {
      sol_ok = false;
      sol = std::string("invalid path: ") + e.what();
    }
  } else {
    sol_ok = st.status == SolveStatus::TimeoutNoIncumbent;
  }
  Outcome o;
  o.pass = inc_ok && bound_ok && sol_ok;
  o.detail = fmt("5x5 B=14, status %s after %.1fs; %d incumbent events nonincreasing=%s, %d bound events "
                 "nondecreasing=%s; %s",
                 to_string(st.status), st.wall_time, incs, inc_ok ? "yes" : "no", bounds, bound_ok ? "yes" : "no",
                 sol.c_str());
  return o;
}

Outcome quality_under_timeout() {
  int total = 0, no_worse = 0;
  double worst = 0.0;
  int miqp_optimal = 0;
  for (int n : {4, 5}) {
    const double budget = shortest_path_length(grid_graph(n)) + (n == 4 ? 4.0 : 6.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto in = grid_instance(n, budget, 5, 800 + 10 * n + seed);
      const auto model = build_ipp(in);
      SolverConfig cfg;
      cfg.time_limit = 60.0;
      const auto st = solve(model->miqp, cfg);
      const auto bnb = bnb_paths(in, 60.0);
      ++total;
      miqp_optimal += st.status == SolveStatus::Optimal;
      const double m = st.incumbent ? st.incumbent_objective : kInf;
      const double b = bnb.best ? bnb.best->objective : kInf;
      if (m <= b * (1.0 + 1e-9)) ++no_worse;
      if (std::isfinite(b)) worst = std::max(worst, (m - b) / b);
    }
  }
  Outcome o;
  o.pass = no_worse >= 0.8 * total && worst <= 0.05;
  o.detail = fmt("miqp <= bnb on %d/%d (>=80%%), worst relative excess %.3e (<=5%%), miqp optimal on %d", no_worse,
                 total, std::max(worst, 0.0), miqp_optimal);
  return o;
}

Outcome estimator_properties() {
  const auto t0 = Clock::now();
  SplitMix64 rng(99);
  long checks = 0;
  bool mono = true, bounded = true, perm = true, chol = true;
  for (int trial = 0; trial < 600; ++trial) {
    const bool se = trial % 2 == 0;
    const RandomFieldModel field = se ? RandomFieldModel(SquaredExponential{1.0, trial % 4 ? 0.5 : 1.0}, 0.25)
                                      : RandomFieldModel(Spherical{0.01519, 439.2}, 0.002);
    const Rect box = se ? Rect{0, 3, 0, 3} : Rect{0, 720, 0, 1240};
    const int m = 1 + static_cast<int>(rng.next() % 10);
    auto pts = random_points(rng, m, box);
    const Point x{rng.uniform(box.xmin, box.xmax), rng.uniform(box.ymin, box.ymax)};
    const double prior = field.prior_variance(x);
    std::vector<Point> grow;
    double prev = mse(field, x, grow);
    for (const auto& p : pts) {
      grow.push_back(p);
      const double cur = mse(field, x, grow);
      mono = mono && cur <= prev + 1e-12;
      bounded = bounded && cur >= 0.0 && cur <= prior + 1e-15;
      prev = cur;
      ++checks;
    }
    const double before = mse(field, x, pts);
    std::shuffle(pts.begin(), pts.end(), rng);
    perm = perm && std::abs(before - mse(field, x, pts)) <= 1e-12 * std::max(1.0, before);
    const auto c = covariance_matrix(field, pts);
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    const Eigen::MatrixXd l = llt.matrixL();
    const auto b = cross_covariance(field, x, pts);
    chol = chol && llt.info() == Eigen::Success && (l * l.transpose() - c).lpNorm<Eigen::Infinity>() < 1e-10 &&
           (c * lls_coefficients(c, b) - b).lpNorm<Eigen::Infinity>() < 1e-10;
    checks += 3;
  }
  const double dt = since(t0);
  Outcome o;
  o.pass = mono && bounded && perm && chol && dt < 60.0;
  o.detail = fmt("%ld checks: monotone=%s, 0<=f<=phi=%s, permutation=%s, cholesky<1e-10=%s, %.2fs (<60s)", checks,
                 mono ? "yes" : "no", bounded ? "yes" : "no", perm ? "yes" : "no", chol ? "yes" : "no", dt);
  return o;
}

std::vector<std::string> objective_column(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> col;
  for (std::string line; std::getline(in, line);) {
    std::stringstream ls(line);
    std::string cell;
    for (int i = 0; i <= 3 && std::getline(ls, cell, ','); ++i) {
    }
    col.push_back(cell);
  }
  return col;
}

Outcome determinism() {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string a = (dir / "ipp_acceptance_a.csv").string();
  const std::string b = (dir / "ipp_acceptance_b.csv").string();
  const std::string spec = std::string(IPP_SAMPLES_DIR) + "/determinism.json";
  const std::string base = std::string("\"") + IPP_CLI_PATH + "\" bench --spec \"" + spec + "\" --seed 42 --format csv --out ";
  const int ra = std::system((base + "\"" + a + "\"").c_str());
  const int rb = std::system((base + "\"" + b + "\"").c_str());
  const auto ca = objective_column(a), cb = objective_column(b);
  std::remove(a.c_str());
  std::remove(b.c_str());
  Outcome o;
  o.pass = ra == 0 && rb == 0 && ca.size() > 1 && ca == cb;
  o.detail = fmt("two CLI bench runs (seed 42): exit %d/%d, %zu rows, objective columns identical=%s", ra, rb,
                 ca.empty() ? 0 : ca.size() - 1, ca == cb ? "yes" : "no");
  return o;
}

const std::vector<std::pair<const char*, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<const char*, std::function<Outcome()>>> list{
      {"kernel constants", kernel_constants},
      {"reformulation identity", reformulation_identity},
      {"sparse-SS optimality", sparse_ss_optimality},
      {"IPP optimality", ipp_optimality},
      {"saturated budget", saturated_budget},
      {"certificate soundness", certificate_soundness},
      {"anytime monotonicity", anytime_monotonicity},
      {"quality under timeout", quality_under_timeout},
      {"estimator properties", estimator_properties},
      {"determinism", determinism},
  };
  return list;
}

bool run(int i) {
  const auto& [name, fn] = criteria()[i - 1];
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i << " (" << name << "): " << o.detail << std::endl;
  return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
  const int n = static_cast<int>(criteria().size());
  bool ok = true;
  if (argc > 1) {
    for (int a = 1; a < argc; ++a) {
      const int i = std::atoi(argv[a]);
      if (i < 1 || i > n) {
        std::cerr << "criterion must be in 1.." << n << "\n";
        return 2;
      }
      ok = run(i) && ok;
    }
  } else {
    for (int i = 1; i <= n; ++i) ok = run(i) && ok;
  }
  return ok ? 0 : 1;
}
