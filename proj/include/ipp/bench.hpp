#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipp/baselines.hpp"
#include "ipp/errors.hpp"
#include "ipp/graphs.hpp"
#include "ipp/model.hpp"
#include "ipp/randfield.hpp"
#include "ipp/rng.hpp"
#include "ipp/solver.hpp"

namespace ipp {

using json = nlohmann::json;
using Instance = std::variant<IppInstance, SparseSsInstance>;

inline constexpr const char* kInstanceFormat = "ipp-instance";
inline constexpr int kInstanceVersion = 1;

// ---------------------------------------------------------------------------
// Instance files
//
// Doubles are written in the shortest decimal form that parses back to the
// same bits, so load(serialize(x)) is exact.

namespace detail {

inline json kernel_to_json(const Kernel& k) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SquaredExponential>)
          return {{"type", "squared_exponential"}, {"sigma0", p.sigma0}, {"length_scale", p.length_scale}};
        else
          return {{"type", "spherical"}, {"sill", p.sill}, {"range", p.range}};
      },
      k);
}

inline Kernel kernel_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "squared_exponential")
    return SquaredExponential{j.value("sigma0", 1.0), j.value("length_scale", 1.0)};
  if (type == "spherical") return Spherical{j.value("sill", 0.01519), j.value("range", 439.2)};
  throw InvalidInput("unknown kernel type '" + type + "'");
}

inline json points_to_json(std::span<const Point> pts) {
  json a = json::array();
  for (const Point& p : pts) a.push_back(p.coords);
  return a;
}

inline std::vector<Point> points_from_json(const json& j) {
  std::vector<Point> out;
  for (const auto& p : j) out.push_back(Point{p.get<std::vector<double>>()});
  return out;
}

inline PredictionSet omega_from_json(const json& j) {
  PredictionSet o;
  o.points = points_from_json(j.at("predictions"));
  o.weights = j.at("weights").get<std::vector<double>>();
  return o;
}

}  // namespace detail

inline json instance_to_json(const Instance& inst) {
  json j;
  j["format"] = kInstanceFormat;
  j["version"] = kInstanceVersion;
  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        j["kernel"] = detail::kernel_to_json(in.field.kernel);
        j["noise_variance"] = in.field.noise_variance;
        if constexpr (std::is_same_v<T, IppInstance>) {
          j["problem"] = "ipp";
          j["vertices"] = detail::points_to_json(in.graph.vertices());
          json arcs = json::array();
          for (const Arc& a : in.graph.arcs()) arcs.push_back(json::array({a.from, a.to, a.cost}));
          j["arcs"] = std::move(arcs);
          j["start"] = in.graph.start();
          j["end"] = in.graph.end();
          j["budget"] = in.budget;
        } else {
          j["problem"] = "sparse_ss";
          j["observations"] = detail::points_to_json(in.theta);
          j["k"] = in.k;
        }
        j["predictions"] = detail::points_to_json(in.omega.points);
        j["weights"] = in.omega.weights;
      },
      inst);
  return j;
}

// Throws InvalidInput on schema or shape problems and InfeasibleInstance
// ("infeasible budget ...") when B is below the shortest s-t path.
inline Instance instance_from_json(const json& j) {
  if (!j.is_object() || j.value("format", std::string{}) != kInstanceFormat)
    throw InvalidInput("not an instance file");
  if (j.value("version", -1) != kInstanceVersion)
    throw InvalidInput("unsupported instance version " + std::to_string(j.value("version", -1)));
  try {
    RandomFieldModel field(detail::kernel_from_json(j.at("kernel")), j.at("noise_variance").get<double>());
    const std::string problem = j.at("problem").get<std::string>();
    if (problem == "ipp") {
      IppInstance in;
      in.field = field;
      std::vector<Arc> arcs;
      for (const auto& a : j.at("arcs")) {
        if (!a.is_array() || a.size() != 3) throw InvalidInput("arc entries are [from, to, cost]");
        arcs.push_back({a[0].get<int>(), a[1].get<int>(), a[2].get<double>()});
      }
      in.graph = ObservationGraph(detail::points_from_json(j.at("vertices")), std::move(arcs),
                                  j.at("start").get<int>(), j.at("end").get<int>());
      in.omega = detail::omega_from_json(j);
      in.budget = j.at("budget").get<double>();
      in.validate();
      return in;
    }
    if (problem == "sparse_ss") {
      SparseSsInstance in;
      in.field = field;
      in.theta = detail::points_from_json(j.at("observations"));
      in.omega = detail::omega_from_json(j);
      in.k = j.at("k").get<int>();
      in.validate();
      return in;
    }
    throw InvalidInput("unknown problem '" + problem + "'");
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed instance: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput("malformed JSON in " + path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << text;
  if (!out) throw InvalidInput("write failed for " + path);
}

inline void serialize_instance(const Instance& inst, const std::string& path) {
  write_text_file(path, instance_to_json(inst).dump(2) + "\n");
}

inline Instance load_instance(const std::string& path) { return instance_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Instance generation

struct InstanceSpec {
  std::string problem = "ipp";  // ipp | sparse_ss
  std::string graph = "grid";   // grid | prm
  int grid_size = 3;
  double edge_length = 1.0;
  int prm_vertices = 30;
  int connection_factor = 8;
  std::optional<Rect> bounds;
  std::uint64_t graph_seed = 1;
  Kernel kernel = SquaredExponential{};
  double noise_variance = 0.25;
  int num_predictions = 5;
  std::optional<double> budget;
  double budget_slack = 0.0;  // used when budget is unset: shortest path + slack
  int num_observations = 6;
  int k = 3;
};

inline InstanceSpec instance_spec_from_json(const json& j) {
  InstanceSpec s;
  try {
    s.problem = j.value("problem", s.problem);
    s.graph = j.value("graph", s.graph);
    s.grid_size = j.value("grid_size", s.grid_size);
    s.edge_length = j.value("edge_length", s.edge_length);
    s.prm_vertices = j.value("prm_vertices", s.prm_vertices);
    s.connection_factor = j.value("connection_factor", s.connection_factor);
    if (j.contains("bounds")) {
      const auto b = j.at("bounds").get<std::vector<double>>();
      if (b.size() != 4) throw InvalidInput("bounds are [xmin, xmax, ymin, ymax]");
      s.bounds = Rect{b[0], b[1], b[2], b[3]};
    }
    s.graph_seed = j.value("graph_seed", s.graph_seed);
    if (j.contains("kernel")) s.kernel = detail::kernel_from_json(j.at("kernel"));
    s.noise_variance = j.value("noise_variance", s.noise_variance);
    s.num_predictions = j.value("num_predictions", s.num_predictions);
    if (j.contains("budget")) s.budget = j.at("budget").get<double>();
    s.budget_slack = j.value("budget_slack", s.budget_slack);
    s.num_observations = j.value("num_observations", s.num_observations);
    s.k = j.value("k", s.k);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed instance spec: ") + e.what());
  }
  if (s.problem != "ipp" && s.problem != "sparse_ss") throw InvalidInput("problem must be ipp or sparse_ss");
  if (s.graph != "grid" && s.graph != "prm") throw InvalidInput("graph must be grid or prm");
  if (s.num_predictions < 1) throw InvalidInput("num_predictions must be >= 1");
  return s;
}

namespace detail {

inline PredictionSet random_predictions(const Rect& box, int n, SplitMix64& rng) {
  PredictionSet o;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(box.xmin, box.xmax);
    const double y = rng.uniform(box.ymin, box.ymax);
    o.points.push_back(Point{x, y});
    o.weights.push_back(rng.uniform());
  }
  return o;
}

}  // namespace detail

// Prediction points uniform over the environment box, weights uniform on
// [0, 1]. The PRM roadmap uses graph_seed so runs share one map.
inline Instance generate_instance(const InstanceSpec& spec, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const RandomFieldModel field(spec.kernel, spec.noise_variance);
  if (spec.problem == "sparse_ss") {
    SparseSsInstance in;
    in.field = field;
    const Rect box = spec.bounds.value_or(Rect{0.0, 2.0, 0.0, 2.0});
    for (int i = 0; i < spec.num_observations; ++i) {
      const double x = rng.uniform(box.xmin, box.xmax);
      const double y = rng.uniform(box.ymin, box.ymax);
      in.theta.push_back(Point{x, y});
    }
    in.omega = detail::random_predictions(box, spec.num_predictions, rng);
    in.k = spec.k;
    in.validate();
    return in;
  }
  IppInstance in;
  in.field = field;
  Rect box;
  if (spec.graph == "grid") {
    if (spec.grid_size < 2) throw InvalidInput("grid_size must be >= 2");
    in.graph = grid_graph(spec.grid_size, spec.edge_length);
    const double side = (spec.grid_size - 1) * spec.edge_length;
    box = spec.bounds.value_or(Rect{0.0, side, 0.0, side});
  } else {
    box = spec.bounds.value_or(Rect{});
    in.graph = prm_graph(box, spec.prm_vertices, spec.connection_factor, spec.graph_seed);
  }
  in.omega = detail::random_predictions(box, spec.num_predictions, rng);
  in.budget = spec.budget.value_or(shortest_path_length(in.graph) + spec.budget_slack);
  in.validate();
  return in;
}

// ---------------------------------------------------------------------------
// Solve logs: one JSON object per line.

inline json event_to_json(const SolveEvent& e) {
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"time", e.time},        {"event", to_string(e.kind)}, {"nodes", e.nodes},
          {"cuts", e.cuts},        {"incumbent", num(e.incumbent)}, {"bound", num(e.bound)}};
}

inline void write_solve_log(std::ostream& os, std::span<const SolveEvent> log) {
  for (const SolveEvent& e : log) os << event_to_json(e).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Running a single method

struct ResultRecord {
  std::string scenario;
  std::string instance;
  std::string method;
  std::optional<double> objective;  // empty when no solution was produced
  double time_s = 0.0;
  std::string status;
  std::optional<double> gap;  // miqp only; may be +inf
  long nodes = 0;
  std::vector<int> solution;  // path vertex sequence or chosen subset; not part of the report
  std::vector<SolveEvent> log;
};

inline bool is_known_method(const std::string& m) {
  return m == "miqp" || m == "bnb" || m == "greedy" || m == "oracle";
}

namespace detail {

using BenchClock = std::chrono::steady_clock;

inline double seconds_since(BenchClock::time_point t0) {
  return std::chrono::duration<double>(BenchClock::now() - t0).count();
}

inline void run_ipp(const IppInstance& in, const std::string& method, double time_limit, ResultRecord& r) {
  const auto t0 = BenchClock::now();
  if (method == "miqp") {
    const auto model = build_ipp(in);
    SolverConfig cfg;
    cfg.time_limit = time_limit;
    const SolveState st = solve(model->miqp, cfg);
    r.status = to_string(st.status);
    r.nodes = st.nodes_explored;
    r.gap = st.gap;
    r.log = st.log;
    if (st.incumbent) {
      const PathSolution p = extract_path(*model, *st.incumbent);
      r.objective = p.objective;
      r.solution = p.vertex_sequence;
    }
  } else if (method == "bnb") {
    const PathSearchResult res = bnb_paths(in, time_limit);
    r.status = to_string(res.status);
    r.nodes = res.nodes;
    r.log = res.log;
    if (res.best) {
      r.objective = res.best->objective;
      r.solution = res.best->vertex_sequence;
    }
  } else if (method == "greedy") {
    const PathSolution p = greedy_path(in);
    r.status = "heuristic";
    r.objective = p.objective;
    r.solution = p.vertex_sequence;
  } else {
    const PathEnumerationResult res = brute_force_ipp(in);
    r.status = "optimal";
    r.nodes = res.paths_evaluated;
    r.objective = res.best.objective;
    r.solution = res.best.vertex_sequence;
  }
  r.time_s = seconds_since(t0);
}

inline void run_ss(const SparseSsInstance& in, const std::string& method, double time_limit, ResultRecord& r) {
  const auto t0 = BenchClock::now();
  if (method == "miqp") {
    const MiqpModel model = build_sparse_ss(in);
    SolverConfig cfg;
    cfg.time_limit = time_limit;
    const SolveState st = solve(model, cfg);
    r.status = to_string(st.status);
    r.nodes = st.nodes_explored;
    r.gap = st.gap;
    r.log = st.log;
    if (st.incumbent) {
      r.solution = model.support(*st.incumbent);
      r.objective = SubsetErrorEvaluator(in.field, in.theta, in.omega)(r.solution);
    }
  } else if (method == "bnb") {
    throw InvalidInput("bnb applies to path instances only");
  } else {
    const SubsetResult res = method == "greedy" ? greedy_ss(in) : brute_force_ss(in);
    r.status = method == "greedy" ? "heuristic" : "optimal";
    r.nodes = method == "greedy" ? 0 : res.evaluated;
    r.objective = res.objective;
    r.solution = res.subset;
  }
  r.time_s = seconds_since(t0);
}

}  // namespace detail

// Never throws for solver-side failures; they become status "error".
// Unknown methods are rejected up front.
inline ResultRecord run_method(const Instance& inst, const std::string& method, double time_limit,
                               std::string scenario = "solve", std::string instance_id = "instance") {
  if (!is_known_method(method)) throw InvalidInput("unknown method '" + method + "'");
  ResultRecord r;
  r.scenario = std::move(scenario);
  r.instance = std::move(instance_id);
  r.method = method;
  try {
    if (const auto* p = std::get_if<IppInstance>(&inst))
      detail::run_ipp(*p, method, time_limit, r);
    else
      detail::run_ss(std::get<SparseSsInstance>(inst), method, time_limit, r);
  } catch (const InfeasibleInstance&) {
    r.status = "infeasible";
    r.objective.reset();
  } catch (const std::exception&) {
    r.status = "error";
    r.objective.reset();
  }
  if (method == "miqp" && !r.gap) r.gap = kInf;
  return r;
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentSpec {
  std::string scenario = "grid-quality-timeout";
  std::vector<int> grid_sizes{4};
  std::vector<double> length_scales{1.0};
  std::vector<double> budgets;            // absolute; when empty budget_slacks apply
  std::vector<double> budget_slacks{0.0}; // over the shortest s-t path
  int num_predictions = 5;
  int runs = 5;
  std::vector<std::uint64_t> seeds;  // one per run; default base_seed + run
  std::uint64_t base_seed = 0;
  std::vector<std::string> methods{"miqp", "bnb"};
  double time_limit = 60.0;
  double noise_variance = 0.25;
  double sigma0 = 1.0;
  // Roadmap scenario.
  int prm_vertices = 30;
  int connection_factor = 8;
  Rect bounds;
  std::uint64_t graph_seed = 1;
  Spherical spherical;
  double prm_noise_variance = 0.002;
  std::string log_dir;  // per-record solve logs when nonempty

  bool is_prm() const { return scenario == "prm-quality-vs-budget"; }

  std::uint64_t run_seed(int run) const {
    return seeds.empty() ? base_seed + static_cast<std::uint64_t>(run) : seeds[run];
  }

  void validate() const {
    if (scenario != "grid-runtime-vs-budget" && scenario != "grid-scaling-by-correlation" &&
        scenario != "grid-quality-timeout" && scenario != "prm-quality-vs-budget")
      throw InvalidInput("unknown scenario '" + scenario + "'");
    if (runs < 1) throw InvalidInput("runs must be >= 1");
    if (!seeds.empty() && static_cast<int>(seeds.size()) != runs)
      throw InvalidInput("seeds must list one seed per run");
    if (methods.empty()) throw InvalidInput("methods is empty");
    for (const auto& m : methods)
      if (!is_known_method(m)) throw InvalidInput("unknown method '" + m + "'");
    if (budgets.empty() && budget_slacks.empty()) throw InvalidInput("budget sweep is empty");
    if (!is_prm() && (grid_sizes.empty() || length_scales.empty()))
      throw InvalidInput("grid sweeps are empty");
    for (int n : grid_sizes)
      if (n < 2) throw InvalidInput("grid sizes must be >= 2");
    if (num_predictions < 1) throw InvalidInput("num_predictions must be >= 1");
    if (!(time_limit > 0.0)) throw InvalidInput("time_limit must be positive");
  }
};

inline ExperimentSpec experiment_spec_from_json(const json& j) {
  ExperimentSpec s;
  try {
    s.scenario = j.at("scenario").get<std::string>();
    if (s.is_prm()) s.budget_slacks = {0.0};
    s.grid_sizes = j.value("grid_sizes", s.grid_sizes);
    s.length_scales = j.value("length_scales", s.length_scales);
    s.budgets = j.value("budgets", s.budgets);
    s.budget_slacks = j.value("budget_slacks", s.budget_slacks);
    s.num_predictions = j.value("num_predictions", s.num_predictions);
    s.runs = j.value("runs", s.runs);
    s.seeds = j.value("seeds", s.seeds);
    s.base_seed = j.value("base_seed", s.base_seed);
    s.methods = j.value("methods", s.methods);
    s.time_limit = j.value("time_limit", s.time_limit);
    s.noise_variance = j.value("noise_variance", s.noise_variance);
    s.sigma0 = j.value("sigma0", s.sigma0);
    s.prm_vertices = j.value("prm_vertices", s.prm_vertices);
    s.connection_factor = j.value("connection_factor", s.connection_factor);
    if (j.contains("bounds")) {
      const auto b = j.at("bounds").get<std::vector<double>>();
      if (b.size() != 4) throw InvalidInput("bounds are [xmin, xmax, ymin, ymax]");
      s.bounds = Rect{b[0], b[1], b[2], b[3]};
    }
    s.graph_seed = j.value("graph_seed", s.graph_seed);
    s.spherical.sill = j.value("sill", s.spherical.sill);
    s.spherical.range = j.value("range", s.spherical.range);
    s.prm_noise_variance = j.value("prm_noise_variance", s.prm_noise_variance);
    s.log_dir = j.value("log_dir", s.log_dir);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed experiment spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace detail {

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct SweepPoint {
  std::string label;
  InstanceSpec spec;
};

inline std::vector<SweepPoint> sweep_points(const ExperimentSpec& e) {
  std::vector<SweepPoint> pts;
  auto add_budgets = [&](InstanceSpec base, const std::string& prefix) {
    if (!e.budgets.empty()) {
      for (double b : e.budgets) {
        InstanceSpec s = base;
        s.budget = b;
        pts.push_back({prefix + "-B" + fmt_num(b), s});
      }
    } else {
      for (double d : e.budget_slacks) {
        InstanceSpec s = base;
        s.budget_slack = d;
        pts.push_back({prefix + "-slack" + fmt_num(d), s});
      }
    }
  };
  InstanceSpec base;
  base.problem = "ipp";
  base.num_predictions = e.num_predictions;
  if (e.is_prm()) {
    base.graph = "prm";
    base.prm_vertices = e.prm_vertices;
    base.connection_factor = e.connection_factor;
    base.bounds = e.bounds;
    base.graph_seed = e.graph_seed;
    base.kernel = e.spherical;
    base.noise_variance = e.prm_noise_variance;
    add_budgets(base, "prm" + std::to_string(e.prm_vertices));
    return pts;
  }
  base.graph = "grid";
  base.noise_variance = e.noise_variance;
  for (int n : e.grid_sizes)
    for (double l : e.length_scales) {
      InstanceSpec s = base;
      s.grid_size = n;
      s.kernel = SquaredExponential{e.sigma0, l};
      add_budgets(s, "grid" + std::to_string(n) + "-L" + fmt_num(l));
    }
  return pts;
}

}  // namespace detail

// Records come out in (sweep point, run, method) order. A failure to build
// an instance yields one record per method carrying the failure status.
inline std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<ResultRecord> out;
  for (const auto& pt : detail::sweep_points(spec)) {
    for (int run = 0; run < spec.runs; ++run) {
      const std::uint64_t seed = spec.run_seed(run);
      const std::string id = pt.label + "-r" + std::to_string(run) + "-s" + std::to_string(seed);
      std::optional<Instance> inst;
      std::string failure;
      try {
        inst = generate_instance(pt.spec, seed);
      } catch (const InfeasibleInstance&) {
        failure = "infeasible";
      } catch (const std::exception&) {
        failure = "error";
      }
      for (const auto& m : spec.methods) {
        ResultRecord r;
        if (inst) {
          r = run_method(*inst, m, spec.time_limit, spec.scenario, id);
        } else {
          r.scenario = spec.scenario;
          r.instance = id;
          r.method = m;
          r.status = failure;
          if (m == "miqp") r.gap = kInf;
        }
        if (!spec.log_dir.empty()) {
          std::filesystem::create_directories(spec.log_dir);
          std::ofstream os(std::filesystem::path(spec.log_dir) / (id + "-" + m + ".jsonl"));
          write_solve_log(os, r.log);
        }
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr const char* kReportHeader = "scenario,instance,method,objective,time_s,status,gap,nodes";

namespace detail {

inline std::string fmt_exact(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_time(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline json opt_to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  return *v;
}

inline std::optional<double> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw InvalidInput("bad numeric field '" + s + "'");
  }
  return j.get<double>();
}

inline std::optional<double> opt_from_text(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InvalidInput("bad numeric field '" + s + "'");
  return v;
}

}  // namespace detail

inline std::string report_csv(std::span<const ResultRecord> records) {
  std::ostringstream os;
  os << kReportHeader << '\n';
  for (const auto& r : records) {
    os << r.scenario << ',' << r.instance << ',' << r.method << ','
       << (r.objective ? detail::fmt_exact(*r.objective) : "") << ',' << detail::fmt_time(r.time_s) << ','
       << r.status << ',' << (r.gap ? detail::fmt_exact(*r.gap) : "") << ',' << r.nodes << '\n';
  }
  return os.str();
}

inline json report_json(std::span<const ResultRecord> records) {
  json a = json::array();
  for (const auto& r : records) {
    json o;
    o["scenario"] = r.scenario;
    o["instance"] = r.instance;
    o["method"] = r.method;
    o["objective"] = detail::opt_to_json(r.objective);
    o["time_s"] = std::stod(detail::fmt_time(r.time_s));
    o["status"] = r.status;
    o["gap"] = detail::opt_to_json(r.gap);
    o["nodes"] = r.nodes;
    a.push_back(std::move(o));
  }
  return a;
}

inline std::string emit_report(std::span<const ResultRecord> records, const std::string& format) {
  if (format == "csv") return report_csv(records);
  if (format == "json") return report_json(records).dump(2) + "\n";
  throw InvalidInput("format must be csv or json");
}

inline void emit_report(std::span<const ResultRecord> records, const std::string& format, const std::string& path) {
  write_text_file(path, emit_report(records, format));
}

// Reads back either report format.
inline std::vector<ResultRecord> parse_report(const std::string& text) {
  std::vector<ResultRecord> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    json a;
    try {
      a = json::parse(text);
      for (const auto& o : a) {
        ResultRecord r;
        r.scenario = o.at("scenario").get<std::string>();
        r.instance = o.at("instance").get<std::string>();
        r.method = o.at("method").get<std::string>();
        r.objective = detail::opt_from_json(o.at("objective"));
        r.time_s = o.at("time_s").get<double>();
        r.status = o.at("status").get<std::string>();
        r.gap = detail::opt_from_json(o.at("gap"));
        r.nodes = o.at("nodes").get<long>();
        out.push_back(std::move(r));
      }
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("malformed report: ") + e.what());
    }
    return out;
  }
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kReportHeader) throw InvalidInput("report header mismatch");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw InvalidInput("report row has " + std::to_string(f.size()) + " fields");
    ResultRecord r;
    r.scenario = f[0];
    r.instance = f[1];
    r.method = f[2];
    try {
      r.objective = detail::opt_from_text(f[3]);
      r.time_s = std::stod(f[4]);
      r.status = f[5];
      r.gap = detail::opt_from_text(f[6]);
      r.nodes = std::stol(f[7]);
    } catch (const std::logic_error&) {
      throw InvalidInput("bad numeric field in report row: " + line);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ipp
