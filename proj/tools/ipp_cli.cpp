// ipp: generate, solve and benchmark informative path planning instances.
//
//   ipp gen    --spec instance_spec.json --seed 3 --out inst.json
//   ipp solve  --spec inst.json --method miqp --time-limit 60 [--log solve.jsonl]
//   ipp bench  --spec experiment.json --seed 0 --out results.csv
//   ipp report --spec results.json --format csv
//
// Exit codes: 0 success, 2 infeasible instance, 1 anything else.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ipp/ipp.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kInfeasible = 2;

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    ipp::write_text_file(path, text);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ipp::InvalidInput("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained minimum-error measurement paths"};
  app.require_subcommand(1);

  std::string spec, out, format = "csv", method = "miqp", log_path;
  std::uint64_t seed = 0;
  double time_limit = -1.0;
  std::vector<std::string> methods;

  auto* gen = app.add_subcommand("gen", "Generate an instance file from an instance spec");
  gen->add_option("--spec", spec, "Instance spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "Seed for prediction points and weights");
  gen->add_option("--out", out, "Instance file to write (default stdout)");

  auto* solve = app.add_subcommand("solve", "Solve one instance file");
  solve->add_option("--spec", spec, "Instance file")->required()->check(CLI::ExistingFile);
  solve->add_option("--method", method, "miqp | bnb | greedy | oracle")
      ->check(CLI::IsMember({"miqp", "bnb", "greedy", "oracle"}));
  solve->add_option("--time-limit", time_limit, "Seconds (default 60)");
  solve->add_option("--seed", seed, "Accepted for symmetry; solves are deterministic");
  solve->add_option("--out", out, "Result report (default stdout)");
  solve->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  solve->add_option("--log", log_path, "Solve log, one JSON object per line");

  auto* bench = app.add_subcommand("bench", "Run an experiment spec");
  bench->add_option("--spec", spec, "Experiment spec (JSON)")->required()->check(CLI::ExistingFile);
  bench->add_option("--seed", seed, "Base seed; run r uses seed + r unless the spec lists seeds");
  bench->add_option("--time-limit", time_limit, "Per-method limit in seconds, overrides the spec");
  bench->add_option("--method", methods, "Methods to run, overrides the spec")->delimiter(',');
  bench->add_option("--out", out, "Report file (default stdout)");
  bench->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

  auto* report = app.add_subcommand("report", "Re-emit a report in the requested format");
  report->add_option("--spec", spec, "Report file (csv or json)")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out, "Output (default stdout)");
  report->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kFailure;
  }

  try {
    if (*gen) {
      const auto is = ipp::instance_spec_from_json(ipp::read_json_file(spec));
      const auto inst = ipp::generate_instance(is, seed);
      write_output(out, ipp::instance_to_json(inst).dump(2) + "\n");
      return kOk;
    }
    if (*solve) {
      const auto inst = ipp::load_instance(spec);
      const auto r = ipp::run_method(inst, method, time_limit > 0 ? time_limit : 60.0, "solve", stem(spec));
      if (!log_path.empty()) {
        std::ofstream os(log_path);
        if (!os) throw ipp::InvalidInput("cannot write " + log_path);
        ipp::write_solve_log(os, r.log);
      }
      const std::vector<ipp::ResultRecord> recs{r};
      write_output(out, ipp::emit_report(recs, format));
      if (!r.solution.empty())
        std::cerr << (std::holds_alternative<ipp::IppInstance>(inst) ? "path: " : "subset: ") << join(r.solution)
                  << "\n";
      if (r.status == "infeasible") return kInfeasible;
      if (r.status == "error") return kFailure;
      return kOk;
    }
    if (*bench) {
      auto es = ipp::experiment_spec_from_json(ipp::read_json_file(spec));
      if (bench->count("--seed")) es.base_seed = seed;
      if (time_limit > 0) es.time_limit = time_limit;
      if (!methods.empty()) es.methods = methods;
      es.validate();
      const auto recs = ipp::run_experiment(es);
      write_output(out, ipp::emit_report(recs, format));
      return kOk;
    }
    if (*report) {
      const auto recs = ipp::parse_report(read_file(spec));
      write_output(out, ipp::emit_report(recs, format));
      return kOk;
    }
  } catch (const ipp::InfeasibleInstance& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
