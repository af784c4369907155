#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "etsp/error.hpp"
#include "etsp/instance.hpp"
#include "etsp/report.hpp"
#include "etsp/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAudit = 1;
constexpr int kExitParse = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitTimeLimit = 4;

struct ConfigFlags {
  std::string caps;
  double gamma = 8.0;
  std::size_t base = 0;
  std::size_t workers = 1;
  double c_hi = 8.0;
  double time_limit_s = 0.0;
  bool no_exchange_filter = false;
  bool no_bound_pruning = false;

  void attach(CLI::App* app) {
    app->add_option("--caps", caps, "Packing caps c_cube,c_long,c_short (default 12,4,6)");
    app->add_option("--gamma", gamma, "Balance pivot constant")->check(CLI::PositiveNumber);
    app->add_option("--base", base, "Base-case threshold n0 (0 = 10 for d=2, 12 otherwise)");
    app->add_option("--workers", workers, "Worker threads at the top level")->check(CLI::PositiveNumber);
    app->add_option("--c-hi", c_hi, "Upper clamp constant of the separator weights")->check(CLI::PositiveNumber);
    app->add_option("--time-limit", time_limit_s, "Abort a solve after this many seconds (0 = none)");
    app->add_flag("--no-exchange-filter", no_exchange_filter, "Keep crossing sets with improvable segment pairs");
    app->add_flag("--no-bound-pruning", no_bound_pruning, "Disable heuristic-bound pruning");
  }

  etsp::SolverConfig build() const {
    etsp::SolverConfig cfg;
    if (!caps.empty()) {
      std::vector<std::size_t> v;
      std::stringstream ss(caps);
      std::string part;
      while (std::getline(ss, part, ',')) {
        try {
          std::size_t used = 0;
          const long long x = std::stoll(part, &used);
          if (used != part.size() || x < 0) throw std::invalid_argument(part);
          v.push_back(static_cast<std::size_t>(x));
        } catch (const std::exception&) {
          throw etsp::ParseError("--caps: bad value '" + part + "'");
        }
      }
      if (v.size() != 3) throw etsp::ParseError("--caps expects three comma-separated counts");
      cfg.caps = {v[0], v[1], v[2]};
    }
    cfg.gamma = gamma;
    cfg.base_threshold = base;
    cfg.workers = workers;
    cfg.c_hi = c_hi;
    cfg.time_limit_ms = time_limit_s * 1000.0;
    cfg.exchange_filter = !no_exchange_filter;
    cfg.bound_pruning = !no_bound_pruning;
    return cfg;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

int cmd_solve(const std::string& path, const ConfigFlags& flags, bool audit, bool oracle, bool deterministic) {
  const etsp::Instance inst = etsp::read_instance_file(path);
  const etsp::SolverConfig cfg = flags.build();
  etsp::RunResult r = etsp::run_solve(inst, cfg);
  if (oracle) etsp::attach_oracle(r, inst);
  std::cout << etsp::to_json(r, deterministic) << '\n';
  if (audit) {
    etsp::SolverConfig wide = cfg;
    wide.caps = cfg.caps.doubled();
    const etsp::RunResult again = etsp::run_solve(inst, wide);
    const double tol = 1e-9 * std::max(1.0, std::abs(r.length));
    if (std::abs(again.length - r.length) > tol) {
      std::fprintf(stderr, "audit: doubled caps give %.17g instead of %.17g\n", again.length, r.length);
      return kExitAudit;
    }
    std::fprintf(stderr, "audit: doubled caps agree\n");
  }
  return kExitOk;
}

int cmd_oracle(const std::string& path) {
  const etsp::Instance inst = etsp::read_instance_file(path);
  const etsp::Tour t = etsp::held_karp(inst);
  std::cout << "{\"instance\": \"" << inst.name << "\", \"n\": " << inst.size() << ", \"length\": ";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", t.length);
  std::cout << buf << ", \"tour\": [";
  for (std::size_t k = 0; k < t.order.size(); ++k) std::cout << (k ? ", " : "") << t.order[k];
  std::cout << "]}\n";
  return kExitOk;
}

int cmd_bench(const std::vector<std::size_t>& sizes, const std::vector<std::uint64_t>& seeds, std::size_t d,
              const ConfigFlags& flags) {
  const etsp::SolverConfig cfg = flags.build();
  int status = kExitOk;
  std::cout << etsp::kBenchHeader << '\n' << std::flush;
  for (std::size_t n : sizes) {
    for (std::uint64_t seed : seeds) {
      try {
        std::cout << etsp::bench_csv_row(etsp::bench_one(n, seed, d, cfg)) << '\n' << std::flush;
      } catch (const etsp::TimeLimitError&) {
        std::fprintf(stderr, "bench: n=%zu seed=%llu exceeded the time limit\n", n,
                     static_cast<unsigned long long>(seed));
        status = kExitTimeLimit;
      }
    }
  }
  return status;
}

int cmd_render(const std::string& path, const std::string& result_path, const std::string& out,
               const ConfigFlags& flags) {
  const etsp::Instance inst = etsp::read_instance_file(path);
  if (inst.dim() != 2) throw etsp::PreconditionError("render: only d = 2 can be drawn");
  etsp::RunResult r;
  if (!result_path.empty()) {
    std::ifstream f(result_path);
    if (!f) throw etsp::ParseError("cannot open '" + result_path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    r = etsp::result_from_json(ss.str());
    if (r.n != inst.size() || !etsp::is_permutation_of_range(r.tour, inst.size())) {
      throw etsp::PreconditionError("render: result does not match the instance");
    }
  } else {
    r = etsp::run_solve(inst, flags.build());
  }
  write_text(out, etsp::render_svg(inst, r.tour, r.top_separator));
  return kExitOk;
}

int cmd_generate(const std::string& kind, std::size_t n, std::size_t d, std::uint64_t seed,
                 std::optional<double> perturb, const std::string& out) {
  etsp::Instance inst = etsp::gen(etsp::parse_gen_kind(kind), n, d, seed);
  if (perturb) {
    inst = etsp::matrix_instance(inst.points, etsp::perturb_matrix(inst.points, seed, *perturb), inst.name);
  }
  std::ostringstream ss;
  etsp::write_instance(ss, inst);
  write_text(out, ss.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact Euclidean TSP by separators and representative sets"};
  app.require_subcommand(1);

  ConfigFlags flags;
  std::string path, result_path, out, kind = "uniform";
  bool audit = false, oracle = false, deterministic = false;
  std::size_t n = 10, d = 2;
  std::uint64_t seed = 1;
  std::optional<double> perturb;
  std::vector<std::size_t> sizes;
  std::vector<std::uint64_t> seeds{1};

  auto* solve = app.add_subcommand("solve", "Solve an instance file, print a JSON result");
  solve->add_option("file", path, "Instance file (tsp-instance v1 or TSPLIB)")->required();
  flags.attach(solve);
  solve->add_flag("--audit", audit, "Rerun with doubled caps; exit 1 if the length changes");
  solve->add_flag("--oracle", oracle, "Add the Held-Karp length and a match flag (n <= 24)");
  solve->add_flag("--deterministic", deterministic, "Omit wall time and worker count");

  auto* orc = app.add_subcommand("oracle", "Held-Karp optimum of an instance file");
  orc->add_option("file", path, "Instance file")->required();

  auto* generate = app.add_subcommand("generate", "Write a seeded instance");
  generate->add_option("--kind", kind, "uniform, grid or clustered");
  generate->add_option("-n,--n", n, "Point count")->check(CLI::PositiveNumber);
  generate->add_option("-d,--dim", d, "Dimension (2, 3 or 4)");
  generate->add_option("--seed", seed, "Seed");
  generate->add_option("--perturb", perturb, "Write an order-preserving matrix jittered by this epsilon");
  generate->add_option("-o,--output", out, "Output file (default stdout)");

  auto* bench = app.add_subcommand("bench", "Solve seeded uniform instances, print CSV rows");
  bench->add_option("--sizes", sizes, "Point counts")->required()->delimiter(',');
  bench->add_option("--seeds", seeds, "Seeds")->delimiter(',');
  bench->add_option("-d,--dim", d, "Dimension");
  flags.attach(bench);

  auto* render = app.add_subcommand("render", "Draw a d = 2 instance and its tour as SVG");
  render->add_option("file", path, "Instance file")->required();
  render->add_option("--result", result_path, "JSON result to draw instead of solving");
  render->add_option("-o,--output", out, "SVG file (default stdout)");
  flags.attach(render);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (*solve) return cmd_solve(path, flags, audit, oracle, deterministic);
    if (*orc) return cmd_oracle(path);
    if (*generate) return cmd_generate(kind, n, d, seed, perturb, out);
    if (*bench) return cmd_bench(sizes, seeds, d, flags);
    if (*render) return cmd_render(path, result_path, out, flags);
  } catch (const etsp::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParse;
  } catch (const etsp::PreconditionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPrecondition;
  } catch (const etsp::TimeLimitError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitTimeLimit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPrecondition;
  }
  return kExitOk;
}
