#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etsp/geometry.hpp"
#include "etsp/instance.hpp"
#include "etsp/solver.hpp"

namespace etsp {

inline constexpr std::string_view kResultSchema = "result v1";

struct RunResult {
  std::string instance;
  std::size_t n = 0;
  std::size_t d = 0;
  WeightModel model = WeightModel::Euclidean;
  double length = 0.0;
  std::vector<Index> tour;
  double wall_time_ms = 0.0;
  std::uint64_t candidates = 0;
  std::size_t max_boundary = 0;
  SolverConfig config;
  std::optional<Separator> top_separator;
  std::optional<double> oracle_length;
  std::optional<bool> oracle_match;
};

// Runs solve_tsp and records timing and counters.
RunResult run_solve(const Instance& inst, const SolverConfig& cfg);

// Adds the Held-Karp length and whether it agrees within 1e-9 relative.
void attach_oracle(RunResult& r, const Instance& inst);

// JSON text. Deterministic output omits wall time and the worker count, so
// reruns with any number of workers print the same bytes.
std::string to_json(const RunResult& r, bool deterministic = false);

// Inverse of to_json; throws ParseError on malformed text.
RunResult result_from_json(std::string_view text);

// d = 2 only: points, separator square with its size, the tour edges that
// cross it, and the closed tour polyline.
std::string render_svg(const Instance& inst, std::span<const Index> tour,
                       const std::optional<Separator>& sigma);

struct BenchRow {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t d = 0;
  double time_ms = 0.0;
  std::uint64_t cands = 0;
  double ratio = 0.0;  // log2(cands) / n^(1 - 1/d)
  double length = 0.0;
};

inline constexpr std::string_view kBenchHeader = "n,seed,d,time_ms,cands,ratio,length";

BenchRow bench_one(std::size_t n, std::uint64_t seed, std::size_t d, const SolverConfig& cfg);
std::string bench_csv_row(const BenchRow& row);

}  // namespace etsp
