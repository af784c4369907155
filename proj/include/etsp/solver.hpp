#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "etsp/candidates.hpp"
#include "etsp/instance.hpp"
#include "etsp/matchings.hpp"

namespace etsp {

struct SolverConfig {
  double gamma = 8.0;
  std::size_t base_threshold = 0;  // 0 picks 10 for d = 2 and 12 otherwise
  PackingCaps caps;
  std::size_t workers = 1;
  double c_hi = 8.0;
  // solve_tsp only: drop crossing sets holding two segments ab, cd with
  // w(ab) + w(cd) > max(w(ac) + w(bd), w(ad) + w(bc)). No optimal tour has
  // such a pair, but a cover with several paths may, so tsp_repr ignores it.
  bool exchange_filter = true;
  // solve_tsp only: prune with a heuristic tour length U. A subproblem
  // (P, B) may spend at most U minus a lower bound on the tour edges outside
  // it; crossing sets whose lower bound exceeds that are skipped.
  bool bound_pruning = true;
  // Skip reduce everywhere, so every matching keeps its exact optimum.
  bool exhaustive = false;
  // Wall-clock limit in milliseconds; 0 means none. Exceeding it throws
  // TimeLimitError.
  double time_limit_ms = 0.0;

  std::size_t n0(std::size_t d) const;
};

struct SolveStats {
  std::uint64_t candidates = 0;   // crossing sets enumerated, summed over distinct subproblems
  std::uint64_t subproblems = 0;  // distinct (P, B) pairs solved
  std::uint64_t base_cases = 0;
  std::size_t max_boundary = 0;
  bool has_top_separator = false;
  Separator top_separator;
};

// Representative set for the path cover instance (members, boundary) of
// `inst`; both lists hold point indices. Needs inst.size() <= 64.
RepSet tsp_repr(const Instance& inst, std::span<const Index> members, std::span<const Index> boundary,
                const SolverConfig& cfg, SolveStats* stats = nullptr);

// Exact subset-DP answer for every matching of the boundary, reduced unless
// cfg.exhaustive.
RepSet base_case(const Instance& inst, std::span<const Index> members, std::span<const Index> boundary,
                 const SolverConfig& cfg = {});

struct SolveResult {
  Tour tour;
  SolveStats stats;
};

// Optimal tour, n >= 3 and n <= 63. Matrix instances must be order-preserving.
SolveResult solve_tsp(const Instance& inst, const SolverConfig& cfg = {});

// Minimum cover realising epc.matching; feasible = false when none exists.
PathCover path_cover(const EPCInstance& epc, const SolverConfig& cfg = {});

// Follows `tour` down the recursion of solve_tsp (same separators, same
// split rule) and records, per group kind, the most tour edges that any one
// crossing set needs. Caps at least this large keep the tour's pieces in
// every candidate stream along the way.
struct CapsTrace {
  PackingCaps needed{0, 0, 0};
  std::size_t separators = 0;    // recursion nodes that built a separator
  std::size_t max_crossing = 0;  // largest crossing set met
};
CapsTrace trace_tour_caps(const Instance& inst, std::span<const Index> tour, const SolverConfig& cfg = {});

// Separator the recursion builds for the subproblem (members, boundary);
// nullopt when neither pivot set admits one.
std::optional<Separator> recursion_separator(const PointSet& pts, std::span<const Index> members,
                                             std::span<const Index> boundary, const SolverConfig& cfg = {});

// Tour through 0 then its smaller-index neighbour.
std::vector<Index> canonical_cycle(std::span<const Index> order);

}  // namespace etsp
