#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "etsp/geometry.hpp"

namespace etsp {

struct PackingCaps {
  std::size_t c_cube = 12;  // segments owned by one hypercube H_g
  std::size_t c_long = 4;   // crossing segments longer than the separator
  std::size_t c_short = 6;  // crossing segments in the short class

  PackingCaps doubled() const { return {2 * c_cube, 2 * c_long, 2 * c_short}; }
};

// Absolute length thresholds for a separator and a point count n >= 2.
// Short: length <= l_small. Mid layer i in [i_min, i_max]: length in
// (2^(i-1), 2^i] * unit, cut to (l_small, size]. Long: length > size.
struct LengthClasses {
  double size = 0.0;
  double unit = 0.0;  // size / n^(1/d)
  double l_small = 0.0;
  int i_min = 0;
  int i_max = 0;

  double layer_upper(int i) const;
  // Mid layer of a length in (l_small, size]; callers check the class first.
  int layer_of(double length) const;
};

LengthClasses length_classes(const Separator& sigma, std::size_t n, std::size_t d);

// Lattice points on the boundary of sigma: each face axis is cut into
// ceil(n^(1/d) / 2^i) cells. Sorted lexicographically.
std::vector<Point> face_grid(const Separator& sigma, int i, std::size_t n);

// Hypercube of size 2^(i+1) * size(sigma) / n^(1/d) centered at g.
Separator cube_at(const Point& g, int i, std::size_t n, const Separator& sigma);

struct CandidateSet {
  std::vector<Segment> segments;  // sorted
  std::vector<Index> p1;          // points with one incident segment, sorted
  std::vector<Index> p2;          // points with two incident segments, sorted
};

CandidateSet make_candidate(std::vector<Segment> segments);

// Crossing segments of `members` grouped for enumeration.
struct CrossingGroups {
  std::vector<Segment> short_segments;
  std::vector<std::vector<Segment>> cube_segments;  // one entry per owning cube
  std::vector<Segment> long_segments;
  std::size_t fallback_owned = 0;  // mid segments not contained in any H_g
};

// `excluded` segments are never offered (the duplicated point's zero edge).
CrossingGroups classify_crossings(const PointSet& pts, std::span<const Index> members,
                                  const Separator& sigma,
                                  std::span<const Segment> excluded = {});

struct EnumerationOptions {
  PackingCaps caps;
  // Maximum incidence per point index (empty: 2 everywhere). Boundary points
  // of a path-cover instance get 1.
  std::vector<std::uint8_t> degree_limit;
  std::vector<Segment> excluded;
  // Optional pairwise test; a set is pruned as soon as two of its segments
  // fail it. Empty: no pruning.
  std::function<bool(const Segment&, const Segment&)> compatible;
  // Optional test of each partial selection; false prunes it and every
  // extension.
  std::function<bool(std::span<const Segment>)> prefix_ok;
};

// Streams every crossing set within the caps whose incidences respect the
// degree limits, in a fixed order starting with the empty set. The visitor
// returns false to stop. Returns the number of sets visited.
std::size_t enumerate_crossing_sets(const PointSet& pts, std::span<const Index> members,
                                    const Separator& sigma, const EnumerationOptions& options,
                                    const std::function<bool(const CandidateSet&)>& visit);

struct RestrictedCandidate {
  CandidateSet set;
  std::vector<Index> p_in, b_in, p_out, b_out;
};

// Splits (members, boundary) along sigma after choosing the crossing set;
// nullopt when a boundary point has two incident segments, any point has
// more than two, a segment leaves `members`, or a side has odd boundary.
std::optional<RestrictedCandidate> restrict_candidate(const CandidateSet& s,
                                                      std::span<const Index> members,
                                                      std::span<const Index> boundary,
                                                      const PointSet& pts, const Separator& sigma);

// PP1 and PP2 against every witness separator.
bool packing_predicate(const PointSet& pts, std::span<const Segment> segments,
                       const PackingCaps& caps, std::span<const Separator> witnesses);

}  // namespace etsp
