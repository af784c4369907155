#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "etsp/geometry.hpp"

namespace etsp {

// Piecewise-constant function on [1, 3]: values[k] holds on
// (breaks[k], breaks[k+1]); breaks.front() == 1, breaks.back() == 3.
struct StepFunction {
  std::vector<double> breaks;
  std::vector<double> values;

  std::size_t pieces() const { return values.size(); }
  // Value of the piece containing t; a breakpoint takes the piece to its right
  // (the last breakpoint the last piece).
  double operator()(double t) const;
};

struct SeparatorChoice {
  Separator sigma_star;
  double t_bar = 1.0;
  Separator sigma;
  std::pair<std::size_t, std::size_t> balance_counts;  // |Q in|, |Q out|
  std::vector<std::pair<int, std::size_t>> band_sizes;  // (i, |P_i(sigma)|)
};

struct SeparatorOptions {
  double c_hi = 8.0;  // upper clamp of the truncated weights is c_hi * n
  // Allow pivot sets below 4^d + 2 points: quantile threshold at least 2 and
  // the scaling restricted to values that balance Q and split P.
  bool small_pivot = false;
};

// 4^d / (4^d + 1).
double balance_delta(std::size_t d);

// ceil(q / (4^d + 1)).
std::size_t quantile_threshold(std::size_t q, std::size_t d);

// Integer band range [i_min, i_max] for n points in R^d: i_min is the largest
// integer with 2^(i_min - 1) <= L_small * n^(1/d), i_max = ceil(log2 n^(1/d)).
std::pair<int, int> band_range(std::size_t n, std::size_t d);

// Smallest hypercube whose lower faces each touch a point of q and which
// contains at least min_count points of q; ties go to the lexicographically
// smallest center. With positive_size the size must be positive and reached
// by a contained point on an upper face, so coincident points cannot yield
// a zero-size cube.
Separator smallest_quantile_cube(const PointSet& pts, std::span<const Index> q,
                                 std::size_t min_count, bool positive_size = false);
// Threshold ceil(|q| / (4^d + 1)).
Separator smallest_quantile_cube(const PointSet& pts, std::span<const Index> q);

// Truncated weight of p as a function of the scaling t in [1, 3] applied to
// sigma_star (size > 0), for a point set of n points.
StepFunction truncated_weight(std::span<const double> p, const Separator& sigma_star,
                              std::size_t n, double c_hi = 8.0);

// Scaling in [1, 3] minimising the summed truncated weight over `members`;
// the leftmost minimising piece wins and its midpoint is returned.
double select_scaling(const PointSet& pts, std::span<const Index> members,
                      const Separator& sigma_star, double c_hi = 8.0);

// Balanced, distance-friendly separator for `members` with pivot set q.
// Requires |q| >= 4^d + 2 unless options.small_pivot is set.
SeparatorChoice build_separator(const PointSet& pts, std::span<const Index> members,
                                std::span<const Index> q, const SeparatorOptions& options = {});
SeparatorChoice build_separator(const PointSet& pts, std::span<const Index> q,
                                const SeparatorOptions& options = {});

}  // namespace etsp
