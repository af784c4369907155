#pragma once

// Independent reference implementations used only by the tests. They share
// no code with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "etsp/geometry.hpp"
#include "etsp/instance.hpp"
#include "etsp/matchings.hpp"

namespace oracle {

using etsp::Index;

inline double dist(const etsp::Instance& inst, Index a, Index b) {
  if (inst.model == etsp::WeightModel::Matrix) return inst.matrix(a, b);
  double s = 0.0;
  for (std::size_t k = 0; k < inst.dim(); ++k) {
    const double t = inst.points[a][k] - inst.points[b][k];
    s += t * t;
  }
  return std::sqrt(s);
}

inline double cycle_length(const etsp::Instance& inst, const std::vector<Index>& order) {
  double s = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) s += dist(inst, order[k], order[(k + 1) % order.size()]);
  return s;
}

// Minimum over all (n-1)! orders with point 0 first.
inline double brute_tour(const etsp::Instance& inst) {
  std::vector<Index> order(inst.size());
  std::iota(order.begin(), order.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, cycle_length(inst, order));
  } while (std::next_permutation(order.begin() + 1, order.end()));
  return best;
}

inline bool inside(std::span<const double> p, const std::vector<double>& lo, double size) {
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (p[k] < lo[k] - 1e-12 || p[k] > lo[k] + size + 1e-12) return false;
  }
  return true;
}

// Every cube whose lower corner takes, per axis, the coordinate of some q
// point touching that face from inside, with sizes drawn from all coordinate
// offsets. Returns the smallest containing >= min_count q points, ties to the
// lexicographically smallest center.
inline etsp::Separator anchored_cube_scan(const etsp::PointSet& pts, const std::vector<Index>& q,
                                          std::size_t min_count, bool positive_size) {
  const std::size_t d = pts.dim();
  std::optional<etsp::Separator> best;
  std::vector<std::size_t> pick(d, 0);
  std::vector<double> sizes;
  for (Index a : q) {
    for (Index b : q) {
      for (std::size_t k = 0; k < d; ++k) {
        const double s = pts[b][k] - pts[a][k];
        if (s >= 0.0) sizes.push_back(s);
      }
    }
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  while (true) {
    std::vector<double> lo(d);
    for (std::size_t k = 0; k < d; ++k) lo[k] = pts[q[pick[k]]][k];
    for (double s : sizes) {
      if (positive_size && s <= 0.0) continue;
      bool anchored = true;
      for (std::size_t k = 0; k < d && anchored; ++k) anchored = inside(pts[q[pick[k]]], lo, s);
      if (!anchored) continue;
      std::size_t count = 0;
      bool tight = false;
      for (Index v : q) {
        if (!inside(pts[v], lo, s)) continue;
        ++count;
        for (std::size_t k = 0; k < d; ++k) tight = tight || pts[v][k] - lo[k] == s;
      }
      if (positive_size && !tight) continue;
      if (count < min_count) continue;
      etsp::Separator c;
      c.size = s;
      c.center.resize(d);
      for (std::size_t k = 0; k < d; ++k) c.center[k] = lo[k] + s / 2.0;
      if (!best || c.size < best->size || (c.size == best->size && c.center < best->center)) best = c;
      break;
    }
    std::size_t k = 0;
    while (k < d && ++pick[k] == q.size()) pick[k++] = 0;
    if (k == d) break;
  }
  return *best;
}

// Direct evaluation of the truncated weight of p at scaling t.
inline double truncated_weight_at(std::span<const double> p, const etsp::Separator& star, std::size_t n,
                                  double t, double c_hi) {
  const double d = static_cast<double>(star.dim());
  const double root = std::pow(static_cast<double>(n), 1.0 / d);
  double linf = 0.0;
  for (std::size_t k = 0; k < star.dim(); ++k) linf = std::max(linf, std::abs(p[k] - star.center[k]));
  const double size = t * star.size;
  const double r = std::abs(linf - size / 2.0) / size;
  if (r == 0.0) return c_hi * static_cast<double>(n);
  const int i = static_cast<int>(std::ceil(std::log2(r * root)));
  const double w = i < 0 ? root / std::pow(1.5, i) : root / std::pow(4.0, i);
  return std::clamp(w, 1.0 / static_cast<double>(n), c_hi * static_cast<double>(n));
}

// Cycle structure of m u m' by explicit walking over an adjacency list.
inline bool fits_by_walk(const etsp::Matching& a, const etsp::Matching& b) {
  const std::size_t k = a.size();
  if (k == 0) return true;
  if (k == 2) return true;
  std::vector<std::vector<std::size_t>> adj(k);
  for (auto [x, y] : a.pairs()) {
    adj[x].push_back(y);
    adj[y].push_back(x);
  }
  for (auto [x, y] : b.pairs()) {
    adj[x].push_back(y);
    adj[y].push_back(x);
  }
  std::vector<bool> seen(k, false);
  std::size_t prev = k, cur = 0, steps = 0;
  seen[0] = true;
  while (true) {
    std::size_t next = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
    if (adj[cur][0] == adj[cur][1]) return false;
    prev = cur;
    cur = next;
    ++steps;
    if (cur == 0) break;
    if (seen[cur]) return false;
    seen[cur] = true;
  }
  return steps == k;
}

inline double opt_scan(const etsp::Matching& m, const std::vector<std::pair<etsp::Matching, double>>& r) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [x, w] : r) {
    if (fits_by_walk(m, x)) best = std::min(best, w);
  }
  return best;
}

// Builds G = M_in u M_out u S on point ids and checks it is exactly |B|/2
// vertex-disjoint paths covering B u P1 u P2 whose endpoints are B; returns
// the induced pairs of point ids.
inline std::optional<std::set<std::pair<Index, Index>>> join_by_graph(
    const std::vector<std::pair<Index, Index>>& m_in, const std::vector<std::pair<Index, Index>>& m_out,
    const std::vector<etsp::Segment>& s, const std::vector<Index>& boundary) {
  std::map<Index, std::vector<Index>> adj;
  const auto add = [&](Index a, Index b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (auto [a, b] : m_in) add(a, b);
  for (auto [a, b] : m_out) add(a, b);
  for (const auto& e : s) add(e.a, e.b);
  const std::set<Index> bset(boundary.begin(), boundary.end());
  for (Index b : boundary) adj[b];
  for (const auto& [v, nb] : adj) {
    const std::size_t want = bset.count(v) ? 1 : 2;
    if (nb.size() != want) return std::nullopt;
  }
  std::set<Index> visited;
  std::set<std::pair<Index, Index>> pairs;
  for (Index b : boundary) {
    if (visited.count(b)) continue;
    Index prev = b, cur = b;
    visited.insert(b);
    while (true) {
      const auto& nb = adj[cur];
      Index next = nb[0];
      if (cur != b && nb.size() == 2) next = nb[0] == prev ? nb[1] : nb[0];
      if (cur != b && nb.size() == 1) break;
      if (visited.count(next)) return std::nullopt;
      visited.insert(next);
      prev = cur;
      cur = next;
    }
    pairs.insert({std::min(b, cur), std::max(b, cur)});
  }
  if (visited.size() != adj.size()) return std::nullopt;
  return pairs;
}

// Minimum cover of all points by |B|/2 paths whose end pairs are `pairs`,
// by enumerating every vertex order and every way to cut it.
inline double brute_cover(const etsp::Instance& inst, const std::vector<std::pair<Index, Index>>& pairs) {
  const std::size_t n = inst.size();
  const std::size_t k = pairs.size();
  std::set<Index> ends;
  for (auto [a, b] : pairs) {
    ends.insert(a);
    ends.insert(b);
  }
  std::vector<Index> interior;
  for (Index v = 0; v < n; ++v) {
    if (!ends.count(v)) interior.push_back(v);
  }
  std::sort(interior.begin(), interior.end());
  double best = std::numeric_limits<double>::infinity();
  // Assign interior points to paths and order them: permute the interior and
  // cut it into k consecutive (possibly empty) blocks.
  do {
    std::vector<std::size_t> cuts(k + 1, 0);
    cuts[k] = interior.size();
    std::function<void(std::size_t)> rec = [&](std::size_t j) {
      if (j == k) {
        double total = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
          Index prev = pairs[p].first;
          for (std::size_t x = cuts[p]; x < cuts[p + 1]; ++x) {
            total += dist(inst, prev, interior[x]);
            prev = interior[x];
          }
          total += dist(inst, prev, pairs[p].second);
        }
        best = std::min(best, total);
        return;
      }
      const std::size_t lo = cuts[j - 1];
      for (std::size_t c = lo; c <= interior.size(); ++c) {
        cuts[j] = c;
        rec(j + 1);
      }
    };
    rec(1);
  } while (std::next_permutation(interior.begin(), interior.end()));
  return best;
}

inline std::vector<double> uniform_coords(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> c(n * d);
  for (double& x : c) x = u(rng);
  return c;
}

}  // namespace oracle
