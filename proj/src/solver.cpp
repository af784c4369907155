#include "etsp/solver.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "etsp/error.hpp"
#include "etsp/separator.hpp"

namespace etsp {

namespace {

using Mask = std::uint64_t;

Mask bit(Index v) { return Mask{1} << v; }

std::vector<Index> bits_of(Mask m) {
  std::vector<Index> out;
  while (m != 0) {
    out.push_back(static_cast<Index>(std::countr_zero(m)));
    m &= m - 1;
  }
  return out;
}

Mask mask_of(std::span<const Index> v) {
  Mask m = 0;
  for (Index i : v) {
    if (i >= 64) throw PreconditionError("solver: point index beyond 63");
    m |= bit(i);
  }
  return m;
}

RepSet empty_cover() {
  RepSet r{std::vector<Index>{}};
  r.insert_min(Matching{}, 0.0, [] { return WitnessPtr{}; });
  return r;
}

// Path DP over the interior points for every pair of boundary points, then
// a subset convolution per matching.
RepSet base_case_impl(const DistanceMatrix& w, std::span<const Index> members,
                      std::span<const Index> boundary, bool exhaustive) {
  if (members.empty()) return empty_cover();
  RepSet result{std::vector<Index>(boundary.begin(), boundary.end())};
  if (boundary.empty()) return result;

  std::vector<Index> inner;
  for (Index v : members) {
    if (!std::binary_search(boundary.begin(), boundary.end(), v)) inner.push_back(v);
  }
  const std::size_t b = boundary.size();
  const std::size_t m = inner.size();
  if (m > 20) throw PreconditionError("base_case: too many interior points");
  const std::size_t subsets = std::size_t{1} << m;
  const double inf = std::numeric_limits<double>::infinity();

  // h[s][X][v]: path from boundary s through exactly X, ending at inner v.
  std::vector<double> h(b * subsets * std::max<std::size_t>(m, 1), inf);
  std::vector<std::uint8_t> h_prev(h.size(), 0xff);
  const auto hid = [&](std::size_t s, std::size_t x, std::size_t v) { return (s * subsets + x) * m + v; };
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t v = 0; v < m; ++v) h[hid(s, std::size_t{1} << v, v)] = w(boundary[s], inner[v]);
    for (std::size_t x = 1; x < subsets; ++x) {
      for (std::size_t v = 0; v < m; ++v) {
        const double cur = h[hid(s, x, v)];
        if (!(x >> v & 1) || cur == inf) continue;
        for (std::size_t u = 0; u < m; ++u) {
          if (x >> u & 1) continue;
          const double cand = cur + w(inner[v], inner[u]);
          const std::size_t to = hid(s, x | std::size_t{1} << u, u);
          if (cand < h[to]) {
            h[to] = cand;
            h_prev[to] = static_cast<std::uint8_t>(v);
          }
        }
      }
    }
  }
  // g[s][t][X]: path s -> t with interior exactly X (s < t).
  std::vector<double> g(b * b * subsets, inf);
  std::vector<std::uint8_t> g_last(g.size(), 0xff);
  const auto gid = [&](std::size_t s, std::size_t t, std::size_t x) { return (s * b + t) * subsets + x; };
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t t = s + 1; t < b; ++t) {
      g[gid(s, t, 0)] = w(boundary[s], boundary[t]);
      for (std::size_t x = 1; x < subsets; ++x) {
        for (std::size_t v = 0; v < m; ++v) {
          if (!(x >> v & 1)) continue;
          const double cand = h[hid(s, x, v)] + w(inner[v], boundary[t]);
          if (cand < g[gid(s, t, x)]) {
            g[gid(s, t, x)] = cand;
            g_last[gid(s, t, x)] = static_cast<std::uint8_t>(v);
          }
        }
      }
    }
  }
  const auto path_edges = [&](std::size_t s, std::size_t t, std::size_t x, std::vector<Segment>& out) {
    if (x == 0) {
      out.push_back(make_segment(boundary[s], boundary[t]));
      return;
    }
    std::size_t v = g_last[gid(s, t, x)];
    out.push_back(make_segment(inner[v], boundary[t]));
    while (true) {
      const std::size_t prev = h_prev[hid(s, x, v)];
      if (prev == 0xff) {
        out.push_back(make_segment(boundary[s], inner[v]));
        break;
      }
      out.push_back(make_segment(inner[prev], inner[v]));
      x &= ~(std::size_t{1} << v);
      v = prev;
    }
  };

  const std::size_t full = subsets - 1;
  for (const Matching& mt : all_matchings(b)) {
    const auto pairs = mt.pairs();
    const std::size_t r = pairs.size();
    // f[j][X]: first j+1 pairs cover exactly X; pick[j][X] is pair j's share.
    std::vector<std::vector<double>> f(r, std::vector<double>(subsets, inf));
    std::vector<std::vector<std::uint32_t>> pick(r, std::vector<std::uint32_t>(subsets, 0));
    for (std::size_t x = 0; x < subsets; ++x) {
      f[0][x] = g[gid(pairs[0].first, pairs[0].second, x)];
      pick[0][x] = static_cast<std::uint32_t>(x);
    }
    for (std::size_t j = 1; j < r; ++j) {
      const auto [s, t] = pairs[j];
      for (std::size_t x = 0; x < subsets; ++x) {
        if (j + 1 == r && x != full) continue;
        double best = inf;
        std::size_t arg = 0;
        for (std::size_t y = x;; y = (y - 1) & x) {
          const double cand = f[j - 1][x & ~y] + g[gid(s, t, y)];
          if (cand < best) {
            best = cand;
            arg = y;
          }
          if (y == 0) break;
        }
        f[j][x] = best;
        pick[j][x] = static_cast<std::uint32_t>(arg);
      }
    }
    const double weight = f[r - 1][full];
    if (weight == inf) continue;
    result.insert_min(mt, weight, [&] {
      auto node = std::make_shared<WitnessNode>();
      std::size_t x = full;
      for (std::size_t j = r; j-- > 0;) {
        const std::size_t y = pick[j][x];
        path_edges(pairs[j].first, pairs[j].second, y, node->edges);
        x &= ~y;
      }
      return WitnessPtr(std::move(node));
    });
  }
  if (!exhaustive && result.size() > result.bound()) return reduce(result);
  return result;
}

struct Key {
  Mask p, b;
  bool operator==(const Key&) const = default;
};
struct KeyHash {
  std::size_t operator()(const Key& k) const {
    return std::hash<Mask>{}(k.p * 0x9e3779b97f4a7c15ULL ^ (k.b + 0x632be59bd9b4e019ULL));
  }
};

// A solved subproblem with its entries also listed by increasing weight.
struct Solved {
  RepSet set;
  std::vector<const WeightedMatching*> by_weight;

  explicit Solved(RepSet r) : set(std::move(r)) {
    for (const auto& e : set.entries()) by_weight.push_back(&e);
    std::stable_sort(by_weight.begin(), by_weight.end(),
                     [](const WeightedMatching* a, const WeightedMatching* b) { return a->weight < b->weight; });
  }
  double min_weight() const { return by_weight.empty() ? kInfinity : by_weight.front()->weight; }
};

using RepPtr = std::shared_ptr<const Solved>;

// Q = B when the boundary is large, else Q = P; small pivot sets use the
// restricted sweep. Empty when neither pivot admits a separator.
std::optional<Separator> choose_separator(const PointSet& pts, const std::vector<Index>& members,
                                          const std::vector<Index>& boundary, const SolverConfig& cfg) {
  const std::size_t d = pts.dim();
  const double pivot = cfg.gamma * std::pow(static_cast<double>(members.size()), 1.0 - 1.0 / static_cast<double>(d));
  const std::size_t big = (std::size_t{1} << (2 * d)) + 2;
  const auto attempt = [&](const std::vector<Index>& q) -> std::optional<Separator> {
    SeparatorOptions so;
    so.c_hi = cfg.c_hi;
    so.small_pivot = q.size() < big;
    try {
      return build_separator(pts, members, q, so).sigma;
    } catch (const PreconditionError&) {
      return std::nullopt;
    }
  };
  if (static_cast<double>(boundary.size()) > pivot) {
    if (auto s = attempt(boundary)) return s;
  }
  return attempt(members);
}

class Context {
 public:
  Context(const PointSet& pts, DistanceMatrix w, const SolverConfig& cfg, std::optional<Segment> excluded)
      : pts_(pts), w_(std::move(w)), cfg_(cfg), d_(pts.dim()), n0_(cfg.n0(pts.dim())) {
    banned_.assign(pts.size(), 0);
    if (excluded) ban(*excluded);
    if (cfg.gamma <= 0.0) throw PreconditionError("solver: gamma must be positive");
    if (pts.size() > 64) throw PreconditionError("solver: at most 64 points including the copy");
    if (cfg.time_limit_ms > 0.0) {
      deadline_ = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double, std::milli>(cfg.time_limit_ms));
    }
  }

  // Enables budgets: every structure of weight <= upper whose point v has
  // degree degree[v] survives. Weights are shifted by node penalties
  // w'(u, v) = w(u, v) + pi[u] + pi[v] chosen to tighten the degree bounds.
  void set_bounds(double upper, std::vector<int> degree) {
    const std::size_t n = pts_.size();
    upper_ = upper;
    degree_ = std::move(degree);
    pi_ = node_penalties(upper);
    tree_pi_ = tree_penalties(upper, pi_);
    for (int round = 0; round < 2 && eliminate_edges(upper); ++round) {
      pi_ = node_penalties(upper);
      tree_pi_ = tree_penalties(upper, pi_);
    }
    nbr_.assign(n, {});
    outside_one_.assign(n, 0.0);
    outside_full_.assign(n, 0.0);
    double shift = upper, spread = 0.0, tree_spread = 0.0;
    for (Index v = 0; v < n; ++v) {
      shift += degree_[v] * pi_[v];
      spread += std::abs(pi_[v]);
      tree_spread += std::abs(tree_pi_[v]);
      nbr_[v] = neighbours_by_penalised_weight(v, pi_);
      if (!nbr_[v].empty()) outside_one_[v] = shifted(v, nbr_[v][0]) / 2.0;
      for (int k = 0; k < degree_[v] && k < static_cast<int>(nbr_[v].size()); ++k) {
        outside_full_[v] += shifted(v, nbr_[v][k]) / 2.0;
      }
    }
    const double eps = 1e-9 * (1.0 + std::abs(upper) + 4.0 * spread);
    shift_ = shift + eps;
    upper_eps_ = upper + 1e-9 * (1.0 + std::abs(upper) + 4.0 * tree_spread);
    penalised_.assign(n * n, kInfinity);
    single_ = 0;
    for (Index v = 0; v < n; ++v) {
      if (degree_[v] == 1) single_ |= bit(v);
      for (Index u = 0; u < n; ++u) {
        if (u != v && !is_excluded_pair(v, u)) penalised_[v * n + u] = w_(v, u) + tree_pi_[v] + tree_pi_[u];
      }
    }
  }

  RepPtr solve(Mask p, Mask b) {
    std::optional<std::promise<RepPtr>> promise;
    std::shared_future<RepPtr> fut;
    {
      std::lock_guard lk(mu_);
      const auto found = memo_.find(Key{p, b});
      if (found != memo_.end()) {
        fut = found->second;
      } else {
        promise.emplace();
        fut = promise->get_future().share();
        memo_.emplace(Key{p, b}, fut);
      }
    }
    if (!promise) return fut.get();
    try {
      auto r = std::make_shared<const Solved>(compute(p, b, 0, 1));
      promise->set_value(r);
      return r;
    } catch (...) {
      promise->set_exception(std::current_exception());
      throw;
    }
  }

  // The top call: candidates are dealt round-robin over the workers.
  RepSet solve_top(Mask p, Mask b) {
    const std::size_t workers = std::max<std::size_t>(1, cfg_.workers);
    if (workers == 1) return compute(p, b, 0, 1);
    std::vector<RepSet> parts(workers);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t k = 0; k < workers; ++k) {
      threads.emplace_back([&, k] {
        try {
          parts[k] = compute(p, b, k, workers);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    RepSet merged{bits_of(b)};
    for (const auto& part : parts) merged.merge(part);
    if (!cfg_.exhaustive && merged.size() > merged.bound()) return reduce(merged);
    return merged;
  }

  SolveStats stats() const {
    SolveStats s;
    s.candidates = candidates_.load();
    s.subproblems = subproblems_.load();
    s.base_cases = base_cases_.load();
    s.max_boundary = max_boundary_.load();
    std::lock_guard lk(mu_);
    s.has_top_separator = top_separator_.has_value();
    if (top_separator_) s.top_separator = *top_separator_;
    return s;
  }

 private:
  RepSet compute(Mask p, Mask b, std::size_t offset, std::size_t stride) {
    const auto members = bits_of(p);
    const auto boundary = bits_of(b);
    if (boundary.size() % 2 != 0) throw PreconditionError("solver: odd boundary");
    if (offset == 0) {
      ++subproblems_;
      std::size_t seen = max_boundary_.load();
      while (boundary.size() > seen && !max_boundary_.compare_exchange_weak(seen, boundary.size())) {
      }
    }
    check_deadline();
    if (p == 0) return empty_cover();
    if (b == 0) return RepSet{std::vector<Index>{}};
    const double cap = budget(p, b);
    if (upper_ && lower_bound(p, b) > cap) return RepSet{boundary};
    if (members.size() <= n0_) {
      if (offset == 0) ++base_cases_;
      if (offset != 0) return RepSet{boundary};
      return base_case_impl(w_, members, boundary, cfg_.exhaustive);
    }

    const auto sigma = choose_separator(pts_, members, boundary, cfg_);
    if (!sigma) {
      if (members.size() > 16) throw std::logic_error("solver: no separator for a large subproblem");
      if (offset == 0) ++base_cases_;
      if (offset != 0) return RepSet{boundary};
      return base_case_impl(w_, members, boundary, cfg_.exhaustive);
    }
    if (stride > 1 || p == top_mask_) {
      std::lock_guard lk(mu_);
      if (!top_separator_) top_separator_ = *sigma;
    }

    Mask inside = 0;
    for (Index v : members) {
      if (classify(pts_[v], *sigma) == Side::In) inside |= bit(v);
    }
    const Mask outside = p & ~inside;

    EnumerationOptions eo;
    eo.caps = cfg_.caps;
    eo.degree_limit.assign(pts_.size(), 0);
    for (Index v : members) eo.degree_limit[v] = (b & bit(v)) ? 1 : 2;
    for (const Segment& s : excluded_) {
      if ((p & bit(s.a)) && (p & bit(s.b))) eo.excluded.push_back(s);
    }
    if (cfg_.exchange_filter) {
      eo.compatible = [this](const Segment& x, const Segment& y) {
        const double cur = w_(x.a, x.b) + w_(y.a, y.b);
        const double alt = std::max(w_(x.a, y.a) + w_(x.b, y.b), w_(x.a, y.b) + w_(x.b, y.a));
        return cur <= alt;
      };
    }

    // fixed[v][k]: least contribution of v once k of its incidences are
    // crossing segments, whose weights are then counted directly.
    std::vector<std::array<double, 3>> fixed;
    std::vector<std::uint8_t> count;
    if (upper_) {
      fixed.assign(pts_.size(), {0.0, 0.0, 0.0});
      count.assign(pts_.size(), 0);
      for (Index v : members) {
        const int need = (b & bit(v)) ? 1 : 2;
        std::array<double, 3> cheapest{0.0, kInfinity, kInfinity};
        int found = 0;
        for (Index u : nbr_[v]) {
          if (found == need) break;
          if (!(p & bit(u))) continue;
          cheapest[found + 1] = cheapest[found] + shifted(v, u);
          ++found;
        }
        for (int k = 0; k <= need; ++k) fixed[v][k] = cheapest[need - k] / 2.0 - (need - k) * pi_[v];
      }
      const double base = inner_bound(p, b);
      eo.prefix_ok = [&, base, cap](std::span<const Segment> chosen) {
        double bound = base;
        for (const Segment& s : chosen) {
          bound += w_(s.a, s.b);
          for (Index v : {s.a, s.b}) {
            bound += fixed[v][count[v] + 1] - fixed[v][count[v]];
            ++count[v];
          }
        }
        for (const Segment& s : chosen) count[s.a] = count[s.b] = 0;
        return bound <= cap;
      };
    }

    RepSet result{boundary};
    std::vector<std::uint8_t> joined;
    std::size_t index = 0;
    std::uint64_t processed = 0;
    enumerate_crossing_sets(pts_, members, *sigma, eo, [&](const CandidateSet& cand) {
      if (index++ % stride != offset) return true;
      if (++processed % 256 == 0) check_deadline();
      Mask p1 = 0, p2 = 0;
      double s_len = 0.0;
      for (const Segment& s : cand.segments) {
        for (Index v : {s.a, s.b}) {
          if (p1 & bit(v)) {
            p1 &= ~bit(v);
            p2 |= bit(v);
          } else {
            p1 |= bit(v);
          }
        }
        s_len += w_(s.a, s.b);
      }
      const Mask keep = p & ~((b & p1) | p2);
      const Mask flip = b ^ p1;
      const Mask p_in = keep & inside, b_in = flip & inside;
      const Mask p_out = keep & outside, b_out = flip & outside;
      if (std::popcount(b_in) % 2 != 0 || std::popcount(b_out) % 2 != 0) return true;
      if (b_in == 0 && p_in != 0) return true;
      if (b_out == 0 && p_out != 0) return true;
      if (upper_ && s_len + inner_bound(p_in, b_in) + inner_bound(p_out, b_out) > cap) return true;
      if (upper_ && s_len + lower_bound(p_in, b_in) + lower_bound(p_out, b_out) > cap) return true;

      const RepPtr r_in = solve(p_in, b_in);
      if (r_in->set.empty()) return true;
      if (upper_ && s_len + r_in->min_weight() + lower_bound(p_out, b_out) > cap) return true;
      const RepPtr r_out = solve(p_out, b_out);
      if (r_out->set.empty()) return true;

      const Joiner joiner(r_in->set.boundary(), r_out->set.boundary(), cand, boundary);
      const WeightedMatching& lightest_out = *r_out->by_weight.front();
      for (const WeightedMatching* in_ptr : r_in->by_weight) {
        const auto& e_in = *in_ptr;
        if (e_in.weight + s_len + lightest_out.weight > cap) break;
        for (const WeightedMatching* out_ptr : r_out->by_weight) {
          const auto& e_out = *out_ptr;
          const double weight = e_in.weight + s_len + e_out.weight;
          if (weight > cap) break;
          if (!joiner.join_into(e_in.matching, e_out.matching, joined)) continue;
          result.insert_min(std::span<const std::uint8_t>(joined), weight, [&] {
            auto node = std::make_shared<WitnessNode>();
            node->edges = cand.segments;
            node->parts = {e_in.witness, e_out.witness};
            return WitnessPtr(std::move(node));
          });
        }
      }
      return true;
    });
    candidates_ += processed;
    if (stride == 1 && !cfg_.exhaustive && result.size() > result.bound()) return reduce(result);
    return result;
  }

  void check_deadline() const {
    if (deadline_ && std::chrono::steady_clock::now() > *deadline_) {
      throw TimeLimitError("solver: time limit exceeded");
    }
  }

  // Half of the cheapest penalised incident weights inside p (two per
  // interior point, one per boundary point) minus the penalties. Infinite
  // when p cannot be covered at all.
  double inner_bound(Mask p, Mask b) const {
    double total = 0.0;
    for (Mask rest = p; rest != 0; rest &= rest - 1) {
      const auto v = static_cast<Index>(std::countr_zero(rest));
      const int need = (b & bit(v)) ? 1 : 2;
      int found = 0;
      double part = 0.0;
      for (Index u : nbr_[v]) {
        if (!(p & bit(u))) continue;
        part += shifted(v, u);
        if (++found == need) break;
      }
      if (found < need) return kInfinity;
      total += part / 2.0 - need * pi_[v];
    }
    return total;
  }

  double lower_bound(Mask p, Mask b) const {
    return std::max(inner_bound(p, b), forest_bound(p & ~b, b));
  }

  // Paths covering `interior` (two incidences each) that end in `terminals`
  // (one each). Merging the terminals into one node leaves a connected
  // graph: a spanning tree plus one terminal edge per path.
  double forest_bound(Mask interior, Mask terminals) const {
    const int ends = std::popcount(terminals);
    if (ends == 0 || ends % 2 != 0) return -kInfinity;
    const std::size_t n = pts_.size();
    std::array<double, 64> key;
    double end_edge = kInfinity, total = 0.0;
    for (Mask t = terminals; t != 0; t &= t - 1) {
      const auto x = static_cast<std::size_t>(std::countr_zero(t));
      total -= tree_pi_[x];
      for (Mask r = terminals; r != 0; r &= r - 1) {
        end_edge = std::min(end_edge, penalised_[x * n + static_cast<std::size_t>(std::countr_zero(r))]);
      }
    }
    for (Mask r = interior; r != 0; r &= r - 1) {
      const auto v = static_cast<std::size_t>(std::countr_zero(r));
      total -= 2.0 * tree_pi_[v];
      key[v] = kInfinity;
      for (Mask t = terminals; t != 0; t &= t - 1) {
        key[v] = std::min(key[v], penalised_[static_cast<std::size_t>(std::countr_zero(t)) * n + v]);
      }
      end_edge = std::min(end_edge, key[v]);
    }
    for (Mask left = interior; left != 0;) {
      std::size_t next = 64;
      for (Mask r = left; r != 0; r &= r - 1) {
        const auto v = static_cast<std::size_t>(std::countr_zero(r));
        if (next == 64 || key[v] < key[next]) next = v;
      }
      total += key[next];
      left &= ~bit(static_cast<Index>(next));
      for (Mask r = left; r != 0; r &= r - 1) {
        const auto v = static_cast<std::size_t>(std::countr_zero(r));
        key[v] = std::min(key[v], penalised_[next * n + v]);
      }
    }
    return total + (ends / 2) * end_edge;
  }

  // Upper bound on the weight of the part of an optimal tour inside (p, b).
  double budget(Mask p, Mask b) const {
    if (!upper_) return kInfinity;
    const Mask all = pts_.size() == 64 ? ~Mask{0} : (Mask{1} << pts_.size()) - 1;
    const double rest_tree = forest_bound(all & ~p & ~single_, (b & ~single_) | (single_ & ~p));
    return std::min(budget_by_degree(p, b), upper_eps_ - rest_tree);
  }

  double budget_by_degree(Mask p, Mask b) const {
    double rest = 0.0;
    for (Index v = 0; v < pts_.size(); ++v) {
      if (!(p & bit(v))) {
        rest += outside_full_[v];
      } else if (b & bit(v)) {
        rest += pi_[v];
        if (degree_[v] == 2) rest += outside_one_[v];
      } else {
        rest += 2.0 * pi_[v];
      }
    }
    return shift_ - rest;
  }

  double shifted(Index v, Index u) const { return w_(v, u) + pi_[v] + pi_[u]; }

  bool is_excluded_pair(Index v, Index u) const { return (banned_[v] & bit(u)) != 0; }

  void ban(const Segment& s) {
    excluded_.push_back(s);
    banned_[s.a] |= bit(s.b);
    banned_[s.b] |= bit(s.a);
  }

  // Bans every edge e whose forced-edge tree bound exceeds `upper`: the
  // merged-terminal tree with e swapped in for the heaviest edge on the
  // cycle it closes, plus the cheapest terminal edge. Returns whether any
  // edge was banned.
  bool eliminate_edges(double upper) {
    const std::size_t n = pts_.size();
    double spread = 0.0;
    for (double x : tree_pi_) spread += std::abs(x);
    const double limit = upper + 1e-9 * (1.0 + std::abs(upper) + 4.0 * spread);
    const auto weight = [&](Index v, Index u) {
      return (u == v || is_excluded_pair(v, u)) ? kInfinity : w_(v, u) + tree_pi_[v] + tree_pi_[u];
    };
    // node n stands for the merged terminals
    const auto node = [&](Index v) { return degree_[v] == 1 ? n : static_cast<std::size_t>(v); };
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n + 1);
    std::vector<double> key(n + 1, kInfinity);
    std::vector<std::size_t> from(n + 1, n);
    std::vector<bool> done(n + 1, false);
    double lb = 0.0, end_edge = kInfinity;
    for (Index v = 0; v < n; ++v) {
      lb -= degree_[v] * tree_pi_[v];
      if (degree_[v] != 1) continue;
      done[v] = true;
      for (Index u = 0; u < n; ++u) {
        const double c = weight(v, u);
        end_edge = std::min(end_edge, c);
        if (degree_[u] != 1 && c < key[u]) key[u] = c;
      }
    }
    done[n] = true;
    for (Index v = 0; v < n; ++v) {
      if (!done[v]) from[v] = n;
    }
    while (true) {
      std::size_t next = n + 1;
      for (std::size_t v = 0; v < n; ++v) {
        if (!done[v] && (next == n + 1 || key[v] < key[next])) next = v;
      }
      if (next == n + 1) break;
      if (key[next] == kInfinity) return false;
      done[next] = true;
      lb += key[next];
      adj[next].push_back({from[next], key[next]});
      adj[from[next]].push_back({next, key[next]});
      for (Index u = 0; u < n; ++u) {
        if (!done[u] && weight(static_cast<Index>(next), u) < key[u]) {
          key[u] = weight(static_cast<Index>(next), u);
          from[u] = next;
        }
      }
    }
    if (end_edge == kInfinity) return false;
    lb += end_edge;
    // heaviest[x][y]: heaviest tree edge on the path between x and y
    std::vector<std::vector<double>> heaviest(n + 1, std::vector<double>(n + 1, 0.0));
    for (std::size_t root = 0; root <= n; ++root) {
      std::vector<std::size_t> stack{root};
      std::vector<bool> seen(n + 1, false);
      seen[root] = true;
      while (!stack.empty()) {
        const std::size_t x = stack.back();
        stack.pop_back();
        for (auto [y, c] : adj[x]) {
          if (seen[y]) continue;
          seen[y] = true;
          heaviest[root][y] = std::max(heaviest[root][x], c);
          stack.push_back(y);
        }
      }
    }
    bool any = false;
    for (Index v = 0; v < n; ++v) {
      for (Index u = v + 1; u < n; ++u) {
        const double c = weight(v, u);
        if (c == kInfinity || node(v) == node(u)) continue;
        if (lb + c - heaviest[node(v)][node(u)] > limit) {
          ban(make_segment(v, u));
          any = true;
        }
      }
    }
    return any;
  }

  std::vector<Index> neighbours_by_penalised_weight(Index v, const std::vector<double>& pi) const {
    std::vector<Index> out;
    for (Index u = 0; u < pts_.size(); ++u) {
      if (u != v && !is_excluded_pair(v, u)) out.push_back(u);
    }
    std::stable_sort(out.begin(), out.end(), [&](Index a, Index c) {
      return w_(v, a) + pi[a] < w_(v, c) + pi[c];
    });
    return out;
  }

  // Subgradient ascent on the merged-terminal tree bound of the whole
  // instance, started from `pi`.
  std::vector<double> tree_penalties(double upper, std::vector<double> pi) const {
    const std::size_t n = pts_.size();
    std::vector<double> best_pi = pi;
    double best = -kInfinity, lambda = 1.0;
    int stale = 0;
    std::vector<int> hits(n);
    std::vector<double> key(n);
    std::vector<Index> from(n);
    std::vector<bool> done(n);
    const auto weight = [&](Index v, Index u) {
      return (u == v || is_excluded_pair(v, u)) ? kInfinity : w_(v, u) + pi[v] + pi[u];
    };
    for (int it = 0; it < 400; ++it) {
      std::fill(hits.begin(), hits.end(), 0);
      double lb = 0.0, end_edge = kInfinity;
      Index end_a = 0, end_b = 0;
      std::fill(done.begin(), done.end(), false);
      for (Index v = 0; v < n; ++v) {
        lb -= degree_[v] * pi[v];
        if (degree_[v] == 1) done[v] = true;
      }
      for (Index v = 0; v < n; ++v) {
        key[v] = kInfinity;
        for (Index x = 0; x < n; ++x) {
          if (degree_[x] != 1) continue;
          if (done[v] && x <= v) continue;
          const double c = weight(x, v);
          if (!done[v] && c < key[v]) {
            key[v] = c;
            from[v] = x;
          }
          if (c < end_edge) {
            end_edge = c;
            end_a = x;
            end_b = v;
          }
        }
      }
      for (std::size_t left = std::count(done.begin(), done.end(), false); left > 0; --left) {
        Index next = 0;
        double next_key = kInfinity;
        for (Index v = 0; v < n; ++v) {
          if (!done[v] && (next_key == kInfinity || key[v] < next_key)) {
            next_key = key[v];
            next = v;
          }
        }
        done[next] = true;
        lb += next_key;
        ++hits[next];
        ++hits[from[next]];
        for (Index v = 0; v < n; ++v) {
          if (!done[v] && weight(next, v) < key[v]) {
            key[v] = weight(next, v);
            from[v] = next;
          }
        }
      }
      lb += end_edge;
      ++hits[end_a];
      ++hits[end_b];
      if (lb > best + 1e-12) {
        best = lb;
        best_pi = pi;
        stale = 0;
      } else if (++stale == 20) {
        lambda /= 2.0;
        stale = 0;
      }
      double norm = 0.0;
      std::vector<double> g(n);
      for (Index v = 0; v < n; ++v) {
        g[v] = hits[v] - degree_[v];
        norm += g[v] * g[v];
      }
      if (norm == 0.0 || lambda < 1e-6) break;
      const double step = lambda * std::max(upper - lb, 1e-9) / norm;
      for (Index v = 0; v < n; ++v) pi[v] += step * g[v];
    }
    return best_pi;
  }

  // Subgradient ascent on sum_v (half the degree[v] cheapest penalised
  // weights at v - degree[v] pi[v]), a lower bound on every structure with
  // those degrees. Fixed iteration count, so the result is reproducible.
  std::vector<double> node_penalties(double upper) const {
    const std::size_t n = pts_.size();
    std::vector<double> pi(n, 0.0), best_pi = pi;
    double best = -kInfinity, lambda = 1.0;
    int stale = 0;
    std::vector<int> hits(n);
    for (int it = 0; it < 400; ++it) {
      double lb = 0.0;
      std::fill(hits.begin(), hits.end(), 0);
      for (Index v = 0; v < n; ++v) {
        const auto order = neighbours_by_penalised_weight(v, pi);
        double part = 0.0;
        for (int k = 0; k < degree_[v] && k < static_cast<int>(order.size()); ++k) {
          part += w_(v, order[k]) + pi[v] + pi[order[k]];
          ++hits[order[k]];
        }
        lb += part / 2.0 - degree_[v] * pi[v];
      }
      if (lb > best + 1e-12) {
        best = lb;
        best_pi = pi;
        stale = 0;
      } else if (++stale == 20) {
        lambda /= 2.0;
        stale = 0;
      }
      double norm = 0.0;
      std::vector<double> g(n);
      for (Index v = 0; v < n; ++v) {
        g[v] = (hits[v] - degree_[v]) / 2.0;
        norm += g[v] * g[v];
      }
      if (norm == 0.0 || lambda < 1e-6) break;
      const double step = lambda * std::max(upper - lb, 1e-9) / norm;
      for (Index v = 0; v < n; ++v) pi[v] += step * g[v];
    }
    return best_pi;
  }

 public:
  Mask top_mask_ = 0;

 private:
  const PointSet& pts_;
  DistanceMatrix w_;
  SolverConfig cfg_;
  std::size_t d_;
  std::size_t n0_;
  std::vector<Segment> excluded_;
  std::vector<Mask> banned_;
  std::optional<double> upper_;
  std::optional<std::chrono::steady_clock::time_point> deadline_;
  std::vector<std::vector<Index>> nbr_;
  std::vector<int> degree_;
  std::vector<double> pi_, tree_pi_, outside_one_, outside_full_;
  double shift_ = 0.0, upper_eps_ = 0.0;
  std::vector<double> penalised_;
  Mask single_ = 0;

  mutable std::mutex mu_;
  std::unordered_map<Key, std::shared_future<RepPtr>, KeyHash> memo_;
  std::optional<Separator> top_separator_;
  std::atomic<std::uint64_t> candidates_{0}, subproblems_{0}, base_cases_{0};
  std::atomic<std::size_t> max_boundary_{0};
};

double cycle_weight(const DistanceMatrix& w, const std::vector<Index>& t) {
  double total = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) total += w(t[k], t[(k + 1) % t.size()]);
  return total;
}

// 2-opt and or-opt (moving runs of up to three points, either way round)
// until neither finds an improvement.
void local_search(const DistanceMatrix& w, std::vector<Index>& t) {
  const std::size_t n = t.size();
  const auto at = [&](std::size_t k) { return t[k % n]; };
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t i = 0; i + 2 < n; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        const Index a = t[i], b = t[i + 1], c = t[j], d = at(j + 1);
        if (a == d) continue;
        if (w(a, c) + w(b, d) < w(a, b) + w(c, d) - 1e-12) {
          std::reverse(t.begin() + static_cast<std::ptrdiff_t>(i + 1), t.begin() + static_cast<std::ptrdiff_t>(j + 1));
          improved = true;
        }
      }
    }
    for (std::size_t len = 1; len <= 3 && len + 2 < n && !improved; ++len) {
      for (std::size_t i = 0; i < n && !improved; ++i) {
        // run t[i..i+len-1], predecessor p, successor s
        const Index p = at(i + n - 1), first = t[i], last = at(i + len - 1), s = at(i + len);
        const double cut = w(p, first) + w(last, s) - w(p, s);
        for (std::size_t k = i + len; k + 1 < i + n - 1 && !improved; ++k) {
          const Index x = at(k), y = at(k + 1);
          const double base = w(x, y);
          const double fwd = w(x, first) + w(last, y) - base;
          const double rev = w(x, last) + w(first, y) - base;
          if (std::min(fwd, rev) < cut - 1e-12) {
            std::vector<Index> run, rest;
            for (std::size_t r = 0; r < len; ++r) run.push_back(at(i + r));
            if (rev < fwd) std::reverse(run.begin(), run.end());
            for (std::size_t r = i + len; r <= k; ++r) rest.push_back(at(r));
            rest.insert(rest.end(), run.begin(), run.end());
            for (std::size_t r = k + 1; r < i + n; ++r) rest.push_back(at(r));
            t = std::move(rest);
            improved = true;
          }
        }
      }
    }
  }
}

// Best local optimum over nearest-neighbour starts from every point, then
// double-bridge kicks from the best one with a fixed seed.
double heuristic_tour_length(const DistanceMatrix& w) {
  const std::size_t n = w.size();
  std::vector<Index> best_tour;
  double best = kInfinity;
  for (Index start = 0; start < n; ++start) {
    std::vector<Index> tour{start};
    std::vector<bool> used(n, false);
    used[start] = true;
    for (std::size_t k = 1; k < n; ++k) {
      const Index last = tour.back();
      Index next = 0;
      double next_w = kInfinity;
      for (Index u = 0; u < n; ++u) {
        if (!used[u] && w(last, u) < next_w) {
          next_w = w(last, u);
          next = u;
        }
      }
      used[next] = true;
      tour.push_back(next);
    }
    local_search(w, tour);
    if (const double len = cycle_weight(w, tour); len < best) {
      best = len;
      best_tour = std::move(tour);
    }
  }
  if (n < 8) return best;
  std::mt19937_64 rng(0x5eed);
  for (std::size_t kick = 0; kick < 50 * n; ++kick) {
    std::array<std::size_t, 3> cut{};
    for (auto& c : cut) c = 1 + rng() % (n - 1);
    std::sort(cut.begin(), cut.end());
    if (cut[0] == cut[1] || cut[1] == cut[2]) continue;
    const auto it = [&](std::size_t k) { return best_tour.begin() + static_cast<std::ptrdiff_t>(k); };
    std::vector<Index> tour(best_tour.begin(), it(cut[0]));
    tour.insert(tour.end(), it(cut[2]), best_tour.end());
    tour.insert(tour.end(), it(cut[1]), it(cut[2]));
    tour.insert(tour.end(), it(cut[0]), it(cut[1]));
    local_search(w, tour);
    if (const double len = cycle_weight(w, tour); len < best - 1e-12) {
      best = len;
      best_tour = std::move(tour);
    }
  }
  return best;
}

// Vertices of the path from `from` to `to` in an edge set of disjoint paths.
std::vector<Index> walk_path(const std::vector<Segment>& edges, Index from, Index to) {
  std::unordered_map<Index, std::vector<Index>> adj;
  for (const Segment& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<Index> path{from};
  Index prev = from, cur = from;
  bool first = true;
  while (cur != to) {
    const auto& nb = adj[cur];
    Index next = cur;
    for (Index x : nb) {
      if (first || x != prev) {
        next = x;
        break;
      }
    }
    if (next == cur || path.size() > edges.size() + 1) {
      throw std::logic_error("witness does not contain the expected path");
    }
    first = false;
    prev = cur;
    cur = next;
    path.push_back(cur);
  }
  return path;
}

}  // namespace

std::size_t SolverConfig::n0(std::size_t d) const {
  if (base_threshold != 0) return base_threshold;
  return d == 2 ? 10 : 12;
}

std::optional<Separator> recursion_separator(const PointSet& pts, std::span<const Index> members,
                                             std::span<const Index> boundary, const SolverConfig& cfg) {
  std::vector<Index> m(members.begin(), members.end()), b(boundary.begin(), boundary.end());
  std::sort(m.begin(), m.end());
  std::sort(b.begin(), b.end());
  return choose_separator(pts, m, b, cfg);
}

RepSet tsp_repr(const Instance& inst, std::span<const Index> members, std::span<const Index> boundary,
                const SolverConfig& cfg, SolveStats* stats) {
  if (boundary.size() % 2 != 0) throw PreconditionError("tsp_repr: odd boundary");
  const Mask p = mask_of(members), b = mask_of(boundary);
  if ((b & ~p) != 0) throw PreconditionError("tsp_repr: boundary outside the point set");
  SolverConfig local = cfg;
  local.exchange_filter = false;
  Context ctx(inst.points, inst.weights(), local, std::nullopt);
  ctx.top_mask_ = p;
  RepSet r = ctx.solve_top(p, b);
  if (stats) *stats = ctx.stats();
  return r;
}

RepSet base_case(const Instance& inst, std::span<const Index> members, std::span<const Index> boundary,
                 const SolverConfig& cfg) {
  std::vector<Index> m(members.begin(), members.end()), bd(boundary.begin(), boundary.end());
  std::sort(m.begin(), m.end());
  std::sort(bd.begin(), bd.end());
  if (bd.size() % 2 != 0) throw PreconditionError("base_case: odd boundary");
  return base_case_impl(inst.weights(), m, bd, cfg.exhaustive);
}

std::vector<Index> canonical_cycle(std::span<const Index> order) {
  if (order.empty()) return {};
  const auto start = std::min_element(order.begin(), order.end()) - order.begin();
  const std::size_t n = order.size();
  std::vector<Index> fwd, bwd;
  for (std::size_t k = 0; k < n; ++k) {
    fwd.push_back(order[(static_cast<std::size_t>(start) + k) % n]);
    bwd.push_back(order[(static_cast<std::size_t>(start) + n - k) % n]);
  }
  return std::min(fwd, bwd);
}

SolveResult solve_tsp(const Instance& inst, const SolverConfig& cfg) {
  const std::size_t n = inst.size();
  if (n < 3) throw PreconditionError("solve_tsp: need at least 3 points");
  if (n > 63) throw PreconditionError("solve_tsp: at most 63 points");
  if (inst.model == WeightModel::Matrix && !validate_order_preserving(inst.points, inst.matrix)) {
    throw PreconditionError("solve_tsp: distance matrix is not order-preserving");
  }
  // P u {p'}: index n copies point 0 at weight 0.
  PointSet ext = inst.points;
  ext.push_back(inst.points[0]);
  const DistanceMatrix base = inst.weights();
  DistanceMatrix w(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      w(i, j) = (i == j || (i % n == 0 && j % n == 0)) ? 0.0 : base(i % n, j % n);
    }
  }
  const auto copy = static_cast<Index>(n);
  Context ctx(ext, std::move(w), cfg, make_segment(0, copy));
  if (cfg.bound_pruning) {
    const double upper = heuristic_tour_length(base);
    std::vector<int> degree(n + 1, 2);
    degree[0] = degree[copy] = 1;
    ctx.set_bounds(upper + 1e-9 * std::max(1.0, upper), std::move(degree));
  }
  const Mask p = (n + 1 == 64) ? ~Mask{0} : (Mask{1} << (n + 1)) - 1;
  ctx.top_mask_ = p;
  const RepSet r = ctx.solve_top(p, bit(0) | bit(copy));
  if (r.empty()) throw std::runtime_error("solve_tsp: no tour within the packing caps");

  const auto& best = r.entries().front();
  std::vector<Index> path = walk_path(best.edges(), 0, copy);
  path.pop_back();
  SolveResult out;
  out.tour.order = canonical_cycle(path);
  if (!is_permutation_of_range(out.tour.order, n)) throw std::logic_error("solve_tsp: witness is not a tour");
  out.tour.length = tour_length(inst, out.tour.order);
  if (std::abs(out.tour.length - best.weight) > 1e-9 * std::max(1.0, best.weight)) {
    throw std::logic_error("solve_tsp: witness length differs from the stored weight");
  }
  out.stats = ctx.stats();
  return out;
}

CapsTrace trace_tour_caps(const Instance& inst, std::span<const Index> tour, const SolverConfig& cfg) {
  const std::size_t n = inst.size();
  if (n < 3 || !is_permutation_of_range(tour, n)) throw PreconditionError("trace_tour_caps: not a tour");
  PointSet ext = inst.points;
  ext.push_back(inst.points[0]);
  const auto copy = static_cast<Index>(n);
  const auto start = std::find(tour.begin(), tour.end(), Index{0}) - tour.begin();
  std::vector<Segment> edges;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    edges.push_back(make_segment(tour[(static_cast<std::size_t>(start) + k) % n],
                                 tour[(static_cast<std::size_t>(start) + k + 1) % n]));
  }
  edges.push_back(make_segment(tour[(static_cast<std::size_t>(start) + n - 1) % n], copy));
  const std::vector<Segment> excluded{make_segment(0, copy)};
  const std::size_t n0 = cfg.n0(inst.dim());

  CapsTrace out;
  const auto bump = [](std::size_t& slot, std::size_t v) { slot = std::max(slot, v); };
  std::function<void(std::vector<Index>, std::vector<Index>, std::vector<Segment>)> walk =
      [&](std::vector<Index> members, std::vector<Index> boundary, std::vector<Segment> es) {
        if (members.size() <= n0) return;
        const auto sigma = choose_separator(ext, members, boundary, cfg);
        if (!sigma) return;
        ++out.separators;
        const CrossingGroups groups = classify_crossings(ext, members, *sigma, excluded);
        std::vector<Segment> s, in_edges, out_edges;
        for (const Segment& e : es) {
          if (crosses(e, *sigma, ext)) {
            s.push_back(e);
          } else {
            (classify(ext[e.a], *sigma) == Side::In ? in_edges : out_edges).push_back(e);
          }
        }
        const auto used = [&](const std::vector<Segment>& group) {
          return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](const Segment& e) {
            return std::binary_search(group.begin(), group.end(), e);
          }));
        };
        bump(out.needed.c_short, used(groups.short_segments));
        bump(out.needed.c_long, used(groups.long_segments));
        for (const auto& g : groups.cube_segments) bump(out.needed.c_cube, used(g));
        bump(out.max_crossing, s.size());
        const auto r = restrict_candidate(make_candidate(s), members, boundary, ext, *sigma);
        if (!r) throw std::logic_error("trace_tour_caps: tour pieces violate the split rules");
        walk(r->p_in, r->b_in, std::move(in_edges));
        walk(r->p_out, r->b_out, std::move(out_edges));
      };
  walk(all_indices(n + 1), {0, copy}, edges);
  return out;
}

PathCover path_cover(const EPCInstance& epc, const SolverConfig& cfg) {
  const Instance& inst = epc.instance;
  if (epc.boundary.size() % 2 != 0 || epc.matching.size() != epc.boundary.size() || !is_perfect(epc.matching)) {
    throw PreconditionError("path_cover: matching does not pair the boundary");
  }
  if (!std::is_sorted(epc.boundary.begin(), epc.boundary.end())) {
    throw PreconditionError("path_cover: boundary must be sorted");
  }
  SolverConfig exact = cfg;
  exact.exhaustive = true;
  const auto members = all_indices(inst.size());
  const RepSet r = tsp_repr(inst, members, epc.boundary, exact);
  PathCover cover;
  const auto it = std::find_if(r.entries().begin(), r.entries().end(),
                               [&](const WeightedMatching& e) { return e.matching == epc.matching; });
  if (it == r.entries().end()) {
    cover.feasible = false;
    cover.total_length = kInfinity;
    return cover;
  }
  const auto edges = it->edges();
  for (const auto& [a, b] : epc.matching.pairs()) {
    cover.paths.push_back(walk_path(edges, epc.boundary[a], epc.boundary[b]));
  }
  cover.total_length = path_cover_length(inst, cover);
  return cover;
}

}  // namespace etsp
