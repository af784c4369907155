#include "etsp/separator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "etsp/error.hpp"

namespace etsp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t pow4(std::size_t d) { return std::size_t{1} << (2 * d); }

// Anchored-cube search: lower face j sits at lo[j], the coordinate of a
// point of q. Windows are pruned with the best size found so far.
class CubeSearch {
 public:
  CubeSearch(const PointSet& pts, std::size_t min_count, bool positive)
      : pts_(pts), d_(pts.dim()), k_(min_count), positive_(positive), lo_(pts.dim()) {}

  void seed(std::span<const Index> q) {
    // Cubes with their lower corner at a point of q give an upper bound.
    std::vector<Index> all(q.begin(), q.end());
    for (Index c : q) {
      const auto p = pts_[c];
      std::copy(p.begin(), p.end(), lo_.begin());
      leaf(all);
    }
  }

  void run(std::vector<Index> cand) { search(0, cand); }

  bool found() const { return best_size_ < kInf; }
  Separator result() const {
    Separator s;
    s.size = best_size_;
    s.center = best_center_;
    return s;
  }

 private:
  void search(std::size_t axis, std::vector<Index>& cand) {
    if (axis == d_) {
      leaf(cand);
      return;
    }
    std::sort(cand.begin(), cand.end(), [&](Index a, Index b) {
      const double ca = pts_[a][axis], cb = pts_[b][axis];
      return ca < cb || (ca == cb && a < b);
    });
    std::vector<Index> window;
    for (std::size_t first = 0; first < cand.size(); ++first) {
      const double a = pts_[cand[first]][axis];
      if (first > 0 && pts_[cand[first - 1]][axis] == a) continue;
      if (cand.size() - first < k_) break;
      window.clear();
      for (std::size_t j = first; j < cand.size(); ++j) {
        if (pts_[cand[j]][axis] - a > best_size_) break;
        window.push_back(cand[j]);
      }
      if (window.size() < k_) continue;
      lo_[axis] = a;
      search(axis + 1, window);
    }
  }

  void leaf(const std::vector<Index>& cand) {
    reach_.clear();
    for (Index c : cand) {
      const auto p = pts_[c];
      double s = 0.0;
      bool dominated = true;
      for (std::size_t j = 0; j < d_; ++j) {
        const double diff = p[j] - lo_[j];
        if (diff < 0.0) {
          dominated = false;
          break;
        }
        s = std::max(s, diff);
      }
      if (dominated) reach_.push_back(s);
    }
    if (reach_.size() < k_) return;
    std::nth_element(reach_.begin(), reach_.begin() + static_cast<std::ptrdiff_t>(k_ - 1),
                     reach_.end());
    double size = reach_[k_ - 1];
    if (positive_ && size <= 0.0) {
      size = kInf;
      for (double s : reach_) {
        if (s > 0.0) size = std::min(size, s);
      }
      if (size == kInf) return;
    }
    if (size > best_size_) return;
    if (!anchored(cand, size)) return;
    Point center(d_);
    for (std::size_t j = 0; j < d_; ++j) center[j] = lo_[j] + size / 2.0;
    if (size < best_size_ || center < best_center_) {
      best_size_ = size;
      best_center_ = std::move(center);
    }
  }

  // Every lower face touches a point contained in the cube.
  bool anchored(const std::vector<Index>& cand, double size) const {
    for (std::size_t j = 0; j < d_; ++j) {
      bool touched = false;
      for (Index c : cand) {
        const auto p = pts_[c];
        if (p[j] != lo_[j]) continue;
        bool inside = true;
        for (std::size_t l = 0; l < d_ && inside; ++l) {
          inside = p[l] >= lo_[l] && p[l] - lo_[l] <= size;
        }
        if (inside) {
          touched = true;
          break;
        }
      }
      if (!touched) return false;
    }
    return true;
  }

  const PointSet& pts_;
  std::size_t d_;
  std::size_t k_;
  bool positive_;
  Point lo_;
  std::vector<double> reach_;
  double best_size_ = kInf;
  Point best_center_;
};

double level_threshold(int i, double root) { return std::ldexp(1.0, i) / root; }

// Smallest integer i with r <= 2^i / root (r > 0).
int weight_level(double r, double root) {
  int i = static_cast<int>(std::ceil(std::log2(r * root)));
  while (r > level_threshold(i, root)) ++i;
  while (r <= level_threshold(i - 1, root)) --i;
  return i;
}

double clamped_weight(double r, double n, double root, double c_hi) {
  const double hi = c_hi * n;
  const double lo = 1.0 / n;
  if (r <= 0.0) return hi;
  const int i = weight_level(r, root);
  const double w = i < 0 ? root * std::pow(1.5, -i) : root / std::pow(4.0, i);
  return std::clamp(w, lo, hi);
}

// rdist(p, t sigma*) for the point whose own scaling is tp = 2 m / size.
double scaled_rdist(double tp, double t) { return std::abs(tp - t) / (2.0 * t); }

double own_scaling(std::span<const double> p, const Separator& sigma_star) {
  return 2.0 * linf_from_center(p, sigma_star) / sigma_star.size;
}

// Leftmost piece minimising the summed truncated weight among the pieces
// where `feasible(t)` holds. Returns NaN when no piece is feasible.
template <typename Feasible>
double sweep_scaling(const PointSet& pts, std::span<const Index> members,
                     const Separator& sigma_star, double c_hi,
                     std::span<const double> extra_breaks, Feasible&& feasible) {
  const std::size_t n = members.size();
  struct Event {
    double t;
    long double delta;
  };
  std::vector<Event> events;
  long double base = 0.0L;
  for (Index m : members) {
    const StepFunction f = truncated_weight(pts[m], sigma_star, n, c_hi);
    base += f.values.front();
    for (std::size_t k = 1; k < f.pieces(); ++k) {
      events.push_back({f.breaks[k], static_cast<long double>(f.values[k]) - f.values[k - 1]});
    }
  }
  for (double t : extra_breaks) {
    if (t > 1.0 && t < 3.0) events.push_back({t, 0.0L});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });

  struct Piece {
    double left, mid;
    long double sum;
  };
  std::vector<Piece> pieces;
  long double sum = base;
  double left = 1.0;
  std::size_t e = 0;
  while (left < 3.0) {
    double right = 3.0;
    if (e < events.size()) right = events[e].t;
    if (right > left) {
      const double mid = left + (right - left) / 2.0;
      if (feasible(mid)) pieces.push_back({left, mid, sum});
    }
    if (e >= events.size()) break;
    const double t = events[e].t;
    while (e < events.size() && events[e].t == t) sum += events[e++].delta;
    left = t;
  }
  if (pieces.empty()) return std::numeric_limits<double>::quiet_NaN();
  long double best = pieces.front().sum;
  for (const Piece& p : pieces) best = std::min(best, p.sum);
  const long double tol = 1e-12L * std::max<long double>(1.0L, std::abs(best));
  for (const Piece& p : pieces) {
    if (p.sum > best + tol) continue;
    // t = 1 itself is the smallest candidate when its exact sum also attains
    // the minimum (no point sits on sigma* or on a level boundary there).
    if (p.left == 1.0 && feasible(1.0)) {
      const double nd = static_cast<double>(n);
      const double root = nth_root(nd, pts.dim());
      long double at_one = 0.0L;
      for (Index m : members) {
        at_one += clamped_weight(scaled_rdist(own_scaling(pts[m], sigma_star), 1.0), nd, root, c_hi);
      }
      if (at_one <= best + tol) return 1.0;
    }
    return p.mid;
  }
  return pieces.front().mid;
}

}  // namespace

double StepFunction::operator()(double t) const {
  if (values.empty()) throw std::logic_error("StepFunction: empty");
  const auto it = std::upper_bound(breaks.begin() + 1, breaks.end() - 1, t);
  return values[static_cast<std::size_t>(it - (breaks.begin() + 1))];
}

double balance_delta(std::size_t d) {
  const double p = static_cast<double>(pow4(d));
  return p / (p + 1.0);
}

std::size_t quantile_threshold(std::size_t q, std::size_t d) {
  const std::size_t denom = pow4(d) + 1;
  return (q + denom - 1) / denom;
}

std::pair<int, int> band_range(std::size_t n, std::size_t d) {
  if (n < 2) throw PreconditionError("band_range: need at least two points");
  const double nd = static_cast<double>(n);
  const double root = nth_root(nd, d);
  const double x = std::log(nd / root) / std::log(1.5);
  const int i_min = static_cast<int>(std::floor(1.0 - x));
  const int i_max = static_cast<int>(std::ceil(std::log2(root) - 1e-12));
  return {i_min, i_max};
}

Separator smallest_quantile_cube(const PointSet& pts, std::span<const Index> q,
                                 std::size_t min_count, bool positive_size) {
  if (q.empty()) throw PreconditionError("smallest_quantile_cube: empty pivot set");
  if (min_count == 0 || min_count > q.size()) {
    throw PreconditionError("smallest_quantile_cube: quantile threshold out of range");
  }
  CubeSearch search(pts, min_count, positive_size);
  search.seed(q);
  search.run(std::vector<Index>(q.begin(), q.end()));
  if (!search.found()) {
    throw PreconditionError("smallest_quantile_cube: all pivot points coincide");
  }
  return search.result();
}

Separator smallest_quantile_cube(const PointSet& pts, std::span<const Index> q) {
  return smallest_quantile_cube(pts, q, quantile_threshold(q.size(), pts.dim()));
}

StepFunction truncated_weight(std::span<const double> p, const Separator& sigma_star,
                              std::size_t n, double c_hi) {
  if (!(sigma_star.size > 0.0)) {
    throw PreconditionError("truncated_weight: degenerate separator");
  }
  const double nd = static_cast<double>(n);
  const std::size_t d = p.size();
  const double root = nth_root(nd, d);
  const double tp = own_scaling(p, sigma_star);

  // Levels outside [i_lo, i_hi] are clamped anyway.
  const int i_hi = static_cast<int>(std::ceil(std::log(nd * root) / std::log(4.0))) + 1;
  const int i_lo = -static_cast<int>(std::ceil(std::log(c_hi * nd / root) / std::log(1.5))) - 1;

  std::vector<double> breaks{1.0, 3.0};
  if (tp > 0.0) {
    for (int i = i_lo; i <= i_hi; ++i) {
      const double theta = level_threshold(i, root);
      const double below = tp / (1.0 + 2.0 * theta);
      if (below > 1.0 && below < 3.0) breaks.push_back(below);
      if (theta < 0.5) {
        const double above = tp / (1.0 - 2.0 * theta);
        if (above > 1.0 && above < 3.0) breaks.push_back(above);
      }
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  StepFunction f;
  f.breaks.push_back(1.0);
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double mid = breaks[k] + (breaks[k + 1] - breaks[k]) / 2.0;
    const double v = clamped_weight(scaled_rdist(tp, mid), nd, root, c_hi);
    if (!f.values.empty() && f.values.back() == v) {
      f.breaks.back() = breaks[k + 1];
    } else {
      f.values.push_back(v);
      f.breaks.push_back(breaks[k + 1]);
    }
  }
  return f;
}

double select_scaling(const PointSet& pts, std::span<const Index> members,
                      const Separator& sigma_star, double c_hi) {
  if (!(sigma_star.size > 0.0)) throw PreconditionError("select_scaling: degenerate separator");
  if (members.empty()) return 1.0;
  return sweep_scaling(pts, members, sigma_star, c_hi, {}, [](double) { return true; });
}

SeparatorChoice build_separator(const PointSet& pts, std::span<const Index> members,
                                std::span<const Index> q, const SeparatorOptions& options) {
  const std::size_t d = pts.dim();
  if (d < 2) throw PreconditionError("build_separator: dimension must be at least 2");
  if (q.empty()) throw PreconditionError("build_separator: empty pivot set");
  const std::size_t denom = pow4(d) + 1;
  if (!options.small_pivot && q.size() < denom + 1) {
    throw PreconditionError("build_separator: pivot set below 4^d + 2 points; use the base case");
  }
  std::size_t k = quantile_threshold(q.size(), d);
  if (options.small_pivot) k = std::max<std::size_t>(k, 2);
  if (k > q.size()) throw PreconditionError("build_separator: pivot set too small");

  SeparatorChoice choice;
  choice.sigma_star = smallest_quantile_cube(pts, q, k, /*positive_size=*/true);

  const auto balanced = [&](std::size_t in) {
    const std::size_t out = q.size() - in;
    return std::max(in, out) * denom <= (denom - 1) * q.size();
  };

  if (options.small_pivot) {
    // Membership in t sigma* flips exactly at each point's own scaling.
    std::vector<double> own_q, own_p;
    for (Index i : q) own_q.push_back(own_scaling(pts[i], choice.sigma_star));
    for (Index i : members) own_p.push_back(own_scaling(pts[i], choice.sigma_star));
    std::sort(own_q.begin(), own_q.end());
    std::sort(own_p.begin(), own_p.end());
    const auto feasible = [&](double t) {
      const auto q_in = static_cast<std::size_t>(
          std::upper_bound(own_q.begin(), own_q.end(), t) - own_q.begin());
      const auto p_in = static_cast<std::size_t>(
          std::upper_bound(own_p.begin(), own_p.end(), t) - own_p.begin());
      return balanced(q_in) && p_in > 0 && p_in < own_p.size();
    };
    choice.t_bar = sweep_scaling(pts, members, choice.sigma_star, options.c_hi, own_p, feasible);
    if (std::isnan(choice.t_bar)) {
      throw PreconditionError("build_separator: no balanced scaling for this pivot set");
    }
  } else {
    choice.t_bar = select_scaling(pts, members, choice.sigma_star, options.c_hi);
  }
  choice.sigma = scale(choice.sigma_star, choice.t_bar);

  std::size_t in = 0;
  for (Index i : q) in += classify(pts[i], choice.sigma) == Side::In ? 1 : 0;
  choice.balance_counts = {in, q.size() - in};
  if (!balanced(in)) throw std::logic_error("build_separator: balance violated");

  if (members.size() >= 2) {
    const auto [i_min, i_max] = band_range(members.size(), d);
    for (int i = i_min; i <= i_max; ++i) {
      choice.band_sizes.emplace_back(i, near_set(pts, members, choice.sigma, i).size());
    }
  }
  return choice;
}

SeparatorChoice build_separator(const PointSet& pts, std::span<const Index> q,
                                const SeparatorOptions& options) {
  const auto all = all_indices(pts.size());
  return build_separator(pts, all, q, options);
}

}  // namespace etsp
