#include "etsp/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "etsp/error.hpp"
#include "etsp/separator.hpp"

namespace etsp {

namespace {

// Cells per face axis in layer i.
std::size_t cells_per_axis(double root, int i) {
  const double v = root / std::ldexp(1.0, i);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v - 1e-12 * v)));
}

struct GridFrame {
  Point lo;
  double cell = 0.0;
  std::size_t m = 1;

  GridFrame(const Separator& sigma, std::size_t m_) : lo(sigma.center), m(m_) {
    for (double& c : lo) c -= sigma.half();
    cell = sigma.size / static_cast<double>(m);
  }

  Point point(const std::vector<long>& k) const {
    Point g(lo.size());
    for (std::size_t j = 0; j < lo.size(); ++j) g[j] = lo[j] + static_cast<double>(k[j]) * cell;
    return g;
  }
};

// Lexicographically smallest boundary lattice point whose cube of half-size h
// contains both endpoints; empty when there is none.
std::optional<std::vector<long>> owning_cell(const GridFrame& f, std::span<const double> p,
                                             std::span<const double> q, double h) {
  const std::size_t d = f.lo.size();
  const long m = static_cast<long>(f.m);
  std::vector<long> a(d), b(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double hi_pt = std::max(p[j], q[j]);
    const double lo_pt = std::min(p[j], q[j]);
    a[j] = std::max(0L, static_cast<long>(std::ceil((hi_pt - h - f.lo[j]) / f.cell - 1e-9)));
    b[j] = std::min(m, static_cast<long>(std::floor((lo_pt + h - f.lo[j]) / f.cell + 1e-9)));
    if (a[j] > b[j]) return std::nullopt;
  }
  std::vector<std::vector<long>> options;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<long> k = a;
    if (a[j] == 0) {
      options.push_back(k);
    } else if (b[j] == m) {
      k[j] = m;
      options.push_back(k);
    }
  }
  std::sort(options.begin(), options.end());
  for (const auto& k : options) {
    Separator cube{f.point(k), 2.0 * h};
    if (classify(p, cube) == Side::In && classify(q, cube) == Side::In) return k;
  }
  return std::nullopt;
}


class Enumerator {
 public:
  Enumerator(const CrossingGroups& groups, const EnumerationOptions& options, std::size_t n_pts,
             const std::function<bool(const CandidateSet&)>& visit)
      : visit_(visit), compatible_(options.compatible), prefix_ok_(options.prefix_ok), limit_(options.degree_limit), degree_(n_pts, 0) {
    if (limit_.empty()) limit_.assign(n_pts, 2);
    groups_.push_back({&groups.short_segments, options.caps.c_short});
    for (const auto& g : groups.cube_segments) groups_.push_back({&g, options.caps.c_cube});
    groups_.push_back({&groups.long_segments, options.caps.c_long});
  }

  std::size_t run() {
    next_group(0);
    return visited_;
  }

 private:
  struct Group {
    const std::vector<Segment>* segments;
    std::size_t cap;
  };

  void next_group(std::size_t g) {
    if (stopped_) return;
    if (g == groups_.size()) {
      emit();
      return;
    }
    choose(g, 0, 0);
  }

  void choose(std::size_t g, std::size_t from, std::size_t taken) {
    next_group(g + 1);
    if (taken == groups_[g].cap) return;
    const auto& segs = *groups_[g].segments;
    for (std::size_t j = from; j < segs.size() && !stopped_; ++j) {
      const Segment s = segs[j];
      if (degree_[s.a] >= limit_[s.a] || degree_[s.b] >= limit_[s.b]) continue;
      if (compatible_ && !std::all_of(chosen_.begin(), chosen_.end(),
                                      [&](const Segment& t) { return compatible_(t, s); })) {
        continue;
      }
      ++degree_[s.a];
      ++degree_[s.b];
      chosen_.push_back(s);
      if (!prefix_ok_ || prefix_ok_(std::span<const Segment>(chosen_))) choose(g, j + 1, taken + 1);
      chosen_.pop_back();
      --degree_[s.a];
      --degree_[s.b];
    }
  }

  void emit() {
    ++visited_;
    current_.segments.assign(chosen_.begin(), chosen_.end());
    std::sort(current_.segments.begin(), current_.segments.end());
    current_.p1.clear();
    current_.p2.clear();
    ends_.clear();
    for (const Segment& s : current_.segments) {
      ends_.push_back(s.a);
      ends_.push_back(s.b);
    }
    std::sort(ends_.begin(), ends_.end());
    for (std::size_t i = 0; i < ends_.size(); ++i) {
      if (i > 0 && ends_[i] == ends_[i - 1]) continue;
      (degree_[ends_[i]] == 1 ? current_.p1 : current_.p2).push_back(ends_[i]);
    }
    if (!visit_(current_)) stopped_ = true;
  }

  const std::function<bool(const CandidateSet&)>& visit_;
  const std::function<bool(const Segment&, const Segment&)>& compatible_;
  const std::function<bool(std::span<const Segment>)>& prefix_ok_;
  std::vector<Group> groups_;
  std::vector<std::uint8_t> limit_;
  std::vector<std::uint8_t> degree_;
  std::vector<Segment> chosen_;
  CandidateSet current_;
  std::vector<Index> ends_;
  std::size_t visited_ = 0;
  bool stopped_ = false;
};

}  // namespace

double LengthClasses::layer_upper(int i) const { return std::ldexp(unit, i); }

int LengthClasses::layer_of(double length) const {
  int i = static_cast<int>(std::ceil(std::log2(length / unit)));
  while (i > i_min && length <= layer_upper(i - 1)) --i;
  while (i < i_max && length > layer_upper(i)) ++i;
  return std::clamp(i, i_min, i_max);
}

LengthClasses length_classes(const Separator& sigma, std::size_t n, std::size_t d) {
  if (n < 2) throw PreconditionError("length_classes: need at least two points");
  const double nd = static_cast<double>(n);
  const double root = nth_root(nd, d);
  const double x = std::log(nd / root) / std::log(1.5);
  LengthClasses lc;
  lc.size = sigma.size;
  lc.unit = sigma.size / root;
  lc.l_small = lc.unit * std::pow(2.0, -x);
  std::tie(lc.i_min, lc.i_max) = band_range(n, d);
  return lc;
}

std::vector<Point> face_grid(const Separator& sigma, int i, std::size_t n) {
  const std::size_t d = sigma.dim();
  const GridFrame f(sigma, cells_per_axis(nth_root(static_cast<double>(n), d), i));
  const long m = static_cast<long>(f.m);
  std::vector<Point> out;
  std::vector<long> k(d, 0);
  while (true) {
    bool on_face = false;
    for (long v : k) on_face = on_face || v == 0 || v == m;
    if (on_face) out.push_back(f.point(k));
    std::size_t j = d;
    while (j > 0 && k[j - 1] == m) k[--j] = 0;
    if (j == 0) break;
    ++k[j - 1];
  }
  return out;
}

Separator cube_at(const Point& g, int i, std::size_t n, const Separator& sigma) {
  const double root = nth_root(static_cast<double>(n), sigma.dim());
  return Separator{g, std::ldexp(sigma.size / root, i + 1)};
}

CandidateSet make_candidate(std::vector<Segment> segments) {
  CandidateSet c;
  std::sort(segments.begin(), segments.end());
  std::vector<Index> ends;
  for (const Segment& s : segments) {
    ends.push_back(s.a);
    ends.push_back(s.b);
  }
  std::sort(ends.begin(), ends.end());
  for (std::size_t i = 0; i < ends.size();) {
    std::size_t j = i;
    while (j < ends.size() && ends[j] == ends[i]) ++j;
    (j - i == 1 ? c.p1 : c.p2).push_back(ends[i]);
    i = j;
  }
  c.segments = std::move(segments);
  return c;
}

CrossingGroups classify_crossings(const PointSet& pts, std::span<const Index> members,
                                  const Separator& sigma, std::span<const Segment> excluded) {
  CrossingGroups out;
  if (members.size() < 2) return out;
  const LengthClasses lc = length_classes(sigma, members.size(), pts.dim());
  const double root = nth_root(static_cast<double>(members.size()), pts.dim());

  std::vector<Index> in, outside;
  for (Index v : members) (classify(pts[v], sigma) == Side::In ? in : outside).push_back(v);

  std::vector<GridFrame> frames;
  for (int i = lc.i_min; i <= lc.i_max; ++i) frames.emplace_back(sigma, cells_per_axis(root, i));

  // (layer, enlarged, lattice index) -> owned segments
  std::map<std::tuple<int, bool, std::vector<long>>, std::vector<Segment>> cubes;
  std::vector<Segment> all;
  for (Index u : in) {
    for (Index v : outside) all.push_back(make_segment(u, v));
  }
  std::sort(all.begin(), all.end());
  std::vector<Segment> skip(excluded.begin(), excluded.end());
  std::sort(skip.begin(), skip.end());
  for (const Segment& s : all) {
    if (std::binary_search(skip.begin(), skip.end(), s)) continue;
    const double len = segment_length(pts, s);
    if (len <= lc.l_small) {
      out.short_segments.push_back(s);
      continue;
    }
    if (len > lc.size) {
      out.long_segments.push_back(s);
      continue;
    }
    const int i = lc.layer_of(len);
    const GridFrame& f = frames[static_cast<std::size_t>(i - lc.i_min)];
    const double h = lc.layer_upper(i);
    if (auto k = owning_cell(f, pts[s.a], pts[s.b], h)) {
      cubes[{i, false, *k}].push_back(s);
    } else if (auto k2 = owning_cell(f, pts[s.a], pts[s.b], 1.5 * h)) {
      ++out.fallback_owned;
      cubes[{i, true, *k2}].push_back(s);
    } else {
      throw std::logic_error("classify_crossings: segment without an owning cube");
    }
  }
  for (auto& [key, segs] : cubes) out.cube_segments.push_back(std::move(segs));
  return out;
}

std::size_t enumerate_crossing_sets(const PointSet& pts, std::span<const Index> members,
                                    const Separator& sigma, const EnumerationOptions& options,
                                    const std::function<bool(const CandidateSet&)>& visit) {
  if (!options.degree_limit.empty() && options.degree_limit.size() < pts.size()) {
    throw PreconditionError("enumerate_crossing_sets: degree_limit shorter than the point set");
  }
  const CrossingGroups groups = classify_crossings(pts, members, sigma, options.excluded);
  Enumerator e(groups, options, pts.size(), visit);
  return e.run();
}

std::optional<RestrictedCandidate> restrict_candidate(const CandidateSet& s,
                                                      std::span<const Index> members,
                                                      std::span<const Index> boundary,
                                                      const PointSet& pts, const Separator& sigma) {
  std::map<Index, int> degree;
  for (const Segment& seg : s.segments) {
    ++degree[seg.a];
    ++degree[seg.b];
  }
  const auto in_members = [&](Index v) {
    return std::find(members.begin(), members.end(), v) != members.end();
  };
  const auto in_boundary = [&](Index v) {
    return std::find(boundary.begin(), boundary.end(), v) != boundary.end();
  };
  for (const auto& [v, k] : degree) {
    if (!in_members(v) || k > 2 || (k > 1 && in_boundary(v))) return std::nullopt;
  }

  RestrictedCandidate r;
  r.set = make_candidate(s.segments);
  std::vector<Index> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end());
  for (Index v : sorted) {
    const int k = degree.contains(v) ? degree[v] : 0;
    const bool b = in_boundary(v);
    const bool inside = classify(pts[v], sigma) == Side::In;
    if (!((b && k == 1) || k == 2)) (inside ? r.p_in : r.p_out).push_back(v);
    if (b != (k == 1)) (inside ? r.b_in : r.b_out).push_back(v);
  }
  if (r.b_in.size() % 2 != 0 || r.b_out.size() % 2 != 0) return std::nullopt;
  return r;
}

bool packing_predicate(const PointSet& pts, std::span<const Segment> segments,
                       const PackingCaps& caps, std::span<const Separator> witnesses) {
  for (const Separator& w : witnesses) {
    std::size_t crossing_long = 0, inside = 0;
    for (const Segment& s : segments) {
      const double len = segment_length(pts, s);
      const bool a_in = classify(pts[s.a], w) == Side::In;
      const bool b_in = classify(pts[s.b], w) == Side::In;
      if (a_in != b_in && len >= w.size) ++crossing_long;
      if (a_in && b_in && len >= w.size / 4.0) ++inside;
    }
    if (crossing_long > caps.c_long || inside > caps.c_cube) return false;
  }
  return true;
}

}  // namespace etsp
