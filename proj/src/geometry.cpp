#include "etsp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "etsp/error.hpp"

namespace etsp {

PointSet::PointSet(std::size_t dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0 || coords_.size() % dim_ != 0) {
    throw PreconditionError("PointSet: coordinate count is not a multiple of the dimension");
  }
  for (double c : coords_) {
    if (!std::isfinite(c)) throw PreconditionError("PointSet: non-finite coordinate");
  }
}

void PointSet::push_back(std::span<const double> p) {
  if (p.size() != dim_) throw PreconditionError("PointSet: dimension mismatch");
  for (double c : p) {
    if (!std::isfinite(c)) throw PreconditionError("PointSet: non-finite coordinate");
  }
  coords_.insert(coords_.end(), p.begin(), p.end());
}

double euclidean(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double diff = p[j] - q[j];
    s += diff * diff;
  }
  return std::sqrt(s);
}

double segment_length(const PointSet& pts, const Segment& s) {
  return euclidean(pts[s.a], pts[s.b]);
}

double linf_from_center(std::span<const double> p, const Separator& sigma) {
  double m = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) m = std::max(m, std::abs(p[j] - sigma.center[j]));
  return m;
}

double rdist(std::span<const double> p, const Separator& sigma) {
  if (!(sigma.size > 0.0)) {
    throw PreconditionError("rdist: degenerate separator (size 0); use the base case");
  }
  // The l_inf distance to the boundary is |m - h| where m is the l_inf offset
  // from the center, both inside and outside.
  const double d = std::abs(linf_from_center(p, sigma) - sigma.half());
  return d <= kGeomEps ? 0.0 : d / sigma.size;
}

Side classify(std::span<const double> p, const Separator& sigma) {
  return linf_from_center(p, sigma) <= sigma.half() + kGeomEps ? Side::In : Side::Out;
}

Separator scale(const Separator& sigma, double t) {
  if (t < 0.0) throw PreconditionError("scale: negative factor");
  return Separator{sigma.center, sigma.size * t};
}

bool crosses(const Segment& s, const Separator& sigma, const PointSet& pts) {
  return classify(pts[s.a], sigma) != classify(pts[s.b], sigma);
}

double nth_root(double n, std::size_t d) {
  if (d == 2) return std::sqrt(n);
  if (d == 3) return std::cbrt(n);
  return std::pow(n, 1.0 / static_cast<double>(d));
}

std::vector<Index> near_set(const PointSet& pts, std::span<const Index> members,
                            const Separator& sigma, int i) {
  if (!(sigma.size > 0.0)) throw PreconditionError("near_set: degenerate separator");
  if (members.empty()) return {};
  const double threshold =
      std::ldexp(1.0, i) / nth_root(static_cast<double>(members.size()), pts.dim());
  std::vector<Index> out;
  for (Index p : members) {
    if (rdist(pts[p], sigma) <= threshold) out.push_back(p);
  }
  return out;
}

std::vector<Index> near_set(const PointSet& pts, const Separator& sigma, int i) {
  const auto all = all_indices(pts.size());
  return near_set(pts, all, sigma, i);
}

std::vector<Index> all_indices(std::size_t n) {
  std::vector<Index> v(n);
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

}  // namespace etsp
