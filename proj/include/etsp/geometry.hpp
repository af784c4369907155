#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace etsp {

using Index = std::uint32_t;
using Point = std::vector<double>;

// Absolute tolerance for boundary ties; points within it of a separator are
// treated as lying on it (and therefore inside).
inline constexpr double kGeomEps = 1e-12;

// Points in R^d stored contiguously. Indices 0..size()-1 are the identity of
// the points; coincident points are allowed and stay distinct.
class PointSet {
 public:
  explicit PointSet(std::size_t dim = 2) : dim_(dim) {}
  PointSet(std::size_t dim, std::vector<double> coords);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const { return coords_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  void push_back(std::span<const double> p);
  const std::vector<double>& coords() const { return coords_; }

 private:
  std::size_t dim_;
  std::vector<double> coords_;
};

// Boundary of the axis-aligned hypercube [center - size/2, center + size/2]^d.
struct Separator {
  Point center;
  double size = 0.0;

  std::size_t dim() const { return center.size(); }
  double half() const { return size / 2.0; }
};

// Unordered pair of point indices, stored with a < b by the helpers below.
struct Segment {
  Index a = 0;
  Index b = 0;

  auto operator<=>(const Segment&) const = default;
};

inline Segment make_segment(Index u, Index v) { return u < v ? Segment{u, v} : Segment{v, u}; }

enum class Side : std::uint8_t { In, Out };

double euclidean(std::span<const double> p, std::span<const double> q);
double segment_length(const PointSet& pts, const Segment& s);

// l_inf distance from p to the center of sigma.
double linf_from_center(std::span<const double> p, const Separator& sigma);

// d_inf(p, sigma) / size(sigma). Throws PreconditionError when size == 0.
double rdist(std::span<const double> p, const Separator& sigma);

// In iff p lies in the closed hypercube (boundary counts as inside).
Side classify(std::span<const double> p, const Separator& sigma);

// Same center, size scaled by t >= 0.
Separator scale(const Separator& sigma, double t);

bool crosses(const Segment& s, const Separator& sigma, const PointSet& pts);

// {p in members : rdist(p, sigma) <= 2^i / n^(1/d)} with n = |members|.
std::vector<Index> near_set(const PointSet& pts, std::span<const Index> members,
                            const Separator& sigma, int i);
std::vector<Index> near_set(const PointSet& pts, const Separator& sigma, int i);

// n^(1/d), exact for perfect squares and cubes.
double nth_root(double n, std::size_t d);

std::vector<Index> all_indices(std::size_t n);

}  // namespace etsp
