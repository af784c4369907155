#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "etsp/geometry.hpp"
#include "etsp/matchings.hpp"

namespace etsp {

enum class WeightModel : std::uint8_t { Euclidean, Matrix };

std::string_view to_string(WeightModel m);

// Dense symmetric n x n matrix.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  void set_symmetric(std::size_t i, std::size_t j, double v) {
    (*this)(i, j) = v;
    (*this)(j, i) = v;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

DistanceMatrix euclidean_matrix(const PointSet& pts);

struct Instance {
  PointSet points;
  WeightModel model = WeightModel::Euclidean;
  DistanceMatrix matrix;  // Matrix model only
  std::string name;
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.dim(); }
  double weight(Index i, Index j) const {
    return model == WeightModel::Matrix ? matrix(i, j) : euclidean(points[i], points[j]);
  }
  // Dense weights under the active model.
  DistanceMatrix weights() const;
};

Instance euclidean_instance(PointSet pts, std::string name = {});
Instance matrix_instance(PointSet pts, DistanceMatrix d, std::string name = {});

struct Tour {
  std::vector<Index> order;  // cyclic
  double length = 0.0;
};

// Sum of consecutive weights around the cycle.
double tour_length(const Instance& inst, std::span<const Index> order);
bool is_permutation_of_range(std::span<const Index> order, std::size_t n);

// Euclidean Path Cover instance over all points of `instance`.
struct EPCInstance {
  Instance instance;
  std::vector<Index> boundary;  // sorted
  Matching matching;            // over boundary positions
};

struct PathCover {
  std::vector<std::vector<Index>> paths;  // one per matching pair, from the smaller position
  double total_length = 0.0;
  bool feasible = true;
};

double path_cover_length(const Instance& inst, const PathCover& cover);

// ---- generators ----

enum class GenKind : std::uint8_t { Uniform, Grid, Clustered };

GenKind parse_gen_kind(std::string_view s);
std::string_view to_string(GenKind k);

// Deterministic in (kind, n, d, seed) on every platform.
Instance gen(GenKind kind, std::size_t n, std::size_t d, std::uint64_t seed);

// Pairs sorted by Euclidean distance; a strictly shorter pair must get a
// strictly smaller D entry. Equal distances impose nothing.
bool validate_order_preserving(const PointSet& pts, const DistanceMatrix& d);

// Euclidean distances jittered by at most epsilon * (half the smallest gap
// between distinct distances); order-preserving by construction.
DistanceMatrix perturb_matrix(const PointSet& pts, std::uint64_t seed, double epsilon);

// ---- oracles ----

// Bitmask dynamic program, 3 <= n <= 24.
Tour held_karp(const Instance& inst);

// Exact cover by subset DP over (visited set, open path end), n <= 14.
// Infeasible covers (B empty with points left) come back with feasible = false.
PathCover brute_path_cover(const EPCInstance& epc);

// ---- file formats ----

Instance read_instance(std::istream& in, std::string name = {});
Instance read_instance_file(const std::string& path);
void write_instance(std::ostream& out, const Instance& inst);
// TSPLIB EUC_2D / EUC_3D with NODE_COORD_SECTION; distances stay exact.
Instance read_tsplib(std::istream& in);

}  // namespace etsp
