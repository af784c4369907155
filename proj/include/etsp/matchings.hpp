#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <span>
#include <utility>
#include <vector>

#include "etsp/candidates.hpp"
#include "etsp/geometry.hpp"

namespace etsp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Perfect matching on positions 0..k-1 of a boundary list; mate[i] is the
// partner of i. The mate vector is canonical, so equality is structural.
struct Matching {
  std::vector<std::uint8_t> mate;

  std::size_t size() const { return mate.size(); }
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const;  // i < mate[i], sorted

  auto operator<=>(const Matching&) const = default;
};

Matching matching_from_pairs(std::size_t k, std::span<const std::pair<std::size_t, std::size_t>> pairs);
bool is_perfect(const Matching& m);

// All (k-1)!! perfect matchings on k positions, lexicographic by mate vector.
std::vector<Matching> all_matchings(std::size_t k);

// True iff M u M' is one cycle through every position. k = 2 fits itself
// (the doubled edge); k = 0 fits trivially.
bool fits(const Matching& m, const Matching& m_prime);

// Edge list realising a weighted matching, kept as a tree of shared parts so
// that combining subproblem answers does not copy.
struct WitnessNode {
  std::vector<Segment> edges;
  std::vector<std::shared_ptr<const WitnessNode>> parts;
};
using WitnessPtr = std::shared_ptr<const WitnessNode>;

std::vector<Segment> flatten(const WitnessPtr& w);  // sorted

struct WeightedMatching {
  Matching matching;
  double weight = 0.0;
  WitnessPtr witness;

  std::vector<Segment> edges() const { return flatten(witness); }
};

// Weighted matchings over a common boundary (sorted point indices), at most
// one per matching, kept sorted by matching.
class RepSet {
 public:
  RepSet() = default;
  explicit RepSet(std::vector<Index> boundary);

  const std::vector<Index>& boundary() const { return boundary_; }
  const std::vector<WeightedMatching>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  // 2^(|B|-1), and 1 for an empty boundary.
  std::size_t bound() const;

  // Keeps the smaller of (weight, sorted witness edges); the witness is only
  // built when the candidate can win. Returns true if the set changed.
  template <typename MakeWitness>
  bool insert_min(std::span<const std::uint8_t> mate, double weight, MakeWitness&& witness);
  bool insert_min(const Matching& m, double weight, const std::function<WitnessPtr()>& witness) {
    return insert_min(std::span<const std::uint8_t>(m.mate), weight, witness);
  }
  bool insert_min(WeightedMatching wm);
  void merge(const RepSet& other);

 private:
  std::vector<Index> boundary_;
  std::vector<WeightedMatching> entries_;
};

bool witness_less(const WitnessPtr& a, const WitnessPtr& b);

template <typename MakeWitness>
bool RepSet::insert_min(std::span<const std::uint8_t> mate, double weight, MakeWitness&& witness) {
  if (mate.size() != boundary_.size()) throw std::invalid_argument("insert_min: boundary mismatch");
  const auto it = std::lower_bound(
      entries_.begin(), entries_.end(), mate, [](const WeightedMatching& e, std::span<const std::uint8_t> key) {
        return std::lexicographical_compare(e.matching.mate.begin(), e.matching.mate.end(), key.begin(), key.end());
      });
  if (it != entries_.end() && std::equal(mate.begin(), mate.end(), it->matching.mate.begin(), it->matching.mate.end())) {
    if (weight > it->weight) return false;
    WitnessPtr w = witness();
    if (weight == it->weight && !witness_less(w, it->witness)) return false;
    it->weight = weight;
    it->witness = std::move(w);
    return true;
  }
  entries_.insert(it, WeightedMatching{Matching{std::vector<std::uint8_t>(mate.begin(), mate.end())}, weight, witness()});
  return true;
}

// min weight over entries fitting m; +infinity if none.
double opt(const Matching& m, const RepSet& r);

// Join of a matching on b_in and one on b_out through the crossing set s:
// the graph M_in u M_out u S on B u P1(S) u P2(S) must be |B|/2 disjoint
// paths ending in B. The result is a matching on `boundary` positions.
class Joiner {
 public:
  Joiner(std::span<const Index> b_in, std::span<const Index> b_out, const CandidateSet& s,
         std::span<const Index> boundary);

  std::optional<Matching> join(const Matching& m_in, const Matching& m_out) const;
  // Writes the joined mate vector into `out` (resized to |B|); false if the
  // pair is incompatible.
  bool join_into(const Matching& m_in, const Matching& m_out, std::vector<std::uint8_t>& out) const;

 private:
  std::size_t vertices_ = 0;
  std::vector<std::uint8_t> in_local_, out_local_;  // b_in / b_out position -> vertex
  std::vector<std::uint8_t> boundary_local_;        // boundary position -> vertex
  std::vector<int> boundary_pos_;                   // vertex -> boundary position or -1
  std::vector<std::pair<std::uint8_t, std::uint8_t>> s_edges_;
};

std::optional<Matching> compatible_join(const Matching& m_in, std::span<const Index> b_in,
                                        const Matching& m_out, std::span<const Index> b_out,
                                        const CandidateSet& s, std::span<const Index> boundary);

// Representative subset: rows of the cut matrix taken in (weight, matching)
// order, kept while they grow the GF(2) row space.
RepSet reduce(const RepSet& r);

}  // namespace etsp
