#include "etsp/matchings.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <stdexcept>

#include "etsp/error.hpp"

namespace etsp {

namespace {

void extend_matchings(std::vector<std::uint8_t>& mate, std::vector<Matching>& out) {
  const auto first = std::find(mate.begin(), mate.end(), std::uint8_t{0xff});
  if (first == mate.end()) {
    out.push_back(Matching{mate});
    return;
  }
  const auto i = static_cast<std::uint8_t>(first - mate.begin());
  for (std::size_t j = i + 1; j < mate.size(); ++j) {
    if (mate[j] != 0xff) continue;
    mate[i] = static_cast<std::uint8_t>(j);
    mate[j] = i;
    extend_matchings(mate, out);
    mate[j] = 0xff;
  }
  mate[i] = 0xff;
}

void collect(const WitnessNode& node, std::vector<Segment>& out) {
  out.insert(out.end(), node.edges.begin(), node.edges.end());
  for (const auto& part : node.parts) {
    if (part) collect(*part, out);
  }
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> Matching::pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < mate.size(); ++i) {
    if (i < mate[i]) out.emplace_back(i, mate[i]);
  }
  return out;
}

Matching matching_from_pairs(std::size_t k,
                             std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  if (k > 254) throw PreconditionError("matching: boundary too large");
  Matching m{std::vector<std::uint8_t>(k, 0xff)};
  for (const auto& [a, b] : pairs) {
    if (a >= k || b >= k || a == b || m.mate[a] != 0xff || m.mate[b] != 0xff) {
      throw PreconditionError("matching: pairs are not a perfect matching");
    }
    m.mate[a] = static_cast<std::uint8_t>(b);
    m.mate[b] = static_cast<std::uint8_t>(a);
  }
  if (!is_perfect(m)) throw PreconditionError("matching: pairs do not cover the boundary");
  return m;
}

bool is_perfect(const Matching& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.mate[i] >= m.size() || m.mate[i] == i || m.mate[m.mate[i]] != i) return false;
  }
  return true;
}

std::vector<Matching> all_matchings(std::size_t k) {
  if (k % 2 != 0) throw PreconditionError("all_matchings: odd boundary");
  std::vector<Matching> out;
  std::vector<std::uint8_t> mate(k, 0xff);
  extend_matchings(mate, out);
  return out;
}

bool fits(const Matching& m, const Matching& m_prime) {
  if (m.size() != m_prime.size()) throw PreconditionError("fits: boundaries differ");
  if (m.size() == 0) return true;
  std::size_t cur = 0, steps = 0;
  do {
    cur = m_prime.mate[m.mate[cur]];
    steps += 2;
  } while (cur != 0);
  return steps == m.size();
}

bool witness_less(const WitnessPtr& a, const WitnessPtr& b) { return flatten(a) < flatten(b); }

std::vector<Segment> flatten(const WitnessPtr& w) {
  std::vector<Segment> out;
  if (w) collect(*w, out);
  std::sort(out.begin(), out.end());
  return out;
}

RepSet::RepSet(std::vector<Index> boundary) : boundary_(std::move(boundary)) {
  if (!std::is_sorted(boundary_.begin(), boundary_.end())) {
    throw PreconditionError("RepSet: boundary must be sorted");
  }
  if (boundary_.size() % 2 != 0) throw PreconditionError("RepSet: odd boundary");
}

std::size_t RepSet::bound() const {
  if (boundary_.empty()) return 1;
  if (boundary_.size() > 63) return std::numeric_limits<std::size_t>::max();
  return std::size_t{1} << (boundary_.size() - 1);
}

bool RepSet::insert_min(WeightedMatching wm) {
  WitnessPtr w = std::move(wm.witness);
  return insert_min(std::span<const std::uint8_t>(wm.matching.mate), wm.weight, [&] { return w; });
}

void RepSet::merge(const RepSet& other) {
  if (other.boundary_ != boundary_) throw PreconditionError("merge: boundary mismatch");
  for (const auto& e : other.entries_) insert_min(e);
}

double opt(const Matching& m, const RepSet& r) {
  double best = kInfinity;
  for (const auto& e : r.entries()) {
    if (e.weight < best && fits(m, e.matching)) best = e.weight;
  }
  return best;
}

Joiner::Joiner(std::span<const Index> b_in, std::span<const Index> b_out, const CandidateSet& s,
               std::span<const Index> boundary) {
  std::vector<Index> verts(boundary.begin(), boundary.end());
  verts.insert(verts.end(), s.p1.begin(), s.p1.end());
  verts.insert(verts.end(), s.p2.begin(), s.p2.end());
  std::sort(verts.begin(), verts.end());
  verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
  if (verts.size() > 254) throw PreconditionError("Joiner: too many vertices");
  vertices_ = verts.size();
  const auto local = [&](Index v) {
    const auto it = std::lower_bound(verts.begin(), verts.end(), v);
    if (it == verts.end() || *it != v) throw PreconditionError("Joiner: vertex outside B u P1 u P2");
    return static_cast<std::uint8_t>(it - verts.begin());
  };
  for (Index v : b_in) in_local_.push_back(local(v));
  for (Index v : b_out) out_local_.push_back(local(v));
  boundary_pos_.assign(vertices_, -1);
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    boundary_local_.push_back(local(boundary[i]));
    boundary_pos_[boundary_local_.back()] = static_cast<int>(i);
  }
  for (const Segment& e : s.segments) s_edges_.emplace_back(local(e.a), local(e.b));
}

std::optional<Matching> Joiner::join(const Matching& m_in, const Matching& m_out) const {
  Matching out;
  if (!join_into(m_in, m_out, out.mate)) return std::nullopt;
  return out;
}

bool Joiner::join_into(const Matching& m_in, const Matching& m_out, std::vector<std::uint8_t>& out) const {
  constexpr std::uint8_t kNone = 0xff;
  std::array<std::array<std::uint8_t, 2>, 256> nb;
  std::array<std::uint8_t, 256> deg{};
  const auto add = [&](std::uint8_t a, std::uint8_t b) {
    if (deg[a] == 2 || deg[b] == 2) return false;
    nb[a][deg[a]++] = b;
    nb[b][deg[b]++] = a;
    return true;
  };
  for (const auto& [a, b] : s_edges_) {
    if (!add(a, b)) return false;
  }
  for (std::size_t i = 0; i < m_in.size(); ++i) {
    if (i < m_in.mate[i] && !add(in_local_[i], in_local_[m_in.mate[i]])) return false;
  }
  for (std::size_t i = 0; i < m_out.size(); ++i) {
    if (i < m_out.mate[i] && !add(out_local_[i], out_local_[m_out.mate[i]])) return false;
  }
  for (std::size_t v = 0; v < vertices_; ++v) {
    if (deg[v] != (boundary_pos_[v] >= 0 ? 1 : 2)) return false;
  }

  out.assign(boundary_local_.size(), kNone);
  std::size_t visited = 0;
  for (std::size_t i = 0; i < boundary_local_.size(); ++i) {
    if (out[i] != kNone) continue;
    std::uint8_t prev = kNone, cur = boundary_local_[i];
    ++visited;
    while (true) {
      const std::uint8_t next = nb[cur][0] != prev ? nb[cur][0] : nb[cur][1];
      prev = cur;
      cur = next;
      ++visited;
      if (boundary_pos_[cur] >= 0) break;
      if (visited > vertices_) return false;
    }
    const auto j = static_cast<std::size_t>(boundary_pos_[cur]);
    out[i] = static_cast<std::uint8_t>(j);
    out[j] = static_cast<std::uint8_t>(i);
  }
  return visited == vertices_;
}

std::optional<Matching> compatible_join(const Matching& m_in, std::span<const Index> b_in,
                                        const Matching& m_out, std::span<const Index> b_out,
                                        const CandidateSet& s, std::span<const Index> boundary) {
  return Joiner(b_in, b_out, s, boundary).join(m_in, m_out);
}

RepSet reduce(const RepSet& r) {
  const std::size_t k = r.boundary().size();
  if (r.size() <= 1 || k <= 2) {
    RepSet out(r.boundary());
    // At most one matching exists for |B| <= 2.
    for (const auto& e : r.entries()) out.insert_min(e);
    return out;
  }
  if (k > 26) throw PreconditionError("reduce: boundary too large for the cut matrix");

  std::vector<const WeightedMatching*> order;
  for (const auto& e : r.entries()) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    if (a->weight != b->weight) return a->weight < b->weight;
    return a->matching < b->matching;
  });

  const std::size_t columns = std::size_t{1} << (k - 1);
  const std::size_t words = (columns + 63) / 64;
  std::vector<std::vector<std::uint64_t>> basis;
  std::vector<std::size_t> pivots;
  RepSet out(r.boundary());
  std::vector<std::uint64_t> row(words);
  for (const WeightedMatching* e : order) {
    // Cuts consistent with the matching: every pair on one side, position 0
    // pinned to side 0, so each pair not containing 0 chooses freely.
    std::vector<std::uint64_t> free_bits;
    for (const auto& [a, b] : e->matching.pairs()) {
      if (a == 0) continue;
      free_bits.push_back((std::uint64_t{1} << (a - 1)) | (std::uint64_t{1} << (b - 1)));
    }
    std::fill(row.begin(), row.end(), 0);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free_bits.size()); ++mask) {
      std::uint64_t col = 0;
      for (std::size_t f = 0; f < free_bits.size(); ++f) {
        if (mask >> f & 1) col |= free_bits[f];
      }
      row[col / 64] |= std::uint64_t{1} << (col % 64);
    }
    for (std::size_t j = 0; j < basis.size(); ++j) {
      if (row[pivots[j] / 64] >> (pivots[j] % 64) & 1) {
        for (std::size_t w = 0; w < words; ++w) row[w] ^= basis[j][w];
      }
    }
    std::size_t pivot = columns;
    for (std::size_t w = 0; w < words; ++w) {
      if (row[w] != 0) {
        pivot = w * 64 + static_cast<std::size_t>(std::countr_zero(row[w]));
        break;
      }
    }
    if (pivot == columns) continue;
    basis.push_back(row);
    pivots.push_back(pivot);
    out.insert_min(*e);
  }
  return out;
}

}  // namespace etsp
