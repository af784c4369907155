#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "etsp/error.hpp"
#include "etsp/matchings.hpp"
#include "oracles.hpp"

using namespace etsp;

namespace {

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

Matching mk(std::size_t k, Pairs p) { return matching_from_pairs(k, p); }

WitnessPtr witness_of(std::vector<Segment> e) {
  auto n = std::make_shared<WitnessNode>();
  n->edges = std::move(e);
  return n;
}

std::vector<Index> positions(std::size_t k) {
  std::vector<Index> b(k);
  for (std::size_t i = 0; i < k; ++i) b[i] = static_cast<Index>(i);
  return b;
}

RepSet random_repset(std::size_t k, std::mt19937_64& rng, double keep) {
  RepSet r(positions(k));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> w(0, 20);
  for (const Matching& m : all_matchings(k)) {
    if (u(rng) > keep) continue;
    r.insert_min(m, static_cast<double>(w(rng)), [] { return witness_of({}); });
  }
  return r;
}

std::vector<std::pair<Matching, double>> as_list(const RepSet& r) {
  std::vector<std::pair<Matching, double>> out;
  for (const auto& e : r.entries()) out.emplace_back(e.matching, e.weight);
  return out;
}

}  // namespace

TEST_SUITE("matchings") {
  TEST_CASE("matching counts and validation") {
    CHECK(all_matchings(0).size() == 1);
    CHECK(all_matchings(2).size() == 1);
    CHECK(all_matchings(4).size() == 3);
    CHECK(all_matchings(6).size() == 15);
    CHECK(all_matchings(8).size() == 105);
    CHECK(all_matchings(10).size() == 945);
    const auto all = all_matchings(6);
    CHECK(std::is_sorted(all.begin(), all.end()));
    for (const auto& m : all) CHECK(is_perfect(m));
    CHECK_THROWS_AS(all_matchings(3), PreconditionError);
    CHECK_THROWS_AS(mk(4, {{0, 1}, {1, 2}}), PreconditionError);
    CHECK_THROWS_AS(mk(4, {{0, 1}}), PreconditionError);
  }

  TEST_CASE("fits examples") {
    const Matching ab_cd = mk(4, {{0, 1}, {2, 3}});
    const Matching bc_da = mk(4, {{1, 2}, {0, 3}});
    CHECK(fits(ab_cd, bc_da));
    CHECK_FALSE(fits(ab_cd, ab_cd));
    const Matching single = mk(2, {{0, 1}});
    CHECK(fits(single, single));
    CHECK(fits(Matching{}, Matching{}));
  }

  TEST_CASE("fits is symmetric and agrees with a cycle walk") {
    for (std::size_t k : {4u, 6u, 8u}) {
      const auto all = all_matchings(k);
      for (const auto& a : all) {
        for (const auto& b : all) {
          CHECK(fits(a, b) == fits(b, a));
          CHECK(fits(a, b) == oracle::fits_by_walk(a, b));
        }
      }
    }
  }

  TEST_CASE("opt") {
    const RepSet empty(positions(4));
    CHECK(opt(mk(4, {{0, 1}, {2, 3}}), empty) == kInfinity);
    RepSet one(positions(4));
    one.insert_min(mk(4, {{1, 2}, {0, 3}}), 7.0, [] { return witness_of({}); });
    CHECK(opt(mk(4, {{0, 1}, {2, 3}}), one) == 7.0);
    CHECK(opt(mk(4, {{1, 2}, {0, 3}}), one) == kInfinity);
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 30; ++rep) {
      const RepSet r = random_repset(6, rng, 0.4);
      for (const auto& m : all_matchings(6)) CHECK(opt(m, r) == oracle::opt_scan(m, as_list(r)));
    }
  }

  TEST_CASE("insert_min keeps the minimum") {
    RepSet r(positions(4));
    const Matching m = mk(4, {{0, 1}, {2, 3}});
    CHECK(r.insert_min(m, 5.0, [] { return witness_of({Segment{0, 1}}); }));
    CHECK(r.insert_min(m, 3.0, [] { return witness_of({Segment{0, 2}}); }));
    CHECK_FALSE(r.insert_min(m, 4.0, [] { return witness_of({}); }));
    REQUIRE(r.size() == 1);
    CHECK(r.entries()[0].weight == 3.0);
    CHECK(r.entries()[0].edges() == std::vector<Segment>{Segment{0, 2}});
    r.insert_min(mk(4, {{0, 2}, {1, 3}}), 9.0, [] { return witness_of({}); });
    CHECK(r.size() == 2);
    CHECK_THROWS(r.insert_min(mk(2, {{0, 1}}), 1.0, [] { return witness_of({}); }));
  }

  TEST_CASE("insert_min is order independent") {
    std::mt19937_64 rng(11);
    const auto all = all_matchings(6);
    struct Item {
      Matching m;
      double w;
      std::vector<Segment> e;
    };
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<Item> items;
      for (int j = 0; j < 40; ++j) {
        const auto& m = all[rng() % all.size()];
        std::vector<Segment> e{Segment{static_cast<Index>(rng() % 5), 9}};
        items.push_back({m, static_cast<double>(rng() % 4), e});
      }
      RepSet first(positions(6));
      for (const auto& it : items) first.insert_min(it.m, it.w, [&] { return witness_of(it.e); });
      for (int shuffle = 0; shuffle < 5; ++shuffle) {
        std::shuffle(items.begin(), items.end(), rng);
        RepSet other(positions(6));
        for (const auto& it : items) other.insert_min(it.m, it.w, [&] { return witness_of(it.e); });
        REQUIRE(other.size() == first.size());
        for (std::size_t k = 0; k < first.size(); ++k) {
          CHECK(other.entries()[k].matching == first.entries()[k].matching);
          CHECK(other.entries()[k].weight == first.entries()[k].weight);
          CHECK(other.entries()[k].edges() == first.entries()[k].edges());
        }
      }
    }
  }

  TEST_CASE("merge equals inserting everything") {
    std::mt19937_64 rng(2);
    const RepSet a = random_repset(6, rng, 0.5), b = random_repset(6, rng, 0.5);
    RepSet m = a;
    m.merge(b);
    for (const auto& x : all_matchings(6)) {
      CHECK(opt(x, m) == std::min(opt(x, a), opt(x, b)));
    }
  }

  TEST_CASE("reduce keeps every opt value") {
    std::mt19937_64 rng(7);
    for (std::size_t k : {4u, 6u, 8u}) {
      for (int rep = 0; rep < 25; ++rep) {
        const RepSet r = random_repset(k, rng, rep % 2 ? 0.9 : 0.4);
        const RepSet red = reduce(r);
        CHECK(red.size() <= (std::size_t{1} << (k - 1)));
        for (const auto& m : all_matchings(k)) CHECK(opt(m, red) == opt(m, r));
        for (const auto& e : red.entries()) {
          const auto it = std::find_if(r.entries().begin(), r.entries().end(),
                                       [&](const WeightedMatching& x) { return x.matching == e.matching; });
          REQUIRE(it != r.entries().end());
          CHECK(it->weight == e.weight);
        }
        const RepSet twice = reduce(red);
        CHECK(twice.size() == red.size());
        for (const auto& m : all_matchings(k)) CHECK(opt(m, twice) == opt(m, red));
      }
    }
    RepSet two(positions(2));
    two.insert_min(mk(2, {{0, 1}}), 1.5, [] { return witness_of({}); });
    const RepSet same = reduce(two);
    REQUIRE(same.size() == 1);
    CHECK(same.entries()[0].weight == 1.5);
  }

  TEST_CASE("reduce leaves a small independent set alone") {
    RepSet r(positions(4));
    r.insert_min(mk(4, {{0, 1}, {2, 3}}), 1.0, [] { return witness_of({}); });
    r.insert_min(mk(4, {{0, 2}, {1, 3}}), 2.0, [] { return witness_of({}); });
    const RepSet red = reduce(r);
    CHECK(red.size() == 2);
  }

  TEST_CASE("join examples") {
    const std::vector<Index> b{3, 5, 8, 9};
    const Matching m_in = mk(4, {{0, 3}, {1, 2}});
    const auto j = compatible_join(m_in, b, Matching{}, std::vector<Index>{}, make_candidate({}), b);
    REQUIRE(j);
    CHECK(*j == m_in);

    // Inside 1 - 2 joined by S through outside points 10 and 11 with M_out
    // pairing them: the path 1-10-11-2 is a cycle with M_in's (1,2).
    const std::vector<Index> b_in{1, 2};
    const std::vector<Index> b_out{10, 11};
    const auto s = make_candidate({Segment{1, 10}, Segment{2, 11}});
    const auto cyc = compatible_join(mk(2, {{0, 1}}), b_in, mk(2, {{0, 1}}), b_out, s, std::vector<Index>{});
    CHECK_FALSE(cyc);
  }

  TEST_CASE("join agrees with explicit graph traversal") {
    std::mt19937_64 rng(13);
    int compared = 0;
    for (int rep = 0; rep < 400; ++rep) {
      // Points 0..5 inside, 6..11 outside.
      std::vector<Segment> s;
      std::vector<int> deg(12, 0);
      for (int t = 0; t < 4; ++t) {
        const Index a = static_cast<Index>(rng() % 6), c = static_cast<Index>(6 + rng() % 6);
        const Segment e{a, c};
        if (deg[a] == 2 || deg[c] == 2 || std::find(s.begin(), s.end(), e) != s.end()) continue;
        ++deg[a];
        ++deg[c];
        s.push_back(e);
      }
      std::vector<Index> boundary;
      for (Index v = 0; v < 12; ++v) {
        if (deg[v] <= 1 && rng() % 3 == 0) boundary.push_back(v);
      }
      std::vector<Index> b_in, b_out;
      for (Index v = 0; v < 12; ++v) {
        const bool in_b = std::find(boundary.begin(), boundary.end(), v) != boundary.end();
        if (in_b != (deg[v] == 1)) (v < 6 ? b_in : b_out).push_back(v);
      }
      if (b_in.size() % 2 || b_out.size() % 2 || boundary.size() % 2) continue;
      if (b_in.size() > 8 || b_out.size() > 8) continue;
      const CandidateSet cand = make_candidate(s);
      const Joiner joiner(b_in, b_out, cand, boundary);
      for (const auto& mi : all_matchings(b_in.size())) {
        for (const auto& mo : all_matchings(b_out.size())) {
          std::vector<std::pair<Index, Index>> pin, pout;
          for (auto [x, y] : mi.pairs()) pin.emplace_back(b_in[x], b_in[y]);
          for (auto [x, y] : mo.pairs()) pout.emplace_back(b_out[x], b_out[y]);
          const auto want = oracle::join_by_graph(pin, pout, s, boundary);
          const auto got = compatible_join(mi, b_in, mo, b_out, cand, boundary);
          CHECK(got.has_value() == want.has_value());
          CHECK(joiner.join(mi, mo) == got);
          ++compared;
          if (!got || !want) continue;
          CHECK(is_perfect(*got));
          std::set<std::pair<Index, Index>> have;
          for (auto [x, y] : got->pairs()) have.insert({boundary[x], boundary[y]});
          CHECK(have == *want);
        }
      }
    }
    CHECK(compared > 200);
  }
}
