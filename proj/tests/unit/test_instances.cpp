#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "etsp/error.hpp"
#include "etsp/instance.hpp"
#include "oracles.hpp"

using namespace etsp;

namespace {

Instance square() { return euclidean_instance(PointSet(2, {0, 0, 1, 0, 1, 1, 0, 1}), "square"); }

}  // namespace

TEST_SUITE("oracle_instances") {
  TEST_CASE("held_karp examples") {
    const Tour t = held_karp(square());
    CHECK(t.length == doctest::Approx(4.0));
    CHECK(is_permutation_of_range(t.order, 4));
    const Instance line = euclidean_instance(PointSet(2, {0, 0, 1, 0, 2, 0}));
    CHECK(held_karp(line).length == doctest::Approx(4.0));
    CHECK_THROWS_AS(held_karp(euclidean_instance(PointSet(2, {0, 0, 1, 1}))), PreconditionError);
    CHECK_THROWS_AS(held_karp(gen(GenKind::Uniform, 25, 2, 1)), PreconditionError);
  }

  TEST_CASE("held_karp equals the permutation scan") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const Instance inst = gen(GenKind::Uniform, seed == 1 ? 10 : 6 + seed % 4, 2, seed);
      const Tour t = held_karp(inst);
      CHECK(t.length == doctest::Approx(oracle::brute_tour(inst)).epsilon(1e-12));
      CHECK(oracle::cycle_length(inst, t.order) == doctest::Approx(t.length).epsilon(1e-12));
    }
  }

  TEST_CASE("held_karp is below sampled tours") {
    std::mt19937_64 rng(4);
    const Instance inst = gen(GenKind::Uniform, 14, 2, 4);
    const double best = held_karp(inst).length;
    std::vector<Index> order(14);
    std::iota(order.begin(), order.end(), Index{0});
    for (int k = 0; k < 1000; ++k) {
      std::shuffle(order.begin(), order.end(), rng);
      CHECK(best <= tour_length(inst, order) + 1e-12);
    }
  }

  TEST_CASE("brute_path_cover examples") {
    // Two far-apart pairs of mutually nearest points.
    const Instance inst = euclidean_instance(PointSet(2, {0, 0, 0.1, 0, 5, 5, 5.1, 5}));
    EPCInstance epc{inst, {0, 1, 2, 3}, matching_from_pairs(4, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {2, 3}})};
    const PathCover c = brute_path_cover(epc);
    REQUIRE(c.feasible);
    CHECK(c.total_length == doctest::Approx(0.2));
    CHECK(c.paths.size() == 2);
    CHECK(path_cover_length(inst, c) == doctest::Approx(c.total_length));

    const Instance two = euclidean_instance(PointSet(2, {0, 0, 3, 4}));
    EPCInstance e2{two, {0, 1}, matching_from_pairs(2, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}})};
    CHECK(brute_path_cover(e2).total_length == doctest::Approx(5.0));
    EPCInstance odd{two, {0}, Matching{}};
    CHECK_THROWS_AS(brute_path_cover(odd), PreconditionError);
  }

  TEST_CASE("brute_path_cover equals enumeration") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const Instance inst = gen(GenKind::Uniform, 10, 2, seed);
      const std::vector<Index> b{1, 3, 6, 8};
      for (const Matching& m : all_matchings(4)) {
        EPCInstance epc{inst, b, m};
        const PathCover c = brute_path_cover(epc);
        std::vector<std::pair<Index, Index>> pairs;
        for (auto [x, y] : m.pairs()) pairs.emplace_back(b[x], b[y]);
        CHECK(c.total_length == doctest::Approx(oracle::brute_cover(inst, pairs)).epsilon(1e-12));
        CHECK(path_cover_length(inst, c) == doctest::Approx(c.total_length).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("generators") {
    for (GenKind k : {GenKind::Uniform, GenKind::Grid, GenKind::Clustered}) {
      for (std::size_t d : {2u, 3u, 4u}) {
        const Instance a = gen(k, 30, d, 99), b = gen(k, 30, d, 99);
        CHECK(a.points.coords() == b.points.coords());
        CHECK(a.size() == 30);
        CHECK(a.dim() == d);
      }
    }
    CHECK(gen(GenKind::Uniform, 30, 2, 1).points.coords() != gen(GenKind::Uniform, 30, 2, 2).points.coords());
    const Instance u = gen(GenKind::Uniform, 500, 3, 5);
    for (double c : u.points.coords()) {
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
    }
    const Instance g = gen(GenKind::Grid, 9, 2, 1);
    std::set<std::pair<double, double>> cells;
    for (std::size_t i = 0; i < 9; ++i) cells.insert({g.points[i][0], g.points[i][1]});
    std::set<std::pair<double, double>> lattice;
    for (int x = 1; x <= 3; ++x) {
      for (int y = 1; y <= 3; ++y) lattice.insert({x, y});
    }
    CHECK(cells == lattice);
    CHECK(parse_gen_kind("clustered") == GenKind::Clustered);
    CHECK(to_string(GenKind::Grid) == "grid");
    CHECK_THROWS_AS(parse_gen_kind("spiral"), PreconditionError);
    CHECK_THROWS_AS(gen(GenKind::Uniform, 5, 5, 1), PreconditionError);
  }

  TEST_CASE("order preservation") {
    const Instance inst = gen(GenKind::Uniform, 12, 2, 3);
    const DistanceMatrix e = euclidean_matrix(inst.points);
    CHECK(validate_order_preserving(inst.points, e));
    DistanceMatrix sq = e;
    for (std::size_t i = 0; i < 12; ++i) {
      for (std::size_t j = 0; j < 12; ++j) sq(i, j) = e(i, j) * e(i, j);
    }
    CHECK(validate_order_preserving(inst.points, sq));
    // swap the entries of the shortest and longest pair
    std::size_t si = 0, sj = 1, li = 0, lj = 1;
    for (std::size_t i = 0; i < 12; ++i) {
      for (std::size_t j = i + 1; j < 12; ++j) {
        if (e(i, j) < e(si, sj)) std::tie(si, sj) = std::pair{i, j};
        if (e(i, j) > e(li, lj)) std::tie(li, lj) = std::pair{i, j};
      }
    }
    DistanceMatrix bad = e;
    bad.set_symmetric(si, sj, e(li, lj));
    bad.set_symmetric(li, lj, e(si, sj));
    CHECK_FALSE(validate_order_preserving(inst.points, bad));
    DistanceMatrix asym = e;
    asym(0, 1) += 1.0;
    CHECK_THROWS_AS(validate_order_preserving(inst.points, asym), PreconditionError);
    // equal Euclidean distances impose nothing
    const Instance sq4 = square();
    DistanceMatrix ties = euclidean_matrix(sq4.points);
    ties.set_symmetric(0, 1, 0.9);
    CHECK(validate_order_preserving(sq4.points, ties));
  }

  TEST_CASE("perturb_matrix") {
    const Instance inst = gen(GenKind::Uniform, 15, 2, 8);
    const DistanceMatrix e = euclidean_matrix(inst.points);
    const DistanceMatrix z = perturb_matrix(inst.points, 1, 0.0);
    for (std::size_t i = 0; i < 15; ++i) {
      for (std::size_t j = 0; j < 15; ++j) CHECK(z(i, j) == e(i, j));
    }
    bool changed = false;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const DistanceMatrix d = perturb_matrix(inst.points, seed, seed % 2 ? 0.5 : 1.0);
      CHECK(validate_order_preserving(inst.points, d));
      changed = changed || d(0, 1) != e(0, 1);
    }
    CHECK(changed);
    const Instance g = gen(GenKind::Grid, 16, 2, 1);
    CHECK(validate_order_preserving(g.points, perturb_matrix(g.points, 3, 1.0)));
  }

  TEST_CASE("instance file round trip") {
    for (const Instance& inst :
         {gen(GenKind::Uniform, 9, 3, 2),
          matrix_instance(gen(GenKind::Uniform, 7, 2, 2).points, perturb_matrix(gen(GenKind::Uniform, 7, 2, 2).points, 2, 0.5))}) {
      std::stringstream ss;
      write_instance(ss, inst);
      const Instance back = read_instance(ss);
      CHECK(back.points.coords() == inst.points.coords());
      CHECK(back.model == inst.model);
      for (std::size_t i = 0; i < inst.size(); ++i) {
        for (std::size_t j = 0; j < inst.size(); ++j) CHECK(back.weight(i, j) == inst.weight(i, j));
      }
    }
  }

  TEST_CASE("malformed files") {
    for (const char* text : {"", "tsp-instance v2 d=2 n=1 model=euclid\n0 0\n",
                             "tsp-instance v1 d=2 n=2 model=euclid\n0 0\n",
                             "tsp-instance v1 d=2 n=1 model=euclid\n0 x\n",
                             "tsp-instance v1 d=2 n=1 model=euclid\n0 0\n1 1\n",
                             "tsp-instance v1 d=2 n=2 model=matrix\n0 0\n1 0\n0 1\n2 0\n"}) {
      std::stringstream ss(text);
      CHECK_THROWS_AS(read_instance(ss), ParseError);
    }
    CHECK_THROWS_AS(read_instance_file("/nonexistent/path.tsp"), ParseError);
  }

  TEST_CASE("TSPLIB import") {
    std::stringstream ss(
        "NAME : tiny\nTYPE : TSP\nDIMENSION : 4\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n"
        "1 0 0\n2 3 0\n3 3 4\n4 0 4\nEOF\n");
    const Instance inst = read_tsplib(ss);
    CHECK(inst.name == "tiny");
    CHECK(inst.size() == 4);
    CHECK(held_karp(inst).length == doctest::Approx(14.0));
    std::stringstream explicit_w("NAME : x\nEDGE_WEIGHT_TYPE : EXPLICIT\nNODE_COORD_SECTION\n1 0 0\nEOF\n");
    CHECK_THROWS_AS(read_tsplib(explicit_w), ParseError);
  }
}
