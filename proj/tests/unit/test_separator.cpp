#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "etsp/error.hpp"
#include "etsp/separator.hpp"
#include "oracles.hpp"

using namespace etsp;

namespace {

std::vector<Index> iota_indices(std::size_t n) {
  std::vector<Index> v(n);
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

std::vector<double> dense_grid(std::size_t count) {
  std::vector<double> t(count);
  for (std::size_t k = 0; k < count; ++k) t[k] = 1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(count - 1);
  return t;
}

double summed_weight(const PointSet& pts, const std::vector<Index>& members, const Separator& star, double t) {
  double s = 0.0;
  for (Index v : members) s += oracle::truncated_weight_at(pts[v], star, members.size(), t, 8.0);
  return s;
}

}  // namespace

TEST_SUITE("separator") {
  TEST_CASE("constants") {
    CHECK(balance_delta(2) == doctest::Approx(16.0 / 17.0));
    CHECK(balance_delta(3) == doctest::Approx(64.0 / 65.0));
    CHECK(quantile_threshold(17, 2) == 1);
    CHECK(quantile_threshold(18, 2) == 2);
    CHECK(quantile_threshold(34, 2) == 2);
    CHECK(quantile_threshold(35, 2) == 3);
    CHECK(band_range(256, 2).second == 4);
    CHECK(band_range(16, 2).second == 2);
    // i_min = floor(1 - log_1.5 sqrt(256)) = floor(1 - 6.838) = -6
    CHECK(band_range(256, 2).first == -6);
  }

  TEST_CASE("quantile cube on tiny pivot sets is a point") {
    PointSet pts(2, {0.3, 0.7, 0.1, 0.2, 0.9, 0.9});
    const std::vector<Index> one{1};
    const Separator s = smallest_quantile_cube(pts, one);
    CHECK(s.size == 0.0);
    CHECK(s.center == Point{0.1, 0.2});
    const Separator all = smallest_quantile_cube(pts, iota_indices(3));
    CHECK(all.size == 0.0);
    CHECK(all.center == Point{0.1, 0.2});
    CHECK_THROWS_AS(smallest_quantile_cube(pts, std::vector<Index>{}), PreconditionError);
  }

  TEST_CASE("quantile cube equals the exhaustive anchored scan") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
      CAPTURE(seed);
      const std::size_t n = seed == 1 ? 34 : 20 + 3 * seed;
      const PointSet pts(2, oracle::uniform_coords(n, 2, seed));
      const auto q = iota_indices(n);
      const std::size_t k = quantile_threshold(n, 2);
      const Separator got = smallest_quantile_cube(pts, q, k);
      const Separator want = oracle::anchored_cube_scan(pts, q, k, false);
      CHECK(got.size == doctest::Approx(want.size).epsilon(1e-12));
      CHECK(got.center[0] == doctest::Approx(want.center[0]).epsilon(1e-12));
      CHECK(got.center[1] == doctest::Approx(want.center[1]).epsilon(1e-12));
      for (std::size_t m : {std::size_t{3}, std::size_t{5}, n / 2}) {
        const Separator g2 = smallest_quantile_cube(pts, q, m);
        const Separator w2 = oracle::anchored_cube_scan(pts, q, m, false);
        CHECK(g2.size == doctest::Approx(w2.size).epsilon(1e-12));
        CHECK(g2.center[0] == doctest::Approx(w2.center[0]).epsilon(1e-12));
      }
    }
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const PointSet pts(3, oracle::uniform_coords(24, 3, seed));
      const auto q = iota_indices(24);
      const Separator got = smallest_quantile_cube(pts, q, 4);
      const Separator want = oracle::anchored_cube_scan(pts, q, 4, false);
      CHECK(got.size == doctest::Approx(want.size).epsilon(1e-12));
    }
  }

  TEST_CASE("positive-size quantile cube skips coincident points") {
    PointSet pts(2, {0.5, 0.5, 0.5, 0.5, 0.1, 0.1, 0.9, 0.2});
    const auto q = iota_indices(4);
    CHECK(smallest_quantile_cube(pts, q, 2, false).size == 0.0);
    const Separator s = smallest_quantile_cube(pts, q, 2, true);
    const Separator w = oracle::anchored_cube_scan(pts, q, 2, true);
    CHECK(s.size > 0.0);
    CHECK(s.size == doctest::Approx(w.size));
  }

  TEST_CASE("truncated weight examples") {
    const Separator star{{0.0, 0.0}, 1.0};
    const double far[] = {1000.0, 0.0};
    const StepFunction f = truncated_weight(far, star, 100);
    for (double t : dense_grid(101)) CHECK(f(t) == doctest::Approx(1.0 / 100.0));
    const double on[] = {0.5, 0.1};
    const StepFunction g = truncated_weight(on, star, 100);
    CHECK(g(1.0) == doctest::Approx(800.0));
    double prev = g(1.0);
    for (double t : dense_grid(1000)) {
      CHECK(g(t) <= prev + 1e-12);
      prev = g(t);
    }
    CHECK(g.breaks.front() == 1.0);
    CHECK(g.breaks.back() == 3.0);
    CHECK(std::is_sorted(g.breaks.begin(), g.breaks.end()));
  }

  TEST_CASE("truncated weight matches dense sampling") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const Separator star{{0.1, 0.2}, 0.7};
    const auto ts = dense_grid(10000);
    for (int rep = 0; rep < 20; ++rep) {
      const double p[] = {u(rng), u(rng)};
      const std::size_t n = 50 + 97 * static_cast<std::size_t>(rep);
      const StepFunction f = truncated_weight(p, star, n);
      CHECK(f.pieces() + 1 == f.breaks.size());
      for (double t : ts) {
        const bool near_break = std::any_of(f.breaks.begin(), f.breaks.end(),
                                            [&](double b) { return std::abs(b - t) < 1e-9; });
        if (near_break) continue;
        CHECK(f(t) == doctest::Approx(oracle::truncated_weight_at(p, star, n, t, 8.0)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("select_scaling") {
    PointSet lone(2, {1000.0, 1000.0});
    const Separator star{{0.0, 0.0}, 1.0};
    CHECK(select_scaling(lone, std::vector<Index>{0}, star) == 1.0);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const PointSet pts(2, oracle::uniform_coords(200, 2, seed));
      const auto all = iota_indices(200);
      const Separator s = smallest_quantile_cube(pts, all);
      const double t = select_scaling(pts, all, s);
      CHECK(t >= 1.0);
      CHECK(t <= 3.0);
      const double best = summed_weight(pts, all, s, t);
      for (double x : dense_grid(10000)) CHECK(best <= summed_weight(pts, all, s, x) * (1.0 + 1e-12));
    }
  }

  TEST_CASE("build_separator balance and bands") {
    const PointSet pts(2, oracle::uniform_coords(100, 2, 4));
    const SeparatorChoice c = build_separator(pts, iota_indices(100));
    CHECK(std::max(c.balance_counts.first, c.balance_counts.second) <= 94);
    CHECK(c.sigma.size == doctest::Approx(c.t_bar * c.sigma_star.size));
    for (auto [i, count] : c.band_sizes) CHECK(count == near_set(pts, iota_indices(100), c.sigma, i).size());
    for (std::size_t k = 1; k < c.band_sizes.size(); ++k) CHECK(c.band_sizes[k - 1].second <= c.band_sizes[k].second);

    std::vector<double> coords = oracle::uniform_coords(1000, 2, 8);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 0.01);
    for (std::size_t v = 0; v < 20; ++v) {
      coords[2 * v] = 0.3 + g(rng);
      coords[2 * v + 1] = 0.6 + g(rng);
    }
    const PointSet big(2, coords);
    const auto cluster = iota_indices(20);
    const SeparatorChoice cc = build_separator(big, iota_indices(1000), std::vector<Index>(cluster));
    CHECK(std::max(cc.balance_counts.first, cc.balance_counts.second) <= 18);
    CHECK_THROWS_AS(build_separator(pts, iota_indices(100), iota_indices(17)), PreconditionError);
  }

  TEST_CASE("outside count shrinks as the scaling grows") {
    const PointSet pts(2, oracle::uniform_coords(300, 2, 21));
    const Separator star = smallest_quantile_cube(pts, iota_indices(300));
    std::size_t prev = 300;
    for (double t : dense_grid(500)) {
      std::size_t out = 0;
      for (Index v = 0; v < 300; ++v) out += classify(pts[v], scale(star, t)) == Side::Out ? 1 : 0;
      CHECK(out <= prev);
      prev = out;
    }
  }

  TEST_CASE("small pivot mode balances and splits") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      const PointSet pts(2, oracle::uniform_coords(14, 2, seed));
      SeparatorOptions o;
      o.small_pivot = true;
      const SeparatorChoice c = build_separator(pts, iota_indices(14), o);
      CHECK(c.balance_counts.first > 0);
      CHECK(c.balance_counts.second > 0);
      CHECK(std::max(c.balance_counts.first, c.balance_counts.second) * 17 <= 16 * 14);
    }
  }
}
