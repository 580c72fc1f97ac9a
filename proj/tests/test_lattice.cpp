#include <doctest.h>

#include <cmath>
#include <limits>

#include "orbisect/lattice.hpp"
#include "orbisect/strata.hpp"

using namespace orbisect;

namespace {

std::vector<RMatrix> group_of(const SeparatedLattice& l) {
  if (!l.actions.empty()) return l.actions;
  return {RMatrix::Identity(l.real_dim, l.real_dim)};
}

// O(N^2 |G|) strong separation: min distance between p and g q over same-family pairs,
// including q = p with g != identity.
// `stride` > 1 samples the first point of each pair.
double brute_separation(const SeparatedLattice& l, std::size_t stride = 1) {
  const auto G = group_of(l);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < l.size(); i += stride)
    for (std::size_t j = stride == 1 ? i : 0; j < l.size(); ++j) {
      if (l.family[i] != l.family[j]) continue;
      for (std::size_t g = 0; g < G.size(); ++g) {
        if (i == j && g == 0) continue;
        best = std::min(best, l.distance(l.points[i], G[g] * l.points[j]));
      }
    }
  return best;
}

// Direct summation of sum_{n in Z^2} exp(-|n|^2 / 5).
double unit_grid_gauss_sum() {
  double s = 0.0;
  for (int a = -60; a <= 60; ++a)
    for (int b = -60; b <= 60; ++b) s += std::exp(-(a * a + b * b) / 5.0);
  return s;
}

RVector vec2(double a, double b) {
  RVector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("one-dimensional constant") {
  CHECK(lattice_1d_constant(1) == doctest::Approx(1.0));
  CHECK(lattice_1d_constant(2) == doctest::Approx(4.0));
  CHECK(lattice_1d_constant(3) == doctest::Approx(6.0));
  CHECK(lattice_1d_constant(6) == doctest::Approx(12.0));
}

TEST_CASE("plain grids") {
  auto sq = plain_box_lattice(vec2(0, 0), vec2(1, 1), 2.0);
  CHECK(sq.size() == 4);
  CHECK(sq.num_families == 4);
  CHECK(brute_separation(sq) == std::numeric_limits<double>::infinity());

  auto box = plain_box_lattice(vec2(-12, -12), vec2(12, 12), 3.0);
  CHECK(box.num_families == 9);
  const double sep = brute_separation(box);
  CHECK(sep >= 3.0);
  auto rep = verify_property_p(box, 3.0, 0.25);
  CHECK(rep.ok());
  CHECK(rep.uncovered == 0);
  CHECK(rep.min_separation == doctest::Approx(sep));

  // R = 1 covering means spacing at most 1 in g_k units.
  CHECK(box.params.R == doctest::Approx(1.0));
}

TEST_CASE("weighted sums on the unit grid") {
  auto box = plain_box_lattice(vec2(-40, -40), vec2(40, 40), 1.0);
  auto rep = verify_property_p(box, 1.0, 0.25);
  const double oracle = unit_grid_gauss_sum();
  CHECK(oracle == doctest::Approx(5.0 * M_PI).epsilon(1e-9));
  REQUIRE(rep.weighted_sums.size() == 4);
  // The periodic sum is constant in q up to exp(-5 pi^2).
  CHECK(rep.weighted_sums[0] == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("one-dimensional lattices") {
  auto trivial = lattice_1d(1, 3.0, 10.0);
  CHECK(trivial.num_families == 9);
  CHECK(brute_separation(trivial) >= 3.0);

  auto z4 = lattice_1d(4, 5.0, 60.0);
  CHECK(z4.params.exclusion_radius == doctest::Approx(8.0 * 5.0));
  for (const auto& p : z4.points) CHECK(p.norm() > 40.0);
  CHECK(brute_separation(z4) >= 5.0);
  auto rep = verify_property_p(z4, 5.0, 0.25);
  CHECK(rep.ok());
  CHECK(rep.violating_pairs == 0);

  CHECK_THROWS_AS(lattice_1d(4, 5.0, 30.0), Error);
}

TEST_CASE("coincident pair is a violation") {
  SeparatedLattice l;
  l.real_dim = 2;
  l.points = {vec2(0, 0), vec2(0.5, 0), vec2(7, 0)};
  l.family = {0, 0, 1};
  l.num_families = 2;
  l.params.D = 2.0;
  l.params.separation = 2.0;
  l.params.family_constant = 10.0;
  l.region.lo = vec2(-1, -1);
  l.region.hi = vec2(8, 1);
  auto rep = verify_property_p(l, 2.0, 0.25);
  CHECK_FALSE(rep.separation_ok);
  CHECK(rep.violating_pairs == 1);
  CHECK(rep.min_separation == doctest::Approx(0.5));
  CHECK(brute_separation(l) == doctest::Approx(0.5));
}

TEST_CASE("product of trivial lattices") {
  auto a = plain_box_lattice(vec2(-6, -6), vec2(6, 6), 2.0);
  SeparatedLattice none;
  none.real_dim = 2;
  auto p = lattice_product(a, a, none, none);
  CHECK(p.real_dim == 4);
  CHECK(p.size() == a.size() * a.size());
  CHECK(p.num_families == 16);
  CHECK(brute_separation(p) >= 2.0);
}

TEST_CASE("chart lattices for cyclic rotations") {
  const int k = 400;
  const double sq = std::sqrt(metric_scale(k));
  for (int m : {2, 3, 4, 6}) {
    CAPTURE(m);
    const double D = 5.0;
    const double C = lattice_1d_constant(m);
    auto l = chart_lattice(*cyclic_u1(m), 1.0, D, k, (C * D + 3.0) / sq);
    CHECK(l.size() > 0);
    CHECK(brute_separation(l) >= D - 1e-9);
    auto rep = verify_property_p(l, D, 0.25);
    CHECK(rep.ok());
    CHECK(rep.distribution_constant < 9.0);
  }
}

TEST_CASE("torus top stratum, T2/Z2") {
  auto q = make_torus_preset("T2_Z2");
  auto poset = torus_strata(*q);
  auto l = stratum_lattice(q, poset, poset.max_index, 1.0, 1.0, 400);
  CHECK(l.region.kind == RegionKind::Torus);
  CHECK(l.region.removed_strata.size() == 4);
  CHECK(brute_separation(l) >= 1.0 - 1e-9);
  auto rep = verify_property_p(l, 1.0, 0.25);
  CHECK(rep.ok());

  // Tightness: the position of a removed point is not covered by the others.
  const auto G = group_of(l);
  for (std::size_t i = 0; i < l.size(); i += l.size() / 7 + 1) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < l.size(); ++j)
      for (const auto& g : G)
        if (j != i) nearest = std::min(nearest, l.distance(l.points[i], g * l.points[j]));
    CHECK(nearest > l.params.R);
  }
}

TEST_CASE("torus top stratum, T4/Z2") {
  auto q = make_torus_preset("T4_Z2");
  auto poset = torus_strata(*q);
  auto l = stratum_lattice(q, poset, poset.max_index, 1.0, 1.0, 25);
  CHECK(l.region.removed_strata.size() == 16);
  CHECK(brute_separation(l, 97) >= 1.0 - 1e-9);
  auto rep = verify_property_p(l, 1.0, 0.25);
  CHECK(rep.ok());
}

TEST_CASE("point strata and empty regions") {
  auto q = make_torus_preset("T2_Z2");
  auto poset = torus_strata(*q);
  int point = -1;
  for (std::size_t i = 0; i < poset.size(); ++i)
    if (poset.strata[i].dimension() == 0) point = static_cast<int>(i);
  REQUIRE(point >= 0);
  auto l = stratum_lattice(q, poset, point, 1.0, 5.0, 400);
  CHECK(l.size() == 1);
  CHECK(l.num_families == 1);
  CHECK(l.actions.empty());

  // C*D = 20 around the four fixed points swallows a torus of g_k-side ~25.
  CHECK_THROWS_AS(stratum_lattice(q, poset, poset.max_index, 1.0, 5.0, 400), Error);
}
