#include <doctest.h>

#include <algorithm>

#include "orbisect/strata.hpp"

using namespace orbisect;

namespace {

std::vector<int> heights(const StrataPoset& p) {
  std::vector<int> h;
  for (const auto& s : p.strata) h.push_back(s.height);
  std::sort(h.begin(), h.end());
  return h;
}

// Oracle for x = -x mod Z^{2n}: every coordinate in {0, 1/2}.
int half_integer_points(int real_dim) { return 1 << real_dim; }

}  // namespace

TEST_CASE("local strata of small groups") {
  auto trivial = local_strata(build_group(1, {}));
  CHECK(trivial.size() == 1);
  CHECK(trivial.axioms_hold());

  auto z2 = local_strata(*central_z2(1));
  REQUIRE(z2.size() == 2);
  CHECK(heights(z2) == std::vector<int>{0, 1});
  CHECK(z2.axioms_hold());

  auto k4 = local_strata(*sign_flips_c2());
  REQUIRE(k4.size() == 4);
  CHECK(heights(k4) == std::vector<int>{0, 1, 1, 2});
  CHECK(k4.axioms_hold());
  for (std::size_t a = 0; a < k4.size(); ++a)
    CHECK(k4.strata[a].height == k4.brute_force_height(static_cast<int>(a)));
  CHECK(k4.strata[static_cast<std::size_t>(k4.max_index)].subgroup.size() == 1);
}

TEST_CASE("full isotropy is generic on each stratum") {
  const auto g = sign_flips_c2();
  auto p = local_strata(*g);
  for (const auto& s : p.strata) CHECK(full_isotropy_fraction(*g, s, 400, 7u) >= 0.99);
}

TEST_CASE("ineffective subgroups are dropped") {
  // diag(-1,-1) and diag(-1,1) generate K4 where the axis y=0 is fixed by diag(1,-1) only.
  CMatrix a = CMatrix::Identity(2, 2), b = CMatrix::Identity(2, 2);
  a *= -1.0;
  b(0, 0) = -1.0;
  auto g = build_group(2, {a, b});
  auto p = local_strata(g);
  // Effective: trivial, the two axis flips, the whole group (origin). {I,-I} fixes only 0 and is not maximal.
  CHECK(p.size() == 4);
  CHECK(p.axioms_hold());
}

TEST_CASE("torus strata") {
  auto t4 = torus_strata(*make_torus_preset("T4_Z2"));
  CHECK(static_cast<int>(t4.size()) == 1 + half_integer_points(4));
  CHECK(t4.axioms_hold());
  for (const auto& s : t4.strata) CHECK(s.height == (s.subgroup.size() == 1 ? 0 : 1));

  auto t2 = torus_strata(*make_torus_preset("T2_Z2"));
  CHECK(static_cast<int>(t2.size()) == 1 + half_integer_points(2));

  // i fixes 0 and (1/2,1/2); -1 additionally fixes the swapped pair (1/2,0),(0,1/2).
  auto t24 = torus_strata(*make_torus_preset("T2_Z4"));
  CHECK(t24.size() == 4);
  CHECK(t24.axioms_hold());

  // Hexagonal Z/3: three fixed points; Z/6: 0 (Z6), one Z3 orbit, one Z2 orbit.
  CHECK(torus_strata(*make_torus_preset("T2_Z3")).size() == 4);
  CHECK(torus_strata(*make_torus_preset("T2_Z6")).size() == 4);
}

TEST_CASE("singular descent") {
  auto q = make_torus_preset("T4_Z2");
  auto p = torus_strata(*q);
  RVector generic(4);
  generic << 0.123, 0.456, 0.789, 0.314;
  CHECK(singular_descent(p, *q, generic) == p.max_index);

  RVector half = q->from_lattice(RVector::Constant(4, 0.5));
  const int s = singular_descent(p, *q, half);
  CHECK(p.strata[static_cast<std::size_t>(s)].subgroup.size() == 2);
  CHECK((q->reduce(p.strata[static_cast<std::size_t>(s)].offset) - q->reduce(half)).norm() < 1e-9);

  auto g = sign_flips_c2();
  auto lp = local_strata(*g);
  RVector axis(4);
  axis << 0.7, 0.0, 0.0, 0.0;
  CHECK(lp.strata[static_cast<std::size_t>(singular_descent(lp, *g, axis))].height == 1);
  RVector origin = RVector::Zero(4);
  CHECK(lp.strata[static_cast<std::size_t>(singular_descent(lp, *g, origin))].height == 2);

  RVector bad(3);
  CHECK_THROWS_AS(singular_descent(lp, *g, bad), Error);
}

TEST_CASE("dot export") {
  auto p = local_strata(*sign_flips_c2());
  const auto dot = poset_to_dot(p);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(std::count(dot.begin(), dot.end(), '>') == 4);
}
