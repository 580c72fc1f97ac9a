#include <doctest.h>

#include <set>

#include "orbisect/geometry.hpp"
#include "orbisect/group_rep.hpp"

using namespace orbisect;

namespace {

CMatrix diag2(Cplx a, Cplx b) {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

// Oracle: powers of a matrix until the identity reappears.
int power_order(const CMatrix& g) {
  CMatrix p = g;
  int n = 1;
  while ((p - CMatrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() > 1e-9) {
    p = p * g;
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("build_group closes small generating sets") {
  CMatrix m(1, 1);
  m(0, 0) = -1.0;
  auto z2 = build_group(1, {m});
  CHECK(z2.order() == 2);
  CHECK(build_group(1, {}).order() == 1);

  const CMatrix g = diag2(Cplx(0, 1), Cplx(0, 1));
  auto z4 = build_group(2, {g});
  CHECK(z4.order() == power_order(g));
  CHECK(z4.order() == 4);
  for (int a = 0; a < z4.order(); ++a)
    for (int b = 0; b < z4.order(); ++b)
      CHECK((z4.element(z4.multiply(a, b)) - z4.element(a) * z4.element(b)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("build_group rejects bad input") {
  CMatrix m(1, 1);
  m(0, 0) = 2.0;
  CHECK_THROWS_AS(build_group(1, {m}), Error);
  try {
    build_group(1, {m});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonUnitaryGenerator);
  }
  CMatrix irr(1, 1);
  irr(0, 0) = std::polar(1.0, 1.0);  // infinite order
  try {
    build_group(1, {irr}, 500);
    FAIL("expected cap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GroupSizeCapExceeded);
  }
}

TEST_CASE("fixed subspaces") {
  auto z2 = *central_z2(1);
  CHECK(fixed_subspace(z2, {z2.identity_index()}).rank() == 1);
  CHECK(fixed_subspace(z2, z2.all_indices()).rank() == 0);

  auto h = build_group(2, {diag2(-1.0, 1.0)});
  auto v = fixed_subspace(h, h.all_indices());
  REQUIRE(v.rank() == 1);
  CVector e2(2);
  e2 << 0.0, 1.0;
  CHECK(v.contains(e2));
  CHECK_THROWS_AS(fixed_subspace(*sign_flips_c2(), {0, 1, 2}), Error);
}

TEST_CASE("singular set of sign flips") {
  auto g = *sign_flips_c2();
  auto sing = singular_set(g);
  CHECK(sing.size() == 3);
  std::multiset<int> ranks;
  for (const auto& s : sing) ranks.insert(s.rank());
  CHECK(ranks == std::multiset<int>{0, 1, 1});
  CHECK(singular_set(build_group(1, {})).empty());
  CHECK(singular_set(*central_z2(1)).size() == 1);
}

TEST_CASE("subgroup enumeration") {
  CHECK(all_subgroups(*cyclic_u1(2)).size() == 2);
  auto z4 = all_subgroups(*cyclic_u1(4));
  REQUIRE(z4.size() == 3);
  for (const auto& s : z4) CHECK(s.normalizer.size() == 4);
  auto k4 = all_subgroups(*sign_flips_c2());
  CHECK(k4.size() == 5);
  for (const auto& s : k4) CHECK(s.conjugates.size() == 1);
  // Z/6 has one subgroup per divisor of 6.
  CHECK(all_subgroups(*cyclic_u1(6)).size() == 4);
}

TEST_CASE("cyclic cover covers the group") {
  for (const auto& g : {*cyclic_u1(4), *sign_flips_c2(), build_group(1, {}), *cyclic_u1(6)}) {
    auto cover = cyclic_cover(g);
    std::set<int> u;
    for (const auto& c : cover) u.insert(c.begin(), c.end());
    CHECK(static_cast<int>(u.size()) == g.order());
  }
  CHECK(cyclic_cover(*cyclic_u1(4)).size() == 1);
  CHECK(cyclic_cover(*sign_flips_c2()).size() == 3);
}

TEST_CASE("conjugate fixed spaces transform covariantly") {
  // Non-abelian: permutation of coordinates with sign flips (dihedral of order 8).
  CMatrix swap = CMatrix::Zero(2, 2);
  swap(0, 1) = 1.0;
  swap(1, 0) = 1.0;
  auto d4 = build_group(2, {swap, diag2(-1.0, 1.0)});
  REQUIRE(d4.order() == 8);
  for (const auto& info : all_subgroups(d4)) {
    const auto v = fixed_subspace(d4, info.elements);
    for (int g = 0; g < d4.order(); ++g) {
      const auto w = fixed_subspace(d4, d4.conjugate(info.elements, g));
      CHECK(w.same_as(v.transformed(d4.element(g))));
    }
    for (int h : info.elements)
      for (int c = 0; c < v.rank(); ++c)
        CHECK((d4.element(h) * v.basis.col(c) - v.basis.col(c)).norm() <= 1e-8);
  }
}
