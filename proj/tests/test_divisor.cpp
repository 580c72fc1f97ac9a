#include <doctest.h>

#include <cmath>

#include "orbisect/divisor.hpp"

using namespace orbisect;

namespace {

RVector pt(double a, double b) { return (RVector(2) << a, b).finished(); }

SectionExpansion plain(const SectionSpace& sp, Cplx c, Cplx lin = 0.0, Cplx anti = 0.0) {
  SectionExpansion s(sp, SectionMode::Cutoff);
  PlainField f;
  f.active = true;
  f.constant = c;
  f.linear.assign(static_cast<std::size_t>(sp.n), 0.0);
  f.antilinear.assign(static_cast<std::size_t>(sp.n), 0.0);
  f.linear[0] = lin;
  f.antilinear[0] = anti;
  s.set_base(f);
  return s;
}

// Certify at half the measured eta, halving until the certificate holds.
TransversalityCertificate certify(const SectionExpansion& s, const SampleRegion& region, double h) {
  const auto m = measure_eta(s, region, h);
  const auto lb = lipschitz_bounds(s, make_grid(s.space(), region, h).points);
  TransversalityCertificate c;
  for (double eta = 0.5 * m.eta_star; eta > 1e-6; eta *= 0.5) {
    c = certify_eta(s, region, eta, h, lb.L0, lb.L1);
    if (c.status == CertStatus::Certified) break;
  }
  return c;
}

// Peaks on a 4x4 grid of the period cell with golden-ratio phases.
SectionExpansion theta_section(const SectionSpace& sp, bool averaged) {
  SectionExpansion s(sp, SectionMode::Periodized);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double phase = std::fmod((4 * i + j + 1) * 0.6180339887, 1.0);
      const RVector t = pt(0.25 * i + 0.05, 0.25 * j + 0.11);
      s.add_term({sp.torus->from_lattice(t), std::polar(1.0, 2.0 * kPi * phase), averaged});
    }
  return s;
}

}  // namespace

TEST_CASE("zero sets of plain fields") {
  auto sp = chart_space(10, central_z2(1));
  const auto ball = ball_region(RVector::Zero(2), 2.0);

  const auto one = plain(sp, 1.0);
  const auto c1 = certify_eta(one, ball, 0.5, 0.1, 0.0, 0.0);
  REQUIRE(c1.status == CertStatus::Certified);
  CHECK(zero_set(one, c1, 0.1, ball).points.empty());

  const auto z = plain(sp, 0.0, 1.0);
  const auto cz = certify_eta(z, ball, 0.5, 0.1, 1.0, 1.0);
  REQUIRE(cz.status == CertStatus::Certified);
  const auto Z = zero_set(z, cz, 0.1, ball);
  REQUIRE(Z.points.size() == 1);
  CHECK(Z.points[0].x.norm() < 1e-10);
  CHECK(Z.num_components == 1);

  TransversalityCertificate open = cz;
  open.status = CertStatus::Inconclusive;
  try {
    zero_set(z, open, 0.1, ball);
    FAIL("uncertified section accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotCertified);
  }

  // Anti-holomorphic: transverse, but not symplectic at its zero.
  const auto zb = plain(sp, 0.0, 0.0, 1.0);
  const auto Zb = zero_set(zb, certify_eta(zb, ball, 0.5, 0.1, 1.0, 1.0), 0.1, ball);
  REQUIRE(Zb.points.size() == 1);
  const auto rep = verify_symplectic(Zb, zb);
  CHECK(rep.failures == 1);
  CHECK(rep.min_del_minus_dbar == doctest::Approx(-1.0));
  CHECK(verify_symplectic(Z, z).ok());
}

TEST_CASE("zeros of theta sections on T2 match the Chern number") {
  auto T = make_torus_preset("T2_Z2");
  for (int k : {20, 40}) {
    auto sp = torus_space(k, T);
    const auto s = theta_section(sp, true);
    const auto cert = certify(s, whole_region(), 0.1);
    REQUIRE(cert.status == CertStatus::Certified);
    const auto Z = zero_set(s, cert, 0.1);
    CHECK(Z.points.size() == static_cast<std::size_t>(k));
    CHECK(winding_count(s, 0.25).total == k);
    for (const auto& p : Z.points) {
      CHECK(p.abs_value < 1e-10);
      CHECK(p.norm_grad >= cert.eta * (1.0 - 1e-3));
      CHECK(p.norm_dbar < 1e-8);
    }
    CHECK(verify_symplectic(Z, s).ok());
    CHECK(invariance_check(Z, sp) < 1e-6);
  }
}

TEST_CASE("broken equivariance is visible in the zero set") {
  auto T = make_torus_preset("T2_Z2");
  auto sp = torus_space(20, T);
  const auto s = theta_section(sp, false);
  const auto cert = certify(s, whole_region(), 0.1);
  REQUIRE(cert.status == CertStatus::Certified);
  const auto Z = zero_set(s, cert, 0.1);
  CHECK(Z.points.size() == 20);
  CHECK(invariance_check(Z, sp) > 0.1);
}

TEST_CASE("connectivity of point clouds") {
  auto sp = chart_space(10, central_z2(1));
  ZeroSetSample z;
  CHECK(connectivity(z, sp, 0.2) == 0);
  const double step = 0.05 / sp.unit();
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 10; ++i) {
      ZeroPoint p;
      p.x = pt(c * 2.0 + i * step, 0.0);
      z.points.push_back(p);
    }
  CHECK(connectivity(z, sp, 0.2) == 2);

  // Gaps of 1.2 r: separate at r, joined at 1.5 r.
  ZeroSetSample chain;
  for (int i = 0; i < 4; ++i) {
    ZeroPoint p;
    p.x = pt(i * 1.2 * 0.2 / sp.unit(), 0.0);
    chain.points.push_back(p);
  }
  CHECK(components_at(chain, sp, 0.2) == 4);
  try {
    connectivity(chain, sp, 0.2);
    FAIL("unstable count accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ResolutionTooCoarse);
  }
}

TEST_CASE("log-norm Hessians against finite differences") {
  auto T = make_torus_preset("T2_Z2");
  auto sp = torus_space(20, T);
  const auto s = theta_section(sp, true);
  for (const auto& x : {pt(0.05, 0.07), pt(0.21, -0.13), pt(0.4, 0.33)})
    CHECK(hessian_fd_deviation(s, x) < 1e-5);
  // Gradient against central differences of f.
  const RVector x = pt(0.21, -0.13);
  const auto d = log_norm_derivatives(s, x);
  const double h = 1e-6;
  for (int a = 0; a < 2; ++a) {
    RVector e = RVector::Zero(2);
    e(a) = h;
    const double fd = (std::log(std::norm(s.jet(x + e).v)) - std::log(std::norm(s.jet(x - e).v))) / (2 * h * sp.unit());
    CHECK(d.grad(a) == doctest::Approx(fd).epsilon(1e-6));
  }

  auto cp = chart_space(10, central_z2(2));
  SectionExpansion g(cp, SectionMode::Periodized);
  g.add_term({(RVector(4) << 0.1, 0.0, -0.05, 0.2).finished(), 1.0, false});
  CHECK(hessian_fd_deviation(g, (RVector(4) << 0.2, 0.1, 0.0, -0.1).finished()) < 1e-5);
}

TEST_CASE("Morse analysis") {
  SUBCASE("chart Gaussians have one maximum") {
    for (int n : {1, 2}) {
      auto sp = chart_space(10, central_z2(n));
      SectionExpansion s(sp, SectionMode::Periodized);
      s.add_term({RVector::Zero(2 * n), 1.0, false});
      const auto ball = ball_region(RVector::Zero(2 * n), 1.5);
      const auto cert = certify(s, ball, n == 1 ? 0.1 : 0.25);
      REQUIRE(cert.status == CertStatus::Certified);
      const auto r = morse_analysis(s, cert, {}, ball);
      REQUIRE(r.critical_points.size() == 1);
      const auto& c = r.critical_points[0];
      CHECK(c.x.norm() < 1e-8);
      CHECK(c.index == 2 * n);
      // |s|^2 = exp(-d^2/2) in g_k units, so the Hessian is -I.
      for (Eigen::Index i = 0; i < c.eigenvalues.size(); ++i) CHECK(c.eigenvalues(i) == doctest::Approx(-1.0));
      CHECK(r.index_violations == 0);
    }
  }
  SUBCASE("constant section is degenerate") {
    auto sp = chart_space(10, central_z2(1));
    const auto one = plain(sp, 1.0);
    const auto ball = ball_region(RVector::Zero(2), 1.0);
    const auto r = morse_analysis(one, certify_eta(one, ball, 0.5, 0.1, 0.0, 0.0), {}, ball);
    CHECK(r.degenerate > 0);
    CHECK(r.degenerate == r.critical_points.size());
  }
  SUBCASE("theta section on T2/Z2") {
    auto T = make_torus_preset("T2_Z2");
    auto sp = torus_space(20, T);
    const auto s = theta_section(sp, true);
    const auto cert = certify(s, whole_region(), 0.1);
    const auto r = morse_analysis(s, cert);
    CHECK(!r.none_found);
    CHECK(r.index_violations == 0);
    CHECK(r.max_hessian_fd_deviation < 1e-5);
    for (const auto& c : r.critical_points) {
      CHECK(c.grad_norm < 1e-8);
      CHECK(std::abs(s.jet(c.x).v) >= r.c_plus * r.tube_radius);
    }
  }
}
