#include "orbisect/divisor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lattice_index.hpp"

namespace orbisect {
namespace {

constexpr const char* kModule = "divisor";

// Derivatives of the gauge representative (plain, not covariant) in chart coordinates.
void plain_derivatives(const Jet& J, const RVector& x, int k, std::vector<Cplx>& dz, std::vector<Cplx>& dzb) {
  dz.resize(static_cast<std::size_t>(J.n));
  dzb.resize(static_cast<std::size_t>(J.n));
  for (int j = 0; j < J.n; ++j) {
    const std::size_t u = static_cast<std::size_t>(j);
    const Cplx zj(x(2 * j), x(2 * j + 1));
    dz[u] = J.a[u] + 0.5 * kPi * k * std::conj(zj) * J.v;
    dzb[u] = J.b[u] - 0.5 * kPi * k * zj * J.v;
  }
}

// Real 2 x 2n Jacobian of (Re s, Im s) in chart coordinates.
RMatrix real_jacobian(const SectionExpansion& s, const RVector& x, Cplx* value = nullptr) {
  const Jet J = s.jet(x);
  std::vector<Cplx> dz, dzb;
  plain_derivatives(J, x, s.space().k, dz, dzb);
  RMatrix out(2, 2 * J.n);
  for (int j = 0; j < J.n; ++j) {
    const std::size_t u = static_cast<std::size_t>(j);
    const Cplx sx = dz[u] + dzb[u], sy = Cplx(0, 1) * (dz[u] - dzb[u]);
    out(0, 2 * j) = sx.real();
    out(1, 2 * j) = sx.imag();
    out(0, 2 * j + 1) = sy.real();
    out(1, 2 * j + 1) = sy.imag();
  }
  if (value) *value = J.v;
  return out;
}

double tangent_symplectic(const RMatrix& jac) {
  const int d = static_cast<int>(jac.cols());
  if (d <= 2) return 1.0;
  Eigen::JacobiSVD<RMatrix> svd(jac, Eigen::ComputeFullV);
  const RMatrix K = svd.matrixV().rightCols(d - 2);
  RMatrix omega = RMatrix::Zero(d, d);
  for (int j = 0; j < d / 2; ++j) {
    omega(2 * j, 2 * j + 1) = 1.0;
    omega(2 * j + 1, 2 * j) = -1.0;
  }
  const RMatrix M = K.transpose() * omega * K;
  Eigen::JacobiSVD<RMatrix> m(M);
  return m.singularValues().minCoeff();
}

RVector reduce_point(const SectionSpace& sp, const RVector& x) { return sp.torus ? sp.torus->reduce(x) : x; }

// Frame for the point index: model coordinates, g_k unit, torus wrap.
SeparatedLattice index_frame(const SectionSpace& sp) {
  SeparatedLattice l;
  l.real_dim = 2 * sp.n;
  l.unit = sp.unit();
  l.torus = sp.torus;
  return l;
}

bool in_region(const SectionSpace& sp, const SampleRegion& region, const RVector& x) {
  if (region.whole) return sp.torus || sp.chart_radius <= 0.0 || x.norm() <= sp.chart_radius;
  return (x - region.center).norm() * sp.unit() <= region.radius;
}

}  // namespace

ZeroSetSample zero_set(const SectionExpansion& s, const TransversalityCertificate& cert, double resolution,
                       const SampleRegion& region) {
  if (cert.status != CertStatus::Certified)
    throw Error(ErrorCode::NotCertified, kModule, "zero set extraction needs a certified section");
  if (!(resolution > 0.0)) throw Error(ErrorCode::ConfigInvalid, kModule, "resolution must be positive");
  const SectionSpace& sp = s.space();
  const double unit = sp.unit();
  ZeroSetSample out;
  out.n = sp.n;
  out.resolution = resolution;
  const SampleGrid g = make_grid(sp, region, resolution);
  const double step_cap = 1.0 + 2.0 * g.cell_radius;

  const SeparatedLattice frame = index_frame(sp);
  detail::CellIndex index(frame, 0.05);
  for (const auto& x0 : g.points) {
    const SectionSample e = evaluate(s, x0);
    if (!(e.abs_value < cert.eta || e.abs_value <= cert.lipschitz_s * g.cell_radius)) continue;
    ++out.seeds;
    RVector x = x0;
    bool converged = false;
    for (int it = 0; it < 40; ++it) {
      Cplx v;
      const RMatrix J = real_jacobian(s, x, &v);
      if (std::abs(v) < 1e-11) {
        converged = true;
        break;
      }
      const Eigen::Matrix2d JJt = J * J.transpose();
      if (std::abs(JJt.determinant()) < 1e-300) break;
      const Eigen::Vector2d F(v.real(), v.imag());
      x -= J.transpose() * JJt.inverse() * F;
      if ((x - x0).norm() * unit > step_cap) break;
    }
    if (!converged) {
      ++out.diverged;
      continue;
    }
    x = reduce_point(sp, x);
    if (!in_region(sp, region, x)) continue;
    bool dup = false;
    index.query(x, 0, 0.05, [&](int, double) { return dup = true; });
    if (dup) continue;
    const SectionSample z = evaluate(s, x);
    ZeroPoint p;
    p.x = x;
    p.abs_value = z.abs_value;
    p.norm_grad = z.norm_grad;
    p.norm_del = z.norm_del;
    p.norm_dbar = z.norm_dbar;
    p.tangent_symplectic_min = tangent_symplectic(real_jacobian(s, x));
    index.insert(x, 0, static_cast<int>(out.points.size()));
    out.points.push_back(std::move(p));
  }
  out.linking_radius = 2.0 * resolution;
  out.num_components = components_at(out, sp, out.linking_radius, &out.component);
  return out;
}

int components_at(const ZeroSetSample& z, const SectionSpace& space, double linking_radius, std::vector<int>* labels) {
  const std::size_t N = z.points.size();
  std::vector<int> parent(N);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a)
      a = parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    return a;
  };
  const SeparatedLattice frame = index_frame(space);
  detail::CellIndex index(frame, linking_radius);
  for (std::size_t i = 0; i < N; ++i) index.insert(z.points[i].x, 0, static_cast<int>(i));
  for (std::size_t i = 0; i < N; ++i)
    index.query(z.points[i].x, 0, linking_radius, [&](int j, double) {
      const int a = find(static_cast<int>(i)), b = find(j);
      if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
      return false;
    });
  // Labels in order of first appearance.
  std::vector<int> label(N, -1), root_label(N, -1);
  int count = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t r = static_cast<std::size_t>(find(static_cast<int>(i)));
    if (root_label[r] < 0) root_label[r] = count++;
    label[i] = root_label[r];
  }
  if (labels) *labels = std::move(label);
  return count;
}

int connectivity(const ZeroSetSample& z, const SectionSpace& space, double linking_radius) {
  if (z.points.empty()) return 0;
  const int a = components_at(z, space, linking_radius);
  const int b = components_at(z, space, 1.5 * linking_radius);
  if (a != b)
    throw Error(ErrorCode::ResolutionTooCoarse, kModule,
                std::to_string(a) + " components at radius " + std::to_string(linking_radius) + " but " +
                    std::to_string(b) + " at 1.5x");
  return a;
}

WindingCount winding_count(const SectionExpansion& s, double spacing, int substeps) {
  const SectionSpace& sp = s.space();
  if (!sp.torus || sp.n != 1) throw Error(ErrorCode::DimensionMismatch, kModule, "winding count is for T^2");
  const TorusQuotient& q = *sp.torus;
  const int N1 = std::max(1, static_cast<int>(std::ceil(q.basis().col(0).norm() * sp.unit() / spacing)));
  const int N2 = std::max(1, static_cast<int>(std::ceil(q.basis().col(1).norm() * sp.unit() / spacing)));
  const int S = std::max(1, substeps);
  // Shifted off the half-periods, where equivariant sections often vanish.
  const double o1 = 0.31 / N1, o2 = 0.17 / N2;
  auto value = [&](double t1, double t2) {
    RVector t(2);
    t << o1 + t1, o2 + t2;
    return s.jet(q.from_lattice(t)).v;
  };
  auto turn = [](Cplx from, Cplx to) { return std::arg(to / from); };
  // horiz[j][i]: values along the line t2 = j/N2; vert[i][j]: along t1 = i/N1.
  std::vector<std::vector<Cplx>> horiz(static_cast<std::size_t>(N2 + 1)), vert(static_cast<std::size_t>(N1 + 1));
  for (int j = 0; j <= N2; ++j)
    for (int i = 0; i <= N1 * S; ++i)
      horiz[static_cast<std::size_t>(j)].push_back(value(static_cast<double>(i) / (N1 * S), static_cast<double>(j) / N2));
  for (int i = 0; i <= N1; ++i)
    for (int j = 0; j <= N2 * S; ++j)
      vert[static_cast<std::size_t>(i)].push_back(value(static_cast<double>(i) / N1, static_cast<double>(j) / (N2 * S)));
  WindingCount w;
  for (int i = 0; i < N1; ++i)
    for (int j = 0; j < N2; ++j) {
      double total = 0.0;
      const auto& bottom = horiz[static_cast<std::size_t>(j)];
      const auto& top = horiz[static_cast<std::size_t>(j + 1)];
      const auto& left = vert[static_cast<std::size_t>(i)];
      const auto& right = vert[static_cast<std::size_t>(i + 1)];
      for (int a = 0; a < S; ++a) {
        const std::size_t u = static_cast<std::size_t>(i * S + a), v = static_cast<std::size_t>(j * S + a);
        total += turn(bottom[u], bottom[u + 1]);
        total += turn(right[v], right[v + 1]);
        total -= turn(top[u], top[u + 1]);
        total -= turn(left[v], left[v + 1]);
      }
      const long c = std::lround(total / (2.0 * kPi));
      ++w.cells;
      if (c != 0) ++w.nonzero_cells;
      w.total += c;
    }
  return w;
}

SymplecticReport verify_symplectic(const ZeroSetSample& z, const SectionExpansion& s) {
  SymplecticReport r;
  r.min_del_minus_dbar = std::numeric_limits<double>::infinity();
  r.min_tangent_symplectic = std::numeric_limits<double>::infinity();
  for (const auto& p : z.points) {
    const SectionSample e = evaluate(s, p.x);
    const double gap = e.norm_del - e.norm_dbar;
    const double tan = tangent_symplectic(real_jacobian(s, p.x));
    ++r.checked;
    if (!(gap > 0.0) || (z.n >= 2 && !(tan > 1e-6))) ++r.failures;
    r.min_del_minus_dbar = std::min(r.min_del_minus_dbar, gap);
    r.min_tangent_symplectic = std::min(r.min_tangent_symplectic, tan);
  }
  if (r.checked == 0) r.min_del_minus_dbar = r.min_tangent_symplectic = 0.0;
  return r;
}

double invariance_check(const ZeroSetSample& z, const SectionSpace& space, double cap) {
  const SeparatedLattice frame = index_frame(space);
  detail::CellIndex index(frame, 0.25);
  for (std::size_t i = 0; i < z.points.size(); ++i) index.insert(z.points[i].x, 0, static_cast<int>(i));
  double worst = 0.0;
  for (const auto& p : z.points)
    for (int g = 0; g < space.group_order(); ++g) {
      const RVector y = reduce_point(space, space.group_real(g) * p.x);
      double best = cap;
      // Widen the search only when nothing is close.
      for (double r = 0.25; best >= cap && r < 4.0 * cap; r *= 4.0)
        index.query(y, 0, std::min(r, cap), [&](int, double d) {
          best = std::min(best, d);
          return false;
        });
      worst = std::max(worst, best);
    }
  return worst;
}

LogNormDerivatives log_norm_derivatives(const SectionExpansion& s, const RVector& x) {
  const Jet J = s.jet(x);
  const int n = J.n;
  const double P = std::norm(J.v);
  if (!(P > 0.0)) throw Error(ErrorCode::DegenerateHessian, kModule, "log|s|^2 undefined at a zero");
  const Cplx sb = std::conj(J.v);
  // P_j = d_j |s|^2, Pzz(i,j) = d_i d_j |s|^2, Pbz(i,j) = dbar_i d_j |s|^2.
  std::vector<Cplx> Pj(static_cast<std::size_t>(n));
  CMatrix Pzz(n, n), Pbz(n, n);
  for (int j = 0; j < n; ++j) {
    const std::size_t u = static_cast<std::size_t>(j);
    Pj[u] = J.a[u] * sb + J.v * std::conj(J.b[u]);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::size_t a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
      Pzz(i, j) = J.aa[b][a] * sb + J.a[a] * std::conj(J.b[b]) + J.a[b] * std::conj(J.b[a]) + J.v * std::conj(J.bb[b][a]);
      Pbz(i, j) = J.ab[a][b] * sb + J.a[b] * std::conj(J.a[a]) + J.b[a] * std::conj(J.b[b]) + J.v * std::conj(J.ba[a][b]);
    }
  const double unit = s.space().unit();
  LogNormDerivatives out;
  out.f = std::log(P);
  out.grad = RVector(2 * n);
  out.hessian = RMatrix(2 * n, 2 * n);
  for (int j = 0; j < n; ++j) {
    const Cplx Fj = Pj[static_cast<std::size_t>(j)] / P;
    out.grad(2 * j) = 2.0 * Fj.real() / unit;
    out.grad(2 * j + 1) = -2.0 * Fj.imag() / unit;
  }
  const double u2 = unit * unit;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Cplx Pi = Pj[static_cast<std::size_t>(i)], Pjj = Pj[static_cast<std::size_t>(j)];
      const Cplx Fzz = Pzz(i, j) / P - Pi * Pjj / (P * P);
      const Cplx Fbz = Pbz(i, j) / P - std::conj(Pi) * Pjj / (P * P);
      out.hessian(2 * i, 2 * j) = (2.0 * Fzz.real() + 2.0 * Fbz.real()) / u2;
      out.hessian(2 * i, 2 * j + 1) = (-2.0 * Fzz.imag() - 2.0 * Fbz.imag()) / u2;
      out.hessian(2 * i + 1, 2 * j + 1) = (-2.0 * Fzz.real() + 2.0 * Fbz.real()) / u2;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.hessian(2 * i + 1, 2 * j) = out.hessian(2 * j, 2 * i + 1);
  return out;
}

double hessian_fd_deviation(const SectionExpansion& s, const RVector& x, double step_gk) {
  const LogNormDerivatives d = log_norm_derivatives(s, x);
  const double h = step_gk / s.space().unit();
  auto f = [&](const RVector& y) { return std::log(std::norm(s.jet(y).v)); };
  const int dim = static_cast<int>(x.size());
  RMatrix fd(dim, dim);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) {
      RVector ea = RVector::Zero(dim), eb = RVector::Zero(dim);
      ea(a) = h;
      eb(b) = h;
      fd(a, b) = (f(x + ea + eb) - f(x + ea - eb) - f(x - ea + eb) + f(x - ea - eb)) / (4.0 * step_gk * step_gk);
    }
  const double scale = std::max(d.hessian.cwiseAbs().maxCoeff(), 1e-300);
  return (fd - d.hessian).cwiseAbs().maxCoeff() / scale;
}

MorseReport morse_analysis(const SectionExpansion& s, const TransversalityCertificate& cert, const MorseOptions& opt,
                           const SampleRegion& region) {
  if (cert.status != CertStatus::Certified)
    throw Error(ErrorCode::NotCertified, kModule, "Morse analysis needs a certified section");
  const SectionSpace& sp = s.space();
  const double unit = sp.unit();
  MorseReport r;
  r.n = sp.n;
  r.c_plus = cert.lipschitz_s;
  r.tube_radius = opt.tube_radius > 0.0 ? opt.tube_radius : (r.c_plus > 0.0 ? 0.5 * cert.eta / r.c_plus : 0.0);
  const double tube_value = r.c_plus * r.tube_radius;
  const double spacing = opt.seed_spacing > 0.0 ? opt.seed_spacing : (sp.n == 1 ? 0.25 : 0.5);
  const SampleGrid g = make_grid(sp, region, spacing);

  for (const auto& x0 : g.points) {
    if (std::abs(s.jet(x0).v) < tube_value) continue;
    ++r.seeds;
    RVector x = x0;
    bool converged = false;
    LogNormDerivatives d;
    for (int it = 0; it < opt.max_iterations; ++it) {
      if (std::abs(s.jet(x).v) < tube_value) break;
      d = log_norm_derivatives(s, x);
      if (d.grad.norm() < 1e-8) {
        converged = true;
        break;
      }
      // Newton on the gradient with the step held to half a g_k unit.
      Eigen::SelfAdjointEigenSolver<RMatrix> es(d.hessian);
      const RVector ev = es.eigenvalues();
      RVector coef = es.eigenvectors().transpose() * d.grad;
      for (Eigen::Index i = 0; i < coef.size(); ++i)
        coef(i) = std::abs(ev(i)) > 1e-12 ? -coef(i) / ev(i) : 0.0;
      RVector step = es.eigenvectors() * coef;
      if (step.norm() > 0.5) step *= 0.5 / step.norm();
      x += step / unit;
    }
    if (!converged) continue;
    x = reduce_point(sp, x);
    if (!in_region(sp, region, x)) continue;
    bool dup = false;
    for (const auto& c : r.critical_points)
      if (sp.distance(c.x, x) < 0.05) dup = true;
    if (dup) continue;
    CriticalPoint c;
    c.x = x;
    d = log_norm_derivatives(s, x);
    c.f = d.f;
    c.grad_norm = d.grad.norm();
    c.hessian = d.hessian;
    Eigen::SelfAdjointEigenSolver<RMatrix> es(d.hessian, Eigen::EigenvaluesOnly);
    c.eigenvalues = es.eigenvalues();
    c.index = static_cast<int>((c.eigenvalues.array() < 0.0).count());
    c.degenerate = c.eigenvalues.cwiseAbs().minCoeff() < 1e-8;
    if (c.degenerate) ++r.degenerate;
    else if (c.index < sp.n) ++r.index_violations;
    r.max_hessian_fd_deviation = std::max(r.max_hessian_fd_deviation, hessian_fd_deviation(s, x));
    r.critical_points.push_back(std::move(c));
  }
  r.none_found = r.critical_points.empty();
  return r;
}

std::string zero_set_csv(const ZeroSetSample& z) {
  std::ostringstream os;
  os.precision(15);
  for (int i = 0; i < 2 * z.n; ++i) os << 'x' << i << ',';
  os << "abs_value,norm_grad,norm_del,norm_dbar,tangent_symplectic_min,component\n";
  for (std::size_t i = 0; i < z.points.size(); ++i) {
    const auto& p = z.points[i];
    for (Eigen::Index j = 0; j < p.x.size(); ++j) os << p.x(j) << ',';
    os << p.abs_value << ',' << p.norm_grad << ',' << p.norm_del << ',' << p.norm_dbar << ','
       << p.tangent_symplectic_min << ',' << (i < z.component.size() ? z.component[i] : -1) << '\n';
  }
  return os.str();
}

}  // namespace orbisect
