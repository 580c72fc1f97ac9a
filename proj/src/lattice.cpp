#include "orbisect/lattice.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>

#include "lattice_index.hpp"

namespace orbisect {
namespace {

constexpr const char* kModule = "lattice";

int ceil_d(double D) { return std::max(1, static_cast<int>(std::ceil(D - 1e-12))); }

int pos_mod(long long a, int m) { return static_cast<int>(((a % m) + m) % m); }

RMatrix rotation(double angle) {
  RMatrix r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

// Embed a projector on the block [offset, offset + p.rows()) of R^dim.
RMatrix embed(const RMatrix& p, int offset, int dim) {
  RMatrix out = RMatrix::Zero(dim, dim);
  out.block(offset, offset, p.rows(), p.cols()) = p;
  return out;
}

ExclusionAtom everything() { return ExclusionAtom{}; }

// Neighborhood of radius r of a complex subspace W: ||P_{W-perp} x|| <= r.
ExclusionAtom neighborhood(const ComplexSubspace& w, double r) {
  const int n = w.ambient_dim;
  CMatrix perp = CMatrix::Identity(n, n) - w.projector();
  return ExclusionAtom{{realify(perp)}, {r}};
}

// ||P x||^2 without temporaries.
double projected_sq(const RMatrix& P, const RVector& x) {
  double s = 0.0;
  for (Eigen::Index a = 0; a < P.rows(); ++a) {
    double v = 0.0;
    for (Eigen::Index b = 0; b < P.cols(); ++b) v += P(a, b) * x(b);
    s += v * v;
  }
  return s;
}

bool in_any(const std::vector<ExclusionAtom>& atoms, const RVector& x, double grow = 0.0) {
  for (const auto& a : atoms)
    if (a.contains(x, grow)) return true;
  return false;
}

SeparatedLattice empty_like(int real_dim) {
  SeparatedLattice l;
  l.real_dim = real_dim;
  return l;
}

// All pairs (a, b) with |(a, b)| <= radius and family f_a * n_b + f_b, kept when `keep` accepts.
template <class Keep>
void append_cartesian(const SeparatedLattice& a, const SeparatedLattice& b, int family_offset, double radius,
                      Keep&& keep, SeparatedLattice& out) {
  const int d = a.real_dim + b.real_dim;
  std::vector<std::size_t> by_norm(b.size());
  std::iota(by_norm.begin(), by_norm.end(), std::size_t{0});
  std::stable_sort(by_norm.begin(), by_norm.end(), [&](std::size_t u, std::size_t v) {
    return b.points[u].squaredNorm() < b.points[v].squaredNorm();
  });
  const double r2 = radius * radius * (1.0 + 1e-12);
  RVector x(d);
  for (std::size_t i = 0; i < a.size(); ++i) {
    x.head(a.real_dim) = a.points[i];
    const double na = a.points[i].squaredNorm();
    for (std::size_t j : by_norm) {
      if (na + b.points[j].squaredNorm() > r2) break;
      x.tail(b.real_dim) = b.points[j];
      if (!keep(x)) continue;
      out.points.push_back(x);
      out.family.push_back(family_offset + a.family[i] * b.num_families + b.family[j]);
    }
  }
}

std::vector<ExclusionAtom> product_atoms(const SeparatedLattice& a, const SeparatedLattice& b) {
  const int d = a.real_dim + b.real_dim;
  std::vector<ExclusionAtom> out;
  for (const auto& ea : a.region.excluded)
    for (const auto& eb : b.region.excluded) {
      ExclusionAtom e;
      for (std::size_t i = 0; i < ea.projectors.size(); ++i) {
        e.projectors.push_back(embed(ea.projectors[i], 0, d));
        e.radii.push_back(ea.radii[i]);
      }
      for (std::size_t i = 0; i < eb.projectors.size(); ++i) {
        e.projectors.push_back(embed(eb.projectors[i], a.real_dim, d));
        e.radii.push_back(eb.radii[i]);
      }
      out.push_back(std::move(e));
    }
  return out;
}

// Renumber used families densely, preserving their order.
void compact_families(SeparatedLattice& l) {
  std::map<int, int> remap;
  for (int f : l.family) remap.emplace(f, 0);
  int next = 0;
  for (auto& [k, v] : remap) v = next++;
  for (int& f : l.family) f = remap[f];
  l.num_families = next;
}

template <class Keep>
SeparatedLattice product_filtered(const SeparatedLattice& l1, const SeparatedLattice& l2, const SeparatedLattice& b1,
                                  const SeparatedLattice& b2, double radius, Keep&& keep) {
  if (l1.real_dim != b1.real_dim || l2.real_dim != b2.real_dim)
    throw Error(ErrorCode::DimensionMismatch, kModule, "boundary lattice dimension differs from its factor");
  if (std::abs(l1.unit - l2.unit) > 1e-12)
    throw Error(ErrorCode::DimensionMismatch, kModule, "factors use different metric units");
  SeparatedLattice out = empty_like(l1.real_dim + l2.real_dim);
  out.unit = l1.unit;
  const int n12 = l1.num_families * l2.num_families;
  const int ns2 = b1.num_families * l2.num_families;
  append_cartesian(l1, l2, 0, radius, keep, out);
  append_cartesian(b1, l2, n12, radius, keep, out);
  append_cartesian(l1, b2, n12 + ns2, radius, keep, out);
  compact_families(out);

  const auto& p1 = l1.params;
  const auto& p2 = l2.params;
  out.params.C = std::max(p1.C, p2.C);
  out.params.D = std::min(p1.D, p2.D);
  out.params.m = p1.m + p2.m;
  out.params.R = std::max(p1.R, p2.R);
  out.params.exclusion_radius = std::max(p1.exclusion_radius, p2.exclusion_radius);
  out.params.separation = std::min(p1.separation, p2.separation);
  out.params.family_constant = 3.0 * std::max(p1.family_constant, b1.params.family_constant) *
                               std::max(p2.family_constant, b2.params.family_constant);
  out.params.distribution_constant = std::pow(3.0, out.real_dim);
  out.region.kind = RegionKind::ChartBall;
  out.region.radius = std::min(l1.region.radius, l2.region.radius);
  out.region.excluded = product_atoms(l1, l2);
  out.region.description = "product";
  return out;
}

}  // namespace

bool ExclusionAtom::contains(const RVector& x, double grow) const {
  for (std::size_t i = 0; i < projectors.size(); ++i) {
    const double r = radii[i] + grow;
    if (r < 0 || projected_sq(projectors[i], x) > r * r) return false;
  }
  return true;
}

std::vector<std::vector<int>> SeparatedLattice::families() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(num_families));
  for (std::size_t i = 0; i < size(); ++i) out[static_cast<std::size_t>(family[i])].push_back(static_cast<int>(i));
  return out;
}

double SeparatedLattice::distance(const RVector& a, const RVector& b) const {
  return unit * (torus ? torus->torus_distance(a, b) : (a - b).norm());
}

bool SeparatedLattice::in_region(const RVector& x, double margin) const {
  const double m = margin / unit;
  switch (region.kind) {
    case RegionKind::Point:
      return distance(x, points.empty() ? x : points.front()) <= margin;
    case RegionKind::Torus:
      for (const auto& s : region.removed_strata)
        if (distance_to_stratum(*torus, s, x) * unit <= params.exclusion_radius + margin) return false;
      return true;
    case RegionKind::Plain:
      if (region.ball) {
        if ((x - region.lo).norm() > region.radius - m) return false;
      } else {
        for (Eigen::Index i = 0; i < x.size(); ++i)
          if (x(i) < region.lo(i) + m || x(i) > region.hi(i) - m) return false;
      }
      return !in_any(region.excluded, x, m);
    case RegionKind::ChartBall:
      if (x.norm() > region.radius - m) return false;
      return !in_any(region.excluded, x, m);
  }
  return false;
}

double lattice_1d_constant(int k) {
  if (k <= 1) return 1.0;
  const double a = 1.0 / std::abs(std::polar(1.0, kPi / k) - 1.0);
  const double b = 1.0 / std::abs(std::polar(1.0, 2.0 * kPi / k) - 1.0);
  return std::max({a, b, 2.0 * k});
}

SeparatedLattice lattice_1d(int k, double D, double radius) {
  if (k < 1 || D < 1.0) throw Error(ErrorCode::ConfigInvalid, kModule, "need cyclic order >= 1 and D >= 1");
  const double C = lattice_1d_constant(k);
  const double excl = k == 1 ? 0.0 : C * D;
  if (k > 1 && radius <= excl)
    throw Error(ErrorCode::DegenerateRadius, kModule, "radius must exceed C*D = " + std::to_string(excl));
  const int d = ceil_d(D);
  const int sectors = k == 1 ? 1 : 2 * k;
  SeparatedLattice l = empty_like(2);
  const int r = static_cast<int>(std::floor(radius));
  for (int a = -r; a <= r; ++a)
    for (int b = -r; b <= r; ++b) {
      const double rho = std::hypot(a, b);
      if (rho > radius || (k > 1 && rho <= excl)) continue;
      int sector = 0;
      if (k > 1) {
        double ang = std::atan2(static_cast<double>(b), static_cast<double>(a));
        if (ang < 0) ang += 2.0 * kPi;
        sector = std::min(sectors - 1, static_cast<int>(std::floor(ang / (kPi / k))));
      }
      RVector p(2);
      p << a, b;
      l.points.push_back(p);
      l.family.push_back((pos_mod(a, d) * d + pos_mod(b, d)) * sectors + sector);
    }
  l.num_families = d * d * sectors;
  const double fill = static_cast<double>(d) * d / (D * D);
  l.params = {C, D, 2, 1.0, excl, D, (k == 1 ? 1.0 : C) * fill, 9.0};
  l.region.kind = RegionKind::ChartBall;
  l.region.radius = radius;
  if (k > 1) l.region.excluded.push_back(ExclusionAtom{{RMatrix::Identity(2, 2)}, {excl}});
  l.region.description = "annulus";
  for (int j = 0; j < k; ++j) l.actions.push_back(rotation(2.0 * kPi * j / k));
  return l;
}

SeparatedLattice lattice_product(const SeparatedLattice& l1, const SeparatedLattice& l2,
                                 const SeparatedLattice& b1, const SeparatedLattice& b2) {
  const double inf = std::numeric_limits<double>::infinity();
  SeparatedLattice out = product_filtered(l1, l2, b1, b2, inf, [](const RVector&) { return true; });
  out.region.radius = std::min(l1.region.radius, l2.region.radius);
  // Pair group elements index-wise; a factor without a group acts trivially.
  const auto& a1 = l1.actions;
  const auto& a2 = l2.actions;
  const std::size_t n = std::max(a1.size(), a2.size());
  if (!a1.empty() && !a2.empty() && a1.size() != a2.size())
    throw Error(ErrorCode::DimensionMismatch, kModule, "factor groups have different orders");
  for (std::size_t i = 0; i < n; ++i) {
    RMatrix g = RMatrix::Zero(out.real_dim, out.real_dim);
    g.topLeftCorner(l1.real_dim, l1.real_dim) =
        a1.empty() ? RMatrix(RMatrix::Identity(l1.real_dim, l1.real_dim)) : a1[i];
    g.bottomRightCorner(l2.real_dim, l2.real_dim) =
        a2.empty() ? RMatrix(RMatrix::Identity(l2.real_dim, l2.real_dim)) : a2[i];
    out.actions.push_back(std::move(g));
  }
  return out;
}

SeparatedLattice plain_box_lattice(const RVector& lo, const RVector& hi, double D) {
  const int dim = static_cast<int>(lo.size());
  SeparatedLattice l = empty_like(dim);
  const int d = ceil_d(D);
  l.num_families = static_cast<int>(std::pow(d, dim));
  bool empty = false;
  Eigen::VectorXi a(dim), b(dim);
  for (int i = 0; i < dim; ++i) {
    a(i) = static_cast<int>(std::ceil(lo(i) - 1e-12));
    b(i) = static_cast<int>(std::floor(hi(i) + 1e-12));
    if (a(i) > b(i)) empty = true;
  }
  if (!empty) {
    Eigen::VectorXi cur = a;
    while (true) {
      int fam = 0;
      for (int i = 0; i < dim; ++i) fam = fam * d + pos_mod(cur(i), d);
      l.points.push_back(cur.cast<double>());
      l.family.push_back(fam);
      int j = 0;
      while (j < dim && cur(j) == b(j)) cur(j) = a(j), ++j;
      if (j == dim) break;
      ++cur(j);
    }
  }
  const double fill = std::pow(static_cast<double>(d) / D, dim);
  l.params = {1.0, D, dim, std::max(1.0, std::sqrt(static_cast<double>(dim)) / 2.0), 0.0, D, fill,
              std::pow(3.0, dim)};
  l.region.kind = RegionKind::Plain;
  l.region.lo = lo;
  l.region.hi = hi;
  l.region.description = "box";
  return l;
}

SeparatedLattice plain_ball_lattice(const RVector& center, double radius, double D) {
  const RVector r = RVector::Constant(center.size(), radius);
  SeparatedLattice box = plain_box_lattice(center - r, center + r, D);
  SeparatedLattice l = empty_like(box.real_dim);
  l.num_families = box.num_families;
  for (std::size_t i = 0; i < box.size(); ++i)
    if ((box.points[i] - center).norm() <= radius + 1e-12) {
      l.points.push_back(box.points[i]);
      l.family.push_back(box.family[i]);
    }
  l.params = box.params;
  l.region = box.region;
  l.region.ball = true;
  l.region.lo = center;
  l.region.radius = radius;
  l.region.description = "ball";
  return l;
}

SeparatedLattice lattice_union_refine(const SeparatedLattice& l1, const SeparatedLattice& l2,
                                      const std::vector<ExclusionAtom>& excluded_by_l2) {
  if (l1.real_dim != l2.real_dim) throw Error(ErrorCode::IncompatibleRegions, kModule, "ambient dimensions differ");
  if (l1.region.kind != l2.region.kind)
    throw Error(ErrorCode::IncompatibleRegions, kModule, "lattices live on different kinds of region");
  SeparatedLattice out = empty_like(l1.real_dim);
  out.unit = l1.unit;
  out.torus = l1.torus;
  detail::CellIndex index(l2, 2.0 * l2.unit);
  for (std::size_t i = 0; i < l2.size(); ++i) index.insert(l2.points[i], 0, static_cast<int>(i));

  const int n2 = l2.num_families;
  for (std::size_t i = 0; i < l1.size(); ++i) {
    const RVector& x = l1.points[i];
    if (in_any(excluded_by_l2, x)) continue;
    // Smallest family index j with a point of Gamma^2_j strictly within distance 1.
    int best = n2;
    index.query(x, 0, 1.0 * l2.unit, [&](int id, double dist) {
      if (dist < 1.0 * l2.unit) best = std::min(best, l2.family[static_cast<std::size_t>(id)]);
      return false;
    });
    out.points.push_back(x);
    out.family.push_back(l1.family[i] * (n2 + 1) + best);
  }
  compact_families(out);

  out.params = l1.params;
  out.params.C = std::max(l1.params.C, l2.params.C);
  out.params.m = l1.params.m + l2.params.m;
  out.params.exclusion_radius = std::max(l1.params.exclusion_radius, l2.params.exclusion_radius);
  out.params.separation = l1.params.separation - 2.0;
  out.params.family_constant = 2.0 * l1.params.family_constant * l2.params.family_constant;
  out.region = l1.region;
  out.region.excluded.insert(out.region.excluded.end(), excluded_by_l2.begin(), excluded_by_l2.end());
  out.region.description = "union-refined";
  out.actions = l1.actions;
  for (const auto& g : l2.actions) {
    bool dup = false;
    for (const auto& h : out.actions) dup = dup || (g - h).cwiseAbs().maxCoeff() < 1e-9;
    if (!dup) out.actions.push_back(g);
  }
  return out;
}

}  // namespace orbisect

namespace orbisect {
namespace {

// 2 * (largest eigenvalue order over the subgroup), or 1 for a trivial action.
double local_constant(const FiniteUnitaryAction& action, const Subgroup& sub) {
  double c = 1.0;
  for (int h : sub) {
    Eigen::ComplexEigenSolver<CMatrix> es(action.element(h));
    for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
      const Cplx lambda = es.eigenvalues()(j);
      Cplx p = lambda;
      int t = 1;
      while (std::abs(p - 1.0) > 1e-8 && t < action.order()) p *= lambda, ++t;
      c = std::max(c, lattice_1d_constant(t));
    }
  }
  return c;
}

struct Eigenlines {
  CMatrix basis;            // columns: orthonormal eigenvectors
  std::vector<int> orders;  // effective order of the generator on each line
};

Eigenlines diagonalize(const CMatrix& u, int order) {
  const int n = static_cast<int>(u.rows());
  Eigenlines out;
  CVector values(n);
  const CMatrix off = u - CMatrix(u.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() < 1e-12) {
    out.basis = CMatrix::Identity(n, n);
    values = u.diagonal();
  } else {
    Eigen::ComplexEigenSolver<CMatrix> es(u);
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    auto arg = [&](int i) {
      double a = std::arg(es.eigenvalues()(i));
      return a < -1e-12 ? a + 2 * kPi : std::max(0.0, a);
    };
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return arg(a) < arg(b) - 1e-9; });
    out.basis = CMatrix(n, n);
    // Orthonormalize each eigenspace; unitary matrices have orthogonal distinct eigenspaces.
    for (int s = 0; s < n;) {
      int e = s;
      while (e < n && std::abs(es.eigenvalues()(idx[static_cast<std::size_t>(e)]) -
                               es.eigenvalues()(idx[static_cast<std::size_t>(s)])) < 1e-8)
        ++e;
      CMatrix block(n, e - s);
      for (int j = s; j < e; ++j) block.col(j - s) = es.eigenvectors().col(idx[static_cast<std::size_t>(j)]);
      Eigen::HouseholderQR<CMatrix> qr(block);
      out.basis.middleCols(s, e - s) = qr.householderQ() * CMatrix::Identity(n, e - s);
      for (int j = s; j < e; ++j) values(j) = es.eigenvalues()(idx[static_cast<std::size_t>(s)]);
      s = e;
    }
  }
  for (int j = 0; j < n; ++j) {
    Cplx p = values(j);
    int t = 1;
    while (std::abs(p - 1.0) > 1e-8 && t < order) p *= values(j), ++t;
    out.orders.push_back(t);
  }
  return out;
}

SeparatedLattice trivial_line(double D, double radius) {
  SeparatedLattice l = empty_like(2);
  const int d = ceil_d(D);
  l.num_families = 1;
  l.params = {1.0, D, 2, 1.0, 0.0, D, static_cast<double>(d) * d / (D * D), 9.0};
  l.region.kind = RegionKind::ChartBall;
  l.region.radius = radius;
  l.region.excluded.push_back(everything());
  return l;
}

// Keep the lexicographically smallest present point of each orbit.
void dedupe_orbits(SeparatedLattice& l) {
  std::vector<int> order(l.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const RVector& x = l.points[static_cast<std::size_t>(a)];
    const RVector& y = l.points[static_cast<std::size_t>(b)];
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x(i) != y(i)) return x(i) < y(i);
    return false;
  });
  detail::CellIndex taken(l, 1.0);
  std::vector<RVector> pts;
  std::vector<int> fam;
  const double tol = 1e-6;
  for (int i : order) {
    const RVector& x = l.points[static_cast<std::size_t>(i)];
    if (taken.query(x, 0, tol, [](int, double) { return true; })) continue;
    for (const auto& g : l.actions) taken.insert(g * x, 0, 0);
    if (l.actions.empty()) taken.insert(x, 0, 0);
    pts.push_back(x);
    fam.push_back(l.family[static_cast<std::size_t>(i)]);
  }
  l.points = std::move(pts);
  l.family = std::move(fam);
  compact_families(l);
}

}  // namespace

SeparatedLattice chart_lattice(const FiniteUnitaryAction& action, double R, double D, int k, double chart_radius) {
  if (R < 1.0 || D < 1.0 || k < 1 || chart_radius <= 0.0)
    throw Error(ErrorCode::ConfigInvalid, kModule, "chart lattice needs R, D >= 1, k >= 1, radius > 0");
  const int n = action.dimension();
  const int dim = 2 * n;
  const double sq = std::sqrt(metric_scale(k));
  const double r_grid = chart_radius * sq / R;
  const double scale = R / sq;

  SeparatedLattice out;
  if (action.order() == 1) {
    out = plain_ball_lattice(RVector::Zero(dim), r_grid, D);
    out.region.kind = RegionKind::ChartBall;
    out.actions = {RMatrix::Identity(dim, dim)};
  } else {
    const double C_full = local_constant(action, action.all_indices());
    const double cd_full = C_full * D;
    std::vector<ExclusionAtom> sing_full;
    for (const auto& w : singular_set(action)) sing_full.push_back(neighborhood(w, cd_full));
    const auto cover = cyclic_cover(action);
    // Refinement witnesses lie within distance 1 of kept points, so build slightly past the edge.
    const double r_build = r_grid + (cover.size() > 1 ? 1.0 + 1e-6 : 0.0);
    const bool standard = [&] {
      for (const auto& cyc : cover)
        for (int h : cyc) {
          const CMatrix& u = action.element(h);
          if ((u - CMatrix(u.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 1e-12) return false;
        }
      return true;
    }();
    auto keep = [&](const RVector& x) {
      if (x.squaredNorm() > r_build * r_build * (1.0 + 1e-12)) return false;
      // Points this close to Sing are removed at the end and never serve as refinement witnesses.
      return !in_any(sing_full, x, -(1.0 + 1e-6));
    };

    bool first = true;
    for (const auto& cyc : cover) {
      int gen = cyc.front();
      for (int h : cyc)
        if (action.element_order(h) == static_cast<int>(cyc.size())) {
          gen = h;
          break;
        }
      const Eigenlines lines = diagonalize(action.element(gen), static_cast<int>(cyc.size()));
      const RMatrix M = realify(lines.basis);
      std::vector<SeparatedLattice> ls, bs;
      double C_piece = 1.0;
      for (int j = 0; j < n; ++j) {
        const int e = lines.orders[static_cast<std::size_t>(j)];
        if (e > 1) {
          ls.push_back(lattice_1d(e, D, r_build));
          bs.push_back(plain_ball_lattice(RVector::Zero(2), lattice_1d_constant(e) * D, D));
          C_piece = std::max(C_piece, lattice_1d_constant(e));
        } else {
          ls.push_back(trivial_line(D, r_build));
          bs.push_back(plain_ball_lattice(RVector::Zero(2), r_build, D));
        }
      }
      SeparatedLattice piece = ls[0];
      SeparatedLattice piece_s = bs[0];
      for (int j = 1; j < n; ++j) {
        const bool last = j == n - 1;
        auto filter = [&](const RVector& w) { return !last || keep(standard ? w : RVector(M * w)); };
        SeparatedLattice next = product_filtered(piece, ls[static_cast<std::size_t>(j)], piece_s,
                                                 bs[static_cast<std::size_t>(j)], r_build, filter);
        SeparatedLattice next_s = empty_like(piece_s.real_dim + 2);
        if (!last)
          append_cartesian(piece_s, bs[static_cast<std::size_t>(j)], 0, r_build,
                           [](const RVector&) { return true; }, next_s);
        next_s.num_families = piece_s.num_families * bs[static_cast<std::size_t>(j)].num_families;
        next_s.params = piece_s.params;
        next_s.params.m += 2;
        next_s.params.family_constant *= bs[static_cast<std::size_t>(j)].params.family_constant;
        piece = std::move(next);
        piece_s = std::move(next_s);
      }
      if (n == 1) {
        SeparatedLattice f = empty_like(2);
        f.num_families = piece.num_families;
        for (std::size_t i = 0; i < piece.size(); ++i)
          if (keep(M * piece.points[i])) f.points.push_back(piece.points[i]), f.family.push_back(piece.family[i]);
        f.params = piece.params;
        f.region = piece.region;
        piece = std::move(f);
      }
      // Eigen coordinates -> standard coordinates.
      for (auto& p : piece.points) p = M * p;
      for (auto& atom : piece.region.excluded)
        for (auto& P : atom.projectors) P = M * P * M.transpose();
      piece.params.C = C_piece;
      piece.region.kind = RegionKind::ChartBall;
      piece.region.radius = r_grid;
      piece.actions.clear();
      for (int h : cyc) piece.actions.push_back(realify(action.element(h)));

      if (first) {
        out = std::move(piece);
        first = false;
      } else {
        std::vector<ExclusionAtom> sing_piece;
        const FiniteUnitaryAction& a = action;
        for (int h : cyc) {
          if (h == action.identity_index()) continue;
          const ComplexSubspace w = fixed_subspace(a, a.cyclic_subgroup(h));
          bool dup = false;
          for (const auto& s : sing_piece) dup = dup || (s.projectors[0] - neighborhood(w, 0).projectors[0]).norm() < 1e-9;
          if (!dup) sing_piece.push_back(neighborhood(w, C_piece * D));
        }
        out = lattice_union_refine(out, piece, sing_piece);
      }
    }
    // Final exclusion around the full singular set.
    SeparatedLattice f = empty_like(dim);
    for (std::size_t i = 0; i < out.size(); ++i)
      if (!in_any(sing_full, out.points[i]) && out.points[i].norm() <= r_build)
        f.points.push_back(out.points[i]), f.family.push_back(out.family[i]);
    f.params = out.params;
    f.region = out.region;
    f.region.excluded.insert(f.region.excluded.end(), sing_full.begin(), sing_full.end());
    f.actions = out.actions;
    f.num_families = out.num_families;
    out = std::move(f);
    out.params.C = C_full;
    out.params.exclusion_radius = cd_full;
  }
  dedupe_orbits(out);

  // Grid units -> chart coordinates; g_k distance = sqrt(c_k) * Euclidean.
  for (auto& p : out.points) p *= scale;
  for (auto& atom : out.region.excluded)
    for (auto& r : atom.radii) r *= scale;
  out.region.kind = RegionKind::ChartBall;
  out.region.radius = chart_radius;
  out.region.description = "chart ball minus neighborhood of Sing";
  out.unit = sq;
  out.params.R *= R;
  out.params.separation *= R;
  out.params.exclusion_radius *= R;
  out.params.D = D;
  return out;
}

SeparatedLattice stratum_lattice(std::shared_ptr<const TorusQuotient> quotient, const StrataPoset& poset, int index,
                                 double R, double D, int k) {
  const TorusQuotient& q = *quotient;
  const FiniteUnitaryAction& G = q.group();
  const Stratum& s = poset.strata.at(static_cast<std::size_t>(index));
  const int dim = q.real_dim();
  SeparatedLattice l = empty_like(dim);
  l.unit = std::sqrt(metric_scale(k));
  l.torus = quotient;
  if (s.subgroup.size() > 1) {
    if (s.dimension() > 0)
      throw Error(ErrorCode::ConfigInvalid, kModule, "positive-dimensional singular strata are not supported");
    l.points.push_back(q.reduce(s.offset));
    l.family.push_back(0);
    l.num_families = 1;
    l.params = {1.0, D, 0, R, 0.0, D, 1.0, std::pow(3.0, dim)};
    l.region.kind = RegionKind::Point;
    l.region.description = "point stratum";
    return l;
  }

  std::vector<Stratum> lower;
  double C = 1.0;
  for (std::size_t j = 0; j < poset.size(); ++j)
    if (poset.less(static_cast<int>(j), index)) {
      lower.push_back(poset.strata[j]);
      C = std::max(C, local_constant(G, poset.strata[j].subgroup));
    }
  const double cd = C * D;
  const double h_max = 2.0 * R / std::sqrt(static_cast<double>(dim));
  Eigen::VectorXi M(dim);
  double h_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < dim; ++i) {
    const double len = l.unit * q.basis().col(i).norm();
    M(i) = static_cast<int>(std::ceil(len / h_max - 1e-12));
    h_min = std::min(h_min, len / M(i));
  }
  for (int g = 0; g < G.order(); ++g) l.actions.push_back(q.real_action(g));

  std::vector<RVector> candidates;
  Eigen::VectorXi cur = Eigen::VectorXi::Zero(dim);
  while (true) {
    RVector t(dim);
    for (int i = dim - 1; i >= 0; --i) t(i) = static_cast<double>(cur(i)) / M(i);
    const RVector x = q.from_lattice(t);
    bool ok = true;
    for (const auto& st : lower)
      if (distance_to_stratum(q, st, x) * l.unit < cd) ok = false;
    for (int g = 0; g < G.order() && ok; ++g)
      if (g != G.identity_index() && q.torus_distance(q.act(g, x), x) * l.unit < D) ok = false;
    if (ok) candidates.push_back(x);
    int j = dim - 1;
    while (j >= 0 && cur(j) == M(j) - 1) cur(j--) = 0;
    if (j < 0) break;
    ++cur(j);
  }
  l.points = candidates;
  l.family.assign(candidates.size(), 0);
  dedupe_orbits(l);
  if (l.points.empty())
    throw Error(ErrorCode::EmptyStratumRegion, kModule,
                "no grid point lies outside the C*D neighborhood of the lower strata; increase k or lower D");

  // Greedy colouring of the conflict graph d(x, h y) < D.
  detail::CellIndex images(l, 2.0 * D);
  for (std::size_t i = 0; i < l.size(); ++i)
    for (int g = 0; g < G.order(); ++g) images.insert(q.act(g, l.points[i]), 0, static_cast<int>(i));
  std::vector<int> colour(l.size(), -1);
  int colours = 0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    std::vector<bool> used(static_cast<std::size_t>(colours) + 1, false);
    images.query(l.points[i], 0, D, [&](int j, double dist) {
      if (dist < D && j != static_cast<int>(i) && colour[static_cast<std::size_t>(j)] >= 0)
        used[static_cast<std::size_t>(colour[static_cast<std::size_t>(j)])] = true;
      return false;
    });
    int c = 0;
    while (used[static_cast<std::size_t>(c)]) ++c;
    colour[i] = c;
    colours = std::max(colours, c + 1);
  }
  l.family = colour;
  l.num_families = colours;
  const double neighbours = G.order() * std::pow(2.0 * D / h_min + 1.0, dim);
  l.params = {C, D, dim, R, cd, D, (neighbours + 1.0) / std::pow(D, dim), std::pow(3.0, dim)};
  l.region.kind = RegionKind::Torus;
  l.region.removed_strata = lower;
  l.region.description = "regular stratum minus C*D neighborhood of lower strata";
  return l;
}

}  // namespace orbisect

namespace orbisect {
namespace {

// Point strata removed from a torus region, as the distinct reduced G-images of their points.
class SiteIndex {
 public:
  explicit SiteIndex(const SeparatedLattice& l) : unit_(l.unit), B_(l.torus->basis()), Binv_(l.torus->basis_inverse()) {
    for (const auto& st : l.region.removed_strata)
      for (int g = 0; g < l.torus->group().order(); ++g) {
        const RVector p = l.torus->reduce(l.torus->act(g, st.offset));
        bool dup = false;
        for (const auto& q : sites_) dup = dup || l.torus->torus_distance(p, q) < 1e-9;
        if (!dup) sites_.push_back(p);
      }
    const RMatrix gram = B_.transpose() * B_;
    orthogonal_ = (gram - RMatrix(gram.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-12;
    reach_ = orthogonal_ ? 0 : 1;
  }
  static bool applies(const SeparatedLattice& l) {
    if (l.region.kind != RegionKind::Torus) return false;
    for (const auto& st : l.region.removed_strata)
      if (st.dimension() != 0) return false;
    return true;
  }
  /// g_k distance to the nearest site.
  double distance(const RVector& x) const {
    const int d = static_cast<int>(x.size());
    double best = std::numeric_limits<double>::infinity();
    std::array<double, detail::kMaxRealDim> t{};
    for (const auto& p : sites_) {
      for (int i = 0; i < d; ++i) {
        double u = 0.0;
        for (int j = 0; j < d; ++j) u += Binv_(i, j) * (x(j) - p(j));
        t[static_cast<std::size_t>(i)] = u - std::round(u);
      }
      // Offsets in {-reach, .., reach}^d around the rounded representative.
      std::array<int, detail::kMaxRealDim> off{};
      off.fill(-reach_);
      while (true) {
        double s2 = 0.0;
        for (int i = 0; i < d; ++i) {
          double w = 0.0;
          for (int j = 0; j < d; ++j) w += B_(i, j) * (t[static_cast<std::size_t>(j)] + off[static_cast<std::size_t>(j)]);
          s2 += w * w;
        }
        best = std::min(best, s2);
        int j = 0;
        while (j < d && off[static_cast<std::size_t>(j)] == reach_) off[static_cast<std::size_t>(j)] = -reach_, ++j;
        if (j == d) break;
        ++off[static_cast<std::size_t>(j)];
      }
    }
    return std::sqrt(best) * unit_;
  }

 private:
  double unit_;
  RMatrix B_, Binv_;
  std::vector<RVector> sites_;
  bool orthogonal_ = false;
  int reach_ = 1;
};

struct GridFrame {
  RMatrix map;     // x = origin + map * j
  RVector origin;
  Eigen::VectorXi lo, hi;
  const SiteIndex* sites = nullptr;
};

GridFrame make_grid(const SeparatedLattice& l, double step) {
  const int d = l.real_dim;
  GridFrame g;
  g.origin = RVector::Zero(d);
  g.lo.resize(d);
  g.hi.resize(d);
  if (l.region.kind == RegionKind::Torus) {
    g.map = l.torus->basis();
    for (int i = 0; i < d; ++i) {
      const int m = static_cast<int>(std::ceil(l.unit * l.torus->basis().col(i).norm() / step - 1e-12));
      g.map.col(i) /= m;
      g.lo(i) = 0;
      g.hi(i) = m - 1;
    }
    return g;
  }
  const double s = step / l.unit;
  g.map = RMatrix::Identity(d, d) * s;
  RVector a, b;
  if (l.region.kind == RegionKind::Plain && !l.region.ball) {
    a = l.region.lo;
    b = l.region.hi;
  } else {
    const RVector c = l.region.kind == RegionKind::Plain ? l.region.lo : RVector::Zero(d);
    a = c.array() - l.region.radius;
    b = c.array() + l.region.radius;
  }
  for (int i = 0; i < d; ++i) {
    g.lo(i) = static_cast<int>(std::ceil(a(i) / s - 1e-9));
    g.hi(i) = static_cast<int>(std::floor(b(i) / s + 1e-9));
  }
  return g;
}

enum class BlockClass { Out, In, Mixed };

// Block = parallelepiped c + map * [-h, h]; `ext` is its coordinate half-width, `rad` its circumradius.
BlockClass classify(const SeparatedLattice& l, const SiteIndex* sites, const RVector& c, const RVector& ext,
                    double rad, double margin) {
  const double m = margin / l.unit;
  bool inside = true;
  switch (l.region.kind) {
    case RegionKind::Point:
      return BlockClass::Mixed;
    case RegionKind::Torus:
      if (sites) {
        const double dd = sites->distance(c);
        const double thr = l.params.exclusion_radius + margin;
        if (dd + rad * l.unit <= thr) return BlockClass::Out;
        return dd - rad * l.unit <= thr ? BlockClass::Mixed : BlockClass::In;
      }
      for (const auto& s : l.region.removed_strata) {
        const double dd = distance_to_stratum(*l.torus, s, c) * l.unit;
        const double thr = l.params.exclusion_radius + margin;
        if (dd + rad * l.unit <= thr) return BlockClass::Out;
        if (dd - rad * l.unit <= thr) inside = false;
      }
      return inside ? BlockClass::In : BlockClass::Mixed;
    case RegionKind::Plain:
      if (!l.region.ball) {
        for (Eigen::Index i = 0; i < c.size(); ++i) {
          const double mn = c(i) - ext(i), mx = c(i) + ext(i);
          if (mx < l.region.lo(i) + m || mn > l.region.hi(i) - m) return BlockClass::Out;
          if (mn < l.region.lo(i) + m || mx > l.region.hi(i) - m) inside = false;
        }
        break;
      }
      [[fallthrough]];
    case RegionKind::ChartBall: {
      const double dc = l.region.kind == RegionKind::Plain ? (c - l.region.lo).norm() : c.norm();
      const double r = l.region.radius - m;
      if (dc - rad > r) return BlockClass::Out;
      if (dc + rad > r) inside = false;
      break;
    }
  }
  for (const auto& atom : l.region.excluded) {
    bool all_in = true, clear = false;
    for (std::size_t i = 0; i < atom.projectors.size(); ++i) {
      const double pc = std::sqrt(projected_sq(atom.projectors[i], c));
      all_in = all_in && pc + rad <= atom.radii[i] + m;
      clear = clear || pc - rad > atom.radii[i] + m;
    }
    if (all_in) return BlockClass::Out;
    if (!clear) inside = false;
  }
  return inside ? BlockClass::In : BlockClass::Mixed;
}

struct NoBlockSkip {
  bool operator()(const RVector&, double, long long) const { return false; }
};

/// Visits grid points of [lo, hi] inside the region shrunk by margin. `skip(center, radius, count)` may
/// dispose of a whole block lying inside the region.
template <class Visit, class Skip = NoBlockSkip>
void walk_blocks(const SeparatedLattice& l, const GridFrame& g, Eigen::VectorXi lo, Eigen::VectorXi hi, double margin,
                 Visit& visit, Skip&& skip = Skip{}) {
  const int d = static_cast<int>(lo.size());
  long long count = 1;
  int widest = 0;
  for (int i = 0; i < d; ++i) {
    if (hi(i) < lo(i)) return;
    count *= hi(i) - lo(i) + 1;
    if (hi(i) - lo(i) > hi(widest) - lo(widest)) widest = i;
  }
  const RVector half = 0.5 * (hi - lo).cast<double>();
  const RVector c = g.origin + g.map * (0.5 * (hi + lo).cast<double>());
  const RVector ext = g.map.cwiseAbs() * half;
  const double rad = ext.norm();  // every point p of the block has |p_i - c_i| <= ext_i
  const BlockClass cls = classify(l, g.sites, c, ext, rad, margin);
  if (cls == BlockClass::Out) return;
  if (cls == BlockClass::In && skip(c, rad, count)) return;
  if (count <= (cls == BlockClass::In && !std::is_same_v<std::decay_t<Skip>, NoBlockSkip> ? 16 : 256)) {
    Eigen::VectorXi cur = lo;
    RVector x(d);
    while (true) {
      for (int i = 0; i < d; ++i) {
        double v = g.origin(i);
        for (int j = 0; j < d; ++j) v += g.map(i, j) * cur(j);
        x(i) = v;
      }
      const bool in = cls == BlockClass::In ||
                      (g.sites ? g.sites->distance(x) > l.params.exclusion_radius + margin : l.in_region(x, margin));
      if (in) visit(x);
      int j = 0;
      while (j < d && cur(j) == hi(j)) cur(j) = lo(j), ++j;
      if (j == d) return;
      ++cur(j);
    }
  }
  const int mid = (lo(widest) + hi(widest)) / 2;
  Eigen::VectorXi h1 = hi, l2 = lo;
  h1(widest) = mid;
  l2(widest) = mid + 1;
  walk_blocks(l, g, lo, h1, margin, visit, skip);
  walk_blocks(l, g, l2, hi, margin, visit, skip);
}

std::vector<RMatrix> group_or_identity(const SeparatedLattice& l) {
  if (!l.actions.empty()) return l.actions;
  return {RMatrix::Identity(l.real_dim, l.real_dim)};
}

}  // namespace

PropertyPReport verify_property_p(const SeparatedLattice& l, double D, double grid_step, unsigned seed, int /*jobs*/) {
  PropertyPReport rep;
  const auto group = group_or_identity(l);
  const int G = static_cast<int>(group.size());
  const int d = l.real_dim;
  const double R = l.params.R;

  if (l.params.m > 0)
    rep.family_count_ok = l.num_families <= l.params.family_constant * std::pow(D, l.params.m) * (1.0 + 1e-9);

  // Strong separation: every family, every pair, every group element.
  {
    detail::CellIndex index(l, 2.0 * D);
    for (std::size_t i = 0; i < l.size(); ++i)
      for (int g = 0; g < G; ++g)
        index.insert(group[static_cast<std::size_t>(g)] * l.points[i], l.family[i], static_cast<int>(i) * G + g);
    double min_sep = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < l.size(); ++i) {
      index.query(l.points[i], l.family[i], D, [&](int id, double dist) {
        const int j = id / G, g = id % G;
        if (j == static_cast<int>(i) && g == 0) return false;
        min_sep = std::min(min_sep, dist);
        if (dist < D - 1e-9 && j >= static_cast<int>(i)) ++rep.violating_pairs;
        return false;
      });
    }
    rep.min_separation = std::isfinite(min_sep) ? min_sep : D;
    rep.separation_ok = rep.violating_pairs == 0;
  }

  // Covering on the R-interior of the region.
  detail::CellIndex images(l, 2.0 * std::max(R, 1e-9));
  std::vector<RVector> image_pos;
  for (std::size_t i = 0; i < l.size(); ++i)
    for (const auto& g : group) {
      images.insert(g * l.points[i], 0, static_cast<int>(image_pos.size()));
      image_pos.push_back(g * l.points[i]);
    }
  if (l.region.kind != RegionKind::Point) {
    GridFrame frame = make_grid(l, grid_step);
    std::optional<SiteIndex> sites;
    if (SiteIndex::applies(l)) {
      sites.emplace(l);
      frame.sites = &*sites;
    }
    const double reach = R * (1.0 + 1e-12);
    int last = -1;  // neighbouring grid points are usually covered by the same image
    auto visit = [&](const RVector& x) {
      ++rep.grid_points_checked;
      if (last >= 0) {
        const RVector& p = image_pos[static_cast<std::size_t>(last)];
        const double dist = l.torus ? l.distance(x, p) : (x - p).norm() * l.unit;
        if (dist <= reach) return;
      }
      if (!images.query(x, 0, reach, [&](int id, double) { return last = id, true; })) ++rep.uncovered;
    };
    // A block whose bounding ball sits inside one image's R-ball is covered as a whole.
    auto skip = [&](const RVector& c, double rad, long long count) {
      const double slack = reach - rad * l.unit;
      if (count > 4096 || slack <= 0.0) return false;
      if (!images.query(c, 0, slack, [](int, double) { return true; })) return false;
      rep.grid_points_checked += count;
      return true;
    };
    walk_blocks(l, frame, frame.lo, frame.hi, R, visit, skip);
    rep.covering_ok = rep.uncovered == 0;
  }

  // Sample points of the region near lattice points.
  std::vector<RVector> samples;
  if (!l.points.empty()) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, l.size() - 1);
    std::uniform_real_distribution<double> off(-R / l.unit, R / l.unit);
    for (int tries = 0; tries < 200000 && samples.size() < 1000; ++tries) {
      RVector q = l.points[pick(rng)];
      for (int i = 0; i < d; ++i) q(i) += off(rng);
      if (l.region.kind == RegionKind::Point || l.in_region(q, 0.0)) samples.push_back(q);
    }
  }

  // Even distribution F_q(s) / s^{2n}, s >= 1.
  {
    detail::CellIndex reps(l, 8.0);
    for (std::size_t i = 0; i < l.size(); ++i) reps.insert(l.points[i], 0, static_cast<int>(i));
    double worst = 0.0;
    for (const auto& q : samples)
      for (double s : {1.0, 1.5, 2.0, 3.0, 4.0}) {
        int count = 0;
        reps.query(q, 0, s, [&](int, double) {
          ++count;
          return false;
        });
        worst = std::max(worst, count / std::pow(s, d));
      }
    rep.distribution_constant = worst;
    rep.distribution_ok = worst < l.params.distribution_constant;
  }

  // sum_p d^r exp(-d^2/5) over the orbit of the lattice; the tail beyond 14 is below 1e-13.
  {
    constexpr double kCut = 14.0;
    detail::CellIndex far(l, 2.0 * kCut);
    for (std::size_t i = 0; i < l.size(); ++i)
      for (const auto& g : group) far.insert(g * l.points[i], 0, static_cast<int>(i));
    rep.weighted_sums.assign(4, 0.0);
    for (const auto& q : samples) {
      double s[4] = {0, 0, 0, 0};
      far.query(q, 0, kCut, [&](int, double dist) {
        double w = std::exp(-dist * dist / 5.0);
        for (int r = 0; r < 4; ++r, w *= dist) s[r] += w;
        return false;
      });
      for (int r = 0; r < 4; ++r) rep.weighted_sums[static_cast<std::size_t>(r)] = std::max(rep.weighted_sums[static_cast<std::size_t>(r)], s[r]);
    }
  }
  return rep;
}

std::string lattice_to_csv(const SeparatedLattice& l) {
  std::string out;
  for (int i = 0; i < l.real_dim; ++i) out += (i % 2 ? "y" : "x") + std::to_string(i / 2 + 1) + ",";
  out += "family\n";
  char buf[64];
  for (std::size_t i = 0; i < l.size(); ++i) {
    for (int j = 0; j < l.real_dim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,", l.points[i](j));
      out += buf;
    }
    out += std::to_string(l.family[i]) + "\n";
  }
  return out;
}

}  // namespace orbisect
