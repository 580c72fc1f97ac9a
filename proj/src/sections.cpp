#include "orbisect/sections.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include <Eigen/LU>

namespace orbisect {
namespace {

constexpr const char* kModule = "bundle_sections";
constexpr Cplx kI{0.0, 1.0};

double frac(double x) {
  double f = std::fmod(x, 1.0);
  return f < 0 ? f + 1.0 : f;
}

// Im(sum a_j conj(b_j)).
double im_dot(const Cplx* a, const Cplx* b, int n) {
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += (a[j] * std::conj(b[j])).imag();
  return s;
}

// Chart Gaussian s_p(z) = exp(-pi k |z-p|^2 / 2 + i pi k Im(z.conj p)), optionally times
// bump(d_k / k^{1/6}). Zero beyond the cutoff.
Jet gaussian_jet(int n, int k, const Cplx* z, const Cplx* p, bool cutoff) {
  Jet J(n);
  const double pk = kPi * k;
  std::array<Cplx, kMaxComplexDim> u{}, w{};
  double rho2 = 0.0;
  for (int j = 0; j < n; ++j) {
    u[j] = z[j] - p[j];
    rho2 += std::norm(u[j]);
    w[j] = -pk * std::conj(u[j]);
  }
  const double unit = std::sqrt(metric_scale(k));
  const double k6 = std::pow(static_cast<double>(k), 1.0 / 6.0);
  const double rho = std::sqrt(rho2);
  const double t = unit * rho / k6;
  if (cutoff && t >= 1.0) return J;

  const Cplx G = std::exp(Cplx(-0.5 * pk * rho2, pk * im_dot(z, p, n)));
  double B = 1.0, B1 = 0.0, B2 = 0.0;
  if (cutoff && t > 0.5) {
    const double c = unit / k6;
    B = bump(t);
    B1 = c * bump_d1(t);
    B2 = c * c * bump_d2(t);
  }
  std::array<Cplx, kMaxComplexDim> dB{}, dbB{};
  std::array<Jet::Row, kMaxComplexDim> ddB{}, dbdB{}, ddbB{}, dbdbB{};
  if (B1 != 0.0 || B2 != 0.0) {
    const double r2 = rho2, r3 = rho2 * rho;
    for (int i = 0; i < n; ++i) {
      dB[i] = B1 * std::conj(u[i]) / (2.0 * rho);
      dbB[i] = B1 * u[i] / (2.0 * rho);
      for (int j = 0; j < n; ++j) {
        const double delta = i == j ? 1.0 : 0.0;
        const Cplx cc = std::conj(u[i]) * std::conj(u[j]);
        const Cplx uu = u[i] * u[j];
        const Cplx uc = u[i] * std::conj(u[j]);
        const Cplx cu = std::conj(u[i]) * u[j];
        ddB[i][j] = B2 * cc / (4.0 * r2) - B1 * cc / (4.0 * r3);
        dbdB[i][j] = B2 * uc / (4.0 * r2) + B1 * (delta / (2.0 * rho) - uc / (4.0 * r3));
        ddbB[i][j] = B2 * cu / (4.0 * r2) + B1 * (delta / (2.0 * rho) - cu / (4.0 * r3));
        dbdbB[i][j] = B2 * uu / (4.0 * r2) - B1 * uu / (4.0 * r3);
      }
    }
  }
  J.v = B * G;
  for (int i = 0; i < n; ++i) {
    J.a[i] = (dB[i] + B * w[i]) * G;
    J.b[i] = dbB[i] * G;
    for (int j = 0; j < n; ++j) {
      const double delta = i == j ? 1.0 : 0.0;
      J.aa[i][j] = (ddB[i][j] + dB[j] * w[i] + dB[i] * w[j] + B * w[i] * w[j]) * G;
      J.ab[i][j] = (dbdB[i][j] + dbB[i] * w[j] - B * pk * delta) * G;
      J.ba[i][j] = (ddbB[i][j] + dbB[j] * w[i]) * G;
      J.bb[i][j] = dbdbB[i][j] * G;
    }
  }
  return J;
}

}  // namespace

namespace {

// One complex-dimensional factor of a product torus.
struct Plane {
  Cplx e1, e2;         // lattice basis
  double inv[2][2];    // real inverse of [e1 e2]
  double l1 = 0, l2 = 0;
  bool half_integral = false;  // l in {0, 1/2}^2: eps is a sign

  void coords(Cplx z, double& t1, double& t2) const {
    t1 = inv[0][0] * z.real() + inv[0][1] * z.imag();
    t2 = inv[1][0] * z.real() + inv[1][1] * z.imag();
  }
  double row_norm(int i) const { return std::hypot(inv[i][0], inv[i][1]); }
  // epsilon of the plane: exp(2 pi i ((k/2) m1 m2 + l1 m1 + l2 m2)).
  Cplx eps(int k, long m1, long m2) const {
    if (half_integral) {
      const long t = static_cast<long>(k) * m1 * m2 + static_cast<long>(2 * l1) * m1 + static_cast<long>(2 * l2) * m2;
      return (t % 2 == 0) ? 1.0 : -1.0;
    }
    const double e = 0.5 * static_cast<double>((static_cast<long>(k) * m1 * m2) % 2) + l1 * static_cast<double>(m1 % 2) +
                     l2 * static_cast<double>(m2 % 2);
    return std::polar(1.0, 2.0 * kPi * frac(e));
  }
  // z = r + m1 e1 + m2 e2 with lattice coordinates of r in [0,1).
  Cplx reduce(Cplx z, long& m1, long& m2) const {
    double t1, t2;
    coords(z, t1, t2);
    m1 = static_cast<long>(std::floor(t1));
    m2 = static_cast<long>(std::floor(t2));
    return z - static_cast<double>(m1) * e1 - static_cast<double>(m2) * e2;
  }
};

std::vector<Plane> planes_of(const TorusQuotient& q, int k) {
  const RMatrix& B = q.basis();
  const RVector& ell = q.characteristic(k);
  std::vector<Plane> out(static_cast<std::size_t>(q.n()));
  for (int j = 0; j < q.n(); ++j) {
    Plane& P = out[static_cast<std::size_t>(j)];
    P.e1 = Cplx(B(2 * j, 2 * j), B(2 * j + 1, 2 * j));
    P.e2 = Cplx(B(2 * j, 2 * j + 1), B(2 * j + 1, 2 * j + 1));
    const double det = P.e1.real() * P.e2.imag() - P.e2.real() * P.e1.imag();
    P.inv[0][0] = P.e2.imag() / det;
    P.inv[0][1] = -P.e2.real() / det;
    P.inv[1][0] = -P.e1.imag() / det;
    P.inv[1][1] = P.e1.real() / det;
    P.l1 = ell(2 * j);
    P.l2 = ell(2 * j + 1);
    auto half = [](double l) { return l == 0.0 || l == 0.5; };
    P.half_integral = half(P.l1) && half(P.l2);
  }
  return out;
}

struct Jet1 {
  Cplx v, a, aa;  // value, nabla_z, nabla_z nabla_z; holomorphic so the zbar parts follow
};

// Periodized peak on one plane: sum_mu c_mu s_{q+mu}(z), truncated at Euclidean radius T.
Jet1 plane_theta(const Plane& P, int k, Cplx z, Cplx q, double T) {
  long n1, n2, l1, l2;
  const Cplx zr = P.reduce(z, n1, n2);
  const Cplx qr = P.reduce(q, l1, l2);
  const double pk = kPi * k;
  const Cplx u = zr - qr;
  double t1, t2;
  P.coords(u, t1, t2);
  const double w1 = T * P.row_norm(0), w2 = T * P.row_norm(1);
  const long a1 = static_cast<long>(std::floor(t1 - w1)), b1 = static_cast<long>(std::ceil(t1 + w1));
  const long a2 = static_cast<long>(std::floor(t2 - w2)), b2 = static_cast<long>(std::ceil(t2 + w2));
  const double T2 = T * T;
  Jet1 J{};
  for (long m1 = a1; m1 <= b1; ++m1)
    for (long m2 = a2; m2 <= b2; ++m2) {
      const Cplx mu = static_cast<double>(m1) * P.e1 + static_cast<double>(m2) * P.e2;
      const Cplx x = u - mu;
      const double d2 = std::norm(x);
      if (d2 > T2) continue;
      const double phase = (zr * std::conj(qr + mu)).imag() - (mu * std::conj(qr)).imag();
      const Cplx g = P.eps(k, m1, m2) * std::exp(Cplx(-0.5 * pk * d2, pk * phase));
      const Cplx w = -pk * std::conj(x);
      J.v += g;
      J.a += w * g;
      J.aa += w * w * g;
    }
  const Cplx lam = static_cast<double>(l1) * P.e1 + static_cast<double>(l2) * P.e2;
  const Cplx nu = static_cast<double>(n1) * P.e1 + static_cast<double>(n2) * P.e2;
  const Cplx f = std::conj(P.eps(k, l1, l2)) * P.eps(k, n1, n2) *
                 std::polar(1.0, pk * ((lam * std::conj(qr)).imag() + (zr * std::conj(nu)).imag()));
  J.v *= f;
  J.a *= f;
  J.aa *= f;
  return J;
}

// Product of plane jets; all zbar derivatives follow from holomorphy.
Jet product_jet(int n, int k, const Jet1* f) {
  Jet J(n);
  const double pk = kPi * k;
  auto others = [&](int i, int j) {
    Cplx p = 1.0;
    for (int l = 0; l < n; ++l)
      if (l != i && l != j) p *= f[l].v;
    return p;
  };
  J.v = others(-1, -1);
  for (int i = 0; i < n; ++i) {
    J.a[i] = f[i].a * others(i, -1);
    for (int j = 0; j < n; ++j) J.aa[i][j] = i == j ? f[i].aa * others(i, -1) : f[i].a * f[j].a * others(i, j);
    J.ab[i][i] = -pk * J.v;
  }
  return J;
}

void split(const RVector& x, Cplx* z, int n) {
  for (int j = 0; j < n; ++j) z[j] = Cplx(x(2 * j), x(2 * j + 1));
}

}  // namespace

Jet& Jet::operator+=(const Jet& o) {
  v += o.v;
  for (int i = 0; i < n; ++i) {
    a[i] += o.a[i];
    b[i] += o.b[i];
    for (int j = 0; j < n; ++j) {
      aa[i][j] += o.aa[i][j];
      ab[i][j] += o.ab[i][j];
      ba[i][j] += o.ba[i][j];
      bb[i][j] += o.bb[i][j];
    }
  }
  return *this;
}

Jet& Jet::operator*=(Cplx c) {
  v *= c;
  for (int i = 0; i < n; ++i) {
    a[i] *= c;
    b[i] *= c;
    for (int j = 0; j < n; ++j) {
      aa[i][j] *= c;
      ab[i][j] *= c;
      ba[i][j] *= c;
      bb[i][j] *= c;
    }
  }
  return *this;
}

SectionSample read_jet(const Jet& J, int k) {
  // g_k-orthonormal coordinates are sqrt(2 pi k) times chart coordinates.
  const double u = std::sqrt(metric_scale(k));
  const int n = J.n;
  SectionSample s;
  s.value = J.v;
  s.abs_value = std::abs(J.v);
  s.grad = CVector(2 * n);
  s.dbar = CVector(n);
  double del2 = 0, dbar2 = 0, gd2 = 0, all2 = 0;
  for (int i = 0; i < n; ++i) {
    s.grad(i) = J.a[i] / u;
    s.grad(n + i) = J.b[i] / u;
    s.dbar(i) = J.b[i] / u;
    del2 += std::norm(J.a[i]);
    dbar2 += std::norm(J.b[i]);
    for (int j = 0; j < n; ++j) {
      const double x = std::norm(J.ba[i][j]) + std::norm(J.bb[i][j]);
      gd2 += x;
      all2 += x + std::norm(J.aa[i][j]) + std::norm(J.ab[i][j]);
    }
  }
  s.norm_del = std::sqrt(del2) / u;
  s.norm_dbar = std::sqrt(dbar2) / u;
  s.norm_grad = std::sqrt(del2 + dbar2) / u;
  s.norm_grad_dbar = std::sqrt(gd2) / (u * u);
  s.norm_second = std::sqrt(all2) / (u * u);
  return s;
}

const char* to_string(SectionMode m) { return m == SectionMode::Cutoff ? "cutoff" : "periodized"; }

SectionMode section_mode_from_string(const std::string& s) {
  if (s == "cutoff") return SectionMode::Cutoff;
  if (s == "periodized" || s == "theta") return SectionMode::Periodized;
  throw Error(ErrorCode::ConfigInvalid, kModule, "unknown section mode '" + s + "'");
}

int SectionSpace::group_order() const { return group ? group->order() : 1; }

RMatrix SectionSpace::group_real(int g) const {
  if (torus) return torus->real_action(g);
  if (group) return realify(group->element(g));
  return RMatrix::Identity(2 * n, 2 * n);
}

bool SectionSpace::contains(const RVector& x) const {
  if (x.size() != 2 * n) return false;
  if (torus || chart_radius <= 0.0) return true;
  return x.norm() <= chart_radius * (1.0 + 1e-12);
}

double SectionSpace::distance(const RVector& a, const RVector& b) const {
  return unit() * (torus ? torus->torus_distance(a, b) : (a - b).norm());
}

Subgroup SectionSpace::isotropy(const RVector& x) const {
  if (torus) return torus->isotropy(x);
  Subgroup out;
  for (int g = 0; g < group_order(); ++g)
    if ((group_real(g) * x - x).norm() <= 1e-9) out.push_back(g);
  return out;
}

SectionSpace chart_space(int k, std::shared_ptr<const FiniteUnitaryAction> group, double chart_radius) {
  if (k < 1) throw Error(ErrorCode::ConfigInvalid, kModule, "k must be positive");
  SectionSpace s;
  s.n = group ? group->dimension() : 1;
  s.k = k;
  s.group = std::move(group);
  s.chart_radius = chart_radius;
  return s;
}

SectionSpace torus_space(int k, std::shared_ptr<const TorusQuotient> torus) {
  if (k < 1) throw Error(ErrorCode::ConfigInvalid, kModule, "k must be positive");
  if (torus->n() > kMaxComplexDim) throw Error(ErrorCode::DimensionMismatch, kModule, "complex dimension above 4");
  SectionSpace s;
  s.n = torus->n();
  s.k = k;
  s.group = torus->group_ptr();
  s.torus = std::move(torus);
  s.torus->characteristic(k);  // throws when L^k carries no invariant structure
  return s;
}

double bump(double t) {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  const double u = 2.0 * t - 1.0;
  return 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

double bump_d1(double t) {
  if (t <= 0.5 || t >= 1.0) return 0.0;
  const double u = 2.0 * t - 1.0;
  return -60.0 * u * u * (1.0 - u) * (1.0 - u);
}

double bump_d2(double t) {
  if (t <= 0.5 || t >= 1.0) return 0.0;
  const double u = 2.0 * t - 1.0;
  return -240.0 * u * (2.0 * u - 1.0) * (u - 1.0);
}

double truncation_radius(double tail) {
  // One extra unit absorbs the polynomial factors of the second derivatives.
  return std::sqrt(4.0 * std::log(1.0 / tail)) + 1.0;
}

PeakSection peak_section(const SectionSpace& space, const RVector& p, SectionMode mode, double tail) {
  if (!space.contains(p)) throw Error(ErrorCode::CenterOutsideDomain, kModule, "peak center outside the chart");
  PeakSection s;
  s.center = p;
  s.k = space.k;
  s.mode = mode;
  s.cutoff_radius = space.cutoff_radius();
  s.truncation = truncation_radius(tail);
  return s;
}

namespace {

const std::vector<Plane>& planes_cached(const TorusQuotient& q, int k) {
  static std::mutex mu;
  static std::map<std::tuple<const void*, std::string, int>, std::vector<Plane>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(static_cast<const void*>(&q), q.name(), k % 2);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, planes_of(q, k)).first;
  return it->second;
}

Jet torus_periodized(const SectionSpace& sp, const Cplx* z, const Cplx* p, double T) {
  const auto& planes = planes_cached(*sp.torus, sp.k);
  std::array<Jet1, kMaxComplexDim> f{};
  for (int j = 0; j < sp.n; ++j) f[j] = plane_theta(planes[static_cast<std::size_t>(j)], sp.k, z[j], p[j], T);
  return product_jet(sp.n, sp.k, f.data());
}

// Cutoff peak on a torus: the translates of the bump-localized Gaussian that reach z.
Jet torus_cutoff(const SectionSpace& sp, const Cplx* z, const Cplx* p) {
  const auto& planes = planes_cached(*sp.torus, sp.k);
  const int n = sp.n, k = sp.k;
  const double pk = kPi * k;
  std::array<Cplx, kMaxComplexDim> zr{}, qr{}, mu{};
  Cplx factor = 1.0;
  std::array<long, kMaxComplexDim> lo1{}, hi1{}, lo2{}, hi2{};
  const double R = sp.cutoff_radius() / sp.unit();
  for (int j = 0; j < n; ++j) {
    const Plane& P = planes[static_cast<std::size_t>(j)];
    long n1, n2, l1, l2;
    zr[j] = P.reduce(z[j], n1, n2);
    qr[j] = P.reduce(p[j], l1, l2);
    const Cplx lam = static_cast<double>(l1) * P.e1 + static_cast<double>(l2) * P.e2;
    const Cplx nu = static_cast<double>(n1) * P.e1 + static_cast<double>(n2) * P.e2;
    factor *= std::conj(P.eps(k, l1, l2)) * P.eps(k, n1, n2) *
              std::polar(1.0, pk * ((lam * std::conj(qr[j])).imag() + (zr[j] * std::conj(nu)).imag()));
    double t1, t2;
    P.coords(zr[j] - qr[j], t1, t2);
    lo1[j] = static_cast<long>(std::floor(t1 - R * P.row_norm(0)));
    hi1[j] = static_cast<long>(std::ceil(t1 + R * P.row_norm(0)));
    lo2[j] = static_cast<long>(std::floor(t2 - R * P.row_norm(1)));
    hi2[j] = static_cast<long>(std::ceil(t2 + R * P.row_norm(1)));
  }
  Jet sum(n);
  std::array<long, 2 * kMaxComplexDim> m{};
  for (int j = 0; j < n; ++j) {
    m[2 * j] = lo1[j];
    m[2 * j + 1] = lo2[j];
  }
  while (true) {
    double d2 = 0.0;
    Cplx c = 1.0;
    for (int j = 0; j < n; ++j) {
      const Plane& P = planes[static_cast<std::size_t>(j)];
      mu[j] = static_cast<double>(m[2 * j]) * P.e1 + static_cast<double>(m[2 * j + 1]) * P.e2;
      d2 += std::norm(zr[j] - qr[j] - mu[j]);
      c *= P.eps(k, m[2 * j], m[2 * j + 1]) * std::polar(1.0, -pk * (mu[j] * std::conj(qr[j])).imag());
    }
    if (d2 < R * R) {
      std::array<Cplx, kMaxComplexDim> centre{};
      for (int j = 0; j < n; ++j) centre[j] = qr[j] + mu[j];
      sum += c * gaussian_jet(n, k, zr.data(), centre.data(), true);
    }
    int i = 0;
    for (; i < 2 * n; ++i) {
      const int j = i / 2;
      const long hi = i % 2 == 0 ? hi1[j] : hi2[j];
      const long lo = i % 2 == 0 ? lo1[j] : lo2[j];
      if (m[i] < hi) {
        ++m[i];
        break;
      }
      m[i] = lo;
    }
    if (i == 2 * n) break;
  }
  return factor * sum;
}

}  // namespace

Jet evaluate_peak(const SectionSpace& space, const PeakSection& peak, const RVector& z) {
  std::array<Cplx, kMaxComplexDim> zc{}, pc{};
  split(z, zc.data(), space.n);
  split(peak.center, pc.data(), space.n);
  const bool cutoff = peak.mode == SectionMode::Cutoff;
  if (!space.torus) return gaussian_jet(space.n, space.k, zc.data(), pc.data(), cutoff);
  if (cutoff) return torus_cutoff(space, zc.data(), pc.data());
  return torus_periodized(space, zc.data(), pc.data(), peak.truncation / space.unit());
}

/// Basis of H^0(L^k) on a product torus: per plane, periodized peaks centred on a shifted
/// rank-1 lattice of k well-spread points, with the LU of their evaluation matrix.
class ThetaBasis {
 public:
  ThetaBasis(const SectionSpace& sp, double T) : n_(sp.n), k_(sp.k), T_(T), planes_(planes_of(*sp.torus, sp.k)) {
    size_ = 1;
    for (int j = 0; j < n_; ++j) size_ *= k_;
    for (const Plane& P : planes_) {
      std::vector<Cplx> pts = spread_points(P);
      CMatrix M(k_, k_);
      for (int i = 0; i < k_; ++i)
        for (int b = 0; b < k_; ++b) M(i, b) = plane_theta(P, k_, pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(b)], T_).v;
      Eigen::PartialPivLU<CMatrix> lu(M);
      if (!(lu.rcond() > 1e-12))
        throw Error(ErrorCode::DegenerateRadius, kModule, "theta basis evaluation matrix is singular");
      points_.push_back(std::move(pts));
      lu_.push_back(std::move(lu));
    }
  }

  int size() const { return size_; }

  CVector coefficients(const RVector& q) const {
    CVector out = CVector::Ones(1);
    for (int j = 0; j < n_; ++j) {
      const Cplx qj(q(2 * j), q(2 * j + 1));
      CVector v(k_);
      for (int i = 0; i < k_; ++i)
        v(i) = plane_theta(planes_[static_cast<std::size_t>(j)], k_, points_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)], qj, T_).v;
      const CVector alpha = lu_[static_cast<std::size_t>(j)].solve(v);
      // Tensor index sum b_j k^j: earlier planes vary fastest.
      CVector next(out.size() * k_);
      for (int b = 0; b < k_; ++b) next.segment(b * out.size(), out.size()) = alpha(b) * out;
      out = std::move(next);
    }
    return out;
  }

  Jet jet(const CVector& c, const RVector& z) const {
    std::vector<std::vector<Jet1>> f(static_cast<std::size_t>(n_));
    for (int j = 0; j < n_; ++j) {
      const Cplx zj(z(2 * j), z(2 * j + 1));
      auto& row = f[static_cast<std::size_t>(j)];
      if (n_ > 1 && cached_row(j, zj, row)) continue;
      row.resize(static_cast<std::size_t>(k_));
      for (int b = 0; b < k_; ++b)
        row[static_cast<std::size_t>(b)] = plane_theta(planes_[static_cast<std::size_t>(j)], k_, zj, points_[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)], T_);
      if (n_ > 1) store_row(j, zj, row);
    }
    if (n_ == 1) {
      Jet1 s{};
      for (int b = 0; b < k_; ++b) {
        const Jet1& g = f[0][static_cast<std::size_t>(b)];
        s.v += c(b) * g.v;
        s.a += c(b) * g.a;
        s.aa += c(b) * g.aa;
      }
      return product_jet(1, k_, &s);
    }
    if (n_ == 2) {
      // Contract the first plane, then the second; product_jet is linear in each factor.
      Jet1 v{}, a0{}, a1{};
      for (int b1 = 0; b1 < k_; ++b1) {
        Jet1 G{};
        for (int b0 = 0; b0 < k_; ++b0) {
          const Cplx cb = c(b0 + k_ * b1);
          const Jet1& f0 = f[0][static_cast<std::size_t>(b0)];
          G.v += cb * f0.v;
          G.a += cb * f0.a;
          G.aa += cb * f0.aa;
        }
        const Jet1& f1 = f[1][static_cast<std::size_t>(b1)];
        v.v += G.v * f1.v;    // value
        v.a += G.a * f1.v;    // d_0
        v.aa += G.aa * f1.v;  // d_0 d_0
        a1.v += G.v * f1.a;   // d_1
        a1.aa += G.v * f1.aa; // d_1 d_1
        a0.v += G.a * f1.a;   // d_0 d_1
      }
      const double pk = kPi * k_;
      Jet J(2);
      J.v = v.v;
      J.a[0] = v.a;
      J.a[1] = a1.v;
      J.aa[0][0] = v.aa;
      J.aa[1][1] = a1.aa;
      J.aa[0][1] = J.aa[1][0] = a0.v;
      J.ab[0][0] = J.ab[1][1] = -pk * J.v;
      return J;
    }
    Jet sum(n_);
    std::array<int, kMaxComplexDim> idx{};
    std::array<Jet1, kMaxComplexDim> g{};
    for (int flat = 0; flat < size_; ++flat) {
      int r = flat;
      for (int j = 0; j < n_; ++j) {
        idx[j] = r % k_;
        r /= k_;
      }
      if (c(flat) == Cplx(0.0)) continue;
      for (int j = 0; j < n_; ++j) g[j] = f[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx[j])];
      sum += c(flat) * product_jet(n_, k_, g.data());
    }
    return sum;
  }

 private:
  std::vector<Cplx> spread_points(const Plane& P) const {
    // Rank-1 lattice {(b + s1)/k e1 + frac((b g + s2)/k) e2}; g maximizes the shortest vector.
    int best_g = 1;
    double best_len = -1.0;
    for (int g = 1; g < std::max(2, k_); ++g) {
      double shortest = std::numeric_limits<double>::infinity();
      for (int b = 1; b < k_; ++b)
        for (int w = -1; w <= 0; ++w) {
          const double t2 = frac(static_cast<double>(b) * g / k_) + w;
          shortest = std::min(shortest, std::abs(static_cast<double>(b) / k_ * P.e1 + t2 * P.e2));
        }
      shortest = std::min(shortest, std::min(std::abs(P.e1), std::abs(P.e2)));
      if (k_ == 1 || shortest > best_len + 1e-12) {
        best_len = shortest;
        best_g = g;
      }
    }
    std::vector<Cplx> pts;
    for (int b = 0; b < k_; ++b) {
      const double t1 = (b + 0.1234) / k_;
      const double t2 = frac((static_cast<double>(b) * best_g + 0.3071) / k_);
      pts.push_back(t1 * P.e1 + t2 * P.e2);
    }
    return pts;
  }

  // Product-grid samples share plane coordinates, so plane rows are memoized (exact keys).
  using RowKey = std::tuple<int, double, double>;
  bool cached_row(int j, Cplx z, std::vector<Jet1>& row) const {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache_.find(RowKey{j, z.real(), z.imag()});
    if (it == cache_.end()) return false;
    row = it->second;
    return true;
  }
  void store_row(int j, Cplx z, const std::vector<Jet1>& row) const {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_.size() >= kCacheRows) cache_.clear();
    cache_.emplace(RowKey{j, z.real(), z.imag()}, row);
  }
  static constexpr std::size_t kCacheRows = 1u << 16;
  mutable std::mutex cache_mutex_;
  mutable std::map<RowKey, std::vector<Jet1>> cache_;

  int n_, k_;
  double T_;
  std::vector<Plane> planes_;
  int size_ = 1;
  std::vector<std::vector<Cplx>> points_;
  std::vector<Eigen::PartialPivLU<CMatrix>> lu_;
};

namespace {

std::shared_ptr<const ThetaBasis> theta_basis(const SectionSpace& sp, double tail) {
  static std::mutex mu;
  static std::map<std::tuple<const void*, std::string, int, double>, std::shared_ptr<const ThetaBasis>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(static_cast<const void*>(sp.torus.get()), sp.torus->name(), sp.k, tail);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_shared<ThetaBasis>(sp, truncation_radius(tail) / sp.unit())).first;
  return it->second;
}

}  // namespace

namespace {

Jet plain_jet(const PlainField& f, int n, int k, const RVector& z) {
  Jet J(n);
  const double u = std::sqrt(metric_scale(k));
  J.v = f.constant;
  for (int j = 0; j < n; ++j) {
    const Cplx w(u * z(2 * j), u * z(2 * j + 1));
    const auto at = [](const std::vector<Cplx>& c, int j) { return j < static_cast<int>(c.size()) ? c[static_cast<std::size_t>(j)] : Cplx(0.0); };
    J.v += at(f.linear, j) * w + at(f.antilinear, j) * std::conj(w) + at(f.quadratic, j) * w * w;
    J.a[j] = u * at(f.linear, j) + 2.0 * u * at(f.quadratic, j) * w;
    J.b[j] = u * at(f.antilinear, j);
    J.aa[j][j] = 2.0 * u * u * at(f.quadratic, j);
  }
  return J;
}

void add_scaled(std::vector<Cplx>& a, const std::vector<Cplx>& b, Cplx s) {
  if (a.size() < b.size()) a.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += s * b[i];
}

}  // namespace

SectionExpansion::SectionExpansion(SectionSpace space, SectionMode mode, double tail)
    : space_(std::move(space)), mode_(mode), tail_(tail) {
  if (space_.torus && mode_ == SectionMode::Periodized) {
    basis_ = theta_basis(space_, tail_);
    coeffs_ = CVector::Zero(basis_->size());
  }
}

void SectionExpansion::add_term(const SectionTerm& t) {
  if (!space_.contains(t.center)) throw Error(ErrorCode::CenterOutsideDomain, kModule, "term center outside the chart");
  terms_.push_back(t);
  if (!basis_) return;
  if (!t.averaged) {
    coeffs_ += t.weight * basis_->coefficients(t.center);
    return;
  }
  const double h = static_cast<double>(space_.isotropy(t.center).size());
  for (int g = 0; g < space_.group_order(); ++g)
    coeffs_ += (t.weight / h) * basis_->coefficients(space_.group_real(g) * t.center);
}

void SectionExpansion::add(const SectionExpansion& other, Cplx s) {
  if (other.base_.active) {
    base_.active = true;
    base_.constant += s * other.base_.constant;
    add_scaled(base_.linear, other.base_.linear, s);
    add_scaled(base_.antilinear, other.base_.antilinear, s);
    add_scaled(base_.quadratic, other.base_.quadratic, s);
  }
  const bool shared = basis_ && basis_ == other.basis_;
  for (SectionTerm t : other.terms_) {
    t.weight *= s;
    if (shared) terms_.push_back(t);
    else add_term(t);
  }
  if (shared) coeffs_ += s * other.coeffs_;
}

void SectionExpansion::scale(Cplx c) {
  base_.constant *= c;
  for (auto* v : {&base_.linear, &base_.antilinear, &base_.quadratic})
    for (auto& x : *v) x *= c;
  for (auto& t : terms_) t.weight *= c;
  if (basis_) coeffs_ *= c;
}

double SectionExpansion::total_weight() const {
  double s = 0.0;
  for (const auto& t : terms_) s += std::abs(t.weight);
  return s;
}

Jet SectionExpansion::term_jet(const SectionTerm& t, const RVector& z) const {
  PeakSection p;
  p.k = space_.k;
  p.mode = mode_;
  p.cutoff_radius = space_.cutoff_radius();
  p.truncation = truncation_radius(tail_);
  if (!t.averaged) {
    p.center = t.center;
    return t.weight * evaluate_peak(space_, p, z);
  }
  Jet sum(space_.n);
  for (int g = 0; g < space_.group_order(); ++g) {
    p.center = space_.group_real(g) * t.center;
    sum += evaluate_peak(space_, p, z);
  }
  const double h = static_cast<double>(space_.isotropy(t.center).size());
  return (t.weight / h) * sum;
}

Jet SectionExpansion::jet_direct(const RVector& z) const {
  Jet J = base_.active ? plain_jet(base_, space_.n, space_.k, z) : Jet(space_.n);
  for (const auto& t : terms_) J += term_jet(t, z);
  return J;
}

Jet SectionExpansion::jet(const RVector& z) const {
  if (!basis_) return jet_direct(z);
  Jet J = basis_->jet(coeffs_, z);
  if (base_.active) J += plain_jet(base_, space_.n, space_.k, z);
  return J;
}

SectionSample evaluate(const SectionExpansion& s, const RVector& z) { return read_jet(s.jet(z), s.space().k); }

SectionExpansion equivariant_average(const SectionSpace& space, const PeakSection& peak) {
  if (space.group && space.group->dimension() != space.n)
    throw Error(ErrorCode::ActionDoesNotPreserveDomain, kModule, "group dimension differs from the section space");
  for (int g = 0; g < space.group_order(); ++g)
    if (!space.contains(space.group_real(g) * peak.center))
      throw Error(ErrorCode::ActionDoesNotPreserveDomain, kModule, "orbit of the peak center leaves the chart");
  SectionExpansion s(space, peak.mode);
  s.add_term({peak.center, Cplx(1.0), true});
  return s;
}

std::vector<RVector> ball_grid(const SectionSpace& space, const RVector& center, double radius, double h) {
  const int d = 2 * space.n;
  const int M = static_cast<int>(std::floor(radius / h + 1e-12));
  const double step = h / space.unit();
  std::vector<RVector> out;
  std::vector<int> m(static_cast<std::size_t>(d), -M);
  while (true) {
    long s2 = 0;
    for (int v : m) s2 += static_cast<long>(v) * v;
    if (static_cast<double>(s2) * h * h <= radius * radius * (1.0 + 1e-12)) {
      RVector x = center;
      for (int i = 0; i < d; ++i) x(i) += step * m[static_cast<std::size_t>(i)];
      out.push_back(std::move(x));
    }
    int i = 0;
    while (i < d && m[static_cast<std::size_t>(i)] == M) m[static_cast<std::size_t>(i++)] = -M;
    if (i == d) break;
    ++m[static_cast<std::size_t>(i)];
  }
  return out;
}

std::vector<RVector> sample_grid(const SectionSpace& space, double h, const RVector& center, double radius) {
  if (!space.torus) return ball_grid(space, center, radius, h);
  const TorusQuotient& q = *space.torus;
  const int d = q.real_dim();
  std::vector<int> N(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    N[static_cast<std::size_t>(i)] = std::max(1, static_cast<int>(std::ceil(q.basis().col(i).norm() * space.unit() / h - 1e-9)));
  std::vector<RVector> out;
  std::vector<int> m(static_cast<std::size_t>(d), 0);
  while (true) {
    RVector t(d);
    for (int i = 0; i < d; ++i) t(i) = static_cast<double>(m[static_cast<std::size_t>(i)]) / N[static_cast<std::size_t>(i)];
    out.push_back(q.from_lattice(t));
    int i = 0;
    while (i < d && m[static_cast<std::size_t>(i)] == N[static_cast<std::size_t>(i)] - 1) m[static_cast<std::size_t>(i++)] = 0;
    if (i == d) break;
    ++m[static_cast<std::size_t>(i)];
  }
  return out;
}

double pullback_check(const SectionExpansion& s, const std::vector<RVector>& samples) {
  const SectionSpace& sp = s.space();
  double worst = 0.0;
  std::vector<RMatrix> G;
  for (int g = 0; g < sp.group_order(); ++g) G.push_back(sp.group_real(g));
  for (const auto& z : samples) {
    const Cplx v = s.jet(z).v;
    for (const auto& g : G) worst = std::max(worst, std::abs(s.jet(g * z).v - v));
  }
  return worst;
}

double loglog_slope(const std::vector<int>& k, const std::vector<double>& y) {
  const std::size_t m = std::min(k.size(), y.size());
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double x = std::log(static_cast<double>(k[i])), v = std::log(y[i]);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
  }
  const double dm = static_cast<double>(m);
  return (dm * sxy - sx * sy) / (dm * sxx - sx * sx);
}

AsymptoticProfile asymptotic_profile(const SectionBuilder& builder, const std::vector<int>& k_list,
                                     const SampleBuilder& samples) {
  AsymptoticProfile out;
  std::vector<double> v, g, d, gd;
  for (int k : k_list) {
    const SectionExpansion s = builder(k);
    ProfileRow row;
    row.k = k;
    for (const auto& z : samples(s)) {
      const SectionSample e = evaluate(s, z);
      row.sup_value = std::max(row.sup_value, e.abs_value);
      row.sup_grad = std::max(row.sup_grad, e.norm_grad);
      row.sup_dbar = std::max(row.sup_dbar, e.norm_dbar);
      row.sup_grad_dbar = std::max(row.sup_grad_dbar, e.norm_grad_dbar);
      ++row.samples;
    }
    out.rows.push_back(row);
    v.push_back(row.sup_value);
    g.push_back(row.sup_grad);
    d.push_back(row.sup_dbar);
    gd.push_back(row.sup_grad_dbar);
    out.max_value = std::max(out.max_value, row.sup_value);
    out.max_grad = std::max(out.max_grad, row.sup_grad);
  }
  out.exp_value = loglog_slope(k_list, v);
  out.exp_grad = loglog_slope(k_list, g);
  out.exp_dbar = loglog_slope(k_list, d);
  out.exp_grad_dbar = loglog_slope(k_list, gd);
  return out;
}

std::string field_dump_csv(const SectionExpansion& s, const std::vector<RVector>& samples) {
  std::ostringstream os;
  os.precision(12);
  const int d = 2 * s.space().n;
  for (int i = 0; i < d; ++i) os << "x" << i << ",";
  os << "abs_s,grad,dbar\n";
  for (const auto& z : samples) {
    const SectionSample e = evaluate(s, z);
    for (int i = 0; i < d; ++i) os << z(i) << ",";
    os << e.abs_value << "," << e.norm_grad << "," << e.norm_dbar << "\n";
  }
  return os.str();
}

}  // namespace orbisect
