#include "orbisect/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace orbisect {
namespace {

constexpr const char* kModule = "bundle_sections";

RMatrix planar_basis(LatticeShape shape) {
  RMatrix b(2, 2);
  if (shape == LatticeShape::Square) {
    b << 1.0, 0.0, 0.0, 1.0;
  } else {
    // Unit-covolume lattice spanned by c and c e^{i pi/3}.
    const double c = std::sqrt(2.0 / std::sqrt(3.0));
    b << c, c * 0.5, 0.0, c * std::sqrt(3.0) / 2.0;
  }
  return b;
}

// Linear (mod 2) part of the automorphy sign: exponent k * sum_j a_j b_j + 2 ell.t.
bool phase_invariant(const Eigen::MatrixXi& a, int parity, const RVector& ell) {
  const int d = static_cast<int>(a.rows());
  std::vector<int> t(static_cast<std::size_t>(d), -2);
  auto phase = [&](const Eigen::VectorXi& v) {
    double e = 0.0;
    for (int j = 0; j < d / 2; ++j) e += 0.5 * parity * v(2 * j) * v(2 * j + 1);
    for (int j = 0; j < d; ++j) e += ell(j) * v(j);
    e = std::fmod(e, 1.0);
    if (e < 0) e += 1.0;
    return e;  // phase = exp(2 pi i e)
  };
  while (true) {
    Eigen::VectorXi v(d);
    for (int j = 0; j < d; ++j) v(j) = t[static_cast<std::size_t>(j)];
    const double diff = std::abs(phase(a * v) - phase(v));
    if (diff > 1e-9 && std::abs(diff - 1.0) > 1e-9) return false;
    int j = 0;
    while (j < d && t[static_cast<std::size_t>(j)] == 2) t[static_cast<std::size_t>(j++)] = -2;
    if (j == d) break;
    ++t[static_cast<std::size_t>(j)];
  }
  return true;
}

}  // namespace

TorusQuotient::TorusQuotient(std::string name, std::vector<LatticeShape> shapes,
                             std::shared_ptr<const FiniteUnitaryAction> group)
    : name_(std::move(name)), n_(static_cast<int>(shapes.size())), shapes_(std::move(shapes)),
      group_(std::move(group)) {
  if (group_->dimension() != n_)
    throw Error(ErrorCode::DimensionMismatch, "strata", "group dimension differs from torus dimension");
  basis_ = RMatrix::Zero(2 * n_, 2 * n_);
  for (int j = 0; j < n_; ++j) basis_.block(2 * j, 2 * j, 2, 2) = planar_basis(shapes_[static_cast<std::size_t>(j)]);
  basis_inv_ = basis_.inverse();
  for (int g = 0; g < group_->order(); ++g) {
    RMatrix real = realify(group_->element(g));
    RMatrix lat = basis_inv_ * real * basis_;
    Eigen::MatrixXi ints(lat.rows(), lat.cols());
    for (Eigen::Index i = 0; i < lat.size(); ++i) {
      const double r = std::round(lat.data()[i]);
      if (std::abs(r - lat.data()[i]) > 1e-9)
        throw Error(ErrorCode::LatticeNotPreserved, "strata",
                    "group element " + std::to_string(g) + " does not preserve the period lattice");
      ints.data()[i] = static_cast<int>(r);
    }
    real_action_.push_back(std::move(real));
    lattice_action_.push_back(std::move(ints));
  }
  // Hexagonal planar lattice has minimum c = sqrt(2/sqrt3) ~ 1.07; square has 1.
  shortest_ = 1.0;
  double r2 = 0.0;
  for (auto s : shapes_) {
    const RMatrix b = planar_basis(s);
    const double diag = std::max((b.col(0) + b.col(1)).norm(), (b.col(0) - b.col(1)).norm());
    r2 += 0.25 * diag * diag;
  }
  cell_radius_ = std::sqrt(r2);

  for (int parity = 0; parity < 2; ++parity) {
    const int d = 2 * n_;
    for (int mask = 0; mask < (1 << d); ++mask) {
      RVector ell(d);
      for (int j = 0; j < d; ++j) ell(j) = (mask >> j) & 1 ? 0.5 : 0.0;
      bool ok = true;
      for (int g = 0; g < group_->order() && ok; ++g) ok = phase_invariant(lattice_action_[static_cast<std::size_t>(g)], parity, ell);
      if (ok) {
        characteristic_[parity] = ell;
        break;
      }
    }
  }
}

RVector TorusQuotient::reduce(const RVector& x) const {
  RVector t = to_lattice(x);
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    t(j) -= std::floor(t(j));
    if (t(j) >= 1.0 - 1e-13) t(j) = 0.0;
  }
  return from_lattice(t);
}

RVector TorusQuotient::torus_difference(const RVector& x, const RVector& y) const {
  RVector t = to_lattice(x - y);
  for (Eigen::Index j = 0; j < t.size(); ++j) t(j) -= std::round(t(j));
  // Rounding in skew coordinates can miss the shortest representative by one step.
  RVector best = from_lattice(t);
  const int d = real_dim();
  std::vector<int> off(static_cast<std::size_t>(d), -1);
  while (true) {
    RVector s = t;
    for (int j = 0; j < d; ++j) s(j) += off[static_cast<std::size_t>(j)];
    RVector cand = from_lattice(s);
    if (cand.squaredNorm() < best.squaredNorm() - 1e-15) best = cand;
    int j = 0;
    while (j < d && off[static_cast<std::size_t>(j)] == 1) off[static_cast<std::size_t>(j++)] = -1;
    if (j == d) break;
    ++off[static_cast<std::size_t>(j)];
  }
  return best;
}

Subgroup TorusQuotient::isotropy(const RVector& x, double tol) const {
  Subgroup out;
  for (int g = 0; g < group_->order(); ++g)
    if (torus_distance(act(g, x), x) <= tol) out.push_back(g);
  return out;
}

const RVector& TorusQuotient::characteristic(int k) const {
  const auto& c = characteristic_[k % 2];
  if (!c)
    throw Error(ErrorCode::BundleNotInvariant, kModule,
                "no half-integral characteristic makes L^k invariant under the group");
  return *c;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"T2_Z2", "T2_Z3", "T2_Z4", "T2_Z6",
                                              "T4_Z2", "C2_Z2xZ2_chart", "C1_Zm_chart"};
  return names;
}

bool is_torus_preset(const std::string& name) {
  return name == "T2_Z2" || name == "T2_Z3" || name == "T2_Z4" || name == "T2_Z6" || name == "T4_Z2";
}

bool is_chart_preset(const std::string& name) { return name == "C2_Z2xZ2_chart" || name == "C1_Zm_chart"; }

std::shared_ptr<const FiniteUnitaryAction> cyclic_u1(int m) {
  CMatrix g(1, 1);
  g(0, 0) = std::polar(1.0, 2.0 * kPi / m);
  return std::make_shared<const FiniteUnitaryAction>(build_group(1, m == 1 ? std::vector<CMatrix>{} : std::vector<CMatrix>{g}));
}

std::shared_ptr<const FiniteUnitaryAction> sign_flips_c2() {
  CMatrix a = CMatrix::Identity(2, 2), b = CMatrix::Identity(2, 2);
  a(0, 0) = -1.0;
  b(1, 1) = -1.0;
  return std::make_shared<const FiniteUnitaryAction>(build_group(2, {a, b}));
}

std::shared_ptr<const FiniteUnitaryAction> central_z2(int n) {
  return std::make_shared<const FiniteUnitaryAction>(build_group(n, {CMatrix(-CMatrix::Identity(n, n))}));
}

std::shared_ptr<const TorusQuotient> make_torus_preset(const std::string& name) {
  using S = LatticeShape;
  if (name == "T2_Z2") return std::make_shared<const TorusQuotient>(name, std::vector<S>{S::Square}, cyclic_u1(2));
  if (name == "T2_Z4") return std::make_shared<const TorusQuotient>(name, std::vector<S>{S::Square}, cyclic_u1(4));
  if (name == "T2_Z3") return std::make_shared<const TorusQuotient>(name, std::vector<S>{S::Hexagonal}, cyclic_u1(3));
  if (name == "T2_Z6") return std::make_shared<const TorusQuotient>(name, std::vector<S>{S::Hexagonal}, cyclic_u1(6));
  if (name == "T4_Z2")
    return std::make_shared<const TorusQuotient>(name, std::vector<S>{S::Square, S::Square}, central_z2(2));
  throw Error(ErrorCode::ConfigInvalid, "cli", "unknown torus preset " + name);
}

std::shared_ptr<const FiniteUnitaryAction> make_chart_group(const std::string& name, int order) {
  if (name == "C2_Z2xZ2_chart") return sign_flips_c2();
  if (name == "C1_Zm_chart") return cyclic_u1(order);
  throw Error(ErrorCode::ConfigInvalid, "cli", "unknown chart preset " + name);
}

}  // namespace orbisect
