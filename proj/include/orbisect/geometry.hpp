#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "orbisect/common.hpp"
#include "orbisect/group_rep.hpp"

namespace orbisect {

/// omega = 2*pi * sum dx^dy, so [omega/2pi] is integral on unit-covolume lattices.
inline constexpr double kOmegaScale = 2.0 * kPi;

/// Scale factor c_k with g_k = c_k * Euclidean, i.e. d_k = sqrt(c_k) |x - y|.
inline double metric_scale(int k) { return kOmegaScale * k; }

/// Flat Darboux chart C^n / H with the standard complex structure.
struct ModelChart {
  int n = 1;
  int k = 1;
  double chart_radius = 1.0;  // Euclidean radius in chart units
  std::shared_ptr<const FiniteUnitaryAction> group;

  double scale() const { return metric_scale(k); }
  double dist_k(const RVector& a, const RVector& b) const { return std::sqrt(scale()) * (a - b).norm(); }
};

enum class LatticeShape { Square, Hexagonal };

/// T^{2n} = C^n / Lambda, Lambda a product of unit-covolume planar lattices,
/// with a finite group of lattice-preserving unitary maps fixing the origin.
class TorusQuotient {
 public:
  TorusQuotient(std::string name, std::vector<LatticeShape> shapes,
                std::shared_ptr<const FiniteUnitaryAction> group);

  const std::string& name() const noexcept { return name_; }
  int n() const noexcept { return n_; }
  int real_dim() const noexcept { return 2 * n_; }
  const FiniteUnitaryAction& group() const noexcept { return *group_; }
  std::shared_ptr<const FiniteUnitaryAction> group_ptr() const noexcept { return group_; }
  const std::vector<LatticeShape>& shapes() const noexcept { return shapes_; }

  /// Columns are the real lattice basis vectors (block diagonal, interleaved coordinates).
  const RMatrix& basis() const noexcept { return basis_; }
  const RMatrix& basis_inverse() const noexcept { return basis_inv_; }
  /// Integer matrix of group element g in lattice coordinates.
  const Eigen::MatrixXi& lattice_action(int g) const { return lattice_action_.at(static_cast<std::size_t>(g)); }
  const RMatrix& real_action(int g) const { return real_action_.at(static_cast<std::size_t>(g)); }

  RVector to_lattice(const RVector& x) const { return basis_inv_ * x; }
  RVector from_lattice(const RVector& t) const { return basis_ * t; }
  /// Representative with lattice coordinates in [0,1).
  RVector reduce(const RVector& x) const;
  /// Shortest lattice-translate difference x - y - lambda.
  RVector torus_difference(const RVector& x, const RVector& y) const;
  double torus_distance(const RVector& x, const RVector& y) const { return torus_difference(x, y).norm(); }
  RVector act(int g, const RVector& x) const { return real_action(g) * x; }
  /// Elements of G fixing x modulo Lambda.
  Subgroup isotropy(const RVector& x, double tol = 1e-9) const;

  /// Half-integral characteristic making the automorphy data of L^k invariant under G.
  const RVector& characteristic(int k) const;

  /// Lower bound on the Euclidean length of nonzero lattice vectors.
  double shortest_vector() const noexcept { return shortest_; }
  /// Circumradius of the fundamental parallelotope.
  double cell_radius() const noexcept { return cell_radius_; }

 private:
  std::string name_;
  int n_;
  std::vector<LatticeShape> shapes_;
  std::shared_ptr<const FiniteUnitaryAction> group_;
  RMatrix basis_, basis_inv_;
  std::vector<Eigen::MatrixXi> lattice_action_;
  std::vector<RMatrix> real_action_;
  double shortest_ = 1.0;
  double cell_radius_ = 1.0;
  std::optional<RVector> characteristic_[2];  // by parity of k
};

/// Registry names: T2_Z2, T2_Z3, T2_Z4, T2_Z6, T4_Z2, C2_Z2xZ2_chart, C1_Zm_chart.
bool is_torus_preset(const std::string& name);
bool is_chart_preset(const std::string& name);
const std::vector<std::string>& preset_names();

std::shared_ptr<const TorusQuotient> make_torus_preset(const std::string& name);
/// Chart presets; `order` selects m for C1_Zm_chart.
std::shared_ptr<const FiniteUnitaryAction> make_chart_group(const std::string& name, int order = 2);

/// Cyclic group generated by e^{2 pi i / m} acting on C.
std::shared_ptr<const FiniteUnitaryAction> cyclic_u1(int m);
/// {+-1} x {+-1} acting on C^2 by coordinate sign flips.
std::shared_ptr<const FiniteUnitaryAction> sign_flips_c2();
/// {I, -I} on C^n.
std::shared_ptr<const FiniteUnitaryAction> central_z2(int n);

}  // namespace orbisect
