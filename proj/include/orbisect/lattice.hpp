#pragma once

#include <memory>
#include <string>
#include <vector>

#include "orbisect/geometry.hpp"
#include "orbisect/strata.hpp"

namespace orbisect {

struct LatticeParams {
  double C = 1.0;   // geometric constant: exclusion radius is C*D
  double D = 1.0;
  int m = 2;
  double R = 1.0;   // covering radius (g_k units)
  double exclusion_radius = 0.0;
  double separation = 1.0;             // guaranteed strong separation after refinements
  double family_constant = 1.0;        // N <= family_constant * D^m
  double distribution_constant = 9.0;  // F_q(s) < distribution_constant * s^{2n} for s >= 1
};

/// {x : ||P_i x|| <= radius_i for all i}; P_i are real orthogonal projectors.
struct ExclusionAtom {
  std::vector<RMatrix> projectors;
  std::vector<double> radii;

  bool contains(const RVector& x, double grow = 0.0) const;
};

enum class RegionKind { Plain, ChartBall, Torus, Point };

struct LatticeRegion {
  RegionKind kind = RegionKind::Plain;
  // Plain: box [lo, hi] when `ball` is false, else ball(center = lo, radius).
  RVector lo, hi;
  bool ball = false;
  double radius = 0.0;           // ChartBall / plain ball radius (stored coordinates)
  std::vector<ExclusionAtom> excluded;
  // Torus: lower strata removed to g_k-distance `radius` (stored as stratum list).
  std::vector<Stratum> removed_strata;
  std::string description;
};

/// Points with a partition into families. Coordinates are "model" coordinates;
/// multiply Euclidean distances by `unit` to obtain g_k distances.
struct SeparatedLattice {
  int real_dim = 2;
  std::vector<RVector> points;
  std::vector<int> family;  // per point
  int num_families = 0;
  LatticeParams params;
  LatticeRegion region;
  double unit = 1.0;
  std::vector<RMatrix> actions;                 // real matrices, identity first; empty = no group
  std::shared_ptr<const TorusQuotient> torus;   // set for torus lattices

  std::size_t size() const { return points.size(); }
  std::vector<std::vector<int>> families() const;
  /// Distance in g_k units, taking the torus into account.
  double distance(const RVector& a, const RVector& b) const;
  /// True when x lies in the region where the covering property is claimed, shrunk by `margin` (g_k).
  bool in_region(const RVector& x, double margin) const;
};

/// Constant of the one-dimensional construction for the cyclic group of the given order.
double lattice_1d_constant(int cyclic_order);

SeparatedLattice lattice_1d(int cyclic_order, double D, double radius);
SeparatedLattice lattice_product(const SeparatedLattice& l1, const SeparatedLattice& l2,
                                 const SeparatedLattice& boundary1, const SeparatedLattice& boundary2);
/// Restrict l1 away from excluded_by_l2 (= N_CD(Sing rho_2)) and refine its partition by l2.
SeparatedLattice lattice_union_refine(const SeparatedLattice& l1, const SeparatedLattice& l2,
                                      const std::vector<ExclusionAtom>& excluded_by_l2);
SeparatedLattice plain_box_lattice(const RVector& lo, const RVector& hi, double D);
SeparatedLattice plain_ball_lattice(const RVector& center, double radius, double D);

SeparatedLattice chart_lattice(const FiniteUnitaryAction& action, double R, double D, int k,
                               double chart_radius);
SeparatedLattice stratum_lattice(std::shared_ptr<const TorusQuotient> quotient, const StrataPoset& poset,
                                 int stratum, double R, double D, int k);

struct PropertyPReport {
  bool covering_ok = true;
  bool separation_ok = true;
  bool distribution_ok = true;
  bool family_count_ok = true;
  long long grid_points_checked = 0;
  long long uncovered = 0;
  long long violating_pairs = 0;
  double min_separation = 0.0;
  double distribution_constant = 0.0;  // max F_q(s) / s^{2n} over samples, s >= 1
  std::vector<double> weighted_sums;   // r = 0..3
  bool ok() const { return covering_ok && separation_ok && distribution_ok && family_count_ok; }
};

PropertyPReport verify_property_p(const SeparatedLattice& lattice, double D, double grid_step,
                                  unsigned seed = 12345u, int jobs = 1);

std::string lattice_to_csv(const SeparatedLattice& lattice);

}  // namespace orbisect
