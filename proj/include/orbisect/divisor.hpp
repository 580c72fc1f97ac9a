#pragma once

#include <string>
#include <vector>

#include "orbisect/transversality.hpp"

namespace orbisect {

struct ZeroPoint {
  RVector x;  // reduced to the fundamental domain on tori
  double abs_value = 0.0;
  double norm_grad = 0.0;
  double norm_del = 0.0;
  double norm_dbar = 0.0;
  double tangent_symplectic_min = 0.0;  // smallest singular value of omega on ker ds (n >= 2; 1 for n = 1)
};

struct ZeroSetSample {
  int n = 1;
  std::vector<ZeroPoint> points;
  std::vector<int> component;  // per point
  int num_components = 0;
  double resolution = 0.0;      // g_k
  double linking_radius = 0.0;  // g_k
  std::size_t seeds = 0;
  std::size_t diverged = 0;  // seeds whose Newton iteration did not converge
};

/// Seeds are grid cells where |s| < eta or |s| <= L0 * (cell radius); each is Gauss-Newton projected onto
/// {s = 0} (minimum-norm steps) to |s| < 1e-10, then merged within d_k < 0.05 and linked at 2 * resolution.
ZeroSetSample zero_set(const SectionExpansion& s, const TransversalityCertificate& cert, double resolution,
                       const SampleRegion& region = whole_region());

/// Winding numbers of s around the cells of a grid over the fundamental domain of T^2, each edge split
/// into `substeps` pieces. Sum and the number of cells with nonzero winding.
struct WindingCount {
  long total = 0;
  std::size_t cells = 0;
  std::size_t nonzero_cells = 0;
};
WindingCount winding_count(const SectionExpansion& s, double spacing, int substeps = 4);

struct SymplecticReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double min_del_minus_dbar = 0.0;
  double min_tangent_symplectic = 0.0;
  bool ok() const { return checked > 0 && failures == 0; }
};

/// |del s| > |dbar s| and (n >= 2) omega on ker ds non-degenerate, at every stored zero.
SymplecticReport verify_symplectic(const ZeroSetSample& z, const SectionExpansion& s);

/// max over zeros z and g in G of the g_k distance from g z to the nearest stored zero (capped at `cap`).
double invariance_check(const ZeroSetSample& z, const SectionSpace& space, double cap = 10.0);

/// Components at linking radius r; ResolutionTooCoarse if the count differs at 1.5 r.
int connectivity(const ZeroSetSample& z, const SectionSpace& space, double linking_radius);
int components_at(const ZeroSetSample& z, const SectionSpace& space, double linking_radius,
                  std::vector<int>* labels = nullptr);

/// Real gradient (2n) and Hessian (2n x 2n) of f = log|s|^2 in g_k units, from the analytic 2-jet.
struct LogNormDerivatives {
  double f = 0.0;
  RVector grad;
  RMatrix hessian;
};
LogNormDerivatives log_norm_derivatives(const SectionExpansion& s, const RVector& x);

/// Central differences of f on the chart coordinates; max relative deviation from the analytic Hessian.
double hessian_fd_deviation(const SectionExpansion& s, const RVector& x, double step_gk = 1e-4);

struct CriticalPoint {
  RVector x;
  double f = 0.0;
  double grad_norm = 0.0;
  RMatrix hessian;
  RVector eigenvalues;
  int index = 0;
  bool degenerate = false;
};

struct MorseReport {
  int n = 1;
  double tube_radius = 0.0;  // g_k
  double c_plus = 0.0;       // |s| <= c_plus d_k(x, Z) estimate
  std::vector<CriticalPoint> critical_points;
  std::size_t seeds = 0;
  std::size_t degenerate = 0;
  std::size_t index_violations = 0;  // non-degenerate points with index < n
  bool none_found = false;
  double max_hessian_fd_deviation = 0.0;
};

struct MorseOptions {
  double tube_radius = 0.0;   // 0: eta / (2 c_plus)
  double seed_spacing = 0.0;  // 0: 0.25 for n = 1, 0.5 otherwise
  int max_iterations = 60;
};

/// Newton search for critical points of log|s|^2 outside the tube {|s| < c_plus * c} around Z.
MorseReport morse_analysis(const SectionExpansion& s, const TransversalityCertificate& cert,
                           const MorseOptions& opt = {}, const SampleRegion& region = whole_region());

std::string zero_set_csv(const ZeroSetSample& z);

}  // namespace orbisect
