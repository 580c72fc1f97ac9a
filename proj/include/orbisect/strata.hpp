#pragma once

#include <string>
#include <vector>

#include "orbisect/geometry.hpp"
#include "orbisect/group_rep.hpp"

namespace orbisect {

/// One effective isotropy stratum: the image of (component of Fix(K)) in the quotient.
struct Stratum {
  Subgroup subgroup;                // representative K
  int subgroup_class = 0;           // conjugacy class label from all_subgroups
  ComplexSubspace fixed_subspace;   // C^n_K (linear part)
  RVector offset;                   // a point of the component (real coords); zero in charts
  Subgroup normalizer;
  bool effective = true;
  int height = 0;
  int component_id = 0;

  int dimension() const { return 2 * fixed_subspace.rank(); }
};

/// The finite poset S(X) ordered by inclusion of images.
struct StrataPoset {
  std::vector<Stratum> strata;
  std::vector<std::vector<bool>> le;  // le[a][b]  <=>  X_a subset of X_b
  int max_index = 0;

  std::size_t size() const { return strata.size(); }
  bool less(int a, int b) const { return a != b && le[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]; }
  /// Longest strictly increasing chain from a up to the top, by exhaustive search.
  int brute_force_height(int a) const;
  bool axioms_hold() const;
  /// Indices ordered by increasing height (top stratum first).
  std::vector<int> processing_order() const;
};

StrataPoset local_strata(const FiniteUnitaryAction& action);
StrataPoset torus_strata(const TorusQuotient& quotient);

/// Minimal stratum containing a chart point (charts) ...
int singular_descent(const StrataPoset& poset, const FiniteUnitaryAction& action, const RVector& point);
/// ... or a torus point.
int singular_descent(const StrataPoset& poset, const TorusQuotient& quotient, const RVector& point);

/// Fraction of random samples on an effective chart stratum whose isotropy is exactly K.
double full_isotropy_fraction(const FiniteUnitaryAction& action, const Stratum& stratum, int samples,
                              unsigned seed);

/// Distance (chart units) from x to the locus of `stratum` on the torus, over all G-translates.
double distance_to_stratum(const TorusQuotient& quotient, const Stratum& stratum, const RVector& x);
/// Same in a chart: distance to the union of U_g * fixed_subspace.
double distance_to_stratum(const FiniteUnitaryAction& action, const Stratum& stratum, const RVector& x);

std::string poset_to_dot(const StrataPoset& poset);

}  // namespace orbisect
