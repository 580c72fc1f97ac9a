#pragma once

#include <cstddef>
#include <vector>

#include "orbisect/common.hpp"

namespace orbisect {

/// Sorted list of element indices into a FiniteUnitaryAction.
using Subgroup = std::vector<int>;

/// A finite subgroup of U(n), stored as explicit matrices plus its Cayley table.
class FiniteUnitaryAction {
 public:
  static constexpr double kMatchTol = 1e-9;

  FiniteUnitaryAction(int dimension, std::vector<CMatrix> elements,
                      double unitarity_tol = 1e-12);

  int dimension() const noexcept { return dimension_; }
  int order() const noexcept { return static_cast<int>(elements_.size()); }
  int identity_index() const noexcept { return identity_; }
  const CMatrix& element(int i) const { return elements_.at(static_cast<std::size_t>(i)); }
  const std::vector<CMatrix>& elements() const noexcept { return elements_; }
  int multiply(int a, int b) const { return table_[static_cast<std::size_t>(a * order() + b)]; }
  int inverse(int a) const { return inverses_[static_cast<std::size_t>(a)]; }
  int element_order(int a) const;
  double unitarity_tol() const noexcept { return unitarity_tol_; }

  /// Index of the element equal to m, or -1.
  int find(const CMatrix& m) const;

  Subgroup all_indices() const;
  Subgroup cyclic_subgroup(int generator) const;
  /// Closure of a set of generators under multiplication.
  Subgroup generate(const std::vector<int>& generators) const;
  bool is_subgroup(const Subgroup& s) const;
  Subgroup conjugate(const Subgroup& s, int g) const;

 private:
  int dimension_;
  std::vector<CMatrix> elements_;
  std::vector<int> table_;
  std::vector<int> inverses_;
  int identity_ = 0;
  double unitarity_tol_;
};

/// Orthonormal basis of a complex subspace of C^n (columns).
struct ComplexSubspace {
  int ambient_dim = 0;
  CMatrix basis;  // ambient_dim x rank

  int rank() const { return static_cast<int>(basis.cols()); }
  /// Orthogonal projector onto the subspace.
  CMatrix projector() const;
  bool contains(const CVector& v, double tol = 1e-8) const;
  /// True when this subspace lies inside other.
  bool subset_of(const ComplexSubspace& other, double tol = 1e-8) const;
  bool same_as(const ComplexSubspace& other, double tol = 1e-8) const;
  /// Euclidean distance from v to the subspace.
  double distance(const CVector& v) const;
  ComplexSubspace transformed(const CMatrix& u) const;
};

struct SubgroupInfo {
  Subgroup elements;
  int class_id = 0;                 // conjugacy class label
  std::vector<Subgroup> conjugates; // distinct conjugates, sorted
  Subgroup normalizer;
};

FiniteUnitaryAction build_group(int dimension, const std::vector<CMatrix>& generators,
                                std::size_t cap = 10000, double unitarity_tol = 1e-12);

ComplexSubspace fixed_subspace(const FiniteUnitaryAction& action, const Subgroup& subgroup);

/// {Fix(h) : h != 1} with equal subspaces merged.
std::vector<ComplexSubspace> singular_set(const FiniteUnitaryAction& action);

/// Exhaustive subgroup lattice, ordered by (order, elements).
std::vector<SubgroupInfo> all_subgroups(const FiniteUnitaryAction& action, std::size_t cap = 256);

/// Maximal cyclic subgroups; their union is the whole group.
std::vector<Subgroup> cyclic_cover(const FiniteUnitaryAction& action);

/// Largest subgroup fixing every vector of v.
Subgroup pointwise_stabilizer(const FiniteUnitaryAction& action, const ComplexSubspace& v);

}  // namespace orbisect
