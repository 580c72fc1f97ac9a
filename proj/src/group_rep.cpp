#include "orbisect/group_rep.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace orbisect {
namespace {

constexpr const char* kModule = "group_rep";

double max_abs(const CMatrix& m) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) r = std::max(r, std::abs(m.data()[i]));
  return r;
}

int find_in(const std::vector<CMatrix>& list, const CMatrix& m) {
  for (std::size_t i = 0; i < list.size(); ++i)
    if (max_abs(list[i] - m) < FiniteUnitaryAction::kMatchTol) return static_cast<int>(i);
  return -1;
}

}  // namespace

FiniteUnitaryAction::FiniteUnitaryAction(int dimension, std::vector<CMatrix> elements,
                                         double unitarity_tol)
    : dimension_(dimension), elements_(std::move(elements)), unitarity_tol_(unitarity_tol) {
  const int n = order();
  if (n == 0) throw Error(ErrorCode::NotASubgroup, kModule, "empty element list");
  const CMatrix eye = CMatrix::Identity(dimension_, dimension_);
  int identities = 0;
  for (int i = 0; i < n; ++i) {
    const CMatrix& u = elements_[static_cast<std::size_t>(i)];
    if (u.rows() != dimension_ || u.cols() != dimension_)
      throw Error(ErrorCode::DimensionMismatch, kModule, "element has wrong shape");
    if (max_abs(u.adjoint() * u - eye) > unitarity_tol_)
      throw Error(ErrorCode::NonUnitaryGenerator, kModule, "element is not unitary");
    if (max_abs(u - eye) < kMatchTol) {
      identity_ = i;
      ++identities;
    }
  }
  if (identities != 1)
    throw Error(ErrorCode::NotASubgroup, kModule, "element list must contain exactly one identity");

  table_.assign(static_cast<std::size_t>(n * n), -1);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const int c = find_in(elements_, element(a) * element(b));
      if (c < 0) throw Error(ErrorCode::NotASubgroup, kModule, "element list not closed");
      table_[static_cast<std::size_t>(a * n + b)] = c;
    }
  inverses_.assign(static_cast<std::size_t>(n), -1);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (multiply(a, b) == identity_) inverses_[static_cast<std::size_t>(a)] = b;
  for (int a = 0; a < n; ++a) {
    const int ord = element_order(a);
    if (ord <= 0 || n % ord != 0)
      throw Error(ErrorCode::NotASubgroup, kModule, "element order does not divide |H|");
  }
}

int FiniteUnitaryAction::element_order(int a) const {
  int x = a;
  for (int k = 1; k <= order(); ++k) {
    if (x == identity_) return k;
    x = multiply(x, a);
  }
  return -1;
}

int FiniteUnitaryAction::find(const CMatrix& m) const { return find_in(elements_, m); }

Subgroup FiniteUnitaryAction::all_indices() const {
  Subgroup s(static_cast<std::size_t>(order()));
  for (int i = 0; i < order(); ++i) s[static_cast<std::size_t>(i)] = i;
  return s;
}

Subgroup FiniteUnitaryAction::cyclic_subgroup(int generator) const {
  return generate({generator});
}

Subgroup FiniteUnitaryAction::generate(const std::vector<int>& generators) const {
  std::set<int> members{identity_};
  std::vector<int> frontier{identity_};
  while (!frontier.empty()) {
    std::vector<int> next;
    for (int x : frontier)
      for (int g : generators) {
        const int y = multiply(x, g);
        if (members.insert(y).second) next.push_back(y);
      }
    frontier = std::move(next);
  }
  return {members.begin(), members.end()};
}

bool FiniteUnitaryAction::is_subgroup(const Subgroup& s) const {
  if (s.empty()) return false;
  std::set<int> members(s.begin(), s.end());
  if (!members.count(identity_)) return false;
  for (int a : s) {
    if (a < 0 || a >= order()) return false;
    for (int b : s)
      if (!members.count(multiply(a, b))) return false;
  }
  return true;
}

Subgroup FiniteUnitaryAction::conjugate(const Subgroup& s, int g) const {
  Subgroup out;
  out.reserve(s.size());
  const int gi = inverse(g);
  for (int a : s) out.push_back(multiply(multiply(g, a), gi));
  std::sort(out.begin(), out.end());
  return out;
}

CMatrix ComplexSubspace::projector() const {
  if (rank() == 0) return CMatrix::Zero(ambient_dim, ambient_dim);
  return basis * basis.adjoint();
}

double ComplexSubspace::distance(const CVector& v) const {
  if (rank() == 0) return v.norm();
  return (v - basis * (basis.adjoint() * v)).norm();
}

bool ComplexSubspace::contains(const CVector& v, double tol) const { return distance(v) <= tol; }

bool ComplexSubspace::subset_of(const ComplexSubspace& other, double tol) const {
  for (int c = 0; c < rank(); ++c)
    if (!other.contains(basis.col(c), tol)) return false;
  return true;
}

bool ComplexSubspace::same_as(const ComplexSubspace& other, double tol) const {
  return rank() == other.rank() && subset_of(other, tol);
}

ComplexSubspace ComplexSubspace::transformed(const CMatrix& u) const {
  return ComplexSubspace{ambient_dim, rank() == 0 ? basis : CMatrix(u * basis)};
}

FiniteUnitaryAction build_group(int dimension, const std::vector<CMatrix>& generators,
                                std::size_t cap, double unitarity_tol) {
  const CMatrix eye = CMatrix::Identity(dimension, dimension);
  for (const auto& g : generators) {
    if (g.rows() != dimension || g.cols() != dimension)
      throw Error(ErrorCode::DimensionMismatch, kModule, "generator has wrong shape");
    if (max_abs(g.adjoint() * g - eye) > unitarity_tol)
      throw Error(ErrorCode::NonUnitaryGenerator, kModule, "generator is not unitary");
  }
  std::vector<CMatrix> elements{eye};
  std::size_t head = 0;
  while (head < elements.size()) {
    const CMatrix x = elements[head++];
    for (const auto& g : generators) {
      CMatrix y = x * g;
      if (find_in(elements, y) < 0) {
        elements.push_back(std::move(y));
        if (elements.size() > cap)
          throw Error(ErrorCode::GroupSizeCapExceeded, kModule,
                      "closure exceeded " + std::to_string(cap) + " elements");
      }
    }
  }
  // Products drift slightly; re-unitarize via polar factor so the action's own check passes.
  for (auto& u : elements) {
    Eigen::JacobiSVD<CMatrix> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
    u = svd.matrixU() * svd.matrixV().adjoint();
  }
  return FiniteUnitaryAction(dimension, std::move(elements), std::max(unitarity_tol, 1e-11));
}

ComplexSubspace fixed_subspace(const FiniteUnitaryAction& action, const Subgroup& subgroup) {
  if (!action.is_subgroup(subgroup))
    throw Error(ErrorCode::NotASubgroup, kModule, "index set is not a subgroup");
  const int n = action.dimension();
  CMatrix stacked(static_cast<Eigen::Index>(n * subgroup.size()), n);
  const CMatrix eye = CMatrix::Identity(n, n);
  for (std::size_t i = 0; i < subgroup.size(); ++i)
    stacked.middleRows(static_cast<Eigen::Index>(i) * n, n) = action.element(subgroup[i]) - eye;
  Eigen::JacobiSVD<CMatrix> svd(stacked, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  std::vector<int> null_cols;
  for (int c = 0; c < n; ++c) {
    const double s = c < sv.size() ? sv(c) : 0.0;
    if (s < 1e-9) null_cols.push_back(c);
  }
  CMatrix basis(n, static_cast<Eigen::Index>(null_cols.size()));
  for (std::size_t c = 0; c < null_cols.size(); ++c)
    basis.col(static_cast<Eigen::Index>(c)) = svd.matrixV().col(null_cols[c]);
  // Deterministic representative: orthonormalize the projector's columns in order.
  if (basis.cols() > 0) {
    const CMatrix proj = basis * basis.adjoint();
    CMatrix q(n, 0);
    for (int c = 0; c < n && q.cols() < basis.cols(); ++c) {
      CVector v = proj.col(c);
      if (q.cols() > 0) v -= q * (q.adjoint() * v);
      const double nv = v.norm();
      if (nv < 1e-6) continue;
      v /= nv;
      // Fix phase: first entry of magnitude > 1e-9 is real positive.
      for (int r = 0; r < n; ++r)
        if (std::abs(v(r)) > 1e-9) {
          v *= std::conj(v(r)) / std::abs(v(r));
          break;
        }
      q.conservativeResize(n, q.cols() + 1);
      q.col(q.cols() - 1) = v;
    }
    basis = q;
  }
  return ComplexSubspace{n, basis};
}

std::vector<ComplexSubspace> singular_set(const FiniteUnitaryAction& action) {
  std::vector<ComplexSubspace> out;
  for (int h = 0; h < action.order(); ++h) {
    if (h == action.identity_index()) continue;
    ComplexSubspace v = fixed_subspace(action, action.cyclic_subgroup(h));
    bool dup = false;
    for (const auto& w : out)
      if (w.same_as(v)) dup = true;
    if (!dup) out.push_back(std::move(v));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ComplexSubspace& a, const ComplexSubspace& b) { return a.rank() > b.rank(); });
  return out;
}

std::vector<SubgroupInfo> all_subgroups(const FiniteUnitaryAction& action, std::size_t cap) {
  if (static_cast<std::size_t>(action.order()) > cap)
    throw Error(ErrorCode::GroupSizeCapExceeded, kModule, "group too large for subgroup enumeration");
  std::set<Subgroup> found;
  std::vector<Subgroup> cyclic;
  for (int h = 0; h < action.order(); ++h) {
    Subgroup c = action.cyclic_subgroup(h);
    if (found.insert(c).second) cyclic.push_back(c);
  }
  // Join every known subgroup with every cyclic subgroup until stable.
  bool grew = true;
  while (grew) {
    grew = false;
    std::vector<Subgroup> current(found.begin(), found.end());
    for (const auto& a : current)
      for (const auto& c : cyclic) {
        std::vector<int> gens(a.begin(), a.end());
        gens.insert(gens.end(), c.begin(), c.end());
        if (found.insert(action.generate(gens)).second) grew = true;
      }
  }
  std::vector<Subgroup> subs(found.begin(), found.end());
  std::sort(subs.begin(), subs.end(), [](const Subgroup& a, const Subgroup& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  std::vector<SubgroupInfo> out;
  std::map<Subgroup, int> class_of;
  int next_class = 0;
  for (const auto& s : subs) {
    SubgroupInfo info;
    info.elements = s;
    std::set<Subgroup> conj;
    for (int g = 0; g < action.order(); ++g) {
      Subgroup c = action.conjugate(s, g);
      conj.insert(c);
      if (c == s) info.normalizer.push_back(g);
    }
    info.conjugates.assign(conj.begin(), conj.end());
    auto it = class_of.find(*conj.begin());
    if (it == class_of.end()) it = class_of.emplace(*conj.begin(), next_class++).first;
    info.class_id = it->second;
    out.push_back(std::move(info));
  }
  return out;
}

std::vector<Subgroup> cyclic_cover(const FiniteUnitaryAction& action) {
  std::set<Subgroup> cyc;
  for (int h = 0; h < action.order(); ++h) cyc.insert(action.cyclic_subgroup(h));
  std::vector<Subgroup> out;
  for (const auto& c : cyc) {
    bool maximal = true;
    for (const auto& d : cyc)
      if (d.size() > c.size() && std::includes(d.begin(), d.end(), c.begin(), c.end())) maximal = false;
    if (maximal) out.push_back(c);
  }
  return out;
}

Subgroup pointwise_stabilizer(const FiniteUnitaryAction& action, const ComplexSubspace& v) {
  Subgroup out;
  for (int g = 0; g < action.order(); ++g) {
    bool fixes = true;
    for (int c = 0; c < v.rank(); ++c)
      if ((action.element(g) * v.basis.col(c) - v.basis.col(c)).norm() > 1e-8) fixes = false;
    if (fixes) out.push_back(g);
  }
  return out;
}

}  // namespace orbisect
