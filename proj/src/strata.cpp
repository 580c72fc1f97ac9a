#include "orbisect/strata.hpp"

#include <algorithm>
#include <limits>
#include <functional>
#include <random>
#include <sstream>

namespace orbisect {
namespace {

constexpr const char* kModule = "strata";

// Orthonormal real basis (columns) of a complex subspace viewed in R^{2n}.
RMatrix real_basis(const ComplexSubspace& v) {
  RMatrix b(2 * v.ambient_dim, 2 * v.rank());
  for (int c = 0; c < v.rank(); ++c) {
    const CVector col = v.basis.col(c);
    b.col(2 * c) = to_real(col);
    b.col(2 * c + 1) = to_real(CVector(Cplx(0.0, 1.0) * col));
  }
  return b;
}

double distance_to_real_span(const RMatrix& b, const RVector& y) {
  if (b.cols() == 0) return y.norm();
  return (y - b * (b.transpose() * y)).norm();
}

// Iterate over all integer vectors in [-r, r]^d.
void for_each_offset(int d, int r, const std::function<void(const Eigen::VectorXi&)>& f) {
  Eigen::VectorXi v = Eigen::VectorXi::Constant(d, -r);
  while (true) {
    f(v);
    int j = 0;
    while (j < d && v(j) == r) v(j++) = -r;
    if (j == d) return;
    ++v(j);
  }
}

// Distance from y to the affine family V + Lambda (y, V in real coordinates).
double distance_to_periodic_span(const TorusQuotient& q, const RMatrix& vb, const RVector& y) {
  RVector t = q.to_lattice(y);
  for (Eigen::Index j = 0; j < t.size(); ++j) t(j) -= std::round(t(j));
  double best = std::numeric_limits<double>::infinity();
  const int reach = vb.cols() == 0 ? 1 : 2;
  for_each_offset(q.real_dim(), reach, [&](const Eigen::VectorXi& off) {
    RVector s = t + off.cast<double>();
    best = std::min(best, distance_to_real_span(vb, q.from_lattice(s)));
  });
  return best;
}

bool lex_less(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.cols()) return a.cols() < b.cols();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Cplx x = a.data()[i], y = b.data()[i];
    if (std::abs(x.real() - y.real()) > 1e-9) return x.real() < y.real();
    if (std::abs(x.imag() - y.imag()) > 1e-9) return x.imag() < y.imag();
  }
  return false;
}

bool offset_less(const RVector& a, const RVector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::abs(a(i) - b(i)) > 1e-12) return a(i) < b(i);
  return false;
}

// Fill heights from `le`, then sort deterministically and rebuild the relation.
StrataPoset finalize(std::vector<Stratum> strata,
                     const std::function<bool(const Stratum&, const Stratum&)>& contained) {
  auto relation = [&](const std::vector<Stratum>& s) {
    std::vector<std::vector<bool>> le(s.size(), std::vector<bool>(s.size(), false));
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = 0; b < s.size(); ++b) le[a][b] = (a == b) || contained(s[a], s[b]);
    return le;
  };
  StrataPoset p;
  p.strata = std::move(strata);
  p.le = relation(p.strata);
  for (std::size_t a = 0; a < p.size(); ++a) p.strata[a].height = p.brute_force_height(static_cast<int>(a));
  std::stable_sort(p.strata.begin(), p.strata.end(), [](const Stratum& x, const Stratum& y) {
    if (x.height != y.height) return x.height < y.height;
    if (x.subgroup.size() != y.subgroup.size()) return x.subgroup.size() < y.subgroup.size();
    if (lex_less(x.fixed_subspace.basis, y.fixed_subspace.basis)) return true;
    if (lex_less(y.fixed_subspace.basis, x.fixed_subspace.basis)) return false;
    return offset_less(x.offset, y.offset);
  });
  p.le = relation(p.strata);
  p.max_index = 0;
  for (std::size_t a = 0; a < p.size(); ++a)
    if (p.strata[a].height == 0 && p.strata[a].subgroup.size() == 1) p.max_index = static_cast<int>(a);
  return p;
}

}  // namespace

int StrataPoset::brute_force_height(int a) const {
  int best = 0;
  for (std::size_t b = 0; b < size(); ++b)
    if (less(a, static_cast<int>(b))) best = std::max(best, 1 + brute_force_height(static_cast<int>(b)));
  return best;
}

bool StrataPoset::axioms_hold() const {
  const std::size_t n = size();
  for (std::size_t a = 0; a < n; ++a) {
    if (!le[a][a]) return false;
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b && le[a][b] && le[b][a]) return false;
      for (std::size_t c = 0; c < n; ++c)
        if (le[a][b] && le[b][c] && !le[a][c]) return false;
    }
  }
  int maxima = 0;
  for (std::size_t a = 0; a < n; ++a) {
    bool maximal = true;
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && le[a][b]) maximal = false;
    if (maximal) ++maxima;
  }
  if (maxima != 1) return false;
  for (std::size_t a = 0; a < n; ++a)
    if (!le[a][static_cast<std::size_t>(max_index)]) return false;
  return true;
}

std::vector<int> StrataPoset::processing_order() const {
  std::vector<int> idx(size());
  for (std::size_t i = 0; i < size(); ++i) idx[i] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return strata[static_cast<std::size_t>(a)].height < strata[static_cast<std::size_t>(b)].height;
  });
  return idx;
}

StrataPoset local_strata(const FiniteUnitaryAction& action) {
  const auto subs = all_subgroups(action);
  std::vector<Stratum> strata;
  std::vector<int> seen_classes;
  for (const auto& info : subs) {
    if (std::find(seen_classes.begin(), seen_classes.end(), info.class_id) != seen_classes.end()) continue;
    ComplexSubspace v = fixed_subspace(action, info.elements);
    if (pointwise_stabilizer(action, v) != info.elements) continue;
    seen_classes.push_back(info.class_id);
    Stratum s;
    s.subgroup = info.elements;
    s.subgroup_class = info.class_id;
    s.fixed_subspace = std::move(v);
    s.offset = RVector::Zero(2 * action.dimension());
    s.normalizer = info.normalizer;
    strata.push_back(std::move(s));
  }
  return finalize(std::move(strata), [&](const Stratum& a, const Stratum& b) {
    for (int g = 0; g < action.order(); ++g)
      if (a.fixed_subspace.subset_of(b.fixed_subspace.transformed(action.element(g)))) return true;
    return false;
  });
}

StrataPoset torus_strata(const TorusQuotient& q) {
  const FiniteUnitaryAction& G = q.group();
  const int d = q.real_dim();
  const auto subs = all_subgroups(G);
  std::mt19937 rng(20240611u);
  std::uniform_real_distribution<double> unif(0.1, 0.9);

  std::vector<Stratum> strata;
  std::vector<int> seen_classes;
  for (const auto& info : subs) {
    if (std::find(seen_classes.begin(), seen_classes.end(), info.class_id) != seen_classes.end()) continue;
    seen_classes.push_back(info.class_id);
    const Subgroup& K = info.elements;
    ComplexSubspace v = fixed_subspace(G, K);
    const RMatrix vb = real_basis(v);
    const int denom = static_cast<int>(K.size());

    // Candidate fixed points: (A_g - I)t integral for all g in K, t in (1/|K|)Z^{2n} / Z^{2n}.
    std::vector<RVector> candidates;
    for_each_offset(d, denom, [&](const Eigen::VectorXi& raw) {
      for (int j = 0; j < d; ++j)
        if (raw(j) < 0 || raw(j) >= denom) return;
      RVector t = raw.cast<double>() / denom;
      for (int g : K) {
        const RVector r = q.lattice_action(g).cast<double>() * t - t;
        for (Eigen::Index j = 0; j < r.size(); ++j)
          if (std::abs(r(j) - std::round(r(j))) > 1e-9) return;
      }
      candidates.push_back(q.from_lattice(t));
    });

    // Components: candidates differing by an element of V + Lambda.
    std::vector<RVector> components;
    for (const auto& x : candidates) {
      bool found = false;
      for (const auto& c : components)
        if (distance_to_periodic_span(q, vb, x - c) < 1e-9) found = true;
      if (!found) components.push_back(x);
    }
    // Effective components: a generic point has isotropy exactly K.
    std::vector<RVector> effective;
    for (const auto& c : components) {
      RVector p = c;
      for (Eigen::Index col = 0; col < vb.cols(); ++col) p += unif(rng) * 0.37 * vb.col(col);
      if (q.isotropy(p, 1e-9) == K) effective.push_back(c);
    }
    // Normalizer elements permute the components of Fix(K); keep one per orbit.
    std::vector<RVector> reps;
    for (const auto& c : effective) {
      bool dup = false;
      for (const auto& r : reps)
        for (int g : info.normalizer)
          if (distance_to_periodic_span(q, vb, q.act(g, c) - r) < 1e-9) dup = true;
      if (!dup) reps.push_back(c);
    }
    int comp = 0;
    for (const auto& r : reps) {
      Stratum s;
      s.subgroup = K;
      s.subgroup_class = info.class_id;
      s.fixed_subspace = v;
      s.offset = q.reduce(r);
      s.normalizer = info.normalizer;
      s.component_id = comp++;
      strata.push_back(std::move(s));
    }
  }
  return finalize(std::move(strata), [&](const Stratum& a, const Stratum& b) {
    const RMatrix bb = real_basis(b.fixed_subspace);
    for (int g = 0; g < G.order(); ++g) {
      if (!a.fixed_subspace.transformed(G.element(g)).subset_of(b.fixed_subspace)) continue;
      if (distance_to_periodic_span(q, bb, q.act(g, a.offset) - b.offset) < 1e-9) return true;
    }
    return false;
  });
}

namespace {

int minimal_containing(const StrataPoset& poset, const std::vector<int>& containing) {
  for (int a : containing) {
    bool below_all = true;
    for (int b : containing)
      if (!poset.le[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) below_all = false;
    if (below_all) return a;
  }
  int best = containing.front();
  for (int a : containing)
    if (poset.strata[static_cast<std::size_t>(a)].height > poset.strata[static_cast<std::size_t>(best)].height) best = a;
  return best;
}

}  // namespace

int singular_descent(const StrataPoset& poset, const FiniteUnitaryAction& action, const RVector& point) {
  if (point.size() != 2 * action.dimension() || !point.allFinite())
    throw Error(ErrorCode::PointNotInAnyStratum, kModule, "point is not in the chart");
  const CVector z = to_complex(point);
  std::vector<int> containing;
  for (std::size_t a = 0; a < poset.size(); ++a) {
    const auto& s = poset.strata[a];
    for (int g = 0; g < action.order(); ++g)
      if (s.fixed_subspace.distance(action.element(g) * z) <= 1e-6) {
        containing.push_back(static_cast<int>(a));
        break;
      }
  }
  if (containing.empty())
    throw Error(ErrorCode::PointNotInAnyStratum, kModule, "distance to every fixed locus exceeds 1e-6");
  return minimal_containing(poset, containing);
}

int singular_descent(const StrataPoset& poset, const TorusQuotient& q, const RVector& point) {
  if (point.size() != q.real_dim() || !point.allFinite())
    throw Error(ErrorCode::PointNotInAnyStratum, kModule, "point is not on the torus");
  std::vector<int> containing;
  for (std::size_t a = 0; a < poset.size(); ++a) {
    const auto& s = poset.strata[a];
    const RMatrix vb = real_basis(s.fixed_subspace);
    for (int g = 0; g < q.group().order(); ++g)
      if (distance_to_periodic_span(q, vb, q.act(g, point) - s.offset) <= 1e-6) {
        containing.push_back(static_cast<int>(a));
        break;
      }
  }
  if (containing.empty())
    throw Error(ErrorCode::PointNotInAnyStratum, kModule, "distance to every fixed locus exceeds 1e-6");
  return minimal_containing(poset, containing);
}

double full_isotropy_fraction(const FiniteUnitaryAction& action, const Stratum& stratum, int samples,
                              unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  const auto& v = stratum.fixed_subspace;
  int hits = 0;
  for (int i = 0; i < samples; ++i) {
    CVector z = CVector::Zero(v.ambient_dim);
    for (int c = 0; c < v.rank(); ++c) z += Cplx(normal(rng), normal(rng)) * v.basis.col(c);
    Subgroup iso;
    for (int g = 0; g < action.order(); ++g)
      if ((action.element(g) * z - z).norm() <= 1e-9 * std::max(1.0, z.norm())) iso.push_back(g);
    if (iso == stratum.subgroup) ++hits;
  }
  return samples > 0 ? static_cast<double>(hits) / samples : 0.0;
}

double distance_to_stratum(const TorusQuotient& q, const Stratum& s, const RVector& x) {
  const RMatrix vb = real_basis(s.fixed_subspace);
  double best = std::numeric_limits<double>::infinity();
  for (int g = 0; g < q.group().order(); ++g)
    best = std::min(best, distance_to_periodic_span(q, vb, q.act(g, x) - s.offset));
  return best;
}

double distance_to_stratum(const FiniteUnitaryAction& action, const Stratum& s, const RVector& x) {
  const CVector z = to_complex(x);
  double best = std::numeric_limits<double>::infinity();
  for (int g = 0; g < action.order(); ++g) best = std::min(best, s.fixed_subspace.distance(action.element(g) * z));
  return best;
}

std::string poset_to_dot(const StrataPoset& poset) {
  std::ostringstream os;
  os << "digraph strata {\n  rankdir=BT;\n";
  for (std::size_t a = 0; a < poset.size(); ++a) {
    const auto& s = poset.strata[a];
    os << "  s" << a << " [label=\"#" << a << " |K|=" << s.subgroup.size() << " dim=" << s.dimension()
       << " h=" << s.height << "\"];\n";
  }
  // Hasse diagram: covering relations only.
  for (std::size_t a = 0; a < poset.size(); ++a)
    for (std::size_t b = 0; b < poset.size(); ++b) {
      if (!poset.less(static_cast<int>(a), static_cast<int>(b))) continue;
      bool cover = true;
      for (std::size_t c = 0; c < poset.size(); ++c)
        if (poset.less(static_cast<int>(a), static_cast<int>(c)) && poset.less(static_cast<int>(c), static_cast<int>(b)))
          cover = false;
      if (cover) os << "  s" << a << " -> s" << b << ";\n";
    }
  os << "}\n";
  return os.str();
}

}  // namespace orbisect
