#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "orbisect/geometry.hpp"

namespace orbisect {

inline constexpr int kMaxComplexDim = 4;

/// Covariant 2-jet of a section of L^k at a point, in chart coordinates.
/// a_j = nabla_{z_j} s, b_j = nabla_{zbar_j} s; second index is the inner derivative,
/// e.g. ab[i][j] = nabla_{zbar_i} nabla_{z_j} s.
struct Jet {
  using Row = std::array<Cplx, kMaxComplexDim>;
  int n = 1;
  Cplx v{};
  Row a{}, b{};
  std::array<Row, kMaxComplexDim> aa{}, ab{}, ba{}, bb{};

  Jet() = default;
  explicit Jet(int dim) : n(dim) {}
  Jet& operator+=(const Jet& o);
  Jet& operator*=(Cplx c);
};

inline Jet operator*(Cplx c, Jet j) { return j *= c; }

/// Jet read in g_k-orthonormal coordinates.
struct SectionSample {
  Cplx value{};
  CVector grad;   // (del_1..del_n, dbar_1..dbar_n)
  CVector dbar;   // dbar_1..dbar_n
  double abs_value = 0.0;
  double norm_grad = 0.0;
  double norm_del = 0.0;
  double norm_dbar = 0.0;
  double norm_grad_dbar = 0.0;  // |nabla dbar s|
  double norm_second = 0.0;     // |nabla^2 s|, all four blocks
};

SectionSample read_jet(const Jet& jet, int k);

enum class SectionMode { Cutoff, Periodized };
const char* to_string(SectionMode m);
SectionMode section_mode_from_string(const std::string& s);

/// Where sections live: the flat chart C^n (torus == nullptr) or a torus quotient.
struct SectionSpace {
  int n = 1;
  int k = 1;
  std::shared_ptr<const TorusQuotient> torus;
  std::shared_ptr<const FiniteUnitaryAction> group;  // chart group; the torus group when torus is set
  double chart_radius = 0.0;                         // chart units; 0 = all of C^n

  double unit() const { return std::sqrt(metric_scale(k)); }
  double cutoff_radius() const { return std::pow(static_cast<double>(k), 1.0 / 6.0); }
  int group_order() const;
  RMatrix group_real(int g) const;
  bool contains(const RVector& x) const;
  double distance(const RVector& a, const RVector& b) const;  // g_k units
  /// Isotropy of x (chart: exact; torus: modulo the period lattice).
  Subgroup isotropy(const RVector& x) const;
};

SectionSpace chart_space(int k, std::shared_ptr<const FiniteUnitaryAction> group, double chart_radius = 0.0);
SectionSpace torus_space(int k, std::shared_ptr<const TorusQuotient> torus);

/// Quintic smoothstep bump: 1 on [0, 1/2], 0 on [1, inf), C^2.
double bump(double t);
double bump_d1(double t);
double bump_d2(double t);

/// Plain test fields with the trivial connection (nabla = d), in g_k-normalized coordinates
/// w_j = sqrt(2 pi k) z_j: s = c + sum lin_j w_j + sum anti_j conj(w_j) + sum quad_j w_j^2.
struct PlainField {
  bool active = false;
  Cplx constant{};
  std::vector<Cplx> linear, antilinear, quadratic;
};

struct PeakSection {
  RVector center;
  int k = 1;
  SectionMode mode = SectionMode::Periodized;
  double cutoff_radius = 1.0;  // g_k, cutoff mode
  double truncation = 0.0;     // g_k radius of the translate sum, periodized mode on tori
};

/// Truncation radius at which exp(-d^2/4) (with a first-derivative factor) drops below `tail`.
double truncation_radius(double tail);

PeakSection peak_section(const SectionSpace& space, const RVector& p, SectionMode mode, double tail = 1e-16);
Jet evaluate_peak(const SectionSpace& space, const PeakSection& peak, const RVector& z);

class ThetaBasis;

struct SectionTerm {
  RVector center;
  Cplx weight{1.0, 0.0};
  bool averaged = false;  // weight * (1/|H_p|) sum_{g in G} s_{g p}
};

/// s = base + sum_i w_i s_i. Periodized torus expansions keep a coefficient tensor over a
/// fixed theta basis in sync with the term list so evaluation cost does not grow with the terms.
class SectionExpansion {
 public:
  SectionExpansion() = default;
  SectionExpansion(SectionSpace space, SectionMode mode, double tail = 1e-16);

  const SectionSpace& space() const { return space_; }
  SectionMode mode() const { return mode_; }
  double tail() const { return tail_; }
  const std::vector<SectionTerm>& terms() const { return terms_; }
  const PlainField& base() const { return base_; }
  bool compiled() const { return basis_ != nullptr; }

  void set_base(PlainField f) { base_ = std::move(f); }
  void add_term(const SectionTerm& t);
  void add(const SectionExpansion& other, Cplx scale);
  void scale(Cplx c);
  /// Sum of |w_i|.
  double total_weight() const;

  Jet jet(const RVector& z) const;
  /// Term-by-term evaluation, bypassing the theta basis.
  Jet jet_direct(const RVector& z) const;
  Jet term_jet(const SectionTerm& t, const RVector& z) const;

 private:
  SectionSpace space_;
  SectionMode mode_ = SectionMode::Periodized;
  double tail_ = 1e-16;
  PlainField base_;
  std::vector<SectionTerm> terms_;
  std::shared_ptr<const ThetaBasis> basis_;
  CVector coeffs_;
};

SectionSample evaluate(const SectionExpansion& s, const RVector& z);

/// (1/|H_p|) sum_{g in G} g^* s_p as a one-term expansion.
SectionExpansion equivariant_average(const SectionSpace& space, const PeakSection& peak);

/// Sample points (real coordinates) at g_k spacing h: the whole fundamental domain on a torus,
/// the ball of g_k radius `radius` around `center` in a chart.
std::vector<RVector> sample_grid(const SectionSpace& space, double h, const RVector& center, double radius);
/// Sample points of the g_k ball of the given radius around `center` (cube grid clipped to the ball).
std::vector<RVector> ball_grid(const SectionSpace& space, const RVector& center, double radius, double h);

/// max over samples and g in G of |s(g z) - s(z)|; the lift of G to L^k is trivial in the
/// symmetric gauge.
double pullback_check(const SectionExpansion& s, const std::vector<RVector>& samples);

struct ProfileRow {
  int k = 0;
  double sup_value = 0.0, sup_grad = 0.0, sup_dbar = 0.0, sup_grad_dbar = 0.0;
  std::size_t samples = 0;
};

struct AsymptoticProfile {
  std::vector<ProfileRow> rows;
  // Least-squares slopes of log(sup) against log k; NaN when a column has a nonpositive entry.
  double exp_value = 0.0, exp_grad = 0.0, exp_dbar = 0.0, exp_grad_dbar = 0.0;
  double max_value = 0.0, max_grad = 0.0;  // single constants bounding the columns
};

using SectionBuilder = std::function<SectionExpansion(int k)>;
/// Samples: k -> point set. Spacing must be <= 0.1 in g_k units.
using SampleBuilder = std::function<std::vector<RVector>(const SectionExpansion&)>;

AsymptoticProfile asymptotic_profile(const SectionBuilder& builder, const std::vector<int>& k_list,
                                     const SampleBuilder& samples);

double loglog_slope(const std::vector<int>& k, const std::vector<double>& y);

std::string field_dump_csv(const SectionExpansion& s, const std::vector<RVector>& samples);

}  // namespace orbisect
