#include "orbisect/transversality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace orbisect {
namespace {

constexpr const char* kModule = "transversality";

double cell_radius_of(const RMatrix& edges, double unit) {
  const int d = static_cast<int>(edges.cols());
  double best = 0.0;
  for (int mask = 0; mask < (1 << d); ++mask) {
    RVector v = RVector::Zero(edges.rows());
    for (int i = 0; i < d; ++i) v += ((mask >> i) & 1 ? 0.5 : -0.5) * edges.col(i);
    best = std::max(best, v.norm());
  }
  return best * unit;
}

}  // namespace

std::string SampleRegion::describe() const {
  if (whole) return "whole quotient";
  std::ostringstream os;
  os << "g_k ball of radius " << radius << " around (";
  for (Eigen::Index i = 0; i < center.size(); ++i) os << (i ? ", " : "") << center(i);
  os << ")";
  return os.str();
}

SampleRegion whole_region() { return {}; }

SampleRegion ball_region(const RVector& center, double radius) {
  SampleRegion r;
  r.whole = false;
  r.center = center;
  r.radius = radius;
  return r;
}

SampleGrid make_grid(const SectionSpace& space, const SampleRegion& region, double h) {
  SampleGrid g;
  const int d = 2 * space.n;
  if (region.whole && space.torus) {
    const TorusQuotient& q = *space.torus;
    g.points = sample_grid(space, h, RVector(), 0.0);
    g.edges = RMatrix(d, d);
    for (int i = 0; i < d; ++i) {
      const int N = std::max(1, static_cast<int>(std::ceil(q.basis().col(i).norm() * space.unit() / h - 1e-9)));
      g.edges.col(i) = q.basis().col(i) / N;
    }
  } else {
    RVector c = region.center;
    double radius = region.radius;
    if (region.whole) {
      if (space.chart_radius <= 0.0) throw Error(ErrorCode::EmptyRegion, kModule, "unbounded chart needs a ball region");
      c = RVector::Zero(d);
      radius = space.chart_radius * space.unit();
    }
    g.edges = RMatrix::Identity(d, d) * (h / space.unit());
    const double r = cell_radius_of(g.edges, space.unit());
    g.points = ball_grid(space, c, radius + r, h);
  }
  g.cell_radius = cell_radius_of(g.edges, space.unit());
  return g;
}

EtaMeasurement measure_eta(const SectionExpansion& s, const SampleRegion& region, double h) {
  if (!(h > 0.0) || h > 0.25 + 1e-12) throw Error(ErrorCode::ConfigInvalid, kModule, "sample spacing must be in (0, 0.25]");
  const SampleGrid g = make_grid(s.space(), region, h);
  if (g.points.empty()) throw Error(ErrorCode::EmptyRegion, kModule, "no samples in " + region.describe());
  EtaMeasurement m;
  m.eta_star = std::numeric_limits<double>::infinity();
  for (const auto& x : g.points) {
    const SectionSample e = evaluate(s, x);
    const double v = std::max(e.abs_value, e.norm_grad);
    if (v < m.eta_star) {
      m.eta_star = v;
      m.witness = x;
    }
  }
  m.samples = g.points.size();
  return m;
}

const char* to_string(CertStatus s) {
  switch (s) {
    case CertStatus::Certified: return "certified";
    case CertStatus::Failed: return "failed";
    default: return "inconclusive";
  }
}

LipschitzBounds lipschitz_bounds(const SectionExpansion& s, const std::vector<RVector>& samples, double safety) {
  LipschitzBounds b;
  for (const auto& x : samples) {
    const SectionSample e = evaluate(s, x);
    b.L0 = std::max(b.L0, e.norm_grad);
    b.L1 = std::max(b.L1, e.norm_second);
  }
  b.L0 *= safety;
  b.L1 *= safety;
  return b;
}

TransversalityCertificate certify_eta(const SectionExpansion& s, const SampleRegion& region, double eta, double h,
                                      double L0, double L1, int max_depth) {
  TransversalityCertificate c;
  c.eta = eta;
  c.grid_spacing = h;
  c.lipschitz_s = L0;
  c.lipschitz_grad = L1;
  c.region = region.describe();
  const SampleGrid g = make_grid(s.space(), region, h);
  const int d = static_cast<int>(g.edges.cols());
  bool failed = false, inconclusive = false;
  RVector fail_at, open_at;
  // Returns false on a hard failure (pointwise violation at a sample).
  auto check = [&](auto&& self, const RVector& x, double scale, int depth) -> bool {
    ++c.samples;
    const SectionSample e = evaluate(s, x);
    const double r = g.cell_radius * scale;
    if (e.abs_value >= eta + L0 * r || e.norm_grad > eta + L1 * r) return true;
    // |s| falls at most |nabla s(x)| r + L1 r^2 / 2 across the cell.
    if (e.abs_value >= eta + e.norm_grad * r + 0.5 * L1 * r * r) return true;
    if (e.abs_value < eta && e.norm_grad <= eta) {
      if (!failed) fail_at = x;
      failed = true;
      return false;
    }
    if (depth >= max_depth) {
      if (!inconclusive) open_at = x;
      inconclusive = true;
      return true;
    }
    ++c.refined_cells;
    std::vector<int> o(static_cast<std::size_t>(d), -1);
    while (true) {
      RVector y = x;
      for (int i = 0; i < d; ++i) y += (scale / 3.0) * o[static_cast<std::size_t>(i)] * g.edges.col(i);
      if (!self(self, y, scale / 3.0, depth + 1)) return false;
      int i = 0;
      while (i < d && o[static_cast<std::size_t>(i)] == 1) o[static_cast<std::size_t>(i++)] = -1;
      if (i == d) break;
      ++o[static_cast<std::size_t>(i)];
    }
    return true;
  };
  for (const auto& x : g.points)
    if (!check(check, x, 1.0, 0)) break;
  if (failed) {
    c.status = CertStatus::Failed;
    c.witness = fail_at;
  } else if (inconclusive) {
    c.status = CertStatus::Inconclusive;
    c.witness = open_at;
  } else {
    c.status = CertStatus::Certified;
  }
  return c;
}

std::vector<Cplx> transverse_candidates(double delta) {
  std::vector<Cplx> out;
  out.reserve(10981);
  out.emplace_back(0.0, 0.0);
  for (int i = 1; i <= 60; ++i) {
    const double r = delta * i / 60.0;
    for (int j = 0; j < 6 * i; ++j) out.push_back(std::polar(r, 2.0 * kPi * j / (6.0 * i)));
  }
  return out;
}

namespace {

// Near-critical values bucketed on a dense square grid over |v| < extent; distances are capped at `cap`.
class ValueGrid {
 public:
  ValueGrid(double extent, double cap, int per_side)
      : extent_(extent), cell_(2.0 * extent / per_side), cap_(cap), side_(per_side),
        cells_(static_cast<std::size_t>(per_side * per_side)) {}

  void insert(Cplx v) { cells_[static_cast<std::size_t>(idx(v.real()) * side_ + idx(v.imag()))].push_back(v); }

  double distance(Cplx w) const {
    const int cx = idx(w.real()), cy = idx(w.imag());
    double best = cap_;
    for (int r = 0; (r - 1) * cell_ < best && r <= side_; ++r)
      for (int a = std::max(0, cx - r); a <= std::min(side_ - 1, cx + r); ++a)
        for (int b = std::max(0, cy - r); b <= std::min(side_ - 1, cy + r); ++b) {
          if (std::max(std::abs(a - cx), std::abs(b - cy)) != r) continue;
          for (const Cplx& v : cells_[static_cast<std::size_t>(a * side_ + b)]) best = std::min(best, std::abs(v - w));
        }
    return best;
  }

 private:
  int idx(double t) const { return std::clamp(static_cast<int>(std::floor((t + extent_) / cell_)), 0, side_ - 1); }
  double extent_, cell_, cap_;
  int side_;
  std::vector<std::vector<Cplx>> cells_;
};

}  // namespace

LocalValue local_transverse_value(const LocalSamples& f, double sigma, double delta) {
  if (f.f.size() != f.df.size()) throw Error(ErrorCode::ConfigInvalid, kModule, "sample arrays differ in length");
  if (!(sigma > 0.0) || !(delta > 0.0)) throw Error(ErrorCode::ConfigInvalid, kModule, "sigma and delta must be positive");
  const std::vector<Cplx> cand = transverse_candidates(delta);
  const double cap = 2.0 * delta;
  LocalValue out;
  for (double s0 = sigma; s0 >= sigma * 1e-3 * (1.0 - 1e-12); s0 *= 0.95) {
    ++out.thresholds_tried;
    // Values farther than delta + cap from the origin cannot change a capped distance.
    ValueGrid V(delta + cap, cap, 48);
    for (std::size_t i = 0; i < f.f.size(); ++i)
      if (f.df[i] <= s0 && std::abs(f.f[i]) < delta + cap) V.insert(f.f[i]);
    // No perturbation when the origin already clears; otherwise the farthest candidate, first on ties.
    Cplx w{};
    double best = V.distance(w);
    if (best < s0) {
      for (const Cplx& c : cand) {
        const double d = V.distance(c);
        if (d > best) {
          best = d;
          w = c;
        }
      }
    }
    if (best < s0) continue;
    out.w = w;
    out.achieved_sigma = s0;
    out.verified = true;
    for (std::size_t i = 0; i < f.f.size(); ++i)
      if (std::abs(f.f[i] - w) < s0 && f.df[i] <= s0) out.verified = false;
    return out;
  }
  throw Error(ErrorCode::NoAdmissibleValue, kModule, "every candidate within delta is blocked down to sigma*1e-3");
}

const StratumSchedule& PerturbationSchedule::of(int stratum) const {
  for (const auto& s : strata)
    if (s.stratum == stratum) return s;
  throw Error(ErrorCode::ConfigInvalid, kModule, "stratum " + std::to_string(stratum) + " not in schedule");
}

StratumConstants default_constants(const StrataPoset& poset, int stratum, int group_order, int max_element_order,
                                   double R) {
  StratumConstants c;
  const Stratum& st = poset.strata.at(static_cast<std::size_t>(stratum));
  c.m = st.dimension();
  if (c.m == 0) return c;
  const double d = c.m;
  c.C = std::max(group_order * std::pow(std::sqrt(d) / R + 1.0, d) + 1.0, 2.0 * max_element_order);
  return c;
}

namespace {

double recursion_step(double x, int p, double R) { return x + p * std::log(x) + std::log(2.0 * R); }

// log(1/eta) must exceed this for the recursion to decrease strictly and for the admissibility bound.
double admissible_log(int p, double R) {
  return std::max(std::pow(2.0 * R, 1.0 / p), std::pow(2.0 * R, -1.0 / p));
}

// Fills steps and the x_i for the current D; returns whether clause (4) holds.
bool fill(StratumSchedule& st, int p, double x0) {
  st.steps = std::max(1, static_cast<int>(std::ceil(st.C * std::pow(st.D, st.m) - 1e-9)));
  st.log_inv_eta.assign(1, x0);
  for (int i = 1; i <= st.steps; ++i) st.log_inv_eta.push_back(recursion_step(st.log_inv_eta.back(), p, st.R));
  return p * std::log(st.last_log_inv_eta()) < st.D * st.D;
}

}  // namespace

PerturbationSchedule compute_schedule(const StrataPoset& poset, const ScheduleParams& params,
                                      const std::vector<StratumConstants>& constants) {
  if (constants.size() != poset.size()) throw Error(ErrorCode::ConfigInvalid, kModule, "one constant pair per stratum");
  if (params.p < 1 || !(params.eta0 > 0.0 && params.eta0 < 1.0) || !(params.R > 0.0))
    throw Error(ErrorCode::ConfigInvalid, kModule, "need p >= 1, eta0 in (0,1), R > 0");
  PerturbationSchedule out;
  out.p = params.p;
  const int p = params.p;
  for (int idx : poset.processing_order()) {
    StratumSchedule st;
    st.stratum = idx;
    st.height = poset.strata[static_cast<std::size_t>(idx)].height;
    st.C = constants[static_cast<std::size_t>(idx)].C;
    st.m = constants[static_cast<std::size_t>(idx)].m;
    std::vector<const StratumSchedule*> above;
    for (const auto& done : out.strata)
      if (poset.less(idx, done.stratum)) above.push_back(&done);
    double x0 = 0.0, x1 = 0.0;
    if (above.empty()) {
      st.R = params.R;
      x0 = std::log(1.0 / params.eta0);
    } else {
      st.R = params.R;
      double xmax = 0.0;
      for (const auto* t : above) {
        st.R = std::max(st.R, 2.0 * t->C * t->D * (1.0 + 1e-3));
        xmax = std::max(xmax, t->last_log_inv_eta());
      }
      x1 = xmax + std::log(1.0 / 0.49);
      // Back-solve eta_0 from eta_1 (the step map is increasing in x); hi keeps eta_1 on the safe side.
      double lo = 1e-300, hi = x1;
      for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        (recursion_step(mid, p, st.R) < x1 ? lo : hi) = mid;
      }
      x0 = hi;
    }
    if (!(x0 > admissible_log(p, st.R)))
      throw Error(ErrorCode::ScheduleInfeasible, kModule,
                  "stratum " + std::to_string(idx) + ": eta_0 violates the admissibility bound");
    st.D = params.D_start;
    while (!fill(st, p, x0)) {
      st.D += 1.0;
      if (st.D > params.D_cap)
        throw Error(ErrorCode::ScheduleInfeasible, kModule,
                    "stratum " + std::to_string(idx) + ": final Q_p bound not reached below D_cap");
    }
    out.strata.push_back(std::move(st));
  }
  return out;
}

ClauseReport check_schedule(const PerturbationSchedule& s, const StrataPoset& poset) {
  ClauseReport r;
  auto fail = [&](bool& flag, const std::string& why) {
    if (flag && r.failure.empty()) r.failure = why;
    flag = false;
  };
  for (const auto& st : s.strata) {
    const std::string tag = "stratum " + std::to_string(st.stratum) + ": ";
    for (std::size_t i = 1; i < st.log_inv_eta.size(); ++i) {
      const double x = st.log_inv_eta[i], prev = st.log_inv_eta[i - 1];
      if (std::abs(x - recursion_step(prev, s.p, st.R)) > 1e-9 * std::max(1.0, x)) fail(r.recursion, tag + "recursion");
      if (!(x > prev)) fail(r.decreasing, tag + "eta not decreasing");
    }
    if (!(s.p * std::log(st.last_log_inv_eta()) < st.D * st.D)) fail(r.final_q, tag + "final Q_p bound");
    for (const auto& t : s.strata) {
      if (!poset.less(st.stratum, t.stratum)) continue;
      if (st.log_inv_eta.size() < 2 || !(st.log_inv_eta[1] > t.last_log_inv_eta() + std::log(2.0)))
        fail(r.eta_nesting, tag + "eta nesting");
      if (!(st.R > 2.0 * t.C * t.D)) fail(r.radius_nesting, tag + "radius nesting");
    }
  }
  return r;
}

std::vector<double> xalpha_sweep(double C0, int m, int p, double eta0, double R, const std::vector<double>& Ds) {
  std::vector<double> out;
  for (double D : Ds) {
    const int N = std::max(1, static_cast<int>(std::ceil(C0 * std::pow(D, m) - 1e-9)));
    double x = std::log(1.0 / eta0);
    for (int i = 0; i < N; ++i) x = recursion_step(x, p, R);
    out.push_back(std::exp(-p * std::log(x) + (m * p + 1.0) * std::log(D)));
  }
  return out;
}

namespace {

// Deterministic spread of defect probes over the certification grid.
std::vector<RVector> probe_points(const std::vector<RVector>& grid, std::size_t want) {
  std::vector<RVector> out;
  if (grid.empty() || want == 0) return out;
  const std::size_t stride = std::max<std::size_t>(1, grid.size() / want);
  for (std::size_t i = 0; i < grid.size() && out.size() < want; i += stride) out.push_back(grid[i]);
  return out;
}

SampleRegion final_region(const SectionSpace& sp) {
  if (sp.torus) return whole_region();
  if (sp.chart_radius <= 0.0) throw Error(ErrorCode::EmptyRegion, kModule, "chart sections need a chart radius");
  return ball_region(RVector::Zero(2 * sp.n), sp.chart_radius * sp.unit());
}

}  // namespace

GlobalizeResult globalize(const SectionExpansion& initial, const std::map<int, SeparatedLattice>& lattices,
                          const PerturbationSchedule& schedule, const GlobalizeOptions& opt) {
  const SectionSpace& sp = initial.space();
  const double unit = sp.unit();
  const double local_factor = opt.local_spacing_factor > 0.0 ? opt.local_spacing_factor : (sp.n == 1 ? 1.0 / 50 : 0.25);
  const double cert_h = opt.cert_spacing > 0.0 ? opt.cert_spacing : (sp.n == 1 ? 0.1 : 0.25);
  const SampleRegion region = final_region(sp);
  const std::vector<RVector> probes = probe_points(make_grid(sp, region, cert_h).points, opt.defect_samples);

  GlobalizeResult res;
  res.section = initial;
  double budget = 0.0;
  for (const auto& st : schedule.strata) {
    auto it = lattices.find(st.stratum);
    if (it == lattices.end() || it->second.size() == 0) {
      StepLog e;
      e.stratum = st.stratum;
      e.point = -1;
      e.note = it == lattices.end() ? "no lattice for stratum" : "empty lattice";
      res.log.push_back(e);
      continue;
    }
    const SeparatedLattice& L = it->second;
    const double R = L.params.R;
    const auto fams = L.families();
    for (std::size_t a = 0; a < fams.size(); ++a) {
      const int alpha = static_cast<int>(a) + 1;
      const double delta = 0.5 * st.eta(std::min(alpha - 1, st.steps - 1));
      const double sigma = st.eta(std::min(alpha, st.steps));
      std::vector<SectionTerm> pending;
      std::vector<int> pts = fams[a];
      std::sort(pts.begin(), pts.end());
      for (int pi : pts) {
        const RVector& p = L.points[static_cast<std::size_t>(pi)];
        StepLog e;
        e.stratum = st.stratum;
        e.family = alpha;
        e.point = pi;
        e.sigma_target = sigma;
        e.delta = delta;
        const SectionExpansion q = equivariant_average(sp, peak_section(sp, p, initial.mode(), initial.tail()));
        if (std::abs(q.jet(p).v) < 1e-8) {
          e.note = "equivariant average vanishes at the point";
        } else if (!(sigma > 0.0) || !(delta > 0.0)) {
          e.note = "eta below double range";
        } else {
          LocalSamples ls;
          for (const auto& x : ball_grid(sp, p, 1.1 * R, R * local_factor)) {
            const Jet J = res.section.jet(x), Q = q.jet(x);
            if (std::abs(Q.v) < 1e-14) continue;
            const Cplx q2 = Q.v * Q.v;
            double n2 = 0.0;
            for (int j = 0; j < sp.n; ++j) {
              const std::size_t u = static_cast<std::size_t>(j);
              n2 += std::norm((J.a[u] * Q.v - J.v * Q.a[u]) / q2) + std::norm((J.b[u] * Q.v - J.v * Q.b[u]) / q2);
            }
            ls.f.push_back(J.v / Q.v);
            ls.df.push_back(std::sqrt(n2) / unit);
          }
          try {
            const LocalValue v = local_transverse_value(ls, sigma, delta);
            e.w = v.w;
            e.achieved_sigma = v.achieved_sigma;
            if (!v.verified) e.note = "verification failed";
          } catch (const Error& err) {
            if (err.code() != ErrorCode::NoAdmissibleValue) throw;
            e.note = "no admissible value";
          }
        }
        budget += std::abs(e.w);
        res.total_budget += delta;
        e.budget = budget;
        if (e.w != Cplx{}) pending.push_back({p, -e.w, true});
        res.log.push_back(e);
      }
      for (const auto& t : pending) res.section.add_term(t);
    }
    res.max_defect = std::max(res.max_defect, pullback_check(res.section, probes));
  }

  res.measured = measure_eta(res.section, region, cert_h);
  const LipschitzBounds lb = lipschitz_bounds(res.section, make_grid(sp, region, cert_h).points);
  double eta = 0.5 * res.measured.eta_star;
  for (int attempt = 0; attempt <= 10; ++attempt, eta *= 0.5) {
    res.certificate = certify_eta(res.section, region, eta, cert_h, lb.L0, lb.L1, opt.cert_depth);
    if (res.certificate.status == CertStatus::Certified) break;
  }
  return res;
}

std::string step_log_csv(const std::vector<StepLog>& log) {
  std::ostringstream os;
  os.precision(12);
  os << "stratum,family,point,w_re,w_im,sigma_target,achieved_sigma,delta,budget,note\n";
  for (const auto& e : log)
    os << e.stratum << ',' << e.family << ',' << e.point << ',' << e.w.real() << ',' << e.w.imag() << ','
       << e.sigma_target << ',' << e.achieved_sigma << ',' << e.delta << ',' << e.budget << ',' << e.note << '\n';
  return os.str();
}

}  // namespace orbisect
