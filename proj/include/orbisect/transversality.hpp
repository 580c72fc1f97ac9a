#pragma once

#include <map>
#include <string>
#include <vector>

#include "orbisect/lattice.hpp"
#include "orbisect/sections.hpp"
#include "orbisect/strata.hpp"

namespace orbisect {

/// Whole quotient (tori) or a g_k ball.
struct SampleRegion {
  bool whole = true;
  RVector center;
  double radius = 0.0;  // g_k
  std::string describe() const;
};

SampleRegion whole_region();
SampleRegion ball_region(const RVector& center, double radius);

/// Sample points with the cells they stand for: cell i is x_i + sum_j t_j edge_j, |t_j| <= 1/2.
struct SampleGrid {
  std::vector<RVector> points;
  RMatrix edges;             // model units, columns
  double cell_radius = 0.0;  // g_k, half the longest cell diagonal
};

SampleGrid make_grid(const SectionSpace& space, const SampleRegion& region, double h);

struct EtaMeasurement {
  double eta_star = 0.0;
  RVector witness;
  std::size_t samples = 0;
};

/// eta_star = min over samples of max(|s|, |nabla s|).
EtaMeasurement measure_eta(const SectionExpansion& s, const SampleRegion& region, double h);

enum class CertStatus { Certified, Failed, Inconclusive };
const char* to_string(CertStatus s);

struct TransversalityCertificate {
  double eta = 0.0;
  double grid_spacing = 0.0;
  double lipschitz_s = 0.0;
  double lipschitz_grad = 0.0;
  std::string region;
  CertStatus status = CertStatus::Inconclusive;
  RVector witness;
  std::size_t samples = 0;
  std::size_t refined_cells = 0;
};

struct LipschitzBounds {
  double L0 = 0.0, L1 = 0.0;  // sup |nabla s|, sup |nabla^2 s| on the samples, times the safety factor
};
LipschitzBounds lipschitz_bounds(const SectionExpansion& s, const std::vector<RVector>& samples, double safety = 1.25);

/// Each cell must satisfy |s| >= eta + min(L0 r, |nabla s| r + L1 r^2 / 2) or |nabla s| > eta + L1 r at its
/// sample (r = cell radius);
/// cells that fail only the margins are split into 3^{2n} subcells up to `max_depth` times.
TransversalityCertificate certify_eta(const SectionExpansion& s, const SampleRegion& region, double eta, double h,
                                      double L0, double L1, int max_depth = 3);

/// Complex samples of a local function f and |df| (g_k) on a polydisk.
struct LocalSamples {
  std::vector<Cplx> f;
  std::vector<double> df;
};

struct LocalValue {
  Cplx w{};
  double achieved_sigma = 0.0;
  bool verified = false;
  int thresholds_tried = 0;
};

/// Candidates for w: origin, then rings of radius delta*i/60 with 6i points each (10981 in total).
/// Thresholds s0 = sigma * 0.95^j down to sigma * 1e-3, V(s0) = {f(x) : |df(x)| <= s0}: w = 0 if the origin
/// is at distance >= s0 from V(s0), else the candidate farthest from V(s0) (first on ties) once that
/// distance reaches s0.
LocalValue local_transverse_value(const LocalSamples& f, double sigma, double delta);
std::vector<Cplx> transverse_candidates(double delta);

/// Q_p(eta) = (log 1/eta)^{-p}, evaluated from x = log(1/eta).
inline double q_p_from_log(double x, int p) { return std::pow(x, -static_cast<double>(p)); }

struct StratumSchedule {
  int stratum = 0;
  int height = 0;
  double D = 1.0, R = 1.0, C = 1.0;
  int m = 0;
  int steps = 1;                 // C D^m rounded up
  std::vector<double> log_inv_eta;  // x_i = log(1/eta_i), i = 0..steps (eta underflows doubles quickly)
  double eta(int i) const { return std::exp(-log_inv_eta.at(static_cast<std::size_t>(i))); }
  double last_log_inv_eta() const { return log_inv_eta.back(); }
};

struct ScheduleParams {
  int p = 3;
  double eta0 = 0.01;
  double R = 1.0;
  double D_start = 1.0;
  double D_cap = 256.0;
};

struct PerturbationSchedule {
  int p = 3;
  std::vector<StratumSchedule> strata;  // processing order, top stratum first
  const StratumSchedule& of(int stratum) const;
};

/// Family constant C_tau and exponent m_tau of each stratum's lattice (N <= C D^m).
struct StratumConstants {
  double C = 1.0;
  int m = 0;
};

/// Default constants: m = real dimension of the stratum; C = max(|G| (sqrt(d)/R + 1)^d + 1, 2 * max element order),
/// which bounds both the greedy family count and the exclusion constant of the lattice module.
StratumConstants default_constants(const StrataPoset& poset, int stratum, int group_order, int max_element_order,
                                   double R);

PerturbationSchedule compute_schedule(const StrataPoset& poset, const ScheduleParams& params,
                                      const std::vector<StratumConstants>& constants);

struct ClauseReport {
  bool recursion = true;     // (3)
  bool decreasing = true;    // strict decrease, from admissibility
  bool final_q = true;       // (4)
  bool eta_nesting = true;   // (5)
  bool radius_nesting = true;  // (2)
  std::string failure;
  bool ok() const { return recursion && decreasing && final_q && eta_nesting && radius_nesting; }
};

ClauseReport check_schedule(const PerturbationSchedule& s, const StrataPoset& poset);

/// min over D of Q_p(eta_{C0 D^m}) D^{mp+1}, per D.
std::vector<double> xalpha_sweep(double C0, int m, int p, double eta0, double R, const std::vector<double>& Ds);

struct StepLog {
  int stratum = 0;
  int family = 0;
  int point = 0;
  Cplx w{};
  double sigma_target = 0.0;
  double achieved_sigma = 0.0;
  double delta = 0.0;
  double budget = 0.0;  // running sum |w|
  std::string note;
};

struct GlobalizeOptions {
  double local_spacing_factor = 0.0;  // local grid spacing = R * factor; 0 = 1/50 for n = 1, 1/4 otherwise
  double cert_spacing = 0.0;          // 0 = 0.1 for n = 1, 0.25 otherwise
  int cert_depth = 3;
  std::size_t defect_samples = 256;
};

struct GlobalizeResult {
  SectionExpansion section;
  TransversalityCertificate certificate;
  std::vector<StepLog> log;
  double max_defect = 0.0;       // running pullback defect, max over strata
  double total_budget = 0.0;     // schedule's sum of step deltas
  EtaMeasurement measured;
};

GlobalizeResult globalize(const SectionExpansion& initial, const std::map<int, SeparatedLattice>& lattices,
                          const PerturbationSchedule& schedule, const GlobalizeOptions& opt = {});

std::string step_log_csv(const std::vector<StepLog>& log);

}  // namespace orbisect
