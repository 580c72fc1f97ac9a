#pragma once

#include <map>
#include <string>
#include <vector>

#include "orbisect/serialize.hpp"

namespace orbisect {

/// Key-value scenario description; see README for the keys.
struct ScenarioConfig {
  std::string preset = "T2_Z2";
  int order = 2;  // C1_Zm_chart
  int k = 40;
  std::vector<int> k_list{25, 50, 100, 200};
  SectionMode mode = SectionMode::Periodized;
  ScheduleParams schedule;
  double lattice_R = 1.0;
  double lattice_D = 1.0;
  double point_R = 0.0;             // 0: just above 2 C D of the top lattice
  double chart_radius = 3.0;        // g_k, chart presets
  double lattice_grid_step = 0.25;  // property (P) grid step, in units of R
  double cert_spacing = 0.0;        // 0: 0.1 (n = 1), 0.25 (n = 2)
  double zero_resolution = 0.0;     // 0: 0.1 (n = 1), 0.5 (n = 2)
  double morse_seed_spacing = 0.0;  // 0: 0.25 (n = 1), 0.5 (n = 2)
  double profile_spacing = 0.05;
  unsigned seed = 12345;
  std::string out_dir = "out";
  int jobs = 1;
  bool verbose = false;

  SpaceTag tag() const;
  int complex_dim() const;
};

ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);
std::string config_to_text(const ScenarioConfig& c);
void validate(const ScenarioConfig& c);

/// Built-in scenarios: t2_z2_k40, t4_z2_k10, c1_profile.
ScenarioConfig preset_scenario(const std::string& name);

struct LatticeStage {
  std::map<int, SeparatedLattice> lattices;
  std::map<int, PropertyPReport> reports;
};

struct PerturbStage {
  GlobalizeResult result;
  PerturbationSchedule schedule;
  ClauseReport clauses;
};

struct AnalyzeStage {
  ZeroSetSample zeros;
  SymplecticReport symplectic;
  double invariance_defect = 0.0;
  int components = -1;         // n >= 2
  bool components_stable = true;
  WindingCount winding;        // T^2 only
  bool has_winding = false;
  MorseReport morse;
};

/// Each stage writes its artifacts under cfg.out_dir and returns what it computed. Downstream stages
/// read upstream artifacts from disk and raise MissingUpstreamArtifact when they are absent.
StrataPoset run_strata(const ScenarioConfig& cfg);
LatticeStage run_lattice(const ScenarioConfig& cfg, bool verify = true);
SectionExpansion run_build(const ScenarioConfig& cfg);
PerturbStage run_perturb(const ScenarioConfig& cfg);
AnalyzeStage run_analyze(const ScenarioConfig& cfg);
AsymptoticProfile run_profile(const ScenarioConfig& cfg);
Json run_report(const ScenarioConfig& cfg);

/// Initial equivariant section: golden-ratio phases over the top-stratum lattice.
SectionExpansion initial_section(const SectionSpace& sp, const SeparatedLattice& top, SectionMode mode);

/// Copy of j with every "timings" member removed, recursively.
Json strip_timings(const Json& j);

}  // namespace orbisect
