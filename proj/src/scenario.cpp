#include "orbisect/scenario.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace orbisect {
namespace {

constexpr const char* kModule = "scenario";
namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigInvalid, kModule, key + ": not a number: '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw Error(ErrorCode::ConfigInvalid, kModule, key + ": not an integer");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::ConfigInvalid, kModule, key + ": not a boolean");
}

std::string path(const ScenarioConfig& c, const std::string& file) { return (fs::path(c.out_dir) / file).string(); }

void ensure_out(const ScenarioConfig& c) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) throw Error(ErrorCode::ConfigInvalid, kModule, "cannot create " + c.out_dir + ": " + ec.message());
}

void write_json(const ScenarioConfig& c, const std::string& file, const Json& j) {
  write_text_file(path(c, file), j.dump(2) + "\n");
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void say(const ScenarioConfig& c, const std::string& msg) {
  if (c.verbose) std::cerr << "[orbisect] " << msg << "\n";
}

std::shared_ptr<const TorusQuotient> torus_of(const ScenarioConfig& c) {
  if (!is_torus_preset(c.preset))
    throw Error(ErrorCode::ConfigInvalid, kModule, "stage needs a torus preset, got " + c.preset);
  return make_torus_preset(c.preset);
}

StrataPoset poset_of(const ScenarioConfig& c) {
  if (is_torus_preset(c.preset)) return torus_strata(*make_torus_preset(c.preset));
  return local_strata(*make_chart_group(c.preset, c.order));
}

int max_element_order(const FiniteUnitaryAction& g) {
  int m = 1;
  for (int i = 0; i < g.order(); ++i) m = std::max(m, g.element_order(i));
  return m;
}

Json config_json(const ScenarioConfig& c) {
  Json j;
  j["preset"] = c.preset;
  j["order"] = c.order;
  j["k"] = c.k;
  j["k_list"] = c.k_list;
  j["mode"] = to_string(c.mode);
  j["p"] = c.schedule.p;
  j["eta0"] = c.schedule.eta0;
  j["R"] = c.schedule.R;
  j["D_start"] = c.schedule.D_start;
  j["D_cap"] = c.schedule.D_cap;
  j["lattice_R"] = c.lattice_R;
  j["lattice_D"] = c.lattice_D;
  j["point_R"] = c.point_R;
  j["chart_radius"] = c.chart_radius;
  j["lattice_grid_step"] = c.lattice_grid_step;
  j["cert_spacing"] = c.cert_spacing;
  j["zero_resolution"] = c.zero_resolution;
  j["morse_seed_spacing"] = c.morse_seed_spacing;
  j["profile_spacing"] = c.profile_spacing;
  j["seed"] = c.seed;
  return j;
}

// Lattices of every stratum; point strata get R just above 2 C D of the top lattice.
LatticeStage build_lattices(const ScenarioConfig& cfg, const StrataPoset& poset, bool verify) {
  LatticeStage st;
  if (is_chart_preset(cfg.preset)) {
    auto G = make_chart_group(cfg.preset, cfg.order);
    const double unit = std::sqrt(metric_scale(cfg.k));
    auto l = chart_lattice(*G, cfg.lattice_R, cfg.lattice_D, cfg.k, cfg.chart_radius / unit);
    if (verify) st.reports.emplace(poset.max_index, verify_property_p(l, cfg.lattice_D, cfg.lattice_grid_step * cfg.lattice_R, cfg.seed, cfg.jobs));
    st.lattices.emplace(poset.max_index, std::move(l));
    return st;
  }
  auto q = torus_of(cfg);
  auto top = stratum_lattice(q, poset, poset.max_index, cfg.lattice_R, cfg.lattice_D, cfg.k);
  const double point_R = cfg.point_R > 0.0 ? cfg.point_R : 2.0 * top.params.C * top.params.D * (1.0 + 1e-3);
  for (std::size_t i = 0; i < poset.size(); ++i) {
    const int idx = static_cast<int>(i);
    SeparatedLattice l = idx == poset.max_index ? top : stratum_lattice(q, poset, idx, point_R, cfg.lattice_D, cfg.k);
    if (verify) {
      const double R = l.params.R;
      st.reports.emplace(idx, verify_property_p(l, cfg.lattice_D, cfg.lattice_grid_step * R, cfg.seed, cfg.jobs));
    }
    st.lattices.emplace(idx, std::move(l));
  }
  return st;
}

PerturbationSchedule schedule_of(const ScenarioConfig& cfg, const StrataPoset& poset) {
  auto q = torus_of(cfg);
  std::vector<StratumConstants> constants;
  for (std::size_t i = 0; i < poset.size(); ++i)
    constants.push_back(default_constants(poset, static_cast<int>(i), q->group().order(), max_element_order(q->group()),
                                          cfg.schedule.R));
  return compute_schedule(poset, cfg.schedule, constants);
}

}  // namespace

SpaceTag ScenarioConfig::tag() const {
  return {preset, order, is_chart_preset(preset) ? chart_radius / std::sqrt(metric_scale(k)) : 0.0};
}

int ScenarioConfig::complex_dim() const {
  if (is_torus_preset(preset)) return make_torus_preset(preset)->n();
  return make_chart_group(preset, order)->dimension();
}

ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigInvalid, kModule, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (key == "preset") c.preset = v;
    else if (key == "order") c.order = to_int(key, v);
    else if (key == "k") c.k = to_int(key, v);
    else if (key == "k_list") {
      c.k_list.clear();
      std::istringstream ks(v);
      std::string item;
      while (std::getline(ks, item, ',')) c.k_list.push_back(to_int(key, trim(item)));
    } else if (key == "mode") c.mode = section_mode_from_string(v);
    else if (key == "p") c.schedule.p = to_int(key, v);
    else if (key == "eta0") c.schedule.eta0 = to_double(key, v);
    else if (key == "R") c.schedule.R = to_double(key, v);
    else if (key == "D_start") c.schedule.D_start = to_double(key, v);
    else if (key == "D_cap") c.schedule.D_cap = to_double(key, v);
    else if (key == "lattice_R") c.lattice_R = to_double(key, v);
    else if (key == "lattice_D") c.lattice_D = to_double(key, v);
    else if (key == "point_R") c.point_R = to_double(key, v);
    else if (key == "chart_radius") c.chart_radius = to_double(key, v);
    else if (key == "lattice_grid_step") c.lattice_grid_step = to_double(key, v);
    else if (key == "cert_spacing") c.cert_spacing = to_double(key, v);
    else if (key == "zero_resolution") c.zero_resolution = to_double(key, v);
    else if (key == "morse_seed_spacing") c.morse_seed_spacing = to_double(key, v);
    else if (key == "profile_spacing") c.profile_spacing = to_double(key, v);
    else if (key == "seed") c.seed = static_cast<unsigned>(to_int(key, v));
    else if (key == "out") c.out_dir = v;
    else if (key == "jobs") c.jobs = to_int(key, v);
    else if (key == "verbose") c.verbose = to_bool(key, v);
    else throw Error(ErrorCode::ConfigInvalid, kModule, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  validate(c);
  return c;
}

ScenarioConfig load_config(const std::string& p) {
  std::string text;
  try {
    text = read_text_file(p);
  } catch (const Error&) {
    throw Error(ErrorCode::ConfigInvalid, kModule, "cannot read config " + p);
  }
  return parse_config(text);
}

std::string config_to_text(const ScenarioConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "preset = " << c.preset << "\norder = " << c.order << "\nk = " << c.k << "\nk_list = ";
  for (std::size_t i = 0; i < c.k_list.size(); ++i) os << (i ? ", " : "") << c.k_list[i];
  os << "\nmode = " << to_string(c.mode) << "\np = " << c.schedule.p << "\neta0 = " << c.schedule.eta0
     << "\nR = " << c.schedule.R << "\nD_start = " << c.schedule.D_start << "\nD_cap = " << c.schedule.D_cap
     << "\nlattice_R = " << c.lattice_R << "\nlattice_D = " << c.lattice_D << "\npoint_R = " << c.point_R
     << "\nchart_radius = " << c.chart_radius << "\nlattice_grid_step = " << c.lattice_grid_step
     << "\ncert_spacing = " << c.cert_spacing << "\nzero_resolution = " << c.zero_resolution
     << "\nmorse_seed_spacing = " << c.morse_seed_spacing << "\nprofile_spacing = " << c.profile_spacing
     << "\nseed = " << c.seed << "\nout = " << c.out_dir << "\njobs = " << c.jobs
     << "\nverbose = " << (c.verbose ? "true" : "false") << "\n";
  return os.str();
}

void validate(const ScenarioConfig& c) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::ConfigInvalid, kModule, m); };
  if (!is_torus_preset(c.preset) && !is_chart_preset(c.preset)) bad("unknown preset '" + c.preset + "'");
  if (c.order < 1) bad("order must be positive");
  if (c.k < 1) bad("k must be positive");
  if (c.k_list.empty()) bad("k_list must not be empty");
  for (int k : c.k_list)
    if (k < 1) bad("k_list entries must be positive");
  if (c.schedule.p < 1) bad("p must be positive");
  if (!(c.schedule.eta0 > 0.0 && c.schedule.eta0 < 1.0)) bad("eta0 must lie in (0, 1)");
  for (double x : {c.schedule.R, c.schedule.D_start, c.schedule.D_cap, c.lattice_R, c.lattice_D, c.chart_radius,
                   c.lattice_grid_step, c.profile_spacing})
    if (!(x > 0.0)) bad("numeric fields must be positive");
  for (double x : {c.point_R, c.cert_spacing, c.zero_resolution, c.morse_seed_spacing})
    if (x < 0.0) bad("numeric fields must be positive (0 selects the default)");
  if (c.cert_spacing > 0.25) bad("cert_spacing must be <= 0.25");
  if (c.jobs < 1) bad("jobs must be positive");
}

ScenarioConfig preset_scenario(const std::string& name) {
  ScenarioConfig c;
  if (name == "t2_z2_k40") {
    c.preset = "T2_Z2";
    c.k = 40;
  } else if (name == "t4_z2_k10") {
    c.preset = "T4_Z2";
    c.k = 10;
    c.lattice_D = 0.5;
  } else if (name == "c1_profile") {
    c.preset = "C1_Zm_chart";
    c.order = 2;
    c.mode = SectionMode::Cutoff;
    c.k_list = {25, 50, 100, 200};
  } else {
    throw Error(ErrorCode::ConfigInvalid, kModule, "unknown scenario '" + name + "'");
  }
  c.out_dir = "out_" + name;
  return c;
}

SectionExpansion initial_section(const SectionSpace& sp, const SeparatedLattice& top, SectionMode mode) {
  SectionExpansion s(sp, mode);
  const double norm = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, top.size())));
  for (std::size_t j = 0; j < top.size(); ++j) {
    const double phase = std::fmod((static_cast<double>(j) + 1.0) * 0.6180339887, 1.0);
    s.add_term({top.points[j], std::polar(norm, 2.0 * kPi * phase), true});
  }
  return s;
}

Json strip_timings(const Json& j) {
  if (j.is_object()) {
    Json out = Json::object();
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key() != "timings") out[it.key()] = strip_timings(it.value());
    return out;
  }
  if (j.is_array()) {
    Json out = Json::array();
    for (const auto& e : j) out.push_back(strip_timings(e));
    return out;
  }
  return j;
}

StrataPoset run_strata(const ScenarioConfig& cfg) {
  validate(cfg);
  ensure_out(cfg);
  Stopwatch sw;
  StrataPoset poset = poset_of(cfg);
  Json j = to_json(poset);
  j["preset"] = cfg.preset;
  j["timings"] = {{"seconds", sw.seconds()}};
  write_json(cfg, "strata.json", j);
  say(cfg, std::to_string(poset.size()) + " strata");
  return poset;
}

LatticeStage run_lattice(const ScenarioConfig& cfg, bool verify) {
  validate(cfg);
  ensure_out(cfg);
  Stopwatch sw;
  const StrataPoset poset = poset_of(cfg);
  LatticeStage st = build_lattices(cfg, poset, verify);
  Json j;
  j["preset"] = cfg.preset;
  j["k"] = cfg.k;
  Json per = Json::array();
  for (const auto& [idx, l] : st.lattices) {
    auto it = st.reports.find(idx);
    Json e = lattice_summary(l, it == st.reports.end() ? nullptr : &it->second);
    e["stratum"] = idx;
    e["file"] = "lattice_" + std::to_string(idx) + ".csv";
    write_text_file(path(cfg, e["file"].get<std::string>()), lattice_to_csv(l));
    per.push_back(e);
  }
  j["lattices"] = per;
  j["timings"] = {{"seconds", sw.seconds()}};
  write_json(cfg, "lattices.json", j);
  say(cfg, std::to_string(st.lattices.size()) + " lattices");
  return st;
}

SectionExpansion run_build(const ScenarioConfig& cfg) {
  validate(cfg);
  ensure_out(cfg);
  Stopwatch sw;
  auto q = torus_of(cfg);
  const StrataPoset poset = poset_of(cfg);
  const LatticeStage st = build_lattices(cfg, poset, false);
  const SectionSpace sp = space_from_tag(cfg.tag(), cfg.k);
  SectionExpansion s = initial_section(sp, st.lattices.at(poset.max_index), cfg.mode);
  Json j = section_to_json(s, cfg.tag());
  j["timings"] = {{"seconds", sw.seconds()}};
  write_json(cfg, "section_initial.json", j);
  say(cfg, "initial section with " + std::to_string(s.terms().size()) + " terms");
  return s;
}

PerturbStage run_perturb(const ScenarioConfig& cfg) {
  validate(cfg);
  ensure_out(cfg);
  const SectionExpansion initial = section_from_json(read_json_file(path(cfg, "section_initial.json")));
  Stopwatch sw;
  const StrataPoset poset = poset_of(cfg);
  const LatticeStage st = build_lattices(cfg, poset, false);
  PerturbStage out;
  out.schedule = schedule_of(cfg, poset);
  out.clauses = check_schedule(out.schedule, poset);
  Json sj = to_json(out.schedule);
  sj["clauses"] = to_json(out.clauses);
  write_json(cfg, "schedule.json", sj);
  if (!out.clauses.ok())
    throw Error(ErrorCode::ScheduleInfeasible, kModule, "constructed schedule violates " + out.clauses.failure);

  GlobalizeOptions opt;
  opt.cert_spacing = cfg.cert_spacing;
  out.result = globalize(initial, st.lattices, out.schedule, opt);
  const double seconds = sw.seconds();
  write_json(cfg, "section.json", section_to_json(out.result.section, cfg.tag()));
  write_json(cfg, "certificate.json", to_json(out.result.certificate));
  write_text_file(path(cfg, "steps.csv"), step_log_csv(out.result.log));
  Json pj;
  pj["max_defect"] = out.result.max_defect;
  pj["budget_used"] = out.result.log.empty() ? 0.0 : [&] {
    double b = 0.0;
    for (const auto& e : out.result.log) b = std::max(b, e.budget);
    return b;
  }();
  pj["budget_total"] = out.result.total_budget;
  pj["eta_star"] = number(out.result.measured.eta_star);
  pj["steps"] = out.result.log.size();
  pj["terms"] = out.result.section.terms().size();
  pj["certificate"] = "certificate.json";
  pj["section"] = "section.json";
  pj["step_log"] = "steps.csv";
  pj["timings"] = {{"seconds", seconds}};
  write_json(cfg, "perturb.json", pj);
  say(cfg, std::string("certificate ") + to_string(out.result.certificate.status) + " at eta " +
               std::to_string(out.result.certificate.eta));
  if (out.result.certificate.status != CertStatus::Certified)
    throw Error(ErrorCode::TransversalityNotAchieved, kModule,
                std::string("final certificate ") + to_string(out.result.certificate.status) + "; see steps.csv");
  return out;
}

AnalyzeStage run_analyze(const ScenarioConfig& cfg) {
  validate(cfg);
  ensure_out(cfg);
  const SectionExpansion s = section_from_json(read_json_file(path(cfg, "section.json")));
  const TransversalityCertificate cert = certificate_from_json(read_json_file(path(cfg, "certificate.json")));
  Stopwatch sw;
  const SectionSpace& sp = s.space();
  const SampleRegion region =
      sp.torus ? whole_region() : ball_region(RVector::Zero(2 * sp.n), sp.chart_radius * sp.unit());
  AnalyzeStage a;
  const double res = cfg.zero_resolution > 0.0 ? cfg.zero_resolution : (sp.n == 1 ? 0.1 : 0.5);
  a.zeros = zero_set(s, cert, res, region);
  const double t_zero = sw.seconds();
  a.symplectic = verify_symplectic(a.zeros, s);
  a.invariance_defect = invariance_check(a.zeros, sp);
  if (sp.n >= 2) {
    try {
      a.components = connectivity(a.zeros, sp, a.zeros.linking_radius);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ResolutionTooCoarse) throw;
      a.components_stable = false;
      a.components = components_at(a.zeros, sp, a.zeros.linking_radius);
    }
  }
  if (sp.torus && sp.n == 1) {
    a.winding = winding_count(s, 0.25);
    a.has_winding = true;
  }
  MorseOptions mo;
  mo.seed_spacing = cfg.morse_seed_spacing;
  a.morse = morse_analysis(s, cert, mo, region);
  write_text_file(path(cfg, "zeros.csv"), zero_set_csv(a.zeros));

  Json j;
  j["zero_set"] = zero_set_summary(a.zeros);
  j["zero_set"]["file"] = "zeros.csv";
  j["symplectic"] = to_json(a.symplectic);
  j["invariance_defect"] = a.invariance_defect;
  if (sp.n >= 2) {
    j["components"] = a.components;
    j["components_stable"] = a.components_stable;
  }
  if (a.has_winding) j["winding"] = to_json(a.winding);
  j["chern_number"] = sp.torus && sp.n == 1 ? Json(sp.k) : Json(nullptr);
  j["morse"] = to_json(a.morse);
  j["section"] = "section.json";
  j["certificate"] = "certificate.json";
  j["timings"] = {{"zero_set_seconds", t_zero}, {"seconds", sw.seconds()}};
  write_json(cfg, "analysis.json", j);
  say(cfg, std::to_string(a.zeros.points.size()) + " zeros, " + std::to_string(a.morse.critical_points.size()) +
               " critical points");
  return a;
}

AsymptoticProfile run_profile(const ScenarioConfig& cfg) {
  validate(cfg);
  ensure_out(cfg);
  Stopwatch sw;
  const SpaceTag tag = cfg.tag();
  const bool torus = is_torus_preset(cfg.preset);
  auto builder = [&](int k) {
    SpaceTag t = tag;
    if (!torus) t.chart_radius = cfg.chart_radius / std::sqrt(metric_scale(k));
    const SectionSpace sp = space_from_tag(t, k);
    RVector p = RVector::Zero(2 * sp.n);
    if (torus) {
      RVector frac = RVector::Constant(2 * sp.n, 0.2);
      frac(1) = 0.3;
      p = sp.torus->from_lattice(frac);
    }
    return equivariant_average(sp, peak_section(sp, p, cfg.mode));
  };
  auto samples = [&](const SectionExpansion& s) {
    const SectionSpace& sp = s.space();
    if (torus) return sample_grid(sp, cfg.profile_spacing, RVector(), 0.0);
    const double radius = cfg.mode == SectionMode::Cutoff ? 1.05 * sp.cutoff_radius() : cfg.chart_radius;
    return ball_grid(sp, RVector::Zero(2 * sp.n), radius, cfg.profile_spacing);
  };
  AsymptoticProfile prof = asymptotic_profile(builder, cfg.k_list, samples);
  std::ostringstream csv;
  csv.precision(12);
  csv << "k,sup_value,sup_grad,sup_dbar,sup_grad_dbar,samples\n";
  for (const auto& r : prof.rows)
    csv << r.k << ',' << r.sup_value << ',' << r.sup_grad << ',' << r.sup_dbar << ',' << r.sup_grad_dbar << ','
        << r.samples << '\n';
  write_text_file(path(cfg, "profile.csv"), csv.str());
  Json j = to_json(prof);
  j["mode"] = to_string(cfg.mode);
  j["file"] = "profile.csv";
  j["timings"] = {{"seconds", sw.seconds()}};
  write_json(cfg, "profile.json", j);
  return prof;
}

Json run_report(const ScenarioConfig& cfg) {
  validate(cfg);
  const std::vector<std::pair<std::string, std::string>> parts{
      {"strata", "strata.json"},   {"lattices", "lattices.json"}, {"schedule", "schedule.json"},
      {"perturb", "perturb.json"}, {"certificate", "certificate.json"}, {"analysis", "analysis.json"},
      {"profile", "profile.json"}};
  Json report;
  report["scenario"] = config_json(cfg);
  Json artifacts = Json::array();
  Json timings = Json::object();
  for (const auto& [key, file] : parts) {
    if (!fs::exists(path(cfg, file))) continue;
    Json j = read_json_file(path(cfg, file));
    if (j.contains("timings")) timings[key] = j["timings"];
    report[key] = strip_timings(j);
    report[key]["artifact"] = file;
    artifacts.push_back(file);
  }
  if (artifacts.empty())
    throw Error(ErrorCode::MissingUpstreamArtifact, kModule, "no artifacts under " + cfg.out_dir + "; run a stage first");
  report["artifacts"] = artifacts;
  report["versions"] = {{"orbisect", "1.0.0"}, {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                                              std::to_string(EIGEN_MINOR_VERSION)}};
  report["timings"] = timings;
  write_json(cfg, "report.json", report);

  std::ostringstream txt;
  txt << "scenario: " << cfg.preset << ", k = " << cfg.k << ", mode " << to_string(cfg.mode) << "\n";
  if (report.contains("strata")) txt << "strata: " << report["strata"]["count"] << "\n";
  if (report.contains("lattices"))
    for (const auto& l : report["lattices"]["lattices"])
      txt << "lattice " << l["stratum"] << ": " << l["points"] << " points, " << l["families"] << " families"
          << (l.contains("property_p") ? (l["property_p"]["ok"].get<bool>() ? ", property (P) ok" : ", property (P) FAILED") : "")
          << "\n";
  if (report.contains("certificate"))
    txt << "certificate: " << report["certificate"]["status"].get<std::string>() << ", eta = " << report["certificate"]["eta"]
        << "\n";
  if (report.contains("perturb")) txt << "equivariance defect: " << report["perturb"]["max_defect"] << "\n";
  if (report.contains("analysis")) {
    const Json& a = report["analysis"];
    txt << "zeros: " << a["zero_set"]["points"];
    if (a.contains("winding")) txt << " (winding total " << a["winding"]["total"] << ", Chern number " << a["chern_number"] << ")";
    txt << "\nsymplectic check: " << (a["symplectic"]["ok"].get<bool>() ? "ok" : "FAILED")
        << ", min |del s| - |dbar s| = " << a["symplectic"]["min_del_minus_dbar"] << "\n";
    if (a.contains("components")) txt << "components: " << a["components"] << "\n";
    txt << "critical points: " << a["morse"]["critical_points"].size() << ", index violations "
        << a["morse"]["index_violations"] << ", degenerate " << a["morse"]["degenerate"] << "\n";
  }
  if (report.contains("profile"))
    txt << "profile: dbar exponent " << report["profile"]["exp_dbar"] << ", max |s| " << report["profile"]["max_value"]
        << ", max |grad s| " << report["profile"]["max_grad"] << "\n";
  write_text_file(path(cfg, "report.txt"), txt.str());
  return report;
}

}  // namespace orbisect
