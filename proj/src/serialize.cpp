#include "orbisect/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace orbisect {
namespace {

constexpr const char* kModule = "serialize";

CertStatus cert_status_from_string(const std::string& s) {
  if (s == "certified") return CertStatus::Certified;
  if (s == "failed") return CertStatus::Failed;
  if (s == "inconclusive") return CertStatus::Inconclusive;
  throw Error(ErrorCode::ConfigInvalid, kModule, "unknown certificate status '" + s + "'");
}

Json complex_list(const std::vector<Cplx>& v) {
  Json a = Json::array();
  for (Cplx c : v) a.push_back(to_json(c));
  return a;
}

std::vector<Cplx> complex_list_from(const Json& j) {
  std::vector<Cplx> out;
  for (const auto& e : j) out.push_back(complex_from_json(e));
  return out;
}

}  // namespace

SectionSpace space_from_tag(const SpaceTag& tag, int k) {
  if (is_torus_preset(tag.preset)) return torus_space(k, make_torus_preset(tag.preset));
  if (is_chart_preset(tag.preset)) return chart_space(k, make_chart_group(tag.preset, tag.order), tag.chart_radius);
  throw Error(ErrorCode::ConfigInvalid, kModule, "unknown preset '" + tag.preset + "'");
}

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json to_json(const RVector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

RVector vector_from_json(const Json& j) {
  RVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Json to_json(Cplx c) { return Json::array({c.real(), c.imag()}); }
Cplx complex_from_json(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

Json to_json(const StrataPoset& poset) {
  Json out;
  out["count"] = poset.size();
  out["max_index"] = poset.max_index;
  out["axioms_hold"] = poset.axioms_hold();
  Json strata = Json::array();
  for (std::size_t i = 0; i < poset.size(); ++i) {
    const Stratum& s = poset.strata[i];
    Json e;
    e["index"] = i;
    e["subgroup"] = s.subgroup;
    e["subgroup_class"] = s.subgroup_class;
    e["real_dimension"] = s.dimension();
    e["offset"] = to_json(s.offset);
    e["height"] = s.height;
    e["component"] = s.component_id;
    Json below = Json::array();
    for (std::size_t j = 0; j < poset.size(); ++j)
      if (poset.less(static_cast<int>(j), static_cast<int>(i))) below.push_back(j);
    e["strictly_below"] = below;
    strata.push_back(e);
  }
  out["strata"] = strata;
  return out;
}

Json lattice_summary(const SeparatedLattice& l, const PropertyPReport* report) {
  Json out;
  out["points"] = l.size();
  out["families"] = l.num_families;
  out["region"] = l.region.description;
  out["C"] = l.params.C;
  out["D"] = l.params.D;
  out["m"] = l.params.m;
  out["R"] = l.params.R;
  out["exclusion_radius"] = l.params.exclusion_radius;
  out["separation"] = l.params.separation;
  out["family_constant"] = l.params.family_constant;
  out["distribution_constant"] = l.params.distribution_constant;
  if (report) {
    Json r;
    r["ok"] = report->ok();
    r["covering_ok"] = report->covering_ok;
    r["separation_ok"] = report->separation_ok;
    r["distribution_ok"] = report->distribution_ok;
    r["family_count_ok"] = report->family_count_ok;
    r["grid_points_checked"] = report->grid_points_checked;
    r["uncovered"] = report->uncovered;
    r["violating_pairs"] = report->violating_pairs;
    r["min_separation"] = number(report->min_separation);
    r["measured_distribution_constant"] = number(report->distribution_constant);
    out["property_p"] = r;
  }
  return out;
}

Json section_to_json(const SectionExpansion& s, const SpaceTag& tag) {
  Json out;
  Json space;
  space["preset"] = tag.preset;
  space["order"] = tag.order;
  space["chart_radius"] = tag.chart_radius;
  space["k"] = s.space().k;
  out["space"] = space;
  out["mode"] = to_string(s.mode());
  out["tail"] = s.tail();
  const PlainField& b = s.base();
  if (b.active) {
    Json base;
    base["constant"] = to_json(b.constant);
    base["linear"] = complex_list(b.linear);
    base["antilinear"] = complex_list(b.antilinear);
    base["quadratic"] = complex_list(b.quadratic);
    out["base"] = base;
  }
  Json terms = Json::array();
  for (const auto& t : s.terms()) {
    Json e;
    e["center"] = to_json(t.center);
    e["weight"] = to_json(t.weight);
    e["averaged"] = t.averaged;
    terms.push_back(e);
  }
  out["terms"] = terms;
  return out;
}

SectionExpansion section_from_json(const Json& j) {
  try {
    const Json& sp = j.at("space");
    SpaceTag tag{sp.at("preset").get<std::string>(), sp.at("order").get<int>(), sp.at("chart_radius").get<double>()};
    SectionExpansion s(space_from_tag(tag, sp.at("k").get<int>()), section_mode_from_string(j.at("mode").get<std::string>()),
                       j.at("tail").get<double>());
    if (j.contains("base")) {
      PlainField f;
      f.active = true;
      f.constant = complex_from_json(j["base"].at("constant"));
      f.linear = complex_list_from(j["base"].at("linear"));
      f.antilinear = complex_list_from(j["base"].at("antilinear"));
      f.quadratic = complex_list_from(j["base"].at("quadratic"));
      s.set_base(f);
    }
    for (const auto& e : j.at("terms"))
      s.add_term({vector_from_json(e.at("center")), complex_from_json(e.at("weight")), e.at("averaged").get<bool>()});
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, kModule, std::string("malformed section: ") + e.what());
  }
}

Json to_json(const PerturbationSchedule& s) {
  Json out;
  out["p"] = s.p;
  Json strata = Json::array();
  for (const auto& st : s.strata) {
    Json e;
    e["stratum"] = st.stratum;
    e["height"] = st.height;
    e["D"] = st.D;
    e["R"] = st.R;
    e["C"] = st.C;
    e["m"] = st.m;
    e["steps"] = st.steps;
    e["log_inv_eta"] = st.log_inv_eta;
    e["eta_1"] = number(st.log_inv_eta.size() > 1 ? st.eta(1) : st.eta(0));
    e["eta_last"] = number(std::exp(-st.last_log_inv_eta()));
    strata.push_back(e);
  }
  out["strata"] = strata;
  return out;
}

PerturbationSchedule schedule_from_json(const Json& j) {
  try {
    PerturbationSchedule s;
    s.p = j.at("p").get<int>();
    for (const auto& e : j.at("strata")) {
      StratumSchedule st;
      st.stratum = e.at("stratum").get<int>();
      st.height = e.at("height").get<int>();
      st.D = e.at("D").get<double>();
      st.R = e.at("R").get<double>();
      st.C = e.at("C").get<double>();
      st.m = e.at("m").get<int>();
      st.steps = e.at("steps").get<int>();
      st.log_inv_eta = e.at("log_inv_eta").get<std::vector<double>>();
      s.strata.push_back(std::move(st));
    }
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, kModule, std::string("malformed schedule: ") + e.what());
  }
}

Json to_json(const ClauseReport& r) {
  Json out;
  out["recursion"] = r.recursion;
  out["decreasing"] = r.decreasing;
  out["final_q"] = r.final_q;
  out["eta_nesting"] = r.eta_nesting;
  out["radius_nesting"] = r.radius_nesting;
  out["ok"] = r.ok();
  out["failure"] = r.failure;
  return out;
}

Json to_json(const TransversalityCertificate& c) {
  Json out;
  out["status"] = to_string(c.status);
  out["eta"] = number(c.eta);
  out["grid_spacing"] = c.grid_spacing;
  out["lipschitz_s"] = number(c.lipschitz_s);
  out["lipschitz_grad"] = number(c.lipschitz_grad);
  out["region"] = c.region;
  out["witness"] = to_json(c.witness);
  out["samples"] = c.samples;
  out["refined_cells"] = c.refined_cells;
  return out;
}

TransversalityCertificate certificate_from_json(const Json& j) {
  try {
    TransversalityCertificate c;
    c.status = cert_status_from_string(j.at("status").get<std::string>());
    c.eta = j.at("eta").get<double>();
    c.grid_spacing = j.at("grid_spacing").get<double>();
    c.lipschitz_s = j.at("lipschitz_s").get<double>();
    c.lipschitz_grad = j.at("lipschitz_grad").get<double>();
    c.region = j.at("region").get<std::string>();
    c.witness = vector_from_json(j.at("witness"));
    c.samples = j.at("samples").get<std::size_t>();
    c.refined_cells = j.at("refined_cells").get<std::size_t>();
    return c;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, kModule, std::string("malformed certificate: ") + e.what());
  }
}

Json zero_set_summary(const ZeroSetSample& z) {
  Json out;
  out["points"] = z.points.size();
  out["components"] = z.num_components;
  out["resolution"] = z.resolution;
  out["linking_radius"] = z.linking_radius;
  out["seeds"] = z.seeds;
  out["diverged"] = z.diverged;
  double max_abs = 0.0, min_grad = std::numeric_limits<double>::infinity();
  for (const auto& p : z.points) {
    max_abs = std::max(max_abs, p.abs_value);
    min_grad = std::min(min_grad, p.norm_grad);
  }
  out["max_abs_value"] = max_abs;
  out["min_norm_grad"] = number(min_grad);
  return out;
}

Json to_json(const SymplecticReport& r) {
  Json out;
  out["checked"] = r.checked;
  out["failures"] = r.failures;
  out["min_del_minus_dbar"] = number(r.min_del_minus_dbar);
  out["min_tangent_symplectic"] = number(r.min_tangent_symplectic);
  out["ok"] = r.ok();
  return out;
}

Json to_json(const WindingCount& w) {
  Json out;
  out["total"] = w.total;
  out["cells"] = w.cells;
  out["nonzero_cells"] = w.nonzero_cells;
  return out;
}

Json to_json(const MorseReport& r) {
  Json out;
  out["n"] = r.n;
  out["tube_radius"] = number(r.tube_radius);
  out["c_plus"] = number(r.c_plus);
  out["seeds"] = r.seeds;
  out["degenerate"] = r.degenerate;
  out["index_violations"] = r.index_violations;
  out["none_found"] = r.none_found;
  out["max_hessian_fd_deviation"] = number(r.max_hessian_fd_deviation);
  Json pts = Json::array();
  for (const auto& c : r.critical_points) {
    Json e;
    e["x"] = to_json(c.x);
    e["f"] = number(c.f);
    e["grad_norm"] = number(c.grad_norm);
    e["eigenvalues"] = to_json(c.eigenvalues);
    e["index"] = c.index;
    e["degenerate"] = c.degenerate;
    pts.push_back(e);
  }
  out["critical_points"] = pts;
  return out;
}

Json to_json(const AsymptoticProfile& p) {
  Json out;
  Json rows = Json::array();
  for (const auto& r : p.rows) {
    Json e;
    e["k"] = r.k;
    e["sup_value"] = number(r.sup_value);
    e["sup_grad"] = number(r.sup_grad);
    e["sup_dbar"] = number(r.sup_dbar);
    e["sup_grad_dbar"] = number(r.sup_grad_dbar);
    e["samples"] = r.samples;
    rows.push_back(e);
  }
  out["rows"] = rows;
  out["exp_value"] = number(p.exp_value);
  out["exp_grad"] = number(p.exp_grad);
  out["exp_dbar"] = number(p.exp_dbar);
  out["exp_grad_dbar"] = number(p.exp_grad_dbar);
  out["max_value"] = number(p.max_value);
  out["max_grad"] = number(p.max_grad);
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingUpstreamArtifact, kModule, "missing artifact " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigInvalid, kModule, "cannot write " + path);
  out << text;
}

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, kModule, path + ": " + e.what());
  }
}

}  // namespace orbisect
