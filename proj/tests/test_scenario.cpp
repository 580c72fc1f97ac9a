#include <doctest.h>

#include <filesystem>

#include "orbisect/scenario.hpp"

using namespace orbisect;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("orbisect_test_" + name);
  fs::remove_all(p);
  return p.string();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::ConfigInvalid;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(
      "# small run\n"
      "preset = T4_Z2\n"
      "k = 10   # comment after a value\n"
      "k_list = 10, 20\n"
      "mode = cutoff\n"
      "eta0 = 0.005\n"
      "lattice_D = 0.5\n"
      "out = somewhere\n");
  CHECK(c.preset == "T4_Z2");
  CHECK(c.k == 10);
  CHECK(c.k_list == std::vector<int>{10, 20});
  CHECK(c.mode == SectionMode::Cutoff);
  CHECK(c.schedule.eta0 == 0.005);
  CHECK(c.lattice_D == 0.5);
  CHECK(c.out_dir == "somewhere");
  CHECK(c.complex_dim() == 2);

  const auto back = parse_config(config_to_text(c));
  CHECK(config_to_text(back) == config_to_text(c));

  CHECK(code_of([] { parse_config("colour = blue\n"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config("k = ten\n"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config("k = 2.5\n"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config("preset = T6_Z7\n"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config("eta0 = 1\n"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config("lattice_R = -1\n"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config("just words\n"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { preset_scenario("nope"); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("missing upstream artifacts") {
  ScenarioConfig c;
  c.out_dir = fresh_dir("missing");
  CHECK(code_of([&] { run_report(c); }) == ErrorCode::MissingUpstreamArtifact);
  CHECK(code_of([&] { run_perturb(c); }) == ErrorCode::MissingUpstreamArtifact);
  CHECK(code_of([&] { run_analyze(c); }) == ErrorCode::MissingUpstreamArtifact);
  c.preset = "C2_Z2xZ2_chart";
  CHECK(code_of([&] { run_build(c); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("strata stage on T4/Z2") {
  ScenarioConfig c = preset_scenario("t4_z2_k10");
  c.out_dir = fresh_dir("strata");
  const auto p = run_strata(c);
  CHECK(p.size() == 17);
  const Json j = read_json_file(c.out_dir + "/strata.json");
  CHECK(j["count"] == 17);
  CHECK(j["strata"].size() == 17);
  CHECK(j["axioms_hold"] == true);
}

TEST_CASE("section and certificate round trips") {
  SpaceTag tag{"T2_Z3", 3, 0.0};
  SectionExpansion s(space_from_tag(tag, 12), SectionMode::Periodized);
  s.add_term({(RVector(2) << 0.1, 0.2).finished(), Cplx(0.3, -0.4), true});
  s.add_term({(RVector(2) << -0.3, 0.05).finished(), Cplx(1.0 / 3.0, 0.0), false});
  const auto back = section_from_json(Json::parse(section_to_json(s, tag).dump()));
  for (const auto& x : {(RVector(2) << 0.0, 0.0).finished(), (RVector(2) << 0.37, -0.21).finished()})
    CHECK(std::abs(back.jet(x).v - s.jet(x).v) == 0.0);

  TransversalityCertificate c;
  c.status = CertStatus::Inconclusive;
  c.eta = 1.0 / 7.0;
  c.grid_spacing = 0.1;
  c.lipschitz_s = 2.5;
  c.lipschitz_grad = 3.5;
  c.region = "whole quotient";
  c.witness = (RVector(2) << 0.1, 0.2).finished();
  c.samples = 42;
  const auto c2 = certificate_from_json(Json::parse(to_json(c).dump()));
  CHECK(c2.status == c.status);
  CHECK(c2.eta == c.eta);
  CHECK(c2.witness == c.witness);
  CHECK(c2.samples == 42);
}

TEST_CASE("profile on the C1 chart") {
  ScenarioConfig c = preset_scenario("c1_profile");
  c.out_dir = fresh_dir("profile");
  const auto p = run_profile(c);
  CHECK(p.rows.size() == 4);
  CHECK(p.max_value <= 1.0 + 1e-12);
  CHECK(fs::exists(c.out_dir + "/profile.csv"));
}

TEST_CASE("small end-to-end run is deterministic") {
  ScenarioConfig c;
  c.preset = "T2_Z2";
  c.k = 20;
  c.lattice_D = 0.5;
  Json reports[2];
  for (int run = 0; run < 2; ++run) {
    c.out_dir = fresh_dir("e2e_" + std::to_string(run));
    run_strata(c);
    run_lattice(c);
    run_build(c);
    const auto pert = run_perturb(c);
    CHECK(pert.clauses.ok());
    CHECK(pert.result.certificate.status == CertStatus::Certified);
    CHECK(pert.result.max_defect < 1e-8);
    const auto a = run_analyze(c);
    CHECK(a.zeros.points.size() == 20);
    CHECK(a.winding.total == 20);
    CHECK(a.invariance_defect < 1e-6);
    CHECK(a.morse.index_violations == 0);
    reports[run] = run_report(c);
  }
  // The output directory is not part of the report, so the two runs must agree byte for byte.
  CHECK(strip_timings(reports[0]).dump() == strip_timings(reports[1]).dump());
  const fs::path tmp = fs::temp_directory_path();
  CHECK(read_text_file((tmp / "orbisect_test_e2e_0" / "section.json").string()) ==
        read_text_file((tmp / "orbisect_test_e2e_1" / "section.json").string()));
}
