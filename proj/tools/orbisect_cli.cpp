#include <CLI11.hpp>

#include <iostream>

#include "orbisect/scenario.hpp"

using namespace orbisect;

namespace {

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::MissingUpstreamArtifact:
      return 2;
    case ErrorCode::TransversalityNotAchieved:
    case ErrorCode::NotCertified:
      return 3;
    default:
      return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orbisect: symplectic divisors in torus orbifolds, numerically"};
  app.require_subcommand(1, 1);
  std::string config_path, scenario, out_dir;
  int jobs = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "scenario config (key = value)");
  app.add_option("--scenario", scenario, "built-in scenario: t2_z2_k40, t4_z2_k10, c1_profile");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--jobs", jobs, "worker cap")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", verbose, "progress on stderr");
  for (const char* verb : {"strata", "lattice", "build", "perturb", "analyze", "profile", "report"})
    app.add_subcommand(verb, std::string("run the ") + verb + " stage")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    if (!config_path.empty() && !scenario.empty())
      throw Error(ErrorCode::ConfigInvalid, "cli", "give --config or --scenario, not both");
    ScenarioConfig cfg = !config_path.empty() ? load_config(config_path)
                         : !scenario.empty()  ? preset_scenario(scenario)
                                              : throw Error(ErrorCode::ConfigInvalid, "cli", "--config or --scenario required");
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (jobs > 0) cfg.jobs = jobs;
    cfg.verbose = cfg.verbose || verbose;
    validate(cfg);

    if (verb == "strata") {
      const auto p = run_strata(cfg);
      std::cout << p.size() << " strata written to " << cfg.out_dir << "/strata.json\n";
    } else if (verb == "lattice") {
      const auto st = run_lattice(cfg);
      bool ok = true;
      for (const auto& [idx, rep] : st.reports) ok = ok && rep.ok();
      std::cout << st.lattices.size() << " lattices, property (P) " << (ok ? "holds" : "FAILS") << "\n";
    } else if (verb == "build") {
      const auto s = run_build(cfg);
      std::cout << "initial section with " << s.terms().size() << " terms\n";
    } else if (verb == "perturb") {
      const auto r = run_perturb(cfg);
      std::cout << "certified eta " << r.result.certificate.eta << ", defect " << r.result.max_defect << "\n";
    } else if (verb == "analyze") {
      const auto a = run_analyze(cfg);
      std::cout << a.zeros.points.size() << " zeros, " << a.morse.critical_points.size() << " critical points\n";
    } else if (verb == "profile") {
      const auto p = run_profile(cfg);
      std::cout << p.rows.size() << " rows, dbar exponent " << p.exp_dbar << "\n";
    } else {
      run_report(cfg);
      std::cout << "report written to " << cfg.out_dir << "/report.json\n";
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
