#include <cstdint>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "semiflow/report.hpp"
#include "semiflow/scenario.hpp"

namespace {

struct Args {
  std::string scenario_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<std::string> exact;
};

void add_common(CLI::App* cmd, Args& a) {
  cmd->add_option("--scenario", a.scenario_path, "scenario JSON file")->required();
  cmd->add_option("--out", a.out_dir, "output directory (default: scenario out_dir, else .)");
  cmd->add_option("--seed", a.seed, "override the scenario seed");
  cmd->add_option("--lambda", a.lambda, "override the eigenvalue / probe parameter");
  cmd->add_option("--exact-antiderivative", a.exact,
                  "exact antiderivative F with F' = 1/b for the tail tests");
}

int run(const Args& a, std::initializer_list<semiflow::ScenarioKind> kinds, const char* sub) {
  semiflow::Scenario sc;
  try {
    sc = semiflow::load_scenario(a.scenario_path);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << a.scenario_path << ": malformed JSON: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << a.scenario_path << ": " << e.what() << "\n";
    return 1;
  }

  bool matches = false;
  for (auto k : kinds) matches = matches || k == sc.kind;
  if (!matches) {
    std::cerr << "error: " << a.scenario_path << ": kind " << semiflow::to_string(sc.kind)
              << " cannot be run by the `" << sub << "` subcommand\n";
    return 1;
  }

  try {
    semiflow::RunOverrides ov;
    ov.seed = a.seed;
    ov.lambda = a.lambda;
    ov.exact_antiderivative = a.exact;
    semiflow::RunOutcome out = semiflow::run_scenario(sc, ov);
    std::string dir = a.out_dir ? *a.out_dir : sc.out_dir.value_or(".");
    for (const std::string& path : semiflow::emit(out, dir)) std::cout << "wrote " << path << "\n";
    const auto& verdicts = out.report["verdicts"];
    if (verdicts.contains("verdict"))
      std::cout << sc.name << ": " << verdicts["verdict"].get<std::string>() << "\n";
    else if (verdicts.contains("certified"))
      std::cout << sc.name << ": " << verdicts["certified"].get<std::string>() << "\n";
    else if (verdicts.contains("status"))
      std::cout << sc.name << ": " << verdicts["status"].get<std::string>() << "\n";
    else
      std::cout << sc.name << ": " << (out.exit_code == 0 ? "pass" : "fail") << "\n";
    return out.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error in scenario \"" << sc.name << "\" (" << a.scenario_path
              << "): " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drift uniqueness and semigroup extension toolbox"};
  app.set_version_flag("--version", std::string(semiflow::kToolName) + " " + semiflow::kToolVersion);
  app.require_subcommand(1);

  Args analyze_args, flow_args, escape_args, weak_args, lab_args;
  CLI::App* analyze = app.add_subcommand("analyze", "1-d mass-transport uniqueness analysis");
  add_common(analyze, analyze_args);
  CLI::App* flow = app.add_subcommand("flow", "integrate one trajectory of x' = b(x)");
  add_common(flow, flow_args);
  CLI::App* escape = app.add_subcommand("escape-cert", "radial non-return certificate");
  add_common(escape, escape_args);
  CLI::App* weak = app.add_subcommand("weak-residual", "particle-cloud weak-identity residual");
  add_common(weak, weak_args);
  CLI::App* lab = app.add_subcommand("matrix-lab", "rank-one resolvent perturbation lab");
  add_common(lab, lab_args);
  CLI::App* schema = app.add_subcommand("schema", "print the scenario schema as JSON");

  CLI11_PARSE(app, argc, argv);

  using semiflow::ScenarioKind;
  if (analyze->parsed())
    return run(analyze_args, {ScenarioKind::analyze1d, ScenarioKind::analyze_general1d}, "analyze");
  if (flow->parsed()) return run(flow_args, {ScenarioKind::flow}, "flow");
  if (escape->parsed()) return run(escape_args, {ScenarioKind::escape3_6}, "escape-cert");
  if (weak->parsed()) return run(weak_args, {ScenarioKind::weak_residual}, "weak-residual");
  if (lab->parsed()) return run(lab_args, {ScenarioKind::matrix_lab}, "matrix-lab");
  if (schema->parsed()) {
    std::cout << semiflow::scenario_schema().dump(2) << "\n";
    return 0;
  }
  return 1;
}
