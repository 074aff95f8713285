// Command line front end for the kink dynamics experiments.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kinkdyn/config.hpp"
#include "kinkdyn/errors.hpp"
#include "kinkdyn/experiments.hpp"
#include "kinkdyn/heteroclinic.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kNumerical = 3 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<int> replicas;
  std::optional<int> threads;
};

bool family_matches(const std::string& cmd, kinkdyn::Scenario s) {
  using kinkdyn::Scenario;
  if (cmd == "stability") return kinkdyn::is_stability(s);
  if (cmd == "compare") return s == Scenario::compare;
  if (cmd == "spectrum") return s == Scenario::spectrum;
  if (cmd == "correlations") return s == Scenario::correlations;
  if (cmd == "conjecture") return s == Scenario::conjecture_mac;
  return false;
}

kinkdyn::Scenario default_scenario(const std::string& cmd, const std::string& variant) {
  using kinkdyn::Scenario;
  if (cmd == "compare") return Scenario::compare;
  if (cmd == "spectrum") return Scenario::spectrum;
  if (cmd == "correlations") return Scenario::correlations;
  if (cmd == "conjecture") return Scenario::conjecture_mac;
  if (variant == "ac_l4") return Scenario::stability_ac_l4;
  if (variant == "mac_l2") return Scenario::stability_mac_l2;
  if (variant == "mac_l4") return Scenario::stability_mac_l4;
  return Scenario::stability_ac_l2;
}

int run(const std::string& cmd, const Globals& g, const std::string& variant) {
  kinkdyn::ExperimentConfig cfg;
  try {
    cfg = g.config.empty() ? kinkdyn::default_config(default_scenario(cmd, variant))
                           : kinkdyn::load_config(g.config);
    if (!family_matches(cmd, cfg.scenario))
      throw kinkdyn::ConfigError("scenario '" + kinkdyn::to_string(cfg.scenario) +
                                 "' does not belong to the '" + cmd + "' command");
    if (g.seed) cfg.run.seed = *g.seed;
    if (g.replicas) cfg.run.replicas = *g.replicas;
    if (g.threads) cfg.run.threads = *g.threads;
    kinkdyn::validate(cfg);
  } catch (const kinkdyn::ConfigError& e) {
    std::cerr << "config rejected: " << e.what() << "\n";
    return kConfig;
  }

  kinkdyn::ExperimentReport rep;
  try {
    rep = kinkdyn::run_experiment(cfg);
  } catch (const kinkdyn::ConfigError& e) {
    std::cerr << "config rejected: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
  try {
    kinkdyn::write_outputs(rep, g.out);
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return kUsage;
  }
  std::cout << kinkdyn::to_string(cfg.scenario) << ": results in " << g.out << "/summary.json\n";
  if (rep.exit_code != 0) std::cerr << "every replica exited before the horizon\n";
  return rep.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic interface dynamics: SPDE, reduced SDEs and spectra"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override run.seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--replicas", g.replicas, "Override run.replicas")->check(CLI::PositiveNumber);
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);

  std::string variant = "ac_l2";
  for (const char* name : {"compare", "spectrum", "correlations", "conjecture"})
    app.add_subcommand(name, std::string("Run the ") + name + " scenario");
  auto* stab = app.add_subcommand("stability", "Tube-exit Monte Carlo study");
  stab->add_option("--variant", variant, "Default scenario when no config is given")
      ->check(CLI::IsMember({"ac_l2", "ac_l4", "mac_l2", "mac_l4"}))
      ->capture_default_str();
  auto* chi = app.add_subcommand("chi", "Print the heteroclinic energy constant");

  CLI11_PARSE(app, argc, argv);

  if (chi->parsed()) {
    const double value = kinkdyn::chi_constant();
    std::printf("chi = %.17g\nclosed form 2*sqrt(2)/3 = %.17g\ndifference = %.3g\n", value,
                2.0 * std::sqrt(2.0) / 3.0, value - 2.0 * std::sqrt(2.0) / 3.0);
    return kOk;
  }
  for (auto* sub : app.get_subcommands()) return run(sub->get_name(), g, variant);
  return kUsage;
}
