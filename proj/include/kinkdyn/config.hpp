#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinkdyn/noise.hpp"

namespace kinkdyn {

enum class Scenario {
  compare,
  stability_ac_l2,
  stability_ac_l4,
  stability_mac_l2,
  stability_mac_l4,
  spectrum,
  correlations,
  conjecture_mac,
};

enum class HorizonRule { fixed, c_eps_over_eta };

/// Shape of the noise spectrum when no explicit amplitudes are given.
enum class NoiseShape {
  /// equal amplitude on modes 1..K (and 0 unless mean-zero)
  uniform,
  /// modes whose index is not a multiple of 4; kinks at 1/4 and 1/2 then
  /// receive uncorrelated forcing
  decoupled,
  /// the single mode k = 1
  global_mode,
};

std::string to_string(Scenario s);
std::string to_string(HorizonRule r);
std::string to_string(NoiseShape s);
bool is_stability(Scenario s);
bool is_mass_conserving(Scenario s);

struct PhysicsSection {
  double eps = 0.02;
  /// Used by ladder scenarios (compare, spectrum, conjecture_mac); empty
  /// means {eps}.
  std::vector<double> eps_ladder;
  double kappa = 0.1;
  double m = 0.1;
  /// Mass for fixed-mass scenarios; derived from the initial profile if unset.
  std::optional<double> mu;
};

struct NoiseSection {
  int K = 32;
  /// Exactly one amplitude rule is used, in this priority: alphas, sigma0,
  /// eta, eta_exponent (eta = eps^eta_exponent).
  std::optional<double> sigma0;
  std::optional<double> eta;
  std::optional<double> eta_exponent;
  std::vector<double> alphas;
  bool mean_zero = true;
  NoiseShape shape = NoiseShape::uniform;
};

struct RunSection {
  double dt = 1e-3;
  int replicas = 1;
  std::uint64_t seed = 0;
  HorizonRule horizon_rule = HorizonRule::c_eps_over_eta;
  double c_horizon = 0.1;
  /// Horizon for the fixed rule.
  double horizon = 1.0;
  /// Step count for correlation runs.
  int steps = 10000;
  /// Write one trajectory row every this many steps (0 disables rows).
  int record_every = 100;
  /// Fermi extraction cadence in compare runs.
  int fermi_thinning = 1;
  double points_per_eps = 5.0;
  int threads = 0;
};

struct InitialSection {
  std::vector<double> h;
  std::vector<double> xi;
  /// Initial |v| as a fraction of the tube radius.
  double v0 = 0.0;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::compare;
  PhysicsSection physics;
  NoiseSection noise;
  RunSection run;
  InitialSection initial;

  std::vector<double> ladder() const;
};

/// Scenario defaults, before any user keys are applied.
ExperimentConfig default_config(Scenario s);

/// Strict parse: unknown keys and wrong types throw ConfigError naming the
/// field path; syntax errors report line and column.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Physical sanity and the stability noise caps. Throws ConfigError.
void validate(const ExperimentConfig& cfg);

/// Noise spectrum implied by the config at a given eps.
NoiseModel noise_model(const ExperimentConfig& cfg, double eps);
double noise_trace(const ExperimentConfig& cfg, double eps);

}  // namespace kinkdyn
