#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "kinkdyn/config.hpp"

namespace kinkdyn {

/// Bits of the exit_flag column.
enum ExitFlag : int {
  kExitNone = 0,
  kExitTubeL2 = 1,
  kExitTubeL4 = 2,
  kExitDomain = 4,
};

struct TrajectoryRow {
  int replica = 0;
  double t = 0.0;
  Eigen::VectorXd positions;
  double norm_l2 = 0.0;
  double norm_l4 = 0.0;
  int exit_flag = kExitNone;
};

/// Outcome of one replica. An exit time is present exactly when its flag is
/// set.
struct RunRecord {
  int replica = 0;
  bool tube_l2 = false;
  bool tube_l4 = false;
  bool domain = false;
  std::optional<double> tube_l2_time;
  std::optional<double> tube_l4_time;
  std::optional<double> domain_time;
  std::string domain_reason;
  /// Time the replica stopped (horizon or first terminating exit).
  double final_time = 0.0;
  double max_norm_l2 = 0.0;
  double max_norm_l4 = 0.0;
  /// Pathwise sup differences (compare and conjecture runs).
  double sup_spde_reduced = 0.0;
  double sup_spde_full = 0.0;
  double sup_full_reduced = 0.0;
  std::vector<TrajectoryRow> rows;

  int flags() const;
};

struct RungResult {
  double eps = 0.0;
  /// "h" or "xi".
  std::string position_label = "h";
  std::vector<RunRecord> records;
};

struct ExperimentReport {
  nlohmann::json summary;
  std::vector<RungResult> rungs;
  std::optional<nlohmann::json> spectrum;
  /// 0 normally, 4 when every replica exited before the horizon.
  int exit_code = 0;
};

struct BinomialInterval {
  double lower = 0.0;
  double upper = 1.0;
};
/// Exact two-sided Clopper–Pearson interval for k successes in n trials.
BinomialInterval clopper_pearson(int k, int n, double confidence = 0.95);

/// c eps / eta or the fixed horizon, per the run section.
double run_horizon(const ExperimentConfig& cfg, double eps);

/// Tube radii (L², L⁴) for the scenario family at eps.
std::pair<double, double> tube_radii(const ExperimentConfig& cfg, double eps);

ExperimentReport cmd_compare(const ExperimentConfig& cfg);
ExperimentReport cmd_stability(const ExperimentConfig& cfg);
ExperimentReport cmd_spectrum(const ExperimentConfig& cfg);
ExperimentReport cmd_correlations(const ExperimentConfig& cfg);
ExperimentReport cmd_conjecture_mac(const ExperimentConfig& cfg);
/// Validates, then dispatches on the scenario.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Single replicas, exposed for tests.
RunRecord stability_replica(const ExperimentConfig& cfg, double eps, int replica);
RunRecord compare_replica(const ExperimentConfig& cfg, double eps, int replica);

/// summary.json, trajectories.csv (smallest eps at the top level, other
/// rungs under eps_<value>/) and spectrum.json. Throws std::runtime_error
/// when the directory cannot be written.
void write_outputs(const ExperimentReport& report, const std::string& dir);
/// CSV text for one rung, 17 significant digits.
std::string trajectories_csv(const RungResult& rung);

}  // namespace kinkdyn
