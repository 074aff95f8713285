#include "kinkdyn/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "kinkdyn/errors.hpp"

namespace kinkdyn {

using nlohmann::json;

namespace {

template <typename E>
struct Names {
  E value;
  const char* name;
};

constexpr Names<Scenario> kScenarios[] = {
    {Scenario::compare, "compare"},
    {Scenario::stability_ac_l2, "stability_ac_l2"},
    {Scenario::stability_ac_l4, "stability_ac_l4"},
    {Scenario::stability_mac_l2, "stability_mac_l2"},
    {Scenario::stability_mac_l4, "stability_mac_l4"},
    {Scenario::spectrum, "spectrum"},
    {Scenario::correlations, "correlations"},
    {Scenario::conjecture_mac, "conjecture_mac"},
};
constexpr Names<HorizonRule> kRules[] = {
    {HorizonRule::fixed, "fixed"},
    {HorizonRule::c_eps_over_eta, "c_eps_over_eta"},
};
constexpr Names<NoiseShape> kShapes[] = {
    {NoiseShape::uniform, "uniform"},
    {NoiseShape::decoupled, "decoupled"},
    {NoiseShape::global_mode, "global_mode"},
};

template <typename E, std::size_t N>
std::string name_of(const Names<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <typename E, std::size_t N>
E parse_enum(const Names<E> (&table)[N], const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  const std::string s = j.get<std::string>();
  for (const auto& e : table)
    if (s == e.name) return e.value;
  std::string options;
  for (const auto& e : table) options += std::string(options.empty() ? "" : ", ") + e.name;
  throw ConfigError(path + ": unknown value '" + s + "' (expected one of " + options + ")");
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(path + ": integer out of range");
  return static_cast<int>(v);
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
  return j.get<bool>();
}

std::vector<double> as_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

[[noreturn]] void unknown(const std::string& path) {
  throw ConfigError("unknown key '" + path + "'");
}

void read_physics(const json& j, PhysicsSection& p) {
  require_object(j, "physics");
  for (const auto& [k, v] : j.items()) {
    const std::string path = "physics." + k;
    if (k == "eps") p.eps = as_number(v, path);
    else if (k == "eps_ladder") p.eps_ladder = as_numbers(v, path);
    else if (k == "kappa") p.kappa = as_number(v, path);
    else if (k == "m") p.m = as_number(v, path);
    else if (k == "mu") p.mu = as_number(v, path);
    else unknown(path);
  }
}

void read_noise(const json& j, NoiseSection& n) {
  require_object(j, "noise");
  bool rule_given = false;
  NoiseSection fresh = n;
  for (const auto& [k, v] : j.items()) {
    const std::string path = "noise." + k;
    if (k == "K") fresh.K = as_int(v, path);
    else if (k == "sigma0") { fresh.sigma0 = as_number(v, path); rule_given = true; }
    else if (k == "eta") { fresh.eta = as_number(v, path); rule_given = true; }
    else if (k == "eta_exponent") { fresh.eta_exponent = as_number(v, path); rule_given = true; }
    else if (k == "alphas") { fresh.alphas = as_numbers(v, path); rule_given = true; }
    else if (k == "mean_zero") fresh.mean_zero = as_bool(v, path);
    else if (k == "shape") fresh.shape = parse_enum(kShapes, v, path);
    else unknown(path);
  }
  if (rule_given) {
    // a user-supplied amplitude rule replaces the scenario default
    if (!j.contains("sigma0")) fresh.sigma0.reset();
    if (!j.contains("eta")) fresh.eta.reset();
    if (!j.contains("eta_exponent")) fresh.eta_exponent.reset();
    if (!j.contains("alphas")) fresh.alphas.clear();
  }
  n = fresh;
}

void read_run(const json& j, RunSection& r) {
  require_object(j, "run");
  for (const auto& [k, v] : j.items()) {
    const std::string path = "run." + k;
    if (k == "dt") r.dt = as_number(v, path);
    else if (k == "replicas") r.replicas = as_int(v, path);
    else if (k == "seed") {
      if (!v.is_number_unsigned()) throw ConfigError(path + ": expected a non-negative integer");
      r.seed = v.get<std::uint64_t>();
    }
    else if (k == "horizon_rule") r.horizon_rule = parse_enum(kRules, v, path);
    else if (k == "c_horizon") r.c_horizon = as_number(v, path);
    else if (k == "horizon") r.horizon = as_number(v, path);
    else if (k == "steps") r.steps = as_int(v, path);
    else if (k == "record_every") r.record_every = as_int(v, path);
    else if (k == "fermi_thinning") r.fermi_thinning = as_int(v, path);
    else if (k == "points_per_eps") r.points_per_eps = as_number(v, path);
    else if (k == "threads") r.threads = as_int(v, path);
    else unknown(path);
  }
}

void read_initial(const json& j, InitialSection& s) {
  require_object(j, "initial");
  for (const auto& [k, v] : j.items()) {
    const std::string path = "initial." + k;
    if (k == "h") s.h = as_numbers(v, path);
    else if (k == "xi") s.xi = as_numbers(v, path);
    else if (k == "v0") s.v0 = as_number(v, path);
    else unknown(path);
  }
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::string to_string(Scenario s) { return name_of(kScenarios, s); }
std::string to_string(HorizonRule r) { return name_of(kRules, r); }
std::string to_string(NoiseShape s) { return name_of(kShapes, s); }

bool is_stability(Scenario s) {
  return s == Scenario::stability_ac_l2 || s == Scenario::stability_ac_l4 ||
         s == Scenario::stability_mac_l2 || s == Scenario::stability_mac_l4;
}

bool is_mass_conserving(Scenario s) {
  return s == Scenario::stability_mac_l2 || s == Scenario::stability_mac_l4 ||
         s == Scenario::conjecture_mac;
}

std::vector<double> ExperimentConfig::ladder() const {
  if (physics.eps_ladder.empty()) return {physics.eps};
  return physics.eps_ladder;
}

ExperimentConfig default_config(Scenario s) {
  ExperimentConfig c;
  c.scenario = s;
  switch (s) {
    case Scenario::compare:
      c.physics.eps_ladder = {0.04, 0.02};
      c.physics.m = 0.5;
      c.noise.eta_exponent = 3.0;
      c.run.dt = 1e-2;
      c.run.replicas = 100;
      c.run.c_horizon = 0.1;
      c.initial.h = {0.3, 0.7};
      break;
    case Scenario::stability_ac_l2:
    case Scenario::stability_ac_l4:
      c.physics.eps = 0.02;
      c.physics.m = 0.1;
      c.noise.eta_exponent = 1.2;
      c.run.dt = 1e-3;
      c.run.replicas = 200;
      c.run.c_horizon = 0.05;
      c.run.record_every = 10;
      c.initial.h = {0.3, 0.7};
      break;
    case Scenario::stability_mac_l2:
    case Scenario::stability_mac_l4:
      c.physics.eps = 0.05;
      c.physics.m = 0.1;
      c.noise.eta_exponent = 4.2;
      c.run.dt = 1e-2;
      c.run.replicas = 100;
      c.run.c_horizon = 0.05;
      c.run.record_every = 1000;
      c.initial.h = {0.3, 0.7};
      break;
    case Scenario::spectrum:
      c.physics.eps_ladder = {0.04, 0.02, 0.01};
      c.noise.eta_exponent = 3.0;
      c.initial.h = {0.25, 0.5, 0.75};
      break;
    case Scenario::correlations:
      c.physics.eps = 0.02;
      c.noise.eta = 1e-3;
      c.noise.shape = NoiseShape::decoupled;
      c.run.dt = 1e-3;
      c.run.steps = 10000;
      c.run.replicas = 1;
      c.run.record_every = 100;
      c.initial.h = {0.25, 0.5};
      break;
    case Scenario::conjecture_mac:
      c.physics.eps_ladder = {0.08, 0.05};
      c.physics.m = 0.1;
      c.noise.eta_exponent = 4.2;
      c.run.dt = 1e-2;
      c.run.replicas = 20;
      c.run.c_horizon = 0.1;
      c.run.record_every = 1000;
      c.initial.h = {0.3, 0.7};
      break;
  }
  return c;
}

ExperimentConfig config_from_json(const json& j) {
  require_object(j, "config");
  if (!j.contains("scenario")) throw ConfigError("missing key 'scenario'");
  ExperimentConfig c = default_config(parse_enum(kScenarios, j.at("scenario"), "scenario"));
  for (const auto& [k, v] : j.items()) {
    if (k == "scenario") continue;
    if (k == "physics") read_physics(v, c.physics);
    else if (k == "noise") read_noise(v, c.noise);
    else if (k == "run") read_run(v, c.run);
    else if (k == "initial") read_initial(v, c.initial);
    else unknown(k);
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config syntax error at " + line_col(text, e.byte) + ": " + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json to_json(const ExperimentConfig& c) {
  json physics = {{"eps", c.physics.eps}, {"kappa", c.physics.kappa}, {"m", c.physics.m}};
  if (!c.physics.eps_ladder.empty()) physics["eps_ladder"] = c.physics.eps_ladder;
  if (c.physics.mu) physics["mu"] = *c.physics.mu;
  json noise = {{"K", c.noise.K}, {"mean_zero", c.noise.mean_zero},
                {"shape", to_string(c.noise.shape)}};
  if (c.noise.sigma0) noise["sigma0"] = *c.noise.sigma0;
  if (c.noise.eta) noise["eta"] = *c.noise.eta;
  if (c.noise.eta_exponent) noise["eta_exponent"] = *c.noise.eta_exponent;
  if (!c.noise.alphas.empty()) noise["alphas"] = c.noise.alphas;
  json run = {{"dt", c.run.dt},
              {"replicas", c.run.replicas},
              {"seed", c.run.seed},
              {"horizon_rule", to_string(c.run.horizon_rule)},
              {"c_horizon", c.run.c_horizon},
              {"horizon", c.run.horizon},
              {"steps", c.run.steps},
              {"record_every", c.run.record_every},
              {"fermi_thinning", c.run.fermi_thinning},
              {"points_per_eps", c.run.points_per_eps},
              {"threads", c.run.threads}};
  json initial = {{"v0", c.initial.v0}};
  if (!c.initial.h.empty()) initial["h"] = c.initial.h;
  if (!c.initial.xi.empty()) initial["xi"] = c.initial.xi;
  return json{{"scenario", to_string(c.scenario)},
              {"physics", physics},
              {"noise", noise},
              {"run", run},
              {"initial", initial}};
}

NoiseModel noise_model(const ExperimentConfig& c, double eps) {
  const NoiseSection& n = c.noise;
  try {
    const auto silent = [&](int K) {
      NoiseModel m;
      m.alphas = Eigen::VectorXd::Zero(K + 1);
      m.mean_zero = n.mean_zero;
      m.eta = 0.0;
      return m;
    };
    if (!n.alphas.empty()) {
      bool all_zero = true;
      for (double a : n.alphas) all_zero = all_zero && a == 0.0;
      if (all_zero && n.alphas.size() >= 2) return silent(static_cast<int>(n.alphas.size()) - 1);
      return build_noise(Eigen::Map<const Eigen::VectorXd>(n.alphas.data(),
                                                           static_cast<Eigen::Index>(n.alphas.size())),
                         n.mean_zero);
    }
    if (n.K < 1) throw ConfigError("noise.K must be at least 1");
    // active modes for the shape
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(n.K + 1);
    for (int k = 0; k <= n.K; ++k) {
      switch (n.shape) {
        case NoiseShape::uniform: mask(k) = (k == 0 && n.mean_zero) ? 0.0 : 1.0; break;
        case NoiseShape::decoupled: mask(k) = (k % 4 != 0) ? 1.0 : 0.0; break;
        case NoiseShape::global_mode: mask(k) = (k == 1) ? 1.0 : 0.0; break;
      }
    }
    const double active = mask.sum();
    if (active < 1.0) throw ConfigError("noise shape leaves no active mode for K = " +
                                        std::to_string(n.K));
    double sigma0 = 0.0;
    if (n.sigma0) sigma0 = *n.sigma0;
    else if (n.eta) sigma0 = std::sqrt(*n.eta / active);
    else if (n.eta_exponent) sigma0 = std::sqrt(std::pow(eps, *n.eta_exponent) / active);
    else throw ConfigError("noise: give one of sigma0, eta, eta_exponent or alphas");
    if (sigma0 == 0.0) return silent(n.K);
    if (!(sigma0 > 0.0)) throw ConfigError("noise amplitude must be non-negative");
    return build_noise(Eigen::VectorXd(sigma0 * mask), n.mean_zero);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("noise: ") + e.what());
  }
}

double noise_trace(const ExperimentConfig& c, double eps) { return noise_model(c, eps).eta; }

void validate(const ExperimentConfig& c) {
  const auto fail = [](const std::string& m) { throw ConfigError(m); };
  for (double e : c.ladder())
    if (!(e > 0.0 && e <= 0.1)) fail("physics.eps: " + std::to_string(e) + " outside (0, 0.1]");
  if (!(c.physics.kappa > 0.0 && c.physics.kappa <= 0.25)) fail("physics.kappa must lie in (0, 0.25]");
  if (!(c.physics.m > 0.0)) fail("physics.m must be positive");
  if (c.physics.mu && !(*c.physics.mu > -1.0 && *c.physics.mu < 1.0))
    fail("physics.mu must lie in (-1, 1)");
  if (c.run.replicas < 1) fail("run.replicas must be at least 1");
  if (!(c.run.dt > 0.0 && c.run.dt <= 0.05)) fail("run.dt must lie in (0, 0.05]");
  if (!(c.run.c_horizon > 0.0)) fail("run.c_horizon must be positive");
  if (!(c.run.horizon > 0.0)) fail("run.horizon must be positive");
  if (c.run.steps < 1) fail("run.steps must be at least 1");
  if (c.run.record_every < 0) fail("run.record_every must be non-negative");
  if (c.run.fermi_thinning < 1) fail("run.fermi_thinning must be at least 1");
  if (c.run.points_per_eps < 5.0) fail("run.points_per_eps must be at least 5");
  if (c.run.threads < 0) fail("run.threads must be non-negative");
  if (!(c.initial.v0 >= 0.0 && c.initial.v0 < 1.0)) fail("initial.v0 must lie in [0, 1)");
  if (c.initial.h.empty() && c.initial.xi.empty()) fail("initial: give h or xi");
  if (is_mass_conserving(c.scenario) && !c.noise.mean_zero)
    fail("noise.mean_zero must be true for fixed-mass scenarios");
  if (!c.initial.xi.empty() && !c.physics.mu)
    fail("initial.xi requires physics.mu");
  const bool timed = c.scenario == Scenario::compare || c.scenario == Scenario::conjecture_mac ||
                     is_stability(c.scenario);

  for (double e : c.ladder()) {
    const double eta = noise_trace(c, e);
    if (timed && c.run.horizon_rule == HorizonRule::c_eps_over_eta && eta == 0.0)
      fail("run.horizon_rule: c_eps_over_eta needs a positive noise trace; use fixed");
    if (c.scenario == Scenario::stability_ac_l2 || c.scenario == Scenario::stability_ac_l4) {
      const double cap = std::pow(e, 1.0 + 2.0 * c.physics.m);
      if (eta > cap * (1.0 + 1e-12))
        fail("noise trace " + std::to_string(eta) + " exceeds the cap eps^(1+2m) = " +
             std::to_string(cap));
    }
    if (c.scenario == Scenario::stability_mac_l2 || c.scenario == Scenario::stability_mac_l4) {
      const double cap = std::pow(e, 4.0 + 2.0 * c.physics.m);
      if (eta > cap * (1.0 + 1e-12))
        fail("noise trace " + std::to_string(eta) + " exceeds the cap eps^(4+2m) = " +
             std::to_string(cap));
    }
  }
}

}  // namespace kinkdyn
