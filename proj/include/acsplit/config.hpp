#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "harness.hpp"
#include "kolmogorov.hpp"

namespace acsplit {

// Step sizes accept the dyadic form "2^-12" so ladder configs stay exact and
// legible; plain decimal literals work everywhere.
inline double parse_step_token(const std::string& token,
                               const std::string& key) {
  const char* text = token.c_str();
  char* end = nullptr;
  if (token.size() > 2 && token[0] == '2' && token[1] == '^') {
    const long exp = std::strtol(text + 2, &end, 10);
    if (end != text + token.size() || std::abs(exp) > 1020)
      throw config_error("config key '" + key + "': bad dyadic step '" +
                         token + "'");
    return std::ldexp(1.0, int(exp));
  }
  const double v = std::strtod(text, &end);
  if (end != text + token.size() || !std::isfinite(v))
    throw config_error("config key '" + key + "': cannot parse number '" +
                       token + "'");
  return v;
}

// Flat key = value file: one pair per line, '#' starts a comment, later flags
// override file values.  Typed getters record which keys a command
// understands; anything left over is rejected by name.
class ConfigMap {
 public:
  ConfigMap() = default;

  static ConfigMap from_text(const std::string& text) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      map.parse_line(line, line_no);
    }
    return map;
  }

  static ConfigMap from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return from_text(text.str());
  }

  void override_value(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  bool has(const std::string& key) const {
    consumed_.insert(key);
    return values_.count(key) != 0;
  }

  std::string get_string(const std::string& key,
                         const std::string& def) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  std::string require_string(const std::string& key) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end())
      throw config_error("missing config key: " + key);
    return it->second;
  }

  double get_double(const std::string& key, double def) const {
    if (!has(key)) return def;
    return parse_step_token(values_.at(key), key);
  }

  double require_step(const std::string& key) const {
    return parse_step_token(require_string(key), key);
  }

  long long get_int(const std::string& key, long long def) const {
    if (!has(key)) return def;
    const std::string& v = values_.at(key);
    char* end = nullptr;
    const long long out = std::strtoll(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size())
      throw config_error("config key '" + key + "': cannot parse integer '" +
                         v + "'");
    return out;
  }

  bool get_bool(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const std::string& v = values_.at(key);
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw config_error("config key '" + key + "': expected true/false, got '" +
                       v + "'");
  }

  std::vector<double> get_list(const std::string& key,
                               std::vector<double> def) const {
    if (!has(key)) return def;
    std::string v = values_.at(key);
    for (char& c : v)
      if (c == ',') c = ' ';
    std::istringstream in(v);
    std::vector<double> out;
    std::string token;
    while (in >> token) out.push_back(parse_step_token(token, key));
    if (out.empty())
      throw config_error("config key '" + key + "': empty list");
    return out;
  }

  void reject_unknown() const {
    for (const auto& kv : values_)
      if (consumed_.count(kv.first) == 0)
        throw config_error("unknown config key: " + kv.first);
  }

 private:
  void parse_line(std::string line, int line_no) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      std::size_t b = 0, e = s.size();
      while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
      while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
      return s.substr(b, e - b);
    };
    if (trim(line).empty()) return;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) +
                         ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw config_error("config line " + std::to_string(line_no) +
                         ": empty key");
    if (values_.count(key))
      throw config_error("duplicate config key: " + key);
    values_[key] = value;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

namespace detail {

inline SchemeKind parse_scheme(const ConfigMap& map) {
  const std::string v = map.get_string("scheme", "exponential");
  if (v == "exponential") return SchemeKind::exponential;
  if (v == "semi_implicit" || v == "semi-implicit")
    return SchemeKind::semi_implicit;
  throw config_error(
      "config key 'scheme': expected exponential or semi_implicit, got '" + v +
      "'");
}

inline DriftKind parse_drift(const ConfigMap& map) {
  const std::string v = map.get_string("drift", "allen_cahn");
  if (v == "allen_cahn") return DriftKind::allen_cahn;
  if (v == "none") return DriftKind::none;
  throw config_error("config key 'drift': expected allen_cahn or none, got '" +
                     v + "'");
}

inline InitialCondition parse_initial(const ConfigMap& map) {
  const std::string kind = map.get_string("initial", "sine");
  const double amplitude = map.get_double("initial_amplitude", 0.2);
  const long long wavenumber = map.get_int("initial_wavenumber", 1);
  const bool have_values = map.has("initial_values");
  if (kind == "zero") return InitialCondition::zero();
  if (kind == "sine") return InitialCondition::sine(amplitude, int(wavenumber));
  if (kind == "values") {
    if (!have_values)
      throw config_error("missing config key: initial_values");
    return InitialCondition::values(map.get_list("initial_values", {}));
  }
  throw config_error(
      "config key 'initial': expected zero, sine or values, got '" + kind +
      "'");
}

inline PhiSpec parse_phi(const ConfigMap& map) {
  const std::string kind = map.get_string("phi", "cosine");
  const long long mode = map.get_int("phi_mode", 1);
  PhiSpec phi;
  phi.mode = int(mode);
  if (kind == "cosine")
    phi.kind = TestFunction::Kind::cosine;
  else if (kind == "gaussian")
    phi.kind = TestFunction::Kind::gaussian;
  else if (kind == "linear")
    phi.kind = TestFunction::Kind::linear;
  else
    throw config_error(
        "config key 'phi': expected cosine, gaussian or linear, got '" + kind +
        "'");
  return phi;
}

inline void check_positive(double v, const char* key) {
  if (!(v > 0.0))
    throw config_error(std::string("config key '") + key +
                       "' must be positive");
}

}  // namespace detail

// weak / strong studies; default_samples separates their sample-count
// defaults (the strong estimator needs far fewer paths).
inline StudyConfig parse_study_config(const ConfigMap& map,
                                      std::uint64_t default_samples) {
  StudyConfig cfg;
  cfg.scheme = detail::parse_scheme(map);
  cfg.drift = detail::parse_drift(map);
  cfg.n_modes = int(map.get_int("n_modes", cfg.n_modes));
  cfg.T = map.get_double("T", cfg.T);
  cfg.dt_ladder = map.get_list("dt_ladder", cfg.dt_ladder);
  cfg.dt_ref = map.get_double("dt_ref", cfg.dt_ref);
  cfg.n_samples = std::uint64_t(map.get_int("n_samples",
                                            (long long)(default_samples)));
  cfg.initial = detail::parse_initial(map);
  cfg.phi = detail::parse_phi(map);
  cfg.seed = std::uint64_t(map.get_int("seed", (long long)(cfg.seed)));
  cfg.threads = int(map.get_int("threads", cfg.threads));
  cfg.with_noise = map.get_bool("noise", true);
  map.reject_unknown();
  if (cfg.n_modes < 1) throw config_error("config key 'n_modes' must be >= 1");
  detail::check_positive(cfg.T, "T");
  detail::check_positive(cfg.dt_ref, "dt_ref");
  if (cfg.n_samples < 1000)
    throw config_error("config key 'n_samples' must be >= 1000");
  if (cfg.threads < 1) throw config_error("config key 'threads' must be >= 1");
  for (double dt : cfg.dt_ladder) {
    detail::check_positive(dt, "dt_ladder");
    const double ratio = dt / cfg.dt_ref;
    if (std::abs(ratio - std::llround(ratio)) > 1e-9 * ratio ||
        std::llround(ratio) < 1)
      throw config_error("dt_ladder entry " + std::to_string(dt) +
                         " is not a multiple of dt_ref");
  }
  return cfg;
}

struct SimulateConfig {
  SchemeKind scheme = SchemeKind::exponential;
  DriftKind drift = DriftKind::allen_cahn;
  int n_modes = 128;
  double T = 1.0;
  double dt = 0.0;  // required
  InitialCondition initial = InitialCondition::sine(0.2, 1);
  std::uint64_t seed = kDefaultSeed;
  std::uint32_t sample = 0;
  bool with_noise = true;
  int threads = 1;
};

inline SimulateConfig parse_simulate_config(const ConfigMap& map) {
  SimulateConfig cfg;
  cfg.scheme = detail::parse_scheme(map);
  cfg.drift = detail::parse_drift(map);
  cfg.n_modes = int(map.get_int("n_modes", cfg.n_modes));
  cfg.T = map.get_double("T", cfg.T);
  cfg.dt = map.require_step("dt");
  cfg.initial = detail::parse_initial(map);
  cfg.seed = std::uint64_t(map.get_int("seed", (long long)(cfg.seed)));
  cfg.sample = std::uint32_t(map.get_int("sample", 0));
  cfg.with_noise = map.get_bool("noise", true);
  cfg.threads = int(map.get_int("threads", cfg.threads));
  map.reject_unknown();
  if (cfg.n_modes < 1) throw config_error("config key 'n_modes' must be >= 1");
  detail::check_positive(cfg.T, "T");
  detail::check_positive(cfg.dt, "dt");
  return cfg;
}

inline ProbeConfig parse_probe_config(const ConfigMap& map) {
  ProbeConfig cfg;
  cfg.drift = detail::parse_drift(map);
  cfg.n_modes = int(map.get_int("n_modes", cfg.n_modes));
  cfg.dt = map.get_double("probe_dt", cfg.dt);
  cfg.t_grid = map.get_list("t_grid", cfg.t_grid);
  cfg.n_first = int(map.get_int("n_first", cfg.n_first));
  cfg.n_second = int(map.get_int("n_second", cfg.n_second));
  cfg.alpha = map.get_double("alpha", cfg.alpha);
  cfg.beta = map.get_double("beta", cfg.beta);
  cfg.gamma = map.get_double("gamma", cfg.gamma);
  cfg.n_samples = std::uint64_t(map.get_int("n_samples",
                                            (long long)(cfg.n_samples)));
  cfg.initial = detail::parse_initial(map);
  cfg.phi = detail::parse_phi(map);
  cfg.seed = std::uint64_t(map.get_int("seed", (long long)(cfg.seed)));
  cfg.threads = int(map.get_int("threads", cfg.threads));
  cfg.malliavin_T = map.get_double("malliavin_T", cfg.malliavin_T);
  cfg.malliavin_dt = map.get_double("malliavin_dt", cfg.malliavin_dt);
  cfg.malliavin_probes = int(map.get_int("malliavin_probes",
                                         cfg.malliavin_probes));
  cfg.s_grid = map.get_list("s_grid", cfg.s_grid);
  map.reject_unknown();
  if (cfg.n_modes < 1) throw config_error("config key 'n_modes' must be >= 1");
  detail::check_positive(cfg.dt, "probe_dt");
  detail::check_positive(cfg.malliavin_T, "malliavin_T");
  detail::check_positive(cfg.malliavin_dt, "malliavin_dt");
  if (cfg.n_samples < 100)
    throw config_error("config key 'n_samples' must be >= 100");
  if (cfg.threads < 1) throw config_error("config key 'threads' must be >= 1");
  if (cfg.malliavin_probes < 1)
    throw config_error("config key 'malliavin_probes' must be >= 1");
  return cfg;
}

}  // namespace acsplit
