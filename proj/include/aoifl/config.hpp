#pragma once

// Experiment configuration: a single JSON file describing population, policy
// list, Markov parameters, and (for training runs) the synthetic task and
// optimizer settings. Parsing fills defaults; validate_config then reports
// every violated invariant at once, each tagged with its config path.

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim.hpp"
#include "markov.hpp"
#include "policies.hpp"

namespace aoifl {

enum class ExperimentKind { sigma, intervals, stability, train, markov_analyze };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::sigma: return "sigma";
    case ExperimentKind::intervals: return "intervals";
    case ExperimentKind::stability: return "stability";
    case ExperimentKind::train: return "train";
    case ExperimentKind::markov_analyze: return "markov-analyze";
  }
  return "?";
}

struct SizeModelConfig {
  enum class Kind { homogeneous, zipf } kind = Kind::homogeneous;
  double a = 2.0;              // zipf exponent, must exceed 1
  std::uint64_t d_min = 1;     // zipf lower clip
  std::uint64_t d_value = 1;   // homogeneous size
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::random_weighted;
  ExactM exact_m = ExactM::off;
};

struct LrConfig {
  enum class Kind { decay, inverse } kind = Kind::decay;
  double eta0 = 0.1;
  double rate = 1.0;          // decay: eta_t = eta0 * rate^t
  double gamma_shift = -1.0;  // inverse: eta_t = 1/(mu (t + shift)); <0 = use bound gamma
};

struct TrainingSection {
  std::uint32_t K = 5;
  std::uint32_t batch_size = 50;
  double noise_sigma = 0.0;
  LrConfig lr;
  double loss_gap_target = 1e-3;
};

struct TaskSection {
  std::size_t dim = 20;
  Heterogeneity heterogeneity = Heterogeneity::IID();
  double spread = 1.0;
  double mu_target = 0.5;
  double L_target = 2.0;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::sigma;
  std::size_t n = 100;
  SizeModelConfig size_model;
  std::uint32_t m = 15;
  std::uint32_t m_prime = 10;
  std::uint64_t rounds = 1000;
  std::int64_t burn_in = -1;  // <0 = default 10*(m_prime+1)
  std::vector<PolicyConfig> policies;
  std::vector<std::uint64_t> windows;
  TaskSection task;
  TrainingSection training;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";

  std::uint64_t resolved_burn_in() const {
    return burn_in >= 0 ? static_cast<std::uint64_t>(burn_in)
                        : 10ull * (static_cast<std::uint64_t>(m_prime) + 1);
  }
};

struct ConfigError : std::runtime_error {
  std::vector<std::string> issues;
  explicit ConfigError(std::vector<std::string> list)
      : std::runtime_error(join(list)), issues(std::move(list)) {}

 private:
  static std::string join(const std::vector<std::string>& list) {
    std::ostringstream os;
    os << "invalid config (" << list.size() << " issue" << (list.size() == 1 ? "" : "s") << ")";
    for (const auto& s : list) os << "\n  - " << s;
    return os.str();
  }
};

namespace detail {

inline bool parse_policy_kind(const std::string& s, PolicyKind& out) {
  if (s == "random_weighted") out = PolicyKind::random_weighted;
  else if (s == "probabilistic") out = PolicyKind::probabilistic;
  else if (s == "markov_optimal") out = PolicyKind::markov_optimal;
  else if (s == "markov_monotone") out = PolicyKind::markov_monotone;
  else return false;
  return true;
}

inline bool parse_exact_m(const std::string& s, ExactM& out) {
  if (s == "off") out = ExactM::off;
  else if (s == "trim") out = ExactM::trim;
  else if (s == "pad") out = ExactM::pad;
  else return false;
  return true;
}

inline bool parse_experiment_kind(const std::string& s, ExperimentKind& out) {
  if (s == "sigma") out = ExperimentKind::sigma;
  else if (s == "intervals") out = ExperimentKind::intervals;
  else if (s == "stability") out = ExperimentKind::stability;
  else if (s == "train") out = ExperimentKind::train;
  else if (s == "markov-analyze") out = ExperimentKind::markov_analyze;
  else return false;
  return true;
}

// Typed field access that records a path-tagged issue instead of throwing,
// so one pass can report every problem in the file.
class FieldReader {
 public:
  explicit FieldReader(std::vector<std::string>& issues) : issues_(issues) {}

  template <typename T>
  bool get(const nlohmann::json& obj, const std::string& path, const char* key, T& out,
           bool required = false) {
    if (!obj.contains(key)) {
      if (required) issue(path, key, "is required");
      return false;
    }
    try {
      out = obj.at(key).get<T>();
      return true;
    } catch (const nlohmann::json::exception&) {
      issue(path, key, "has the wrong type");
      return false;
    }
  }

  void issue(const std::string& path, const char* key, const std::string& what) {
    issues_.push_back(path.empty() ? std::string(key) + " " + what
                                   : path + "." + key + " " + what);
  }

  void issue_at(const std::string& path, const std::string& what) {
    issues_.push_back(path + " " + what);
  }

 private:
  std::vector<std::string>& issues_;
};

}  // namespace detail

// Parses a JSON document into an ExperimentConfig. Structural problems
// (unknown enum values, wrong types, missing required fields) are collected
// and thrown together as one ConfigError.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  std::vector<std::string> issues;
  detail::FieldReader r(issues);
  ExperimentConfig cfg;

  if (!j.is_object()) throw ConfigError({"top level must be a JSON object"});

  std::string exp;
  if (r.get(j, "", "experiment", exp, true) &&
      !detail::parse_experiment_kind(exp, cfg.experiment))
    r.issue("", "experiment", "must be one of sigma|intervals|stability|train|markov-analyze");

  if (j.contains("population")) {
    const auto& p = j.at("population");
    if (!p.is_object()) {
      r.issue_at("population", "must be an object");
    } else {
      r.get(p, "population", "n", cfg.n);
      if (p.contains("size_model")) {
        const auto& sm = p.at("size_model");
        if (!sm.is_object()) {
          r.issue_at("population.size_model", "must be an object");
        } else {
          std::string kind;
          if (r.get(sm, "population.size_model", "kind", kind, true)) {
            if (kind == "homogeneous") {
              cfg.size_model.kind = SizeModelConfig::Kind::homogeneous;
              r.get(sm, "population.size_model", "d_value", cfg.size_model.d_value);
            } else if (kind == "zipf") {
              cfg.size_model.kind = SizeModelConfig::Kind::zipf;
              r.get(sm, "population.size_model", "a", cfg.size_model.a);
              r.get(sm, "population.size_model", "d_min", cfg.size_model.d_min);
            } else {
              r.issue("population.size_model", "kind", "must be homogeneous|zipf");
            }
          }
        }
      }
    }
  }

  r.get(j, "", "m", cfg.m);
  if (j.contains("markov")) {
    const auto& mk = j.at("markov");
    if (!mk.is_object()) r.issue_at("markov", "must be an object");
    else r.get(mk, "markov", "m_prime", cfg.m_prime);
  }
  r.get(j, "", "rounds", cfg.rounds);
  r.get(j, "", "burn_in", cfg.burn_in);
  r.get(j, "", "windows", cfg.windows);
  r.get(j, "", "seeds", cfg.seeds, true);
  r.get(j, "", "output_dir", cfg.output_dir);

  if (j.contains("policies")) {
    const auto& pol = j.at("policies");
    if (!pol.is_array()) {
      r.issue_at("policies", "must be an array");
    } else {
      for (std::size_t i = 0; i < pol.size(); ++i) {
        const std::string path = "policies[" + std::to_string(i) + "]";
        PolicyConfig pc;
        const auto& e = pol[i];
        if (e.is_string()) {
          if (!detail::parse_policy_kind(e.get<std::string>(), pc.kind)) {
            r.issue_at(path, "has unknown policy kind '" + e.get<std::string>() + "'");
            continue;
          }
        } else if (e.is_object()) {
          std::string kind;
          if (!r.get(e, path, "kind", kind, true)) continue;
          if (!detail::parse_policy_kind(kind, pc.kind)) {
            r.issue(path, "kind", "must be one of random_weighted|probabilistic|markov_optimal|markov_monotone");
            continue;
          }
          std::string em;
          if (r.get(e, path, "exact_m", em) && !detail::parse_exact_m(em, pc.exact_m))
            r.issue(path, "exact_m", "must be off|trim|pad");
        } else {
          r.issue_at(path, "must be a string or object");
          continue;
        }
        cfg.policies.push_back(pc);
      }
    }
  } else {
    r.issue("", "policies", "is required");
  }

  if (j.contains("task")) {
    const auto& t = j.at("task");
    if (!t.is_object()) {
      r.issue_at("task", "must be an object");
    } else {
      r.get(t, "task", "dim", cfg.task.dim);
      r.get(t, "task", "spread", cfg.task.spread);
      r.get(t, "task", "mu", cfg.task.mu_target);
      r.get(t, "task", "L", cfg.task.L_target);
      if (t.contains("heterogeneity")) {
        const auto& h = t.at("heterogeneity");
        if (!h.is_object()) {
          r.issue_at("task.heterogeneity", "must be an object");
        } else {
          std::string kind;
          if (r.get(h, "task.heterogeneity", "kind", kind, true)) {
            if (kind == "iid") {
              cfg.task.heterogeneity = Heterogeneity::IID();
            } else if (kind == "dirichlet") {
              double alpha = 0.3;
              r.get(h, "task.heterogeneity", "alpha", alpha);
              cfg.task.heterogeneity = Heterogeneity::Dirichlet(alpha);
            } else {
              r.issue("task.heterogeneity", "kind", "must be iid|dirichlet");
            }
          }
        }
      }
    }
  }

  if (j.contains("training")) {
    const auto& tr = j.at("training");
    if (!tr.is_object()) {
      r.issue_at("training", "must be an object");
    } else {
      r.get(tr, "training", "K", cfg.training.K);
      r.get(tr, "training", "batch_size", cfg.training.batch_size);
      r.get(tr, "training", "noise_sigma", cfg.training.noise_sigma);
      r.get(tr, "training", "loss_gap_target", cfg.training.loss_gap_target);
      if (tr.contains("lr")) {
        const auto& lr = tr.at("lr");
        if (!lr.is_object()) {
          r.issue_at("training.lr", "must be an object");
        } else {
          std::string kind;
          if (r.get(lr, "training.lr", "kind", kind, true)) {
            if (kind == "decay") {
              cfg.training.lr.kind = LrConfig::Kind::decay;
              r.get(lr, "training.lr", "eta0", cfg.training.lr.eta0);
              r.get(lr, "training.lr", "rate", cfg.training.lr.rate);
            } else if (kind == "inverse") {
              cfg.training.lr.kind = LrConfig::Kind::inverse;
              r.get(lr, "training.lr", "gamma_shift", cfg.training.lr.gamma_shift);
            } else {
              r.issue("training.lr", "kind", "must be decay|inverse");
            }
          }
        }
      }
    }
  }

  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

// Semantic validation on a parsed config. Checks everything and reports all
// failures together; a clean pass returns normally.
inline void validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> issues;
  auto bad = [&](const std::string& s) { issues.push_back(s); };

  if (cfg.n < 1) bad("population.n must be at least 1");
  if (cfg.m < 1) bad("m must be at least 1");
  if (cfg.n >= 1 && cfg.m > cfg.n) bad("m exceeds n");
  if (cfg.m_prime < 1) bad("markov.m_prime must be at least 1");
  if (cfg.rounds < 1) bad("rounds must be at least 1");
  if (cfg.size_model.kind == SizeModelConfig::Kind::zipf && cfg.size_model.a <= 1.0)
    bad("population.size_model.a: shape must exceed 1");
  if (cfg.size_model.kind == SizeModelConfig::Kind::zipf && cfg.size_model.d_min < 1)
    bad("population.size_model.d_min must be at least 1");
  if (cfg.size_model.kind == SizeModelConfig::Kind::homogeneous && cfg.size_model.d_value < 1)
    bad("population.size_model.d_value must be at least 1");
  if (cfg.policies.empty()) bad("policies must list at least one policy");
  if (cfg.seeds.empty()) bad("seeds must list at least one seed");

  if (cfg.experiment == ExperimentKind::stability) {
    if (cfg.windows.empty()) bad("windows must be non-empty for the stability experiment");
    for (std::size_t i = 0; i < cfg.windows.size(); ++i) {
      if (cfg.windows[i] < 1 || cfg.windows[i] > cfg.rounds)
        bad("windows[" + std::to_string(i) + "] must lie in [1, rounds]");
    }
  }

  bool has_monotone = false, has_markov = false;
  for (const auto& p : cfg.policies) {
    has_markov = has_markov || is_markov(p.kind);
    has_monotone = has_monotone || p.kind == PolicyKind::markov_monotone;
  }
  // Calibration feasibility is a config-time error, not a runtime surprise.
  if (has_markov && cfg.m >= 1 && cfg.m <= cfg.n && cfg.m_prime >= 1) {
    if (has_monotone) {
      try {
        calibrate_monotone_chain(cfg.n, cfg.m, cfg.m_prime);
      } catch (const CalibrationError& e) {
        bad(std::string("policies: markov_monotone infeasible: ") + e.what());
      }
    }
  }

  if (cfg.experiment == ExperimentKind::train) {
    if (cfg.task.dim < 1) bad("task.dim must be at least 1");
    if (cfg.task.spread < 0.0) bad("task.spread must be non-negative");
    if (cfg.task.heterogeneity.kind == Heterogeneity::Kind::dirichlet &&
        cfg.task.heterogeneity.alpha <= 0.0)
      bad("task.heterogeneity.alpha must be positive");
    if (!(cfg.task.mu_target > 0.0) || !(cfg.task.L_target >= cfg.task.mu_target))
      bad("task curvature targets need 0 < mu <= L");
    if (cfg.training.K < 1) bad("training.K must be at least 1");
    if (cfg.training.batch_size < 1) bad("training.batch_size must be at least 1");
    if (cfg.training.noise_sigma < 0.0) bad("training.noise_sigma must be non-negative");
    if (!(cfg.training.loss_gap_target > 0.0)) bad("training.loss_gap_target must be positive");
    if (cfg.training.lr.kind == LrConfig::Kind::decay) {
      if (!(cfg.training.lr.eta0 > 0.0)) bad("training.lr.eta0 must be positive");
      if (!(cfg.training.lr.rate > 0.0 && cfg.training.lr.rate <= 1.0))
        bad("training.lr.rate must lie in (0, 1]");
    }
  }

  if (!issues.empty()) throw ConfigError(std::move(issues));
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file: " + path});
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({std::string("JSON parse error: ") + e.what()});
  }
  ExperimentConfig cfg = parse_config(j);
  validate_config(cfg);
  return cfg;
}

// The resolved config, defaults filled in, as echoed into manifest.json.
inline nlohmann::ordered_json resolved_config_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["experiment"] = to_string(cfg.experiment);
  j["population"]["n"] = cfg.n;
  if (cfg.size_model.kind == SizeModelConfig::Kind::homogeneous) {
    j["population"]["size_model"] = {{"kind", "homogeneous"},
                                     {"d_value", cfg.size_model.d_value}};
  } else {
    j["population"]["size_model"] = {
        {"kind", "zipf"}, {"a", cfg.size_model.a}, {"d_min", cfg.size_model.d_min}};
  }
  j["m"] = cfg.m;
  j["markov"]["m_prime"] = cfg.m_prime;
  j["rounds"] = cfg.rounds;
  j["burn_in"] = cfg.resolved_burn_in();
  auto pols = nlohmann::ordered_json::array();
  for (const auto& p : cfg.policies)
    pols.push_back({{"kind", to_string(p.kind)}, {"exact_m", to_string(p.exact_m)}});
  j["policies"] = pols;
  if (cfg.experiment == ExperimentKind::stability) j["windows"] = cfg.windows;
  if (cfg.experiment == ExperimentKind::train) {
    j["task"]["dim"] = cfg.task.dim;
    if (cfg.task.heterogeneity.kind == Heterogeneity::Kind::iid)
      j["task"]["heterogeneity"] = {{"kind", "iid"}};
    else
      j["task"]["heterogeneity"] = {{"kind", "dirichlet"},
                                    {"alpha", cfg.task.heterogeneity.alpha}};
    j["task"]["spread"] = cfg.task.spread;
    j["task"]["mu"] = cfg.task.mu_target;
    j["task"]["L"] = cfg.task.L_target;
    j["training"]["K"] = cfg.training.K;
    j["training"]["batch_size"] = cfg.training.batch_size;
    j["training"]["noise_sigma"] = cfg.training.noise_sigma;
    if (cfg.training.lr.kind == LrConfig::Kind::decay)
      j["training"]["lr"] = {{"kind", "decay"},
                             {"eta0", cfg.training.lr.eta0},
                             {"rate", cfg.training.lr.rate}};
    else
      j["training"]["lr"] = {{"kind", "inverse"},
                             {"gamma_shift", cfg.training.lr.gamma_shift}};
    j["training"]["loss_gap_target"] = cfg.training.loss_gap_target;
  }
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace aoifl
