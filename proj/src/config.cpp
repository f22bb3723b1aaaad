#include "feedloop/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace feedloop {

namespace {

[[noreturn]] void fail(const std::string& name, int line,
                       const std::string& msg) {
  throw std::runtime_error("config " + name + ":" + std::to_string(line) +
                           ": " + msg);
}

std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r");
  if (from == std::string::npos) return "";
  const auto to = s.find_last_not_of(" \t\r");
  return s.substr(from, to - from + 1);
}

struct RawConfig {
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };
  std::string name;
  std::map<std::string, std::map<std::string, Entry>> sections;

  const Entry* find(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    if (s == sections.end()) return nullptr;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.used = true;
    return &k->second;
  }

  template <typename T, typename Parse>
  void get(const std::string& section, const std::string& key, T& out,
           Parse parse) const {
    const Entry* e = find(section, key);
    if (!e) return;
    try {
      out = parse(e->value);
    } catch (const std::exception& ex) {
      fail(name, e->line, "bad value for " + section + "." + key + ": " +
                              ex.what());
    }
  }

  void check_all_used() const {
    for (const auto& [section, keys] : sections)
      for (const auto& [key, entry] : keys)
        if (!entry.used)
          fail(name, entry.line, "unknown key " + section + "." + key);
  }
};

RawConfig read_raw(std::istream& in, const std::string& name) {
  static const std::vector<std::string> kSections = {"environment", "model",
                                                     "policy", "experiment"};
  RawConfig raw;
  raw.name = name;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(name, lineno, "unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) ==
          kSections.end())
        fail(name, lineno, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(name, lineno, "expected key = value");
    if (section.empty()) fail(name, lineno, "key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(name, lineno, "empty key");
    if (raw.sections[section].count(key))
      fail(name, lineno, "duplicate key " + section + "." + key);
    raw.sections[section][key] = RawConfig::Entry{value, lineno, false};
  }
  return raw;
}

int parse_int(const std::string& v) {
  std::size_t pos = 0;
  const int out = std::stoi(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return out;
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  const double out = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t pos = 0;
  const std::uint64_t out = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true/false");
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

Arm parse_arm(const std::string& v) {
  if (v == "feedback") return Arm::feedback;
  if (v == "cafl") return Arm::cafl;
  if (v == "ipw") return Arm::ipw;
  if (v == "uniform") return Arm::uniform;
  if (v == "shadow" || v == "random_shadow") return Arm::shadow;
  throw std::invalid_argument("unknown arm " + v);
}

}  // namespace

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::feedback: return "feedback";
    case Arm::cafl: return "cafl";
    case Arm::ipw: return "ipw";
    case Arm::uniform: return "uniform";
    case Arm::shadow: return "shadow";
  }
  throw std::logic_error("unknown arm");
}

void ExperimentConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
  if (retrain_every < 1)
    throw std::invalid_argument("config: retrain_every must be >= 1");
  if (replications < 1)
    throw std::invalid_argument("config: replications must be >= 1");
  if (test_size < 1)
    throw std::invalid_argument("config: test_size must be >= 1");
  if (arms.empty()) throw std::invalid_argument("config: no arms selected");
  for (std::size_t a = 0; a < arms.size(); ++a)
    for (std::size_t b = a + 1; b < arms.size(); ++b)
      if (arms[a] == arms[b])
        throw std::invalid_argument("config: duplicate arm " +
                                    arm_name(arms[a]));
  {
    const bool latent_env = env_kind == EnvKind::latent;
    const long long users = latent_env ? latent.users : dirichlet.users;
    const long long items = latent_env ? latent.items : dirichlet.items;
    if (no_repeat && static_cast<long long>(horizon) * policy.n * users +
                             test_size >
                         users * items)
      throw std::invalid_argument(
          "config: horizon * n * users + test_size exceeds the catalogue in "
          "no-repeat mode");
  }
  if (pan_test_per_user < 1)
    throw std::invalid_argument("config: pan_test_per_user must be >= 1");
  for (const std::string& s : pan_schemes)
    if (s != "naive" && s != "popularity" && s != "cafl")
      throw std::invalid_argument("config: unknown pan scheme " + s);
}

ExperimentConfig parse_config(std::istream& in, const std::string& name) {
  const RawConfig raw = read_raw(in, name);
  ExperimentConfig cfg;

  raw.get("environment", "kind", cfg.env_kind, [&](const std::string& v) {
    if (v == "latent") return EnvKind::latent;
    if (v == "dirichlet") return EnvKind::dirichlet;
    throw std::invalid_argument("expected latent or dirichlet");
  });
  // Shared sizes land in both environment configs.
  int users = cfg.env_kind == EnvKind::latent ? cfg.latent.users
                                              : cfg.dirichlet.users;
  int items = cfg.env_kind == EnvKind::latent ? cfg.latent.items
                                              : cfg.dirichlet.items;
  raw.get("environment", "users", users, parse_int);
  raw.get("environment", "items", items, parse_int);
  cfg.latent.users = cfg.dirichlet.users = users;
  cfg.latent.items = cfg.dirichlet.items = items;
  // `k` configures whichever environment kind is active; each keeps its
  // own default otherwise (8 latent factors, 10 topics).
  int env_k = cfg.env_kind == EnvKind::latent ? cfg.latent.k : cfg.dirichlet.k;
  raw.get("environment", "k", env_k, parse_int);
  (cfg.env_kind == EnvKind::latent ? cfg.latent.k : cfg.dirichlet.k) = env_k;
  raw.get("environment", "noise_variance", cfg.latent.noise_variance,
          parse_double);
  raw.get("environment", "clip_lo", cfg.latent.clip_lo, parse_double);
  raw.get("environment", "clip_hi", cfg.latent.clip_hi, parse_double);
  raw.get("environment", "factor_spread", cfg.latent.factor_spread,
          parse_double);
  raw.get("environment", "rating_variance", cfg.dirichlet.rating_variance,
          parse_double);
  raw.get("environment", "moment_exact", cfg.dirichlet.moment_exact,
          parse_bool);
  raw.get("environment", "user_concentration",
          cfg.dirichlet.user_concentration, parse_double);
  raw.get("environment", "item_concentration",
          cfg.dirichlet.item_concentration, parse_double);
  raw.get("environment", "top_k", cfg.dirichlet.top_k, parse_int);
  raw.get("environment", "boost", cfg.dirichlet.boost, parse_double);

  raw.get("model", "kind", cfg.model_kind, [](const std::string& v) {
    if (v == "als") return ModelKind::als;
    if (v == "sgd") return ModelKind::sgd;
    throw std::invalid_argument("expected als or sgd");
  });
  raw.get("model", "k", cfg.model.k, parse_int);
  raw.get("model", "lambda", cfg.model.lambda, parse_double);
  raw.get("model", "sweeps", cfg.model.als_sweeps, parse_int);
  raw.get("model", "lr", cfg.model.sgd_lr, parse_double);
  raw.get("model", "epochs", cfg.model.sgd_epochs, parse_int);
  raw.get("model", "batch", cfg.model.sgd_batch, parse_int);
  raw.get("model", "init_scale", cfg.model.init_scale, parse_double);

  raw.get("policy", "kind", cfg.policy.kind, [](const std::string& v) {
    if (v == "uniform") return PolicyKind::uniform_random;
    if (v == "topn") return PolicyKind::topn_epsilon;
    if (v == "softmax") return PolicyKind::softmax;
    if (v == "pan") return PolicyKind::pan_exposure;
    throw std::invalid_argument("expected uniform, topn, softmax or pan");
  });
  raw.get("policy", "n", cfg.policy.n, parse_int);
  raw.get("policy", "epsilon", cfg.policy.epsilon, parse_double);
  raw.get("policy", "tau", cfg.policy.tau, parse_double);
  raw.get("policy", "no_repeat", cfg.no_repeat, parse_bool);

  raw.get("experiment", "horizon", cfg.horizon, parse_int);
  raw.get("experiment", "retrain_every", cfg.retrain_every, parse_int);
  raw.get("experiment", "test_size", cfg.test_size, parse_int);
  raw.get("experiment", "replications", cfg.replications, parse_int);
  raw.get("experiment", "seed", cfg.seed, parse_u64);
  raw.get("experiment", "arms", cfg.arms, [](const std::string& v) {
    std::vector<Arm> arms;
    for (const std::string& tok : parse_list(v)) arms.push_back(parse_arm(tok));
    return arms;
  });
  raw.get("experiment", "estimator", cfg.adjusted_scheme,
          [](const std::string& v) {
            if (v == "naive") return WeightScheme::naive;
            if (v == "ipw") return WeightScheme::ipw;
            if (v == "cafl" || v == "cafl_special")
              return WeightScheme::cafl_special;
            if (v == "cafl_general") return WeightScheme::cafl_general;
            throw std::invalid_argument(
                "expected naive, ipw, cafl, cafl_special or cafl_general");
          });
  raw.get("experiment", "ci_tdist", cfg.ci_tdist, parse_bool);
  raw.get("experiment", "pan_schemes", cfg.pan_schemes, parse_list);
  raw.get("experiment", "pan_test_per_user", cfg.pan_test_per_user,
          parse_int);

  raw.check_all_used();
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  return parse_config(in, path);
}

}  // namespace feedloop
