#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rlac/env/cartpole.hpp"
#include "rlac/errors.hpp"
#include "rlac/rng.hpp"
#include "rlac/train/config.hpp"

namespace rlac::io {

struct RunConfig {
  std::string algorithm = "rlac";
  train::TrainerConfig trainer;
  env::CartpoleParams env;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir;                 // empty: derived from the output root
  std::uint64_t checkpoint_interval = 100;  // iterations, 0 = final only

  void validate() const {
    if (algorithm != "rlac" && algorithm != "sac" && algorithm != "lqr")
      throw ConfigError("algo", "expected rlac, sac or lqr, got '" + algorithm + "'");
    if (seeds.empty()) throw ConfigError("seeds", "at least one seed required");
    trainer.validate();
    env.validate();
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string show(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key, "not a number: '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key, "not a nonnegative integer: '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

}  // namespace detail

struct ConfigField {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Every accepted key, in the order used for the resolved-config dump.
inline const std::vector<ConfigField>& config_schema() {
  static const std::vector<ConfigField> fields = [] {
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_uint;
    using detail::show;
    std::vector<ConfigField> f;
    auto real = [&f](std::string key, auto member) {
      f.push_back({key, [key, member](RunConfig& c, const std::string& v) { member(c) = parse_double(key, v); },
                   [member](const RunConfig& c) { return show(member(const_cast<RunConfig&>(c))); }});
    };
    auto count = [&f](std::string key, auto member) {
      f.push_back({key,
                   [key, member](RunConfig& c, const std::string& v) {
                     member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_uint(key, v));
                   },
                   [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }});
    };
    auto flag = [&f](std::string key, auto member) {
      f.push_back({key, [key, member](RunConfig& c, const std::string& v) { member(c) = parse_bool(key, v); },
                   [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)) ? "true" : "false"; }});
    };

    f.push_back({"algo", [](RunConfig& c, const std::string& v) { c.algorithm = v; },
                 [](const RunConfig& c) { return c.algorithm; }});
    f.push_back({"seeds",
                 [](RunConfig& c, const std::string& v) {
                   c.seeds.clear();
                   std::stringstream ss(v);
                   for (std::string item; std::getline(ss, item, ',');) {
                     const std::string t = detail::trim(item);
                     if (!t.empty()) c.seeds.push_back(parse_uint("seeds", t));
                   }
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
                   return s;
                 }});
    f.push_back({"output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
                 [](const RunConfig& c) { return c.output_dir; }});
    count("checkpoint_interval", [](RunConfig& c) -> auto& { return c.checkpoint_interval; });

    count("trainer.minibatch", [](RunConfig& c) -> auto& { return c.trainer.minibatch; });
    real("trainer.actor_lr", [](RunConfig& c) -> auto& { return c.trainer.actor_lr; });
    real("trainer.lyapunov_lr", [](RunConfig& c) -> auto& { return c.trainer.lyapunov_lr; });
    count("trainer.horizon", [](RunConfig& c) -> auto& { return c.trainer.horizon; });
    count("trainer.n_c", [](RunConfig& c) -> auto& { return c.trainer.collect_steps; });
    count("trainer.n_u", [](RunConfig& c) -> auto& { return c.trainer.update_rounds; });
    real("trainer.target_entropy", [](RunConfig& c) -> auto& { return c.trainer.target_entropy; });
    real("trainer.tau", [](RunConfig& c) -> auto& { return c.trainer.tau; });
    real("trainer.gamma", [](RunConfig& c) -> auto& { return c.trainer.gamma; });
    real("trainer.eta", [](RunConfig& c) -> auto& { return c.trainer.eta; });
    real("trainer.alpha3", [](RunConfig& c) -> auto& { return c.trainer.alpha3; });
    flag("trainer.discounted_target", [](RunConfig& c) -> auto& { return c.trainer.discounted_target; });
    real("trainer.lambda_lr", [](RunConfig& c) -> auto& { return c.trainer.lambda_lr; });
    real("trainer.beta_lr", [](RunConfig& c) -> auto& { return c.trainer.beta_lr; });
    real("trainer.disturber_lr", [](RunConfig& c) -> auto& { return c.trainer.disturber_lr; });
    real("trainer.initial_lambda", [](RunConfig& c) -> auto& { return c.trainer.initial_lambda; });
    real("trainer.initial_beta", [](RunConfig& c) -> auto& { return c.trainer.initial_beta; });
    real("trainer.action_scale", [](RunConfig& c) -> auto& { return c.trainer.action_scale; });
    real("trainer.disturbance_scale", [](RunConfig& c) -> auto& { return c.trainer.disturbance_scale; });
    flag("trainer.disturber_enabled", [](RunConfig& c) -> auto& { return c.trainer.disturber_enabled; });
    count("trainer.replay_capacity", [](RunConfig& c) -> auto& { return c.trainer.replay_capacity; });
    count("trainer.total_env_steps", [](RunConfig& c) -> auto& { return c.trainer.total_env_steps; });

    real("env.gravity", [](RunConfig& c) -> auto& { return c.env.gravity; });
    real("env.m_c", [](RunConfig& c) -> auto& { return c.env.cart_mass; });
    real("env.m_p", [](RunConfig& c) -> auto& { return c.env.pole_mass; });
    real("env.l", [](RunConfig& c) -> auto& { return c.env.half_pole_length; });
    real("env.dt", [](RunConfig& c) -> auto& { return c.env.dt; });
    real("env.x_threshold", [](RunConfig& c) -> auto& { return c.env.x_threshold; });
    real("env.theta_threshold", [](RunConfig& c) -> auto& { return c.env.theta_threshold; });
    real("env.force_limit", [](RunConfig& c) -> auto& { return c.env.force_limit; });
    count("env.max_steps", [](RunConfig& c) -> auto& { return c.env.max_steps; });
    return f;
  }();
  return fields;
}

// Full key for `key`; bare trainer field names are accepted as shorthand.
inline const ConfigField& resolve_key(const std::string& key) {
  for (const ConfigField& f : config_schema())
    if (f.key == key) return f;
  if (key.find('.') == std::string::npos) {
    for (const ConfigField& f : config_schema())
      if (f.key == "trainer." + key) return f;
  }
  throw ConfigError(key, "unknown key");
}

inline void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  resolve_key(key).set(cfg, value);
}

// `key = value` lines; '#' starts a comment. Repeated keys: last wins.
inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config") {
  std::stringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no), "expected key = value");
    set_value(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Defaults, then the optional file, then overrides in order; validated.
inline RunConfig parse_config(const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  RunConfig cfg;
  if (!path.empty()) apply_config_text(cfg, read_file(path), path.string());
  for (const auto& [k, v] : overrides) set_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text,
                                   const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  RunConfig cfg;
  apply_config_text(cfg, text);
  for (const auto& [k, v] : overrides) set_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

// Every key with its resolved value; parsing this text reproduces `cfg`.
inline std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const ConfigField& f : config_schema()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

// Hash of the parts that affect training (run-layout keys excluded).
inline std::uint64_t config_hash(const RunConfig& cfg) {
  std::string s;
  for (const ConfigField& f : config_schema())
    if (f.key.starts_with("trainer.") || f.key.starts_with("env.") || f.key == "algo") s += f.key + "=" + f.get(cfg) + "\n";
  return fnv1a(s);
}

}  // namespace rlac::io
