#include "emo/core/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "emo/core/errors.hpp"

extern char** environ;

namespace emo {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] void bad(const std::string& key, const char* expected, const std::string& value) {
  throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (v.empty() || r.ec != std::errc() || r.ptr != end) bad(key, "a real number", v);
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (v.empty() || r.ec != std::errc() || r.ptr != end) bad(key, "a non-negative integer", v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  bad(key, "on/off", v);
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<std::size_t>(to_u64(key, trim(item))));
  if (out.empty()) bad(key, "a comma-separated list of integers", v);
  return out;
}

std::string fmt(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::string fmt_list(const std::vector<std::size_t>& l) {
  std::string out;
  for (std::size_t i = 0; i < l.size(); ++i) out += (i ? "," : "") + std::to_string(l[i]);
  return out;
}

struct Entry {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename M>
Entry real(M member) {
  return {[member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_double(k, v); }};
}

template <typename M>
Entry count(M member) {
  return {[member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_u64(k, v));
          }};
}

template <typename M>
Entry flag(M member) {
  return {[member](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "on" : "off"); },
          [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_bool(k, v); }};
}

template <typename M>
Entry list(M member) {
  return {[member](const RunConfig& c) { return fmt_list(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = to_list(k, v); }};
}

#define F(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<std::pair<std::string, Entry>>& registry() {
  static const std::vector<std::pair<std::string, Entry>> r = {
      {"run.condition",
       {[](const RunConfig& c) { return std::string(condition_name(c.condition)); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.condition = parse_condition(v);
          } catch (const Error&) {
            bad(k, "face-only or face-natural", v);
          }
        }}},
      {"run.second_layer", flag(F(second_layer))},
      {"run.epochs", count(F(epochs))},
      {"run.seed", count(F(seed))},
      {"run.t_lstm", count(F(t_lstm))},
      {"run.t_l2", count(F(t_l2))},
      {"run.interoception",
       {[](const RunConfig& c) { return std::string(c.interoception == InteroceptionMode::add ? "add" : "subtract"); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "add")
            c.interoception = InteroceptionMode::add;
          else if (v == "subtract")
            c.interoception = InteroceptionMode::subtract;
          else
            bad(k, "add or subtract", v);
        }}},
      {"run.ram_checkpoint",
       {[](const RunConfig& c) { return c.ram_checkpoint; },
        [](RunConfig& c, const std::string&, const std::string& v) { c.ram_checkpoint = v; }}},
      {"run.checkpoint_every", count(F(checkpoint_every))},
      {"run.eval_epochs", count(F(eval_epochs))},
      {"memory.gamma", real(F(memory_gamma))},
      {"memory.capacity", count(F(memory_capacity))},
      {"appraisal.tau", real(F(appraisal.tau))},
      {"appraisal.eta", real(F(appraisal.eta))},
      {"appraisal.d_eyelid", real(F(appraisal.d_eyelid))},
      {"appraisal.d_sad", real(F(appraisal.d_sad))},
      {"homeostasis.window", count(F(homeostasis.window))},
      {"homeostasis.midpoint_valence", real(F(homeostasis.midpoint.valence))},
      {"homeostasis.midpoint_arousal", real(F(homeostasis.midpoint.arousal))},
      {"homeostasis.reward_constant", real(F(homeostasis.reward_constant))},
      {"env.image_side", count(F(env.image_side))},
      {"env.natural_count", count(F(env.natural_count))},
      {"env.natural_probability", real(F(env.natural_probability))},
      {"env.action_cost_scale", real(F(env.action_cost_scale))},
      {"env.eyes_closed_threshold", real(F(env.eyes_closed_threshold))},
      {"predictor.hidden_channels", count(F(predictor.hidden))},
      {"predictor.kernel", count(F(predictor.kernel))},
      {"predictor.layers", count(F(predictor.layers))},
      {"predictor.lr", real(F(predictor.adam.lr))},
      {"predictor.beta1", real(F(predictor.adam.beta1))},
      {"predictor.beta2", real(F(predictor.adam.beta2))},
      {"predictor.eps", real(F(predictor.adam.eps))},
      {"predictor.intero_min", real(F(predictor.intero_min))},
      {"predictor.intero_max", real(F(predictor.intero_max))},
      {"ddpg.gamma", real(F(ddpg.gamma))},
      {"ddpg.soft_update", real(F(ddpg.soft_update))},
      {"ddpg.actor_lr", real(F(ddpg.actor_lr))},
      {"ddpg.critic_lr", real(F(ddpg.critic_lr))},
      {"ddpg.reward_scale", real(F(ddpg.reward_scale))},
      {"ddpg.buffer", count(F(ddpg.buffer))},
      {"ddpg.batch", count(F(ddpg.batch))},
      {"ddpg.warmup", count(F(ddpg.warmup))},
      {"ddpg.ou_theta", real(F(ddpg.ou.theta))},
      {"ddpg.ou_sigma", real(F(ddpg.ou.sigma))},
      {"ddpg.ou_dt", real(F(ddpg.ou.dt))},
      {"ddpg.actor_hidden", list(F(ddpg.actor_hidden))},
      {"ddpg.critic_hidden", list(F(ddpg.critic_hidden))},
      {"ddpg.batchnorm", flag(F(ddpg.batchnorm))},
      {"ddpg.state_image_side", count(F(state_image_side))},
      {"ram.glimpses", count(F(ram.glimpse.glimpses))},
      {"ram.scales", count(F(ram.glimpse.scales))},
      {"ram.patch", count(F(ram.glimpse.patch))},
      {"ram.scale_factor", count(F(ram.glimpse.scale_factor))},
      {"ram.glimpse_hidden", count(F(ram.glimpse_hidden))},
      {"ram.location_hidden", count(F(ram.location_hidden))},
      {"ram.core_hidden", count(F(ram.core_hidden))},
      {"ram.sigma", real(F(ram.location_sigma))},
      {"ram.reward_tolerance", real(F(ram.reward_tolerance))},
      {"ram.reinforce_weight", real(F(ram.reinforce_weight))},
      {"ram.policy_gradient_to_core", flag(F(ram.policy_gradient_to_core))},
      {"ram.lr", real(F(ram.adam.lr))},
      {"ram.batch", count(F(ram.batch))},
      {"ram.epochs", count(F(ram_epochs))},
      {"corpus.size", count(F(corpus.size))},
      {"corpus.held_out", count(F(corpus.held_out))},
      {"corpus.noise", real(F(corpus.noise))},
      {"corpus.face_fraction", real(F(corpus.face_fraction))},
  };
  return r;
}

#undef F

const Entry& find(const std::string& key) {
  for (const auto& [k, e] : registry())
    if (k == key) return e;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::synchronize() {
  predictor.side = env.image_side;
  ram.image_side = env.image_side;
  corpus.image_side = env.image_side;
  appraisal.eyelid_threshold = env.eyes_closed_threshold;
  ddpg.state_dim = 2 * state_image_side * state_image_side + 4;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (t_lstm == 0) fail("run.t_lstm", "must be positive");
  if (t_l2 == 0) fail("run.t_l2", "must be positive");
  if (t_l2 % t_lstm != 0) fail("run.t_l2", "must be a multiple of run.t_lstm");
  if (appraisal.d_eyelid == appraisal.d_sad) fail("appraisal.d_sad", "must differ from appraisal.d_eyelid");
  if (!(appraisal.tau > 0.0)) fail("appraisal.tau", "must be positive");
  if (appraisal.eta < 0.0) fail("appraisal.eta", "must be non-negative");
  if (memory_gamma < 0.0 || memory_gamma > 1.0) fail("memory.gamma", "must lie in [0, 1]");
  if (memory_capacity < 2) fail("memory.capacity", "must be at least 2");
  if (homeostasis.window == 0) fail("homeostasis.window", "must be positive");
  if (env.image_side < 4) fail("env.image_side", "must be at least 4");
  if (env.natural_probability < 0.0 || env.natural_probability > 1.0)
    fail("env.natural_probability", "must lie in [0, 1]");
  if (condition == Condition::face_plus_natural && env.natural_count == 0 && env.natural_probability > 0.0)
    fail("env.natural_count", "must be positive for the face-natural condition");
  if (state_image_side == 0 || env.image_side % state_image_side != 0)
    fail("ddpg.state_image_side", "must divide env.image_side");
  if (ddpg.warmup < 1) fail("ddpg.warmup", "must be positive");
  if (ram.image_side != env.image_side) fail("env.image_side", "disagrees with the ram input side");
  if (predictor.intero_max <= predictor.intero_min) fail("predictor.intero_max", "must exceed predictor.intero_min");
  appraisal.validate();
  predictor.validate();
  ddpg.validate();
  ram.validate();
  if (corpus.size <= corpus.held_out) fail("corpus.held_out", "must be smaller than corpus.size");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, e] : registry()) k.push_back(name);
    return k;
  }();
  return keys;
}

std::string get_config_value(const RunConfig& config, const std::string& key) { return find(key).get(config); }

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  find(key).set(config, key, trim(value));
  config.synchronize();
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& [key, e] : registry()) {
    const std::string s = key.substr(0, key.find('.'));
    if (s != section) {
      if (!section.empty()) out += "\n";
      out += "# " + s + "\n";
      section = s;
    }
    out += key + " = " + e.get(config) + "\n";
  }
  return out;
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    set_config_value(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  base.synchronize();
  return base;
}

ConfigOverrides environment_overrides() {
  ConfigOverrides out;
  const std::string prefix = kEnvPrefix;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry = *e;
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string name = entry.substr(prefix.size(), eq - prefix.size());
    std::string key;
    for (std::size_t i = 0; i < name.size(); ++i) {
      if (name.compare(i, 2, "__") == 0) {
        key += '.';
        ++i;
      } else {
        key += static_cast<char>(std::tolower(static_cast<unsigned char>(name[i])));
      }
    }
    out.emplace_back(key, entry.substr(eq + 1));
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const ConfigOverrides& env_overrides,
                      const ConfigOverrides& overrides) {
  RunConfig c;
  c.synchronize();
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + path->string());
    std::stringstream ss;
    ss << in.rdbuf();
    c = parse_config(ss.str(), c);
  }
  for (const auto& [k, v] : env_overrides) set_config_value(c, k, v);
  for (const auto& [k, v] : overrides) set_config_value(c, k, v);
  c.synchronize();
  c.validate();
  return c;
}

}  // namespace emo
