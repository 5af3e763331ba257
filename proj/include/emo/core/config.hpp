#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emo/core/appraisal.hpp"
#include "emo/core/ddpg.hpp"
#include "emo/core/environment.hpp"
#include "emo/core/homeostasis.hpp"
#include "emo/core/predictor.hpp"
#include "emo/core/ram.hpp"

namespace emo {

enum class InteroceptionMode { add, subtract };

struct RunConfig {
  Condition condition = Condition::face_plus_natural;
  bool second_layer = true;
  std::size_t epochs = 20000;
  std::uint64_t seed = 1;
  std::size_t t_lstm = 100;
  std::size_t t_l2 = 1000;
  InteroceptionMode interoception = InteroceptionMode::add;
  std::string ram_checkpoint;
  std::size_t checkpoint_every = 0;
  std::size_t eval_epochs = 3000;

  double memory_gamma = 0.1;
  std::size_t memory_capacity = 1000;
  FatigueConfig appraisal{};
  HomeostasisConfig homeostasis{};
  EnvironmentConfig env{};
  PredictorConfig predictor{};
  DdpgConfig ddpg{};
  std::size_t state_image_side = 16;
  RamConfig ram{};
  std::size_t ram_epochs = 50;
  CorpusSpec corpus{};

  // Copies shared values into the module configs (image side, thresholds, state size).
  void synchronize();
  // Throws ConfigError naming the offending key.
  void validate() const;
};

inline constexpr const char* kEnvPrefix = "EMO__";

const std::vector<std::string>& config_keys();
std::string get_config_value(const RunConfig& config, const std::string& key);
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

// "key = value" lines, '#' starts a comment.
std::string serialize_config(const RunConfig& config);
RunConfig parse_config(std::string_view text, RunConfig base = {});

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

// EMO__SECTION__KEY=value pairs from the process environment, as dotted keys.
ConfigOverrides environment_overrides();

// defaults < file < environment < explicit overrides; the result is validated.
RunConfig load_config(const std::optional<std::filesystem::path>& path, const ConfigOverrides& env_overrides,
                      const ConfigOverrides& overrides);

}  // namespace emo
