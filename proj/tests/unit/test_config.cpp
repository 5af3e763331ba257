#include "doctest.h"

#include <cstdlib>
#include <fstream>

#include "emo/core/config.hpp"
#include "emo/core/errors.hpp"
#include "unit/support.hpp"

using namespace emo;

TEST_CASE("defaults carry the model constants") {
  RunConfig c;
  CHECK(c.memory_gamma == 0.1);
  CHECK(c.appraisal.tau == 50.0);
  CHECK(c.appraisal.eta == 0.01);
  CHECK(c.appraisal.d_eyelid == 50.0);
  CHECK(c.appraisal.d_sad == 75.0);
  CHECK(c.t_lstm == 100);
  CHECK(c.t_l2 == 1000);
  CHECK(c.ddpg.buffer == 500);
  CHECK(c.ddpg.batch == 200);
  CHECK(c.predictor.adam.lr == 0.001);
  CHECK(c.predictor.adam.beta1 == 0.9);
  CHECK(c.predictor.adam.beta2 == 0.999);
  CHECK(c.predictor.adam.eps == 1e-8);
  CHECK(c.ddpg.actor_lr == 1e-4);
  CHECK(c.ddpg.critic_lr == 1e-3);
  CHECK(c.homeostasis.reward_constant == 40.0);
  CHECK(c.homeostasis.midpoint == AffectVector{5.0, 5.0});
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("empty text gives the default document") {
  CHECK(serialize_config(parse_config("")) == serialize_config(RunConfig{}));
  CHECK(serialize_config(parse_config("# only a comment\n\n   \n")) == serialize_config(RunConfig{}));
}

TEST_CASE("single override changes exactly one key") {
  RunConfig base;
  RunConfig c = parse_config("memory.gamma = 0.2\n");
  CHECK(c.memory_gamma == 0.2);
  for (const auto& key : config_keys()) {
    if (key == "memory.gamma") continue;
    CHECK_MESSAGE(get_config_value(c, key) == get_config_value(base, key), key);
  }
}

TEST_CASE("equal action distances are rejected naming the key") {
  RunConfig c = parse_config("appraisal.d_eyelid = 50\nappraisal.d_sad = 50\n");
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("appraisal.d_sad") != std::string::npos);
  }
}

TEST_CASE("unknown keys and type mismatches are rejected") {
  CHECK_THROWS_WITH_AS(parse_config("ddpg.nonsense = 1"), doctest::Contains("ddpg.nonsense"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("run.epochs = many"), doctest::Contains("run.epochs"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("run.epochs = -3"), doctest::Contains("run.epochs"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("ddpg.batchnorm = maybe"), doctest::Contains("ddpg.batchnorm"), ConfigError);
  CHECK_THROWS_AS(parse_config("just some words"), ConfigError);
}

TEST_CASE("serialize and parse round-trip losslessly") {
  RunConfig c;
  set_config_value(c, "memory.gamma", "0.123456789012345678");
  set_config_value(c, "ddpg.soft_update", "1e-7");
  set_config_value(c, "ddpg.actor_hidden", "16,8,4");
  set_config_value(c, "run.condition", "face-only");
  set_config_value(c, "run.second_layer", "false");
  set_config_value(c, "run.interoception", "subtract");
  set_config_value(c, "run.ram_checkpoint", "/tmp/some dir/ram.ckpt");
  set_config_value(c, "homeostasis.midpoint_valence", "4.25");
  const std::string text = serialize_config(c);
  RunConfig back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.memory_gamma == c.memory_gamma);
  CHECK(back.ddpg.soft_update == 1e-7);
  CHECK(back.ddpg.actor_hidden == std::vector<std::size_t>{16, 8, 4});
  CHECK(back.condition == Condition::face_only);
  CHECK_FALSE(back.second_layer);
  CHECK(back.interoception == InteroceptionMode::subtract);
  CHECK(back.ram_checkpoint == "/tmp/some dir/ram.ckpt");
}

TEST_CASE("every key round-trips through its own value") {
  RunConfig c;
  for (const auto& key : config_keys()) {
    RunConfig d = c;
    set_config_value(d, key, get_config_value(c, key));
    CHECK_MESSAGE(serialize_config(d) == serialize_config(c), key);
  }
}

TEST_CASE("precedence is defaults, file, environment, flags") {
  auto dir = test::scratch_dir("config");
  {
    std::ofstream f(dir / "run.cfg");
    f << "memory.gamma = 0.3\nrun.epochs = 10\nrun.seed = 5\n";
  }
  ConfigOverrides env{{"run.epochs", "20"}, {"run.seed", "6"}};
  ConfigOverrides flags{{"run.seed", "7"}};
  RunConfig c = load_config(dir / "run.cfg", env, flags);
  CHECK(c.memory_gamma == 0.3);
  CHECK(c.epochs == 20);
  CHECK(c.seed == 7);
  CHECK(c.t_lstm == 100);
  CHECK_THROWS_AS(load_config(dir / "missing.cfg", {}, {}), IoError);
  CHECK_THROWS_AS(load_config(std::nullopt, {}, {{"appraisal.d_sad", "50"}}), ConfigError);
}

TEST_CASE("environment variables map onto dotted keys") {
  ::setenv("EMO__DDPG__GAMMA", "0.5", 1);
  ::setenv("EMO__RUN__T_LSTM", "50", 1);
  auto env = environment_overrides();
  ::unsetenv("EMO__DDPG__GAMMA");
  ::unsetenv("EMO__RUN__T_LSTM");
  RunConfig c = load_config(std::nullopt, env, {});
  CHECK(c.ddpg.gamma == 0.5);
  CHECK(c.t_lstm == 50);
}

TEST_CASE("shared values are synchronized") {
  RunConfig c = parse_config("env.image_side = 16\nddpg.state_image_side = 8\n");
  CHECK(c.ram.image_side == 16);
  CHECK(c.predictor.side == 16);
  CHECK(c.ddpg.state_dim == 2 * 64 + 4);
  CHECK_THROWS_AS(parse_config("run.t_l2 = 150").validate(), ConfigError);
}
