#include "emo/emo.h"

#include <cstring>
#include <memory>
#include <string>

#include "emo/core/checkpoint.hpp"
#include "emo/core/config.hpp"
#include "emo/core/errors.hpp"
#include "emo/core/orchestrator.hpp"
#include "emo/core/analysis.hpp"

struct emo_config {
  emo::RunConfig value;
};

struct emo_run {
  std::unique_ptr<emo::RamModel> ram;
  std::unique_ptr<emo::Simulation> sim;
};

namespace {

thread_local std::string g_last_error;

emo_status fail(emo_status s, const std::string& what) {
  g_last_error = what;
  return s;
}

template <typename F>
emo_status guard(F&& f) {
  try {
    g_last_error.clear();
    f();
    return EMO_OK;
  } catch (const emo::InvalidArgument& e) {
    return fail(EMO_ERR_INVALID_ARGUMENT, e.what());
  } catch (const emo::ConfigError& e) {
    return fail(EMO_ERR_CONFIG, e.what());
  } catch (const emo::ShapeError& e) {
    return fail(EMO_ERR_SHAPE, e.what());
  } catch (const emo::StateError& e) {
    return fail(EMO_ERR_STATE, e.what());
  } catch (const emo::VersionError& e) {
    return fail(EMO_ERR_VERSION, e.what());
  } catch (const emo::IoError& e) {
    return fail(EMO_ERR_IO, e.what());
  } catch (const emo::NumericError& e) {
    return fail(EMO_ERR_NUMERIC, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(EMO_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(EMO_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(EMO_ERR_INTERNAL, "unknown error");
  }
}

void copy_out(const std::string& s, char* buf, std::size_t size, std::size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buf && size > 0) {
    const std::size_t n = std::min(size - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
}

#define REQUIRE(cond, msg) \
  if (!(cond)) return fail(EMO_ERR_INVALID_ARGUMENT, msg)

}  // namespace

extern "C" {

const char* emo_last_error(void) { return g_last_error.c_str(); }

const char* emo_version(void) { return emo::kRunFormatVersion; }

const char* emo_status_name(emo_status status) {
  switch (status) {
    case EMO_OK: return "ok";
    case EMO_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EMO_ERR_CONFIG: return "config error";
    case EMO_ERR_SHAPE: return "shape error";
    case EMO_ERR_STATE: return "state error";
    case EMO_ERR_IO: return "io error";
    case EMO_ERR_NUMERIC: return "numeric error";
    case EMO_ERR_VERSION: return "version error";
    case EMO_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

emo_status emo_config_create(emo_config** out) {
  REQUIRE(out, "out is null");
  return guard([&] {
    auto c = std::make_unique<emo_config>();
    c->value.synchronize();
    *out = c.release();
  });
}

emo_status emo_config_load(const char* path, int use_env, emo_config** out) {
  REQUIRE(out, "out is null");
  return guard([&] {
    std::optional<std::filesystem::path> p;
    if (path) p = path;
    auto c = std::make_unique<emo_config>();
    c->value = emo::load_config(p, use_env ? emo::environment_overrides() : emo::ConfigOverrides{}, {});
    *out = c.release();
  });
}

emo_status emo_config_parse(const char* text, emo_config** out) {
  REQUIRE(out && text, "null argument");
  return guard([&] {
    auto c = std::make_unique<emo_config>();
    c->value = emo::parse_config(text);
    c->value.validate();
    *out = c.release();
  });
}

emo_status emo_config_set(emo_config* config, const char* key, const char* value) {
  REQUIRE(config && key && value, "null argument");
  return guard([&] { emo::set_config_value(config->value, key, value); });
}

emo_status emo_config_get(const emo_config* config, const char* key, char* buf, size_t size, size_t* needed) {
  REQUIRE(config && key, "null argument");
  return guard([&] { copy_out(emo::get_config_value(config->value, key), buf, size, needed); });
}

emo_status emo_config_serialize(const emo_config* config, char* buf, size_t size, size_t* needed) {
  REQUIRE(config, "config is null");
  return guard([&] { copy_out(emo::serialize_config(config->value), buf, size, needed); });
}

emo_status emo_config_validate(const emo_config* config) {
  REQUIRE(config, "config is null");
  return guard([&] { config->value.validate(); });
}

void emo_config_destroy(emo_config* config) { delete config; }

emo_status emo_train_ram(const emo_config* config, uint64_t seed, size_t epochs, const char* out_dir,
                         emo_ram_report* report) {
  REQUIRE(config && out_dir, "null argument");
  return guard([&] {
    const std::size_t n = epochs ? epochs : config->value.ram_epochs;
    const auto r = emo::train_ram_into(config->value, seed, n, out_dir);
    if (report) {
      report->mae_valence = r.held_out.valence;
      report->mae_arousal = r.held_out.arousal;
      report->final_mse = r.curve.empty() ? 0.0 : r.curve.back().regression_mse;
      report->epochs = r.curve.size();
    }
  });
}

emo_status emo_run_create(const emo_config* config, emo_run** out) {
  REQUIRE(config && out, "null argument");
  return guard([&] {
    auto run = std::make_unique<emo_run>();
    run->ram = std::make_unique<emo::RamModel>(emo::load_ram(config->value.ram_checkpoint));
    run->sim = std::make_unique<emo::Simulation>(config->value, *run->ram);
    *out = run.release();
  });
}

emo_status emo_run_step(emo_run* run, emo_epoch_record* record) {
  REQUIRE(run, "run is null");
  return guard([&] {
    const auto& r = run->sim->step();
    if (record) {
      record->epoch = r.epoch;
      record->category = r.category;
      record->valence = r.interoception.valence;
      record->arousal = r.interoception.arousal;
      record->ia = r.ia;
      record->reward = r.reward;
      record->pred_loss = r.pred_loss;
      const auto a = r.action.to_array();
      for (int i = 0; i < 4; ++i) record->controls[i] = a[static_cast<std::size_t>(i)];
      record->expression = static_cast<int>(r.expression);
    }
  });
}

emo_status emo_run_epoch(const emo_run* run, uint64_t* epoch) {
  REQUIRE(run && epoch, "null argument");
  *epoch = run->sim->epoch();
  return EMO_OK;
}

emo_status emo_run_set_learning(emo_run* run, int enabled) {
  REQUIRE(run, "run is null");
  run->sim->set_learning(enabled != 0);
  return EMO_OK;
}

emo_status emo_run_save_checkpoint(const emo_run* run, const char* path) {
  REQUIRE(run && path, "null argument");
  return guard([&] {
    emo::Container c;
    run->sim->save(c);
    c.save(path);
  });
}

emo_status emo_run_open_checkpoint(const char* path, const char* ram_checkpoint, emo_run** out) {
  REQUIRE(path && out, "null argument");
  return guard([&] {
    const emo::Container c = emo::Container::load(path);
    std::string ram_path;
    if (ram_checkpoint) {
      ram_path = ram_checkpoint;
    } else {
      if (!c.has("config")) throw emo::IoError("checkpoint has no config block");
      ram_path = emo::parse_config(c.string("config")).ram_checkpoint;
    }
    auto run = std::make_unique<emo_run>();
    run->ram = std::make_unique<emo::RamModel>(emo::load_ram(ram_path));
    run->sim = std::make_unique<emo::Simulation>(c, *run->ram);
    *out = run.release();
  });
}

void emo_run_destroy(emo_run* run) { delete run; }

emo_status emo_execute(const emo_config* config, const char* out_dir, uint64_t* final_epoch) {
  REQUIRE(config && out_dir, "null argument");
  return guard([&] {
    const auto e = emo::execute_run(config->value, out_dir);
    if (final_epoch) *final_epoch = e;
  });
}

emo_status emo_resume(const char* run_dir, const char* checkpoint, size_t epochs, int has_seed,
                      uint64_t seed_override, uint64_t* final_epoch) {
  REQUIRE(run_dir, "run_dir is null");
  return guard([&] {
    emo::ResumeOptions o;
    if (checkpoint) o.checkpoint = checkpoint;
    if (epochs) o.epochs = epochs;
    if (has_seed) o.seed = seed_override;
    const auto e = emo::resume_run(run_dir, o);
    if (final_epoch) *final_epoch = e;
  });
}

emo_status emo_analyze(const char* const* run_dirs, size_t count, const char* out_dir, size_t bands, char* buf,
                       size_t size, size_t* needed) {
  REQUIRE(out_dir, "out_dir is null");
  REQUIRE(count == 0 || run_dirs, "run_dirs is null");
  return guard([&] {
    std::vector<std::filesystem::path> dirs;
    for (std::size_t i = 0; i < count; ++i) {
      if (!run_dirs[i]) throw emo::InvalidArgument("run directory entry is null");
      dirs.emplace_back(run_dirs[i]);
    }
    const auto out = emo::emit_reports(dirs, out_dir, bands ? bands : 5);
    std::string notes;
    for (const auto& n : out.notices) notes += n + "\n";
    copy_out(notes, buf, size, needed);
  });
}

}  // extern "C"
