#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emo/emo.h"

namespace {

struct Failure {
  emo_status status;
};

void check(emo_status s, const char* what) {
  if (s != EMO_OK) {
    std::fprintf(stderr, "emo: %s failed (%s): %s\n", what, emo_status_name(s), emo_last_error());
    throw Failure{s};
  }
}

struct ConfigHandle {
  emo_config* ptr = nullptr;
  ~ConfigHandle() { emo_config_destroy(ptr); }
};

void set(emo_config* c, const std::string& key, const std::string& value) {
  check(emo_config_set(c, key.c_str(), value.c_str()), ("setting " + key).c_str());
}

void apply_sets(emo_config* c, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "emo: --set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{EMO_ERR_INVALID_ARGUMENT};
    }
    set(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

std::string serialize(const emo_config* c) {
  std::size_t need = 0;
  check(emo_config_serialize(c, nullptr, 0, &need), "serializing config");
  std::string s(need, '\0');
  check(emo_config_serialize(c, s.data(), s.size(), &need), "serializing config");
  s.resize(need - 1);
  return s;
}

void load(ConfigHandle& h, const std::string& path) {
  check(emo_config_load(path.empty() ? nullptr : path.c_str(), 1, &h.ptr), "loading config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-layer emotion model: train the first layer, run the interaction loop, analyze runs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(emo_version()));

  std::string config_path;
  std::vector<std::string> sets;

  auto* cmd_config = app.add_subcommand("config", "Print the effective configuration");
  cmd_config->add_option("--config", config_path, "Config file (key = value lines)");
  cmd_config->add_option("--set", sets, "Override key=value (repeatable)");

  auto* cmd_ram = app.add_subcommand("train-ram", "Train the attention regressor on the synthetic corpus");
  std::string ram_out;
  std::uint64_t ram_seed = 1;
  std::size_t ram_epochs = 0;
  cmd_ram->add_option("--out", ram_out, "Output directory")->required();
  cmd_ram->add_option("--seed", ram_seed, "Seed");
  cmd_ram->add_option("--epochs", ram_epochs, "Training epochs (default ram.epochs)");
  cmd_ram->add_option("--config", config_path, "Config file");
  cmd_ram->add_option("--set", sets, "Override key=value (repeatable)");

  auto* cmd_run = app.add_subcommand("run", "Run the interaction loop into a run directory");
  std::string run_ram, run_out, condition, second_layer;
  std::optional<std::size_t> run_epochs, ckpt_every, eval_epochs;
  std::optional<std::uint64_t> run_seed;
  cmd_run->add_option("--ram", run_ram, "First-layer checkpoint (ram.ckpt)");
  cmd_run->add_option("--condition", condition, "face-only | face-natural")
      ->check(CLI::IsMember({"face-only", "face-natural"}));
  cmd_run->add_option("--second-layer", second_layer, "on | off")->check(CLI::IsMember({"on", "off"}));
  cmd_run->add_option("--epochs", run_epochs, "Interaction epochs");
  cmd_run->add_option("--seed", run_seed, "Master seed");
  cmd_run->add_option("--out", run_out, "Run directory")->required();
  cmd_run->add_option("--checkpoint-every", ckpt_every, "Checkpoint cadence in epochs (0 = end only)");
  cmd_run->add_option("--eval-epochs", eval_epochs, "Frozen evaluation epochs after training");
  cmd_run->add_option("--config", config_path, "Config file");
  cmd_run->add_option("--set", sets, "Override key=value (repeatable)");

  auto* cmd_resume = app.add_subcommand("resume", "Continue a run directory from a checkpoint");
  std::string resume_dir, resume_ckpt;
  std::size_t resume_epochs = 0;
  std::optional<std::uint64_t> resume_seed;
  cmd_resume->add_option("--dir", resume_dir, "Run directory")->required();
  cmd_resume->add_option("--checkpoint", resume_ckpt, "Checkpoint file (default latest)");
  cmd_resume->add_option("--epochs", resume_epochs, "New total epoch count");
  cmd_resume->add_option("--seed", resume_seed, "Reseed random streams");

  auto* cmd_analyze = app.add_subcommand("analyze", "Curves, PCA bands, MAD table and expression shares");
  std::vector<std::string> runs;
  std::string analyze_out;
  std::size_t bands = 5;
  cmd_analyze->add_option("--runs", runs, "Run directories")->required();
  cmd_analyze->add_option("--out", analyze_out, "Report directory")->required();
  cmd_analyze->add_option("--bands", bands, "Epoch bands for PCA panels")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_config->parsed()) {
      ConfigHandle h;
      load(h, config_path);
      apply_sets(h.ptr, sets);
      check(emo_config_validate(h.ptr), "validating config");
      std::fputs(serialize(h.ptr).c_str(), stdout);
    } else if (cmd_ram->parsed()) {
      ConfigHandle h;
      load(h, config_path);
      apply_sets(h.ptr, sets);
      check(emo_config_validate(h.ptr), "validating config");
      emo_ram_report r{};
      check(emo_train_ram(h.ptr, ram_seed, ram_epochs, ram_out.c_str(), &r), "train-ram");
      std::printf("epochs %zu  final mse %.4f  held-out MAE valence %.4f arousal %.4f\n", r.epochs, r.final_mse,
                  r.mae_valence, r.mae_arousal);
    } else if (cmd_run->parsed()) {
      ConfigHandle h;
      load(h, config_path);
      apply_sets(h.ptr, sets);
      if (!run_ram.empty()) set(h.ptr, "run.ram_checkpoint", run_ram);
      if (!condition.empty()) set(h.ptr, "run.condition", condition == "face-only" ? "face-only" : "face-natural");
      if (!second_layer.empty()) set(h.ptr, "run.second_layer", second_layer);
      if (run_epochs) set(h.ptr, "run.epochs", std::to_string(*run_epochs));
      if (run_seed) set(h.ptr, "run.seed", std::to_string(*run_seed));
      if (ckpt_every) set(h.ptr, "run.checkpoint_every", std::to_string(*ckpt_every));
      if (eval_epochs) set(h.ptr, "run.eval_epochs", std::to_string(*eval_epochs));
      check(emo_config_validate(h.ptr), "validating config");
      std::uint64_t final_epoch = 0;
      check(emo_execute(h.ptr, run_out.c_str(), &final_epoch), "run");
      std::printf("run complete at epoch %llu: %s\n", static_cast<unsigned long long>(final_epoch), run_out.c_str());
    } else if (cmd_resume->parsed()) {
      std::uint64_t final_epoch = 0;
      check(emo_resume(resume_dir.c_str(), resume_ckpt.empty() ? nullptr : resume_ckpt.c_str(), resume_epochs,
                       resume_seed ? 1 : 0, resume_seed.value_or(0), &final_epoch),
            "resume");
      std::printf("run resumed to epoch %llu: %s\n", static_cast<unsigned long long>(final_epoch),
                  resume_dir.c_str());
    } else if (cmd_analyze->parsed()) {
      std::vector<const char*> ptrs;
      for (const auto& r : runs) ptrs.push_back(r.c_str());
      std::size_t need = 0;
      std::string notes(4096, '\0');
      check(emo_analyze(ptrs.data(), ptrs.size(), analyze_out.c_str(), bands, notes.data(), notes.size(), &need),
            "analyze");
      notes.resize(std::min(need, notes.size()) ? std::min(need, notes.size()) - 1 : 0);
      if (!notes.empty()) std::fputs(notes.c_str(), stderr);
      std::printf("reports written to %s\n", analyze_out.c_str());
    }
  } catch (const Failure& f) {
    return static_cast<int>(f.status);
  }
  return 0;
}
