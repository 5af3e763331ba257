#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emo/core/appraisal.hpp"
#include "emo/core/config.hpp"
#include "emo/core/ddpg.hpp"
#include "emo/core/environment.hpp"
#include "emo/core/homeostasis.hpp"
#include "emo/core/memory.hpp"
#include "emo/core/predictor.hpp"
#include "emo/core/ram.hpp"

namespace emo {

class Container;

inline constexpr const char* kRunFormatVersion = "emo-run-1";

struct EpochRecord {
  std::uint64_t epoch = 0;
  std::size_t stimulus_id = 0;
  int category = 0;
  AffectVector ram;           // innate appraisal of the observed stimulus
  AffectVector compensation;  // L(k)
  AffectVector external;      // ram + compensation
  double ia = 0.0;
  AffectVector interoception;
  FaceControls action;
  ExpressionLabel expression = ExpressionLabel::neutral;
  ActionClass action_class = ActionClass::otherwise;
  double reward = 0.0;
  double pred_loss = 0.0;                 // forecast from the previous epoch against this observation
  std::optional<double> lstm_train_loss;  // only on predictor training epochs
  std::optional<double> critic_loss;      // only once updates run
  AffectVector mood;
};

const std::string& runlog_header();
std::string format_record(const EpochRecord& r);
const std::string& activation_header(std::size_t width);
std::string format_activation(std::uint64_t epoch, ExpressionLabel label, const std::vector<double>& values);

/// The full interaction loop for one run. All state lives here so a checkpoint
/// restores the exact continuation.
class Simulation {
 public:
  Simulation(const RunConfig& config, const RamModel& ram);
  // Rebuilds from a checkpoint; throws VersionError / IoError on mismatch.
  Simulation(const Container& checkpoint, const RamModel& ram);

  const RunConfig& config() const { return config_; }
  std::uint64_t epoch() const { return epoch_; }

  // Advance one epoch and return its record.
  const EpochRecord& step();
  const EpochRecord& last() const { return last_; }
  const std::vector<double>& last_activation() const { return activation_; }

  // Frozen: no DDPG, predictor or second-layer updates; exploration noise and
  // mood tracking continue.
  void set_learning(bool on) { learning_ = on; }
  bool learning() const { return learning_; }

  // Replace every RNG stream with ones derived from a new seed.
  void reseed(std::uint64_t seed);

  void save(Container& out) const;

  const CompensationTable& table() const { return table_; }
  const FatigueState& fatigue() const { return fatigue_; }
  const MoodTracker& mood() const { return mood_; }
  const EpisodeStore& store() const { return store_; }
  const ReplayBuffer& replay() const { return replay_; }
  const std::vector<double>& agent_state() const { return state_; }
  AffectVector ram_output(std::size_t stimulus_id) const { return ram_cache_.at(stimulus_id); }
  std::size_t predictor_updates() const { return predictor_updates_; }
  std::size_t ddpg_updates() const { return ddpg_updates_; }
  ActorCritic& agent() { return *agent_; }
  const StimulusSet& stimuli() const { return *stimuli_; }

 private:
  void build(const RamModel& ram);
  void seed_streams(std::uint64_t seed);
  void initial_observation();
  AffectVector interoception(const AffectVector& external, double ia) const;
  std::vector<double> build_state(const Image& image, const AffectVector& a, const Prediction& p) const;
  double prediction_loss(const Prediction& p, const Image& image, const AffectVector& a) const;

  RunConfig config_;
  std::unique_ptr<StimulusSet> stimuli_;
  std::unique_ptr<Environment> env_;
  std::vector<AffectVector> ram_cache_;
  std::unique_ptr<Predictor> predictor_;
  std::unique_ptr<ActorCritic> agent_;
  ReplayBuffer replay_;
  OuNoise noise_;
  CompensationTable table_;
  EpisodeStore store_;
  MoodTracker mood_;
  FatigueState fatigue_;

  RngStream rng_env_, rng_noise_, rng_replay_;

  PredictorState pred_state_;
  PredictorState pending_state_;  // state before the pending input was consumed
  PredictorSample pending_;       // input side of the next training pair
  PredictorState window_start_;
  std::vector<PredictorSample> window_;
  Prediction forecast_;
  std::vector<double> state_;

  std::uint64_t epoch_ = 0;
  bool learning_ = true;
  std::size_t predictor_updates_ = 0;
  std::size_t ddpg_updates_ = 0;
  EpochRecord last_;
  std::vector<double> activation_;
};

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config() const { return dir / "config.txt"; }
  std::filesystem::path version() const { return dir / "version.txt"; }
  std::filesystem::path runlog() const { return dir / "runlog.csv"; }
  std::filesystem::path activations() const { return dir / "activations.csv"; }
  std::filesystem::path eval_log() const { return dir / "eval.csv"; }
  std::filesystem::path ram() const { return dir / "ram.ckpt"; }
  std::filesystem::path stimuli() const { return dir / "stimuli"; }
  std::filesystem::path checkpoints() const { return dir / "checkpoints"; }
  std::filesystem::path checkpoint(std::uint64_t epoch) const;
  std::filesystem::path latest() const { return checkpoints() / "latest.ckpt"; }
};

RamModel load_ram(const std::filesystem::path& path);
void save_ram(const RamModel& model, const std::filesystem::path& path);

// Generates the corpus, trains the first layer and writes ram.ckpt,
// ram_curve.csv (epoch,regression_mse,mean_reward) and ram_eval.csv.
RamTrainResult train_ram_into(const RunConfig& config, std::uint64_t seed, std::size_t epochs,
                              const std::filesystem::path& dir);

// Runs config.epochs from scratch into dir (created), then the optional
// frozen evaluation phase. Returns the final epoch.
std::uint64_t execute_run(const RunConfig& config, const std::filesystem::path& dir);

struct ResumeOptions {
  std::optional<std::filesystem::path> checkpoint;  // default: latest
  std::optional<std::size_t> epochs;                // new total
  std::optional<std::uint64_t> seed;                // reseed streams on resume
};

// Continues a run directory from a checkpoint. Logs written after the
// checkpoint's epoch are discarded first.
std::uint64_t resume_run(const std::filesystem::path& dir, const ResumeOptions& options = {});

}  // namespace emo
