#include "emo/core/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "emo/core/checkpoint.hpp"
#include "emo/core/errors.hpp"

namespace emo {

namespace {

void put_d(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void put_opt(std::string& out, const std::optional<double>& v) {
  if (v) put_d(out, *v);
}

std::vector<double> avg_pool(const Image& image, std::size_t side, std::size_t out_side) {
  const std::size_t f = side / out_side;
  std::vector<double> out(out_side * out_side, 0.0);
  const double inv = 1.0 / static_cast<double>(f * f);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) out[(r / f) * out_side + c / f] += image[r * side + c] * inv;
  return out;
}

Tensor affect_tensor(const AffectVector& a) { return Tensor({2}, {a.valence, a.arousal}); }
AffectVector tensor_affect(const Tensor& t) { return {t[0], t[1]}; }

}  // namespace

const std::string& runlog_header() {
  static const std::string h =
      "epoch,stimulus_id,category,ram_valence,ram_arousal,comp_valence,comp_arousal,ext_valence,ext_arousal,ia,"
      "valence,arousal,eyelid,brow,mouth_open,mouth_corner,expression,action_class,reward,pred_loss,"
      "lstm_train_loss,critic_loss,mood_valence,mood_arousal";
  return h;
}

std::string format_record(const EpochRecord& r) {
  std::string s = std::to_string(r.epoch) + "," + std::to_string(r.stimulus_id) + "," + std::to_string(r.category);
  for (double v : {r.ram.valence, r.ram.arousal, r.compensation.valence, r.compensation.arousal, r.external.valence,
                   r.external.arousal, r.ia, r.interoception.valence, r.interoception.arousal, r.action.eyelid_open,
                   r.action.eyebrow_knit, r.action.mouth_open, r.action.mouth_corner}) {
    s += ",";
    put_d(s, v);
  }
  s += ",";
  s += expression_name(r.expression);
  s += ",";
  s += action_class_name(r.action_class);
  s += ",";
  put_d(s, r.reward);
  s += ",";
  put_d(s, r.pred_loss);
  s += ",";
  put_opt(s, r.lstm_train_loss);
  s += ",";
  put_opt(s, r.critic_loss);
  s += ",";
  put_d(s, r.mood.valence);
  s += ",";
  put_d(s, r.mood.arousal);
  return s;
}

const std::string& activation_header(std::size_t width) {
  static std::string cached;
  static std::size_t cached_width = 0;
  if (cached.empty() || cached_width != width) {
    cached = "epoch,expression";
    for (std::size_t i = 0; i < width; ++i) cached += ",h" + std::to_string(i);
    cached_width = width;
  }
  return cached;
}

std::string format_activation(std::uint64_t epoch, ExpressionLabel label, const std::vector<double>& values) {
  std::string s = std::to_string(epoch) + "," + expression_name(label);
  for (double v : values) {
    s += ",";
    put_d(s, v);
  }
  return s;
}

// ---- Simulation ----------------------------------------------------------------

Simulation::Simulation(const RunConfig& config, const RamModel& ram)
    : config_(config),
      replay_(config.ddpg.buffer),
      noise_(config.ddpg.ou),
      table_(config.memory_gamma),
      store_(config.memory_capacity),
      mood_(config.homeostasis) {
  config_.synchronize();
  config_.validate();
  build(ram);
  RngStream init_pred(config_.seed, "init/predictor");
  predictor_ = std::make_unique<Predictor>(config_.predictor, init_pred);
  RngStream init_agent(config_.seed, "init/ddpg");
  agent_ = std::make_unique<ActorCritic>(config_.ddpg, init_agent);
  seed_streams(config_.seed);
  pred_state_ = predictor_->initial_state();
  initial_observation();
}

void Simulation::build(const RamModel& ram) {
  if (ram.config().image_side != config_.env.image_side)
    throw ConfigError("config key 'env.image_side': ram checkpoint expects side " +
                      std::to_string(ram.config().image_side));
  stimuli_ = std::make_unique<StimulusSet>(config_.env);
  env_ = std::make_unique<Environment>(*stimuli_, config_.env);
  ram_cache_.clear();
  for (const auto& s : stimuli_->all()) ram_cache_.push_back(ram.estimate(s.image));
}

void Simulation::seed_streams(std::uint64_t seed) {
  rng_env_ = RngStream(seed, "env");
  rng_noise_ = RngStream(seed, "ou");
  rng_replay_ = RngStream(seed, "replay");
}

void Simulation::reseed(std::uint64_t seed) {
  config_.seed = seed;
  seed_streams(seed);
}

AffectVector Simulation::interoception(const AffectVector& external, double ia) const {
  const double s = config_.interoception == InteroceptionMode::add ? ia : -ia;
  return {external.valence + s, external.arousal + s};
}

std::vector<double> Simulation::build_state(const Image& image, const AffectVector& a, const Prediction& p) const {
  const std::size_t side = config_.env.image_side, out = config_.state_image_side;
  std::vector<double> s = avg_pool(image, side, out);
  s.push_back(predictor_->scale_intero(a.valence));
  s.push_back(predictor_->scale_intero(a.arousal));
  const auto pi = avg_pool(p.image, side, out);
  s.insert(s.end(), pi.begin(), pi.end());
  s.push_back(predictor_->scale_intero(p.interoception.valence));
  s.push_back(predictor_->scale_intero(p.interoception.arousal));
  return s;
}

double Simulation::prediction_loss(const Prediction& p, const Image& image, const AffectVector& a) const {
  double li = 0.0;
  for (std::size_t j = 0; j < image.size(); ++j) {
    const double d = p.image[j] - image[j];
    li += d * d;
  }
  li /= static_cast<double>(image.size());
  const double dv = predictor_->scale_intero(p.interoception.valence) - predictor_->scale_intero(a.valence);
  const double da = predictor_->scale_intero(p.interoception.arousal) - predictor_->scale_intero(a.arousal);
  return li + 0.5 * (dv * dv + da * da);
}

void Simulation::initial_observation() {
  const EnvStep obs = env_->reset(rng_env_);
  const AffectVector ram = ram_cache_.at(obs.stimulus->id);
  const AffectVector comp = config_.second_layer ? table_.at(obs.category) : AffectVector{};
  const AffectVector a = interoception(ram + comp, ia_value(fatigue_, config_.appraisal));
  store_.record(0, obs.category, a);
  mood_.push(a);
  pending_ = PredictorSample{obs.stimulus->image, a, {}, {}};
  pending_state_ = pred_state_;
  forecast_ = predictor_->predict(obs.stimulus->image, a, pred_state_);
  state_ = build_state(obs.stimulus->image, a, forecast_);
}

const EpochRecord& Simulation::step() {
  const std::uint64_t e = epoch_ + 1;
  EpochRecord r;
  r.epoch = e;

  const FaceControls controls = agent_->select_action(state_, noise_, rng_noise_);
  activation_ = agent_->middle_activation();
  const FaceControls previous = env_->previous_controls();
  const EnvStep obs = env_->step(controls, config_.condition, rng_env_);
  r.action = controls;
  r.expression = obs.expression;
  r.stimulus_id = obs.stimulus->id;
  r.category = obs.category;

  r.action_class = classify_action(previous, controls, obs.expression, config_.appraisal);
  fatigue_ = ia_update(fatigue_, r.action_class, obs.action_cost, config_.appraisal);
  r.ia = ia_value(fatigue_, config_.appraisal);

  r.ram = ram_cache_.at(obs.stimulus->id);
  r.compensation = config_.second_layer ? table_.at(obs.category) : AffectVector{};
  r.external = r.ram + r.compensation;
  r.interoception = interoception(r.external, r.ia);
  r.mood = mood_.current();
  r.reward = homeostatic_reward(r.interoception, r.mood, config_.homeostasis.reward_constant);

  const Image& image = obs.stimulus->image;
  r.pred_loss = prediction_loss(forecast_, image, r.interoception);

  pending_.next_image = image;
  pending_.next_interoception = r.interoception;
  if (window_.empty()) window_start_ = pending_state_;
  window_.push_back(std::move(pending_));
  pending_ = PredictorSample{image, r.interoception, {}, {}};
  pending_state_ = pred_state_;
  forecast_ = predictor_->predict(image, r.interoception, pred_state_);
  std::vector<double> next = build_state(image, r.interoception, forecast_);

  Transition t;
  t.state = state_;
  t.action = controls.to_array();
  t.reward = r.reward;
  t.next_state = next;
  replay_.push(std::move(t));
  state_ = std::move(next);

  if (learning_ && replay_.size() >= config_.ddpg.warmup) {
    const auto batch = replay_.sample(config_.ddpg.batch, rng_replay_);
    r.critic_loss = agent_->critic_update(batch);
    agent_->actor_update(batch);
    agent_->update_targets();
    ++ddpg_updates_;
  }

  store_.record(e, obs.category, r.interoception);
  mood_.push(r.interoception);

  if (e % config_.t_lstm == 0) {
    if (learning_) {
      r.lstm_train_loss = predictor_->train(window_start_, window_);
      ++predictor_updates_;
    }
    window_.clear();
  }
  if (e % config_.t_l2 == 0) {
    mood_.update();
    if (learning_ && config_.second_layer) update_table(store_, table_);
  }

  const bool finite = r.interoception.finite() && std::isfinite(r.reward) && std::isfinite(r.pred_loss) &&
                      (!r.critic_loss || std::isfinite(*r.critic_loss)) &&
                      (!r.lstm_train_loss || std::isfinite(*r.lstm_train_loss)) &&
                      std::all_of(state_.begin(), state_.end(), [](double v) { return std::isfinite(v); });
  if (!finite) throw NumericError("non-finite value at epoch " + std::to_string(e));

  epoch_ = e;
  last_ = r;
  return last_;
}

// ---- Checkpoint ----------------------------------------------------------------

namespace {

void put_affect_list(Container& out, const std::string& name, const std::deque<AffectVector>& v) {
  if (v.empty()) return;
  Tensor t({v.size(), 2});
  for (std::size_t i = 0; i < v.size(); ++i) {
    t[2 * i] = v[i].valence;
    t[2 * i + 1] = v[i].arousal;
  }
  out.put(name, t);
}

void put_sample(Container& out, const std::string& p, const PredictorSample& s, bool complete) {
  out.put(p + "/image", Tensor({s.image.size()}, s.image));
  out.put(p + "/intero", affect_tensor(s.interoception));
  if (complete) {
    out.put(p + "/next_image", Tensor({s.next_image.size()}, s.next_image));
    out.put(p + "/next_intero", affect_tensor(s.next_interoception));
  }
}

PredictorSample get_sample(const Container& in, const std::string& p, bool complete) {
  PredictorSample s;
  s.image = in.tensor(p + "/image").storage();
  s.interoception = tensor_affect(in.tensor(p + "/intero"));
  if (complete) {
    s.next_image = in.tensor(p + "/next_image").storage();
    s.next_interoception = tensor_affect(in.tensor(p + "/next_intero"));
  }
  return s;
}

}  // namespace

void Simulation::save(Container& out) const {
  out.put_string("version", kRunFormatVersion);
  out.put_string("config", serialize_config(config_));
  out.put_u64("epoch", {epoch_, learning_ ? 1u : 0u, predictor_updates_, ddpg_updates_});
  auto* self = const_cast<Simulation*>(this);
  predictor_->save(out, "predictor");
  self->agent_->save(out, "ddpg");
  replay_.save(out, "replay");
  out.put("ou", Tensor({noise_.value().size()}, noise_.value()));
  std::vector<double> table;
  for (const auto& [k, v] : table_.entries()) {
    table.push_back(static_cast<double>(k));
    table.push_back(v.valence);
    table.push_back(v.arousal);
  }
  out.put_u64("table/count", {table_.entries().size()});
  if (!table.empty()) out.put("table/values", Tensor({table.size()}, table));
  const auto& recs = store_.records();
  out.put_u64("store/count", {recs.size()});
  if (!recs.empty()) {
    std::vector<std::uint64_t> meta;
    Tensor vals({recs.size(), 2});
    for (std::size_t i = 0; i < recs.size(); ++i) {
      meta.push_back(recs[i].time);
      meta.push_back(static_cast<std::uint64_t>(static_cast<std::int64_t>(recs[i].category)));
      vals[2 * i] = recs[i].interoception.valence;
      vals[2 * i + 1] = recs[i].interoception.arousal;
    }
    out.put_u64("store/meta", meta);
    out.put("store/values", vals);
  }
  out.put_u64("mood/count", {mood_.buffer().size()});
  put_affect_list(out, "mood/buffer", mood_.buffer());
  out.put("mood/current", affect_tensor(mood_.current()));
  out.put("fatigue", Tensor({FaceControls::kParts}, std::vector<double>(fatigue_.accumulators.begin(),
                                                                          fatigue_.accumulators.end())));
  out.put("env/previous", Tensor({FaceControls::kParts}, [&] {
            const auto a = env_->previous_controls().to_array();
            return std::vector<double>(a.begin(), a.end());
          }()));
  out.put_rng("rng/env", rng_env_);
  out.put_rng("rng/noise", rng_noise_);
  out.put_rng("rng/replay", rng_replay_);
  save_predictor_state(out, "pred/state", pred_state_);
  save_predictor_state(out, "pred/pending_state", pending_state_);
  put_sample(out, "pred/pending", pending_, false);
  out.put_u64("pred/window_count", {window_.size()});
  if (!window_.empty()) save_predictor_state(out, "pred/window_start", window_start_);
  for (std::size_t i = 0; i < window_.size(); ++i) put_sample(out, "pred/window/" + std::to_string(i), window_[i], true);
  out.put("pred/forecast_image", Tensor({forecast_.image.size()}, forecast_.image));
  out.put("pred/forecast_intero", affect_tensor(forecast_.interoception));
  out.put("agent_state", Tensor({state_.size()}, state_));
}

Simulation::Simulation(const Container& in, const RamModel& ram)
    : replay_(1), noise_(OuConfig{}), table_(0.1), store_(2), mood_(HomeostasisConfig{}) {
  if (!in.has("version") || in.string("version") != kRunFormatVersion)
    throw VersionError("checkpoint version '" + (in.has("version") ? in.string("version") : std::string("?")) +
                       "' does not match '" + kRunFormatVersion + "'");
  config_ = parse_config(in.string("config"));
  config_.validate();
  replay_ = ReplayBuffer(config_.ddpg.buffer);
  noise_ = OuNoise(config_.ddpg.ou);
  table_ = CompensationTable(config_.memory_gamma);
  store_ = EpisodeStore(config_.memory_capacity);
  mood_ = MoodTracker(config_.homeostasis);
  build(ram);
  RngStream init_pred(config_.seed, "init/predictor");
  predictor_ = std::make_unique<Predictor>(config_.predictor, init_pred);
  RngStream init_agent(config_.seed, "init/ddpg");
  agent_ = std::make_unique<ActorCritic>(config_.ddpg, init_agent);

  const auto& ep = in.u64("epoch");
  if (ep.size() != 4) throw IoError("checkpoint epoch block is malformed");
  epoch_ = ep[0];
  learning_ = ep[1] != 0;
  predictor_updates_ = ep[2];
  ddpg_updates_ = ep[3];
  predictor_->load_into(in, "predictor");
  agent_->load_into(in, "ddpg");
  replay_.load_into(in, "replay");
  noise_.set_value(in.tensor("ou").storage());
  if (in.scalar_u64("table/count") > 0) {
    const Tensor& t = in.tensor("table/values");
    for (std::size_t i = 0; i + 3 <= t.size(); i += 3)
      table_.set(static_cast<int>(t[i]), {t[i + 1], t[i + 2]});
  }
  if (in.scalar_u64("store/count") > 0) {
    const auto& meta = in.u64("store/meta");
    const Tensor& vals = in.tensor("store/values");
    for (std::size_t i = 0; i < meta.size() / 2; ++i)
      store_.record(meta[2 * i], static_cast<int>(static_cast<std::int64_t>(meta[2 * i + 1])),
                    {vals[2 * i], vals[2 * i + 1]});
  }
  if (in.scalar_u64("mood/count") > 0) {
    const Tensor& b = in.tensor("mood/buffer");
    for (std::size_t i = 0; i < b.dim(0); ++i) mood_.push({b[2 * i], b[2 * i + 1]});
  }
  mood_.set_current(tensor_affect(in.tensor("mood/current")));
  const Tensor& f = in.tensor("fatigue");
  std::copy_n(f.data(), FaceControls::kParts, fatigue_.accumulators.begin());
  const Tensor& prev = in.tensor("env/previous");
  std::array<double, FaceControls::kParts> pa{};
  std::copy_n(prev.data(), FaceControls::kParts, pa.begin());
  env_->set_previous_controls(FaceControls::from_array(pa));
  in.get_rng("rng/env", rng_env_);
  in.get_rng("rng/noise", rng_noise_);
  in.get_rng("rng/replay", rng_replay_);
  pred_state_ = load_predictor_state(in, "pred/state");
  pending_state_ = load_predictor_state(in, "pred/pending_state");
  pending_ = get_sample(in, "pred/pending", false);
  const std::uint64_t wn = in.scalar_u64("pred/window_count");
  if (wn > 0) window_start_ = load_predictor_state(in, "pred/window_start");
  for (std::uint64_t i = 0; i < wn; ++i) window_.push_back(get_sample(in, "pred/window/" + std::to_string(i), true));
  forecast_.image = in.tensor("pred/forecast_image").storage();
  forecast_.interoception = tensor_affect(in.tensor("pred/forecast_intero"));
  state_ = in.tensor("agent_state").storage();
  if (state_.size() != config_.ddpg.state_dim) throw IoError("checkpoint agent state has the wrong size");
}

// ---- Run directories --------------------------------------------------------------

std::filesystem::path RunPaths::checkpoint(std::uint64_t epoch) const {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%08llu.ckpt", static_cast<unsigned long long>(epoch));
  return checkpoints() / name;
}

RamModel load_ram(const std::filesystem::path& path) {
  if (path.empty()) throw ConfigError("config key 'run.ram_checkpoint': no ram checkpoint given");
  if (!std::filesystem::exists(path)) throw IoError("ram checkpoint not found: " + path.string());
  const Container c = Container::load(path);
  if (!c.has("kind") || c.string("kind") != "ram") throw IoError(path.string() + " is not a ram checkpoint");
  return RamModel::load(c, "ram");
}

void save_ram(const RamModel& model, const std::filesystem::path& path) {
  Container c;
  c.put_string("kind", "ram");
  model.save(c, "ram");
  c.save(path);
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void checkpoint_now(const Simulation& sim, const RunPaths& paths) {
  Container c;
  sim.save(c);
  c.save(paths.checkpoint(sim.epoch()));
  c.save(paths.latest());
}

// Keeps the header and the rows with epoch <= last.
void truncate_log(const std::filesystem::path& p, std::uint64_t last) {
  if (!std::filesystem::exists(p)) return;
  std::istringstream in(read_text(p));
  std::string out, line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      out += line + "\n";
      header = false;
      continue;
    }
    const auto comma = line.find(',');
    const std::uint64_t e = std::stoull(line.substr(0, comma));
    if (e <= last) out += line + "\n";
  }
  write_text(p, out);
}

void drive(Simulation& sim, const RunPaths& paths, std::size_t total_epochs) {
  const RunConfig& cfg = sim.config();
  {
    std::ofstream log(paths.runlog(), std::ios::binary | std::ios::app);
    std::ofstream act(paths.activations(), std::ios::binary | std::ios::app);
    if (!log || !act) throw IoError("cannot append to run logs in " + paths.dir.string());
    std::string lbuf, abuf;
    while (sim.epoch() < total_epochs) {
      const EpochRecord& r = sim.step();
      lbuf += format_record(r);
      lbuf += '\n';
      abuf += format_activation(r.epoch, r.expression, sim.last_activation());
      abuf += '\n';
      const bool ckpt = cfg.checkpoint_every > 0 && r.epoch % cfg.checkpoint_every == 0;
      if (ckpt || lbuf.size() > (1u << 20) || sim.epoch() == total_epochs) {
        log << lbuf;
        act << abuf;
        log.flush();
        act.flush();
        lbuf.clear();
        abuf.clear();
      }
      if (ckpt) checkpoint_now(sim, paths);
    }
  }
  checkpoint_now(sim, paths);
  if (cfg.eval_epochs > 0) {
    sim.set_learning(false);
    std::string buf = runlog_header() + "\n";
    for (std::size_t i = 0; i < cfg.eval_epochs; ++i) {
      buf += format_record(sim.step());
      buf += '\n';
    }
    write_text(paths.eval_log(), buf);
  }
}

}  // namespace

RamTrainResult train_ram_into(const RunConfig& input, std::uint64_t seed, std::size_t epochs,
                              const std::filesystem::path& dir) {
  RunConfig config = input;
  config.synchronize();
  config.validate();
  RngStream corpus_rng(seed, "corpus");
  const Corpus corpus = generate_corpus(config.corpus, corpus_rng);
  RamTrainResult result = train_ram(corpus.train, corpus.test, epochs, config.ram, seed);
  std::filesystem::create_directories(dir);
  save_ram(result.model, dir / "ram.ckpt");
  std::string curve = "epoch,regression_mse,mean_reward\n";
  for (const auto& p : result.curve) {
    curve += std::to_string(p.epoch) + ",";
    put_d(curve, p.regression_mse);
    curve += ",";
    put_d(curve, p.mean_reward);
    curve += "\n";
  }
  write_text(dir / "ram_curve.csv", curve);
  std::string summary = "split,mae_valence,mae_arousal\nheld_out,";
  put_d(summary, result.held_out.valence);
  summary += ",";
  put_d(summary, result.held_out.arousal);
  summary += "\n";
  write_text(dir / "ram_eval.csv", summary);
  write_text(dir / "config.txt", serialize_config(config));
  return result;
}

std::uint64_t execute_run(const RunConfig& input, const std::filesystem::path& dir) {
  RunConfig config = input;
  config.synchronize();
  config.validate();
  const RamModel ram = load_ram(config.ram_checkpoint);
  const RunPaths paths{dir};
  std::filesystem::create_directories(paths.checkpoints());
  save_ram(ram, paths.ram());
  config.ram_checkpoint = std::filesystem::absolute(paths.ram()).string();
  write_text(paths.config(), serialize_config(config));
  write_text(paths.version(), std::string(kRunFormatVersion) + "\n");
  Simulation sim(config, ram);
  write_stimulus_directory(paths.stimuli(), sim.stimuli().all());
  write_text(paths.runlog(), runlog_header() + "\n");
  const std::size_t width = sim.agent().actor().layer(sim.agent().middle_layer_index()).spec().out_shape.at(0);
  write_text(paths.activations(), activation_header(width) + "\n");
  checkpoint_now(sim, paths);
  drive(sim, paths, config.epochs);
  return sim.epoch();
}

std::uint64_t resume_run(const std::filesystem::path& dir, const ResumeOptions& options) {
  const RunPaths paths{dir};
  if (!std::filesystem::exists(paths.version())) throw IoError(dir.string() + " is not a run directory");
  const std::string version = read_text(paths.version());
  if (version.substr(0, version.find('\n')) != kRunFormatVersion)
    throw VersionError("run directory version does not match '" + std::string(kRunFormatVersion) + "'");
  const Container ckpt = Container::load(options.checkpoint.value_or(paths.latest()));
  const RamModel ram = load_ram(paths.ram());
  Simulation sim(ckpt, ram);
  if (!sim.learning()) throw StateError("checkpoint was taken during evaluation");
  if (options.seed && *options.seed != sim.config().seed) sim.reseed(*options.seed);
  const std::size_t total = options.epochs.value_or(sim.config().epochs);
  if (total < sim.epoch()) throw InvalidArgument("resume target precedes the checkpoint epoch");
  RunConfig updated = sim.config();
  updated.epochs = total;
  write_text(paths.config(), serialize_config(updated));
  truncate_log(paths.runlog(), sim.epoch());
  truncate_log(paths.activations(), sim.epoch());
  drive(sim, paths, total);
  return sim.epoch();
}

}  // namespace emo
