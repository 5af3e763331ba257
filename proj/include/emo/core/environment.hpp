#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emo/core/affect.hpp"
#include "emo/core/rng.hpp"

namespace emo {

/// Infant actuator values, each in [0,1]; 0.5 is the neutral pose.
struct FaceControls {
  double eyelid_open = 0.5;
  double eyebrow_knit = 0.5;
  double mouth_open = 0.5;
  double mouth_corner = 0.5;

  static constexpr std::size_t kParts = 4;
  static FaceControls from_array(const std::array<double, kParts>& v);
  std::array<double, kParts> to_array() const { return {eyelid_open, eyebrow_knit, mouth_open, mouth_corner}; }
  FaceControls clamped() const;
  friend bool operator==(const FaceControls&, const FaceControls&) = default;
};

enum class ExpressionLabel : int { pleasure = 0, anger = 1, sadness = 2, neutral = 3 };
inline constexpr std::size_t kExpressionCount = 4;
const char* expression_name(ExpressionLabel label);
ExpressionLabel parse_expression(const std::string& name);

// Mother's recognition rules. Thresholds are strict (> 0.5), so ties fall
// through toward sadness / neutral.
ExpressionLabel classify_expression(const FaceControls& controls);

enum class Condition { face_only, face_plus_natural };
const char* condition_name(Condition c);
Condition parse_condition(const std::string& name);

// ---- Procedural imagery ----------------------------------------------------

// Identity variation for the schematic face (two per expression in the world).
struct FaceStyle {
  double width = 1.0;        // face ellipse width factor
  double eye_spacing = 1.0;  // eye distance factor
  double skin = 0.62;        // face brightness
};

// Square grayscale image in [0,1], row-major, side*side values.
using Image = std::vector<double>;

Image render_face(const FaceControls& controls, const FaceStyle& style, std::size_t side);
// brightness and energy in [0,1]; orientation/phase only vary texture layout.
Image render_texture(double brightness, double energy, double orientation, double phase, std::size_t side);
Image black_image(std::size_t side);

// Ground-truth affect attached to drawing parameters.
AffectVector face_affect(const FaceControls& controls);
AffectVector texture_affect(double brightness, double energy);

enum class StimulusKind { face, natural, black };

struct Stimulus {
  std::size_t id = 0;
  int category = 0;
  StimulusKind kind = StimulusKind::face;
  bool controllable = false;
  AffectVector label;
  std::string name;
  Image image;
};

// ---- World stimuli -----------------------------------------------------------

struct EnvironmentConfig {
  std::size_t image_side = 32;
  std::size_t natural_count = 8;
  double natural_probability = 0.5;
  double eyes_closed_threshold = 0.25;
  double action_cost_scale = 0.5;
};

// Prototype controls the mother uses to display each expression.
FaceControls expression_prototype(ExpressionLabel label);

/// Stimuli available to the world. Face categories are the expression ids
/// 0..3, each natural image gets its own category starting at 4, and the
/// eyes-closed black image takes the final category id.
class StimulusSet {
 public:
  explicit StimulusSet(const EnvironmentConfig& config);

  const std::vector<Stimulus>& all() const { return stimuli_; }
  const Stimulus& at(std::size_t id) const { return stimuli_.at(id); }
  const Stimulus& face(ExpressionLabel label, std::size_t variant) const;
  const Stimulus& natural(std::size_t i) const { return stimuli_.at(natural_begin_ + i); }
  std::size_t natural_count() const { return natural_count_; }
  const Stimulus& black() const { return stimuli_.back(); }
  int black_category() const { return stimuli_.back().category; }
  std::size_t category_count() const { return static_cast<std::size_t>(black_category()) + 1; }
  std::size_t side() const { return side_; }

 private:
  std::vector<Stimulus> stimuli_;
  std::size_t side_;
  std::size_t natural_begin_;
  std::size_t natural_count_;
};

// One of the two faces of the matching category, chosen uniformly.
const Stimulus& mother_respond(const StimulusSet& set, ExpressionLabel label, RngStream& rng);

struct EnvStep {
  const Stimulus* stimulus = nullptr;
  int category = 0;
  double action_cost = 0.0;
  ExpressionLabel expression = ExpressionLabel::neutral;
  bool eyes_closed = false;
};

class Environment {
 public:
  Environment(const StimulusSet& stimuli, EnvironmentConfig config);

  // Initial observation: the mother's response to the neutral pose.
  EnvStep reset(RngStream& rng);
  EnvStep step(const FaceControls& controls, Condition condition, RngStream& rng);

  const FaceControls& previous_controls() const { return previous_; }
  void set_previous_controls(const FaceControls& c) { previous_ = c; }
  const StimulusSet& stimuli() const { return *stimuli_; }
  const EnvironmentConfig& config() const { return config_; }

 private:
  const StimulusSet* stimuli_;
  EnvironmentConfig config_;
  FaceControls previous_;
};

// ---- Training corpus ---------------------------------------------------------

struct CorpusSpec {
  std::size_t size = 2000;
  std::size_t held_out = 400;
  std::size_t image_side = 32;
  double noise = 0.02;
  double face_fraction = 0.5;
};

struct Corpus {
  std::vector<Stimulus> train;
  std::vector<Stimulus> test;
};

// Faces with uniformly drawn controls and textures with uniformly drawn
// (brightness, energy); pixel noise is Gaussian, clamped to [0,1].
Corpus generate_corpus(const CorpusSpec& spec, RngStream& rng);

// Directory of <id>.f64 raw little-endian doubles plus manifest.tsv with
// columns id, category, valence, arousal, controllable, kind, name, file.
void write_stimulus_directory(const std::filesystem::path& dir, const std::vector<Stimulus>& stimuli);
std::vector<Stimulus> read_stimulus_directory(const std::filesystem::path& dir);

}  // namespace emo
