#include "emo/core/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "emo/core/errors.hpp"

namespace emo {

FaceControls FaceControls::from_array(const std::array<double, kParts>& v) { return {v[0], v[1], v[2], v[3]}; }

FaceControls FaceControls::clamped() const {
  auto c = [](double x) { return std::clamp(x, 0.0, 1.0); };
  return {c(eyelid_open), c(eyebrow_knit), c(mouth_open), c(mouth_corner)};
}

const char* expression_name(ExpressionLabel label) {
  switch (label) {
    case ExpressionLabel::pleasure: return "pleasure";
    case ExpressionLabel::anger: return "anger";
    case ExpressionLabel::sadness: return "sadness";
    case ExpressionLabel::neutral: return "neutral";
  }
  return "neutral";
}

ExpressionLabel parse_expression(const std::string& name) {
  for (int i = 0; i < static_cast<int>(kExpressionCount); ++i) {
    const auto label = static_cast<ExpressionLabel>(i);
    if (name == expression_name(label)) return label;
  }
  throw InvalidArgument("unknown expression label '" + name + "'");
}

ExpressionLabel classify_expression(const FaceControls& c) {
  if (c.mouth_corner > 0.5) return ExpressionLabel::pleasure;
  if (c.mouth_corner < 0.5 && c.eyebrow_knit > 0.5) {
    return c.eyelid_open > 0.5 ? ExpressionLabel::anger : ExpressionLabel::sadness;
  }
  return ExpressionLabel::neutral;
}

const char* condition_name(Condition c) { return c == Condition::face_only ? "face-only" : "face-natural"; }

Condition parse_condition(const std::string& name) {
  if (name == "face-only") return Condition::face_only;
  if (name == "face-natural" || name == "face+natural") return Condition::face_plus_natural;
  throw InvalidArgument("unknown condition '" + name + "' (expected face-only or face-natural)");
}

// ---- Rendering ---------------------------------------------------------------

namespace {

constexpr int kSupersample = 3;

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double t = std::clamp(((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

template <typename Shade>
Image rasterize(std::size_t side, Shade shade) {
  Image img(side * side);
  const double inv = 1.0 / static_cast<double>(side * kSupersample);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      double acc = 0.0;
      for (int sy = 0; sy < kSupersample; ++sy)
        for (int sx = 0; sx < kSupersample; ++sx)
          acc += shade((static_cast<double>(x * kSupersample + sx) + 0.5) * inv,
                       (static_cast<double>(y * kSupersample + sy) + 0.5) * inv);
      img[y * side + x] = acc / (kSupersample * kSupersample);
    }
  }
  return img;
}

}  // namespace

Image render_face(const FaceControls& raw, const FaceStyle& style, std::size_t side) {
  const FaceControls c = raw.clamped();
  const double bow = (c.mouth_corner - 0.5) * 0.18;
  const double gap = 0.01 + 0.11 * c.mouth_open;
  const double eye_ry = 0.012 + 0.075 * c.eyelid_open;
  const double eye_dx = 0.15 * style.eye_spacing;
  return rasterize(side, [&](double u, double v) {
    double value = 0.12;
    const double fx = (u - 0.5) / (0.36 * style.width), fy = (v - 0.52) / 0.44;
    if (fx * fx + fy * fy <= 1.0) value = style.skin;
    // eyes
    for (double sign : {-1.0, 1.0}) {
      const double ex = (u - (0.5 + sign * eye_dx)) / 0.07, ey = (v - 0.41) / eye_ry;
      if (ex * ex + ey * ey <= 1.0) value = 0.04;
      // brows: inner end drops as the knit increases
      const double inner_x = 0.5 + sign * 0.05, outer_x = 0.5 + sign * (eye_dx + 0.09);
      const double inner_y = 0.25 + 0.10 * c.eyebrow_knit, outer_y = 0.29 - 0.04 * c.eyebrow_knit;
      if (segment_distance(u, v, inner_x, inner_y, outer_x, outer_y) < 0.022) value = 0.08;
    }
    // mouth: a bowed band whose corners rise with mouth_corner and whose
    // height grows with mouth_open
    const double half_width = 0.18;
    const double t = (u - 0.5) / half_width;
    if (std::abs(t) <= 1.0) {
      const double center = 0.74 + bow * (1.0 - t * t) - bow * 0.5;
      if (std::abs(v - center) <= 0.015 + gap * 0.5) value = 0.03;
    }
    return value;
  });
}

Image render_texture(double brightness, double energy, double orientation, double phase, std::size_t side) {
  const double b = std::clamp(brightness, 0.0, 1.0), e = std::clamp(energy, 0.0, 1.0);
  const double base = 0.12 + 0.76 * b;
  const double amplitude = 0.04 + 0.36 * e;
  const double frequency = 1.0 + 6.0 * e;
  const double cx = std::cos(orientation), cy = std::sin(orientation);
  return rasterize(side, [&](double u, double v) {
    const double s = std::sin(2.0 * std::numbers::pi * frequency * (u * cx + v * cy) + phase);
    const double checker = std::sin(2.0 * std::numbers::pi * frequency * (u * cy - v * cx));
    return std::clamp(base + amplitude * (0.7 * s + 0.3 * checker), 0.0, 1.0);
  });
}

Image black_image(std::size_t side) { return Image(side * side, 0.0); }

AffectVector face_affect(const FaceControls& raw) {
  const FaceControls c = raw.clamped();
  const double energy = (c.eyelid_open + c.mouth_open + c.eyebrow_knit) / 3.0;
  return {kAffectMin + (kAffectMax - kAffectMin) * c.mouth_corner, kAffectMin + (kAffectMax - kAffectMin) * energy};
}

AffectVector texture_affect(double brightness, double energy) {
  return {kAffectMin + (kAffectMax - kAffectMin) * std::clamp(brightness, 0.0, 1.0),
          kAffectMin + (kAffectMax - kAffectMin) * std::clamp(energy, 0.0, 1.0)};
}

// ---- World stimuli -------------------------------------------------------------

FaceControls expression_prototype(ExpressionLabel label) {
  switch (label) {
    case ExpressionLabel::pleasure: return {0.70, 0.30, 0.60, 0.90};
    case ExpressionLabel::anger: return {0.85, 0.90, 0.30, 0.15};
    case ExpressionLabel::sadness: return {0.35, 0.80, 0.10, 0.15};
    case ExpressionLabel::neutral: return {0.60, 0.45, 0.20, 0.50};
  }
  return {};
}

namespace {

// (brightness, energy) of the natural set: spans the plane and leads with a
// dark high-energy item (the strongly negative, arousing "snake" analogue).
constexpr std::array<std::array<double, 2>, 8> kNaturalLayout{{
    {0.05, 0.95}, {0.90, 0.25}, {0.15, 0.35}, {0.80, 0.85},
    {0.50, 0.55}, {0.30, 0.75}, {0.65, 0.10}, {0.95, 0.60},
}};

double radical_inverse(std::size_t i, std::size_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

std::array<double, 2> natural_params(std::size_t i) {
  if (i < kNaturalLayout.size()) return kNaturalLayout[i];
  return {radical_inverse(i + 1, 2), radical_inverse(i + 1, 3)};
}

}  // namespace

StimulusSet::StimulusSet(const EnvironmentConfig& config) : side_(config.image_side) {
  if (side_ < 4) throw ConfigError("env.image_side must be at least 4");
  const std::array<FaceStyle, 2> styles{FaceStyle{1.0, 1.0, 0.62}, FaceStyle{0.86, 1.12, 0.72}};
  for (std::size_t e = 0; e < kExpressionCount; ++e) {
    const auto label = static_cast<ExpressionLabel>(e);
    for (std::size_t v = 0; v < styles.size(); ++v) {
      Stimulus s;
      s.id = stimuli_.size();
      s.category = static_cast<int>(e);
      s.kind = StimulusKind::face;
      s.controllable = true;
      const FaceControls proto = expression_prototype(label);
      s.label = face_affect(proto);
      s.name = std::string(expression_name(label)) + "_" + std::to_string(v);
      s.image = render_face(proto, styles[v], side_);
      stimuli_.push_back(std::move(s));
    }
  }
  natural_begin_ = stimuli_.size();
  natural_count_ = config.natural_count;
  for (std::size_t i = 0; i < natural_count_; ++i) {
    const auto [b, e] = natural_params(i);
    Stimulus s;
    s.id = stimuli_.size();
    s.category = static_cast<int>(kExpressionCount + i);
    s.kind = StimulusKind::natural;
    s.label = texture_affect(b, e);
    s.name = "natural_" + std::to_string(i);
    s.image = render_texture(b, e, 0.37 * static_cast<double>(i) + 0.2, 1.3 * static_cast<double>(i), side_);
    stimuli_.push_back(std::move(s));
  }
  Stimulus black;
  black.id = stimuli_.size();
  black.category = static_cast<int>(kExpressionCount + natural_count_);
  black.kind = StimulusKind::black;
  black.label = {kAffectMidpoint.valence, kAffectMin};
  black.name = "black";
  black.image = black_image(side_);
  stimuli_.push_back(std::move(black));
}

const Stimulus& StimulusSet::face(ExpressionLabel label, std::size_t variant) const {
  if (variant > 1) throw InvalidArgument("face variant must be 0 or 1");
  return stimuli_.at(static_cast<std::size_t>(label) * 2 + variant);
}

const Stimulus& mother_respond(const StimulusSet& set, ExpressionLabel label, RngStream& rng) {
  return set.face(label, rng.uniform_index(2));
}

Environment::Environment(const StimulusSet& stimuli, EnvironmentConfig config)
    : stimuli_(&stimuli), config_(config) {
  if (config_.natural_probability < 0.0 || config_.natural_probability > 1.0)
    throw ConfigError("env.natural_probability must lie in [0,1]");
  if (config_.natural_count == 0) throw ConfigError("env.natural_count must be positive");
}

EnvStep Environment::reset(RngStream& rng) {
  previous_ = FaceControls{};
  EnvStep out;
  out.expression = classify_expression(previous_);
  out.stimulus = &mother_respond(*stimuli_, out.expression, rng);
  out.category = out.stimulus->category;
  return out;
}

EnvStep Environment::step(const FaceControls& raw, Condition condition, RngStream& rng) {
  const FaceControls controls = raw.clamped();
  EnvStep out;
  out.expression = classify_expression(controls);
  const auto now = controls.to_array(), before = previous_.to_array();
  double moved = 0.0;
  for (std::size_t i = 0; i < FaceControls::kParts; ++i) moved += std::abs(now[i] - before[i]);
  out.action_cost = config_.action_cost_scale * moved;
  previous_ = controls;

  const bool natural = condition == Condition::face_plus_natural && rng.bernoulli(config_.natural_probability);
  if (natural) {
    out.stimulus = &stimuli_->natural(rng.uniform_index(stimuli_->natural_count()));
  } else {
    out.stimulus = &mother_respond(*stimuli_, out.expression, rng);
  }
  if (controls.eyelid_open < config_.eyes_closed_threshold) {
    out.eyes_closed = true;
    out.stimulus = &stimuli_->black();
  }
  out.category = out.stimulus->category;
  return out;
}

// ---- Corpus --------------------------------------------------------------------

namespace {

Stimulus draw_corpus_item(const CorpusSpec& spec, std::size_t id, RngStream& rng) {
  Stimulus s;
  s.id = id;
  if (rng.uniform() < spec.face_fraction) {
    FaceControls c{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    FaceStyle style{rng.uniform(0.82, 1.05), rng.uniform(0.9, 1.15), rng.uniform(0.55, 0.75)};
    s.kind = StimulusKind::face;
    s.category = static_cast<int>(classify_expression(c));
    s.label = face_affect(c);
    s.image = render_face(c, style, spec.image_side);
    s.name = "face";
  } else {
    const double b = rng.uniform(), e = rng.uniform();
    const double orientation = rng.uniform(0.0, std::numbers::pi), phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.kind = StimulusKind::natural;
    s.category = static_cast<int>(kExpressionCount);
    s.label = texture_affect(b, e);
    s.image = render_texture(b, e, orientation, phase, spec.image_side);
    s.name = "texture";
  }
  if (spec.noise > 0.0)
    for (double& p : s.image) p = std::clamp(p + rng.normal(0.0, spec.noise), 0.0, 1.0);
  return s;
}

}  // namespace

Corpus generate_corpus(const CorpusSpec& spec, RngStream& rng) {
  if (spec.size == 0) throw InvalidArgument("corpus size must be positive");
  if (spec.image_side < 4) throw InvalidArgument("corpus image side must be at least 4");
  Corpus corpus;
  corpus.train.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) corpus.train.push_back(draw_corpus_item(spec, i, rng));
  for (std::size_t i = 0; i < spec.held_out; ++i) corpus.test.push_back(draw_corpus_item(spec, spec.size + i, rng));
  return corpus;
}

namespace {

const char* kind_name(StimulusKind k) {
  switch (k) {
    case StimulusKind::face: return "face";
    case StimulusKind::natural: return "natural";
    case StimulusKind::black: return "black";
  }
  return "face";
}

StimulusKind parse_kind(const std::string& s) {
  if (s == "face") return StimulusKind::face;
  if (s == "natural") return StimulusKind::natural;
  if (s == "black") return StimulusKind::black;
  throw IoError("unknown stimulus kind '" + s + "'");
}

}  // namespace

void write_stimulus_directory(const std::filesystem::path& dir, const std::vector<Stimulus>& stimuli) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw IoError("cannot write manifest in '" + dir.string() + "'");
  manifest << "id\tcategory\tvalence\tarousal\tcontrollable\tkind\tname\tfile\n";
  manifest.precision(17);
  for (const auto& s : stimuli) {
    const std::string file = std::to_string(s.id) + ".f64";
    manifest << s.id << '\t' << s.category << '\t' << s.label.valence << '\t' << s.label.arousal << '\t'
             << (s.controllable ? 1 : 0) << '\t' << kind_name(s.kind) << '\t' << s.name << '\t' << file << '\n';
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw IoError("cannot write '" + (dir / file).string() + "'");
    out.write(reinterpret_cast<const char*>(s.image.data()), static_cast<std::streamsize>(s.image.size() * sizeof(double)));
  }
}

std::vector<Stimulus> read_stimulus_directory(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.tsv");
  if (!manifest) throw IoError("no manifest.tsv in '" + dir.string() + "'");
  std::string line;
  std::getline(manifest, line);
  std::vector<Stimulus> out;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    Stimulus s;
    int controllable = 0;
    std::string kind, file;
    if (!(row >> s.id >> s.category >> s.label.valence >> s.label.arousal >> controllable >> kind >> s.name >> file))
      throw IoError("malformed manifest line: " + line);
    s.controllable = controllable != 0;
    s.kind = parse_kind(kind);
    std::ifstream in(dir / file, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("missing image file '" + file + "'");
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(double) != 0) throw IoError("image file '" + file + "' has a partial value");
    s.image.resize(bytes / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(s.image.data()), static_cast<std::streamsize>(bytes));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace emo
