#include "doctest.h"

#include <boost/math/distributions/chi_squared.hpp>
#include <array>
#include <cmath>
#include <set>

#include "emo/core/environment.hpp"
#include "emo/core/errors.hpp"
#include "unit/support.hpp"

using namespace emo;

namespace {

FaceControls random_controls(RngStream& rng) { return {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()}; }

}  // namespace

TEST_CASE("mother recognition rules") {
  CHECK(classify_expression({0.5, 0.5, 0.5, 0.9}) == ExpressionLabel::pleasure);
  CHECK(classify_expression({0.7, 0.8, 0.5, 0.2}) == ExpressionLabel::anger);
  CHECK(classify_expression({0.3, 0.8, 0.5, 0.2}) == ExpressionLabel::sadness);
  CHECK(classify_expression({0.5, 0.5, 0.5, 0.5}) == ExpressionLabel::neutral);
  // Ties fall through.
  CHECK(classify_expression({0.5, 0.8, 0.5, 0.2}) == ExpressionLabel::sadness);
  CHECK(classify_expression({0.9, 0.5, 0.5, 0.2}) == ExpressionLabel::neutral);
}

TEST_CASE("recognition rules partition the control cube") {
  RngStream rng(1, "partition");
  std::array<int, 4> seen{};
  for (int i = 0; i < 200000; ++i) {
    const FaceControls c = random_controls(rng);
    int matches = 0;
    matches += c.mouth_corner > 0.5;
    matches += c.mouth_corner < 0.5 && c.eyebrow_knit > 0.5 && c.eyelid_open > 0.5;
    matches += c.mouth_corner < 0.5 && c.eyebrow_knit > 0.5 && c.eyelid_open <= 0.5;
    matches += !(c.mouth_corner > 0.5) && !(c.mouth_corner < 0.5 && c.eyebrow_knit > 0.5);
    REQUIRE(matches == 1);
    const auto label = classify_expression(c);
    REQUIRE(static_cast<int>(label) >= 0);
    REQUIRE(static_cast<int>(label) < 4);
    REQUIRE(classify_expression(c) == label);
    ++seen[static_cast<int>(label)];
  }
  for (int n : seen) CHECK(n > 0);
}

TEST_CASE("affect labels of drawing parameters") {
  CHECK(face_affect({0.5, 0.5, 0.5, 1.0}).valence == 9.0);
  CHECK(face_affect({0.5, 0.5, 0.5, 0.5}) == AffectVector{5.0, 5.0});
  CHECK(texture_affect(0.5, 0.5) == AffectVector{5.0, 5.0});
  CHECK(texture_affect(1.0, 0.0) == AffectVector{9.0, 1.0});
}

TEST_CASE("stimulus set layout") {
  EnvironmentConfig cfg;
  StimulusSet set(cfg);
  CHECK(set.all().size() == 8 + cfg.natural_count + 1);
  for (std::size_t e = 0; e < 4; ++e)
    for (std::size_t v = 0; v < 2; ++v) {
      const auto& s = set.face(static_cast<ExpressionLabel>(e), v);
      CHECK(s.category == static_cast<int>(e));
      CHECK(s.kind == StimulusKind::face);
      CHECK(classify_expression(expression_prototype(static_cast<ExpressionLabel>(e))) ==
            static_cast<ExpressionLabel>(e));
    }
  CHECK(set.black().kind == StimulusKind::black);
  CHECK(set.black_category() == static_cast<int>(4 + cfg.natural_count));
  for (const auto& s : set.all()) {
    CHECK(s.image.size() == cfg.image_side * cfg.image_side);
    for (double p : s.image) REQUIRE((p >= 0.0 && p <= 1.0));
  }
  for (double p : set.black().image) CHECK(p == 0.0);
}

TEST_CASE("mother responds with a face of the expressed category") {
  StimulusSet set(EnvironmentConfig{});
  RngStream rng(2, "mother");
  std::array<int, 2> variants{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto& s = mother_respond(set, ExpressionLabel::pleasure, rng);
    REQUIRE(s.category == static_cast<int>(ExpressionLabel::pleasure));
    ++variants[s.id - set.face(ExpressionLabel::pleasure, 0).id];
  }
  CHECK(std::abs(variants[0] / double(n) - 0.5) < 0.03);
  RngStream a(3, "mother"), b(3, "mother");
  for (int i = 0; i < 100; ++i) CHECK(mother_respond(set, ExpressionLabel::anger, a).id ==
                                      mother_respond(set, ExpressionLabel::anger, b).id);
}

TEST_CASE("face-only mirrors the infant's expression") {
  EnvironmentConfig cfg;
  StimulusSet set(cfg);
  Environment env(set, cfg);
  RngStream rng(4, "env");
  RngStream actions(5, "actions");
  env.reset(rng);
  for (int i = 0; i < 5000; ++i) {
    const FaceControls c = random_controls(actions);
    const EnvStep s = env.step(c, Condition::face_only, rng);
    if (c.eyelid_open < cfg.eyes_closed_threshold) {
      REQUIRE(s.eyes_closed);
      REQUIRE(s.category == set.black_category());
    } else {
      REQUIRE(s.category == static_cast<int>(classify_expression(c)));
      REQUIRE(s.stimulus->kind == StimulusKind::face);
    }
  }
}

TEST_CASE("smiling yields a pleasure face and closed eyes a black image") {
  EnvironmentConfig cfg;
  StimulusSet set(cfg);
  Environment env(set, cfg);
  RngStream rng(6, "env");
  env.reset(rng);
  EnvStep s = env.step({0.7, 0.3, 0.5, 0.95}, Condition::face_only, rng);
  CHECK(s.category == static_cast<int>(ExpressionLabel::pleasure));
  for (auto cond : {Condition::face_only, Condition::face_plus_natural}) {
    s = env.step({0.1, 0.5, 0.5, 0.5}, cond, rng);
    CHECK(s.eyes_closed);
    CHECK(s.stimulus == &set.black());
  }
}

TEST_CASE("action cost is zero for unchanged controls") {
  EnvironmentConfig cfg;
  StimulusSet set(cfg);
  Environment env(set, cfg);
  RngStream rng(7, "env");
  env.reset(rng);
  const FaceControls c{0.8, 0.2, 0.3, 0.6};
  const EnvStep first = env.step(c, Condition::face_only, rng);
  CHECK(first.action_cost == doctest::Approx(cfg.action_cost_scale * (0.3 + 0.3 + 0.2 + 0.1)));
  CHECK(env.step(c, Condition::face_only, rng).action_cost == 0.0);
}

TEST_CASE("natural stimuli are independent of the infant's action") {
  EnvironmentConfig cfg;
  StimulusSet set(cfg);
  Environment env(set, cfg);
  RngStream rng(8, "env"), actions(9, "actions");
  env.reset(rng);
  // Contingency table: infant expression x natural item (eyes open only).
  std::vector<std::vector<double>> table(4, std::vector<double>(cfg.natural_count, 0.0));
  for (int i = 0; i < 10000; ++i) {
    FaceControls c = random_controls(actions);
    c.eyelid_open = 0.3 + 0.7 * c.eyelid_open;
    const EnvStep s = env.step(c, Condition::face_plus_natural, rng);
    if (s.stimulus->kind != StimulusKind::natural) continue;
    table[static_cast<int>(classify_expression(c))][s.category - 4] += 1;
  }
  double total = 0.0;
  std::vector<double> rows(4, 0.0), cols(cfg.natural_count, 0.0);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < cfg.natural_count; ++k) {
      rows[r] += table[r][k];
      cols[k] += table[r][k];
      total += table[r][k];
    }
  double stat = 0.0;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < cfg.natural_count; ++k) {
      const double e = rows[r] * cols[k] / total;
      stat += (table[r][k] - e) * (table[r][k] - e) / e;
    }
  boost::math::chi_squared dist(3.0 * static_cast<double>(cfg.natural_count - 1));
  CHECK(boost::math::cdf(boost::math::complement(dist, stat)) > 0.01);
  CHECK(std::abs(total / 10000.0 - cfg.natural_probability) < 0.03);
}

TEST_CASE("corpus labels cover the rating scale") {
  CorpusSpec spec;
  RngStream rng(10, "corpus");
  Corpus corpus = generate_corpus(spec, rng);
  CHECK(corpus.train.size() == spec.size);
  CHECK(corpus.test.size() == spec.held_out);
  std::array<int, 8> v{}, a{};
  for (const auto& s : corpus.train) {
    REQUIRE(s.label.valence >= 1.0);
    REQUIRE(s.label.valence <= 9.0);
    REQUIRE(s.label.arousal >= 1.0);
    REQUIRE(s.label.arousal <= 9.0);
    ++v[std::min(7, static_cast<int>(s.label.valence - 1.0))];
    ++a[std::min(7, static_cast<int>(s.label.arousal - 1.0))];
  }
  for (int i = 0; i < 8; ++i) {
    CHECK(v[i] >= 10);
    CHECK(a[i] >= 10);
  }
}

TEST_CASE("corpus generation is seed determined") {
  CorpusSpec spec;
  spec.size = 50;
  spec.held_out = 10;
  RngStream a(11, "corpus"), b(11, "corpus");
  Corpus x = generate_corpus(spec, a), y = generate_corpus(spec, b);
  for (std::size_t i = 0; i < x.train.size(); ++i) CHECK(x.train[i].image == y.train[i].image);
}

TEST_CASE("stimulus directory round-trips") {
  StimulusSet set(EnvironmentConfig{});
  auto dir = test::scratch_dir("stimuli");
  write_stimulus_directory(dir, set.all());
  auto back = read_stimulus_directory(dir);
  REQUIRE(back.size() == set.all().size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].image == set.all()[i].image);
    CHECK(back[i].label == set.all()[i].label);
    CHECK(back[i].category == set.all()[i].category);
    CHECK(back[i].name == set.all()[i].name);
  }
  CHECK_THROWS_AS(read_stimulus_directory(dir / "nope"), IoError);
}
