#include "doctest.h"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>

#include "emo/core/checkpoint.hpp"
#include "emo/core/errors.hpp"
#include "emo/core/ram.hpp"
#include "unit/support.hpp"

using namespace emo;

namespace {

RamConfig tiny_config() {
  RamConfig c;
  c.image_side = 8;
  c.glimpse = {2, 2, 2, 3};
  c.glimpse_hidden = 5;
  c.location_hidden = 3;
  c.core_hidden = 4;
  c.location_sigma = 0.3;
  return c;
}

Image random_image(std::size_t side, RngStream& rng) {
  Image img(side * side);
  for (double& p : img) p = rng.uniform();
  return img;
}

std::vector<Stimulus> labelled(std::vector<Stimulus> items, const std::vector<AffectVector>& labels) {
  for (std::size_t i = 0; i < items.size(); ++i) items[i].label = labels[i];
  return items;
}

}  // namespace

TEST_CASE("centre glimpse is a centre crop") {
  GlimpseConfig g{1, 4, 2, 1};
  Image img(64);
  for (std::size_t i = 0; i < 64; ++i) img[i] = static_cast<double>(i);
  const auto x = extract_glimpse(img, 8, {0.0, 0.0}, g);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(x[r * 4 + c] == img[(r + 2) * 8 + (c + 2)]);
}

TEST_CASE("corner glimpse is zero filled outside the image") {
  GlimpseConfig g{1, 4, 2, 1};
  Image img(64);
  for (std::size_t i = 0; i < 64; ++i) img[i] = 1.0 + static_cast<double>(i);
  const auto x = extract_glimpse(img, 8, {-1.0, -1.0}, g);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      const double expected = (r < 2 || c < 2) ? 0.0 : img[(r - 2) * 8 + (c - 2)];
      CHECK(x[r * 4 + c] == expected);
    }
}

TEST_CASE("constant image gives constant patches inside the bounds") {
  GlimpseConfig g{3, 8, 2, 1};
  Image img(32 * 32, 0.37);
  const auto centre = extract_glimpse(img, 32, {0.0, 0.0}, g);
  for (double v : centre) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
  // Top-left: the coarsest scale covers 32 pixels centred on the corner; its
  // cells fully inside the image read c, cells fully outside read 0.
  const auto corner = extract_glimpse(img, 32, {-1.0, -1.0}, g);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c) {
        const double v = corner[s * 64 + r * 8 + c];
        if (r >= 4 && c >= 4) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
        if (r < 4 || c < 4) CHECK(v == 0.0);
      }
}

TEST_CASE("gaussian log density") {
  const double sigma = 0.15;
  CHECK(gaussian_log_prob({0.2, -0.1}, {0.2, -0.1}, sigma) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi * sigma * sigma)).epsilon(1e-14));
  const double dx = 0.1, dy = -0.05;
  const double direct = std::log(std::exp(-dx * dx / (2 * sigma * sigma)) / (std::sqrt(2 * std::numbers::pi) * sigma)) +
                        std::log(std::exp(-dy * dy / (2 * sigma * sigma)) / (std::sqrt(2 * std::numbers::pi) * sigma));
  CHECK(gaussian_log_prob({dx, dy}, {0, 0}, sigma) == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("vanishing sigma samples the mean") {
  RngStream init(1, "init");
  RamModel m(tiny_config(), init);
  RngStream rng(2, "img"), s(3, "policy");
  const Image img = random_image(8, rng);
  RamState st = m.initial_state();
  const auto r = m.step(st, img, s, 1e-12);
  CHECK(r.raw_sample.x == doctest::Approx(r.mean.x).epsilon(1e-9));
  CHECK(r.raw_sample.y == doctest::Approx(r.mean.y).epsilon(1e-9));
  RamState st0 = m.initial_state();
  const auto r0 = m.step(st0, img, s, 0.0);
  CHECK(r0.raw_sample == r0.mean);
}

TEST_CASE("episodes are deterministic under a seed and stay in bounds") {
  RngStream init(4, "init");
  RamConfig c = tiny_config();
  c.location_sigma = 2.0;
  RamModel m(c, init);
  RngStream rng(5, "img");
  const Image img = random_image(8, rng);
  RngStream a(6, "p"), b(6, "p");
  for (int k = 0; k < 200; ++k) {
    const auto e1 = m.episode(img, a), e2 = m.episode(img, b);
    REQUIRE(e1.estimate == e2.estimate);
    REQUIRE(e1.locations == e2.locations);
    for (const auto& l : e1.locations) {
      REQUIRE(std::abs(l.x) <= 1.0);
      REQUIRE(std::abs(l.y) <= 1.0);
    }
  }
  CHECK(m.estimate(img) == m.estimate(img));
}

TEST_CASE("stepping past the last glimpse is a state error") {
  RngStream init(7, "init");
  RamModel m(tiny_config(), init);
  RngStream rng(8, "img");
  const Image img = random_image(8, rng);
  RamState st = m.initial_state();
  for (std::size_t t = 0; t < 3; ++t) m.step(st, img, rng, 0.1);
  CHECK_THROWS_AS(m.step(st, img, rng, 0.1), StateError);
}

TEST_CASE("zero affect head reads out its bias") {
  RngStream init(9, "init");
  RamModel m(tiny_config(), init);
  m.parameter("wa").value.fill(0.0);
  RngStream rng(10, "img");
  CHECK(m.estimate(random_image(8, rng)) == AffectVector{5.0, 5.0});
  m.parameter("ba").value[0] = 0.5;
  m.parameter("ba").value[1] = -0.25;
  CHECK(m.estimate(random_image(8, rng)) == AffectVector{7.0, 4.0});
}

TEST_CASE("hybrid objective gradient passes finite differences") {
  RngStream rng(11, "fd/ram");
  for (int k = 0; k < 100; ++k) {
    RamConfig c = tiny_config();
    c.policy_gradient_to_core = true;
    RamModel m(c, rng);
    for (auto* p : m.parameters())
      for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = rng.uniform(-0.8, 0.8);
    const std::size_t M = 1 + rng.uniform_index(3);
    std::vector<Image> imgs;
    std::vector<AffectVector> targets;
    std::vector<double> rewards;
    std::vector<std::vector<Location>> samples(M);
    for (std::size_t i = 0; i < M; ++i) {
      imgs.push_back(random_image(8, rng));
      targets.push_back({rng.uniform(1, 9), rng.uniform(1, 9)});
      rewards.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
      for (std::size_t t = 0; t < 3; ++t) samples[i].push_back({rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)});
    }
    std::vector<const Image*> ptrs;
    for (const auto& im : imgs) ptrs.push_back(&im);
    nn::GradProblem problem;
    problem.params = m.parameters();
    problem.params.pop_back();
    problem.loss = [&] { return m.hybrid_objective(ptrs, targets, samples, rewards, c.location_sigma); };
    problem.backprop = [&] {
      RngStream unused;
      m.hybrid_gradients(ptrs, targets, unused, c.location_sigma, &samples, &rewards);
    };
    const auto report = nn::finite_difference_check(problem, 1e-4);
    INFO("instance " << k << " err " << report.max_rel_error);
    CHECK(report.passed);

    // The baseline is a constant inside the score-function term, so its own
    // gradient is checked against the objective without that term.
    nn::GradProblem base;
    base.params = {&m.parameter("baseline")};
    base.loss = [&] { return m.hybrid_objective(ptrs, targets, samples, rewards, c.location_sigma, {1.0, 0.0, 1.0}); };
    base.backprop = problem.backprop;
    CHECK(nn::finite_difference_check(base, 1e-4).passed);
  }
}

TEST_CASE("with the core detached the location head still matches finite differences") {
  RngStream rng(12, "fd/ram");
  RamConfig c = tiny_config();
  RamModel m(c, rng);
  std::vector<Image> imgs{random_image(8, rng), random_image(8, rng)};
  std::vector<const Image*> ptrs{&imgs[0], &imgs[1]};
  std::vector<AffectVector> targets{{2, 8}, {6, 3}};
  std::vector<double> rewards{1.0, 0.0};
  std::vector<std::vector<Location>> samples{{{0.1, 0.2}, {-0.3, 0.4}, {0.5, 0.5}}, {{-0.6, 0.1}, {0.2, -0.9}, {0, 0}}};
  nn::GradProblem problem;
  problem.params = {&m.parameter("wloc"), &m.parameter("bloc"), &m.parameter("wa"), &m.parameter("ba")};
  problem.loss = [&] { return m.hybrid_objective(ptrs, targets, samples, rewards, c.location_sigma); };
  problem.backprop = [&] {
    RngStream unused;
    m.hybrid_gradients(ptrs, targets, unused, c.location_sigma, &samples, &rewards);
  };
  CHECK(nn::finite_difference_check(problem, 1e-4).passed);
  // Core parameters see only the regression term.
  nn::GradProblem core;
  core.params = {&m.parameter("whh"), &m.parameter("wg1"), &m.parameter("bl1")};
  const RamLossWeights regression_only{1.0, 0.0, 0.0};
  core.loss = [&] { return m.hybrid_objective(ptrs, targets, samples, rewards, c.location_sigma, regression_only); };
  core.backprop = [&] {
    RngStream unused;
    m.hybrid_gradients(ptrs, targets, unused, c.location_sigma, &samples, &rewards);
  };
  CHECK(nn::finite_difference_check(core, 1e-4).passed);
}

TEST_CASE("centred rewards give no policy update") {
  RngStream rng(13, "ram");
  RamModel m(tiny_config(), rng);
  m.parameter("baseline").value[0] = 0.4;
  std::vector<Image> imgs{random_image(8, rng), random_image(8, rng)};
  std::vector<const Image*> ptrs{&imgs[0], &imgs[1]};
  std::vector<AffectVector> targets{{2, 8}, {6, 3}};
  std::vector<double> rewards{0.4, 0.4};
  RngStream policy(14, "p");
  m.hybrid_gradients(ptrs, targets, policy, 0.2, nullptr, &rewards, {0.0, 1.0, 1.0});
  for (double g : m.parameter("wloc").grad.values()) CHECK(g == 0.0);
  for (double g : m.parameter("bloc").grad.values()) CHECK(g == 0.0);
  CHECK(m.parameter("baseline").grad[0] == 0.0);
}

TEST_CASE("one episode with unit advantage follows the score function") {
  RamConfig c = tiny_config();
  c.glimpse.glimpses = 2;
  RngStream rng(15, "ram");
  RamModel m(c, rng);
  const Image img = random_image(8, rng);
  RamState st = m.initial_state();
  const auto first = m.step(st, img, rng, 0.0);
  const std::vector<std::vector<Location>> samples{{{first.mean.x + 0.1, first.mean.y - 0.2}, {0.0, 0.0}}};
  const std::vector<double> rewards{1.0};
  const Image* ptrs[] = {&img};
  const AffectVector target{5, 5};
  RngStream unused;
  m.hybrid_gradients(ptrs, std::span(&target, 1), unused, c.location_sigma, &samples, &rewards, {0.0, 1.0, 0.0});
  const double s2 = c.location_sigma * c.location_sigma;
  // d log pi / d bloc = (sample - mu) / sigma^2 * (1 - mu^2); the loss is its negative.
  CHECK(m.parameter("bloc").grad[0] == doctest::Approx(-(0.1 / s2) * (1 - first.mean.x * first.mean.x)).epsilon(1e-10));
  CHECK(m.parameter("bloc").grad[1] == doctest::Approx((0.2 / s2) * (1 - first.mean.y * first.mean.y)).epsilon(1e-10));
}

TEST_CASE("policy gradient on a two-location bandit matches the exact gradient") {
  // One policy decision; reward 1 when the sampled x lands right of centre.
  RamConfig c = tiny_config();
  c.glimpse.glimpses = 2;
  c.location_sigma = 0.15;
  RngStream rng(16, "bandit");
  RamModel m(c, rng);
  m.parameter("baseline").value[0] = 0.5;
  m.parameter("wloc").value.fill(0.0);
  m.parameter("bloc").value[0] = 0.05;
  m.parameter("bloc").value[1] = 0.0;
  const Image img = random_image(8, rng);
  RamState st = m.initial_state();
  const Location mu = m.step(st, img, rng, 0.0).mean;
  const double sigma = c.location_sigma;

  const std::size_t N = 10000;
  std::vector<const Image*> ptrs(N, &img);
  std::vector<AffectVector> targets(N, AffectVector{5, 5});
  std::vector<std::vector<Location>> samples(N);
  std::vector<double> rewards(N);
  RngStream draw(17, "bandit/draw");
  for (std::size_t i = 0; i < N; ++i) {
    const Location l{draw.normal(mu.x, sigma), draw.normal(mu.y, sigma)};
    samples[i] = {l, {0, 0}};
    rewards[i] = l.x > 0.0 ? 1.0 : 0.0;
  }
  RngStream unused;
  m.hybrid_gradients(ptrs, targets, unused, sigma, &samples, &rewards, {0.0, 1.0, 0.0});

  // E[R] = Phi(mu_x / sigma) with mu_x = tanh(pre), so dE/dbloc_x = phi(mu_x/sigma)/sigma (1 - mu_x^2).
  boost::math::normal standard;
  const double exact = boost::math::pdf(standard, mu.x / sigma) / sigma * (1.0 - mu.x * mu.x);
  const double estimate = -m.parameter("bloc").grad[0];
  INFO("exact " << exact << " estimate " << estimate);
  CHECK(std::abs(estimate - exact) < 0.05 * std::abs(exact));
  CHECK(std::abs(m.parameter("bloc").grad[1]) < 0.1 * std::abs(exact));
}

TEST_CASE("tolerance reward") {
  RngStream init(18, "init");
  RamModel m(tiny_config(), init);
  CHECK(m.tolerance_reward({5.0, 5.0}, {5.4, 4.6}) == 1.0);
  CHECK(m.tolerance_reward({5.0, 5.0}, {5.6, 5.0}) == 0.0);
  CHECK(m.tolerance_reward({5.0, 5.0}, {5.0, 5.5}) == 0.0);
}

TEST_CASE("save and load preserve the model exactly") {
  RngStream init(19, "init");
  RamModel m(tiny_config(), init);
  Container c;
  m.save(c, "ram");
  RamModel back = RamModel::load(Container::parse(c.serialize()), "ram");
  RngStream rng(20, "img");
  for (int i = 0; i < 5; ++i) {
    const Image img = random_image(8, rng);
    CHECK(back.estimate(img) == m.estimate(img));
  }
  CHECK(back.config().policy_gradient_to_core == m.config().policy_gradient_to_core);
}

TEST_CASE("constant labels are learned") {
  CorpusSpec spec;
  spec.size = 120;
  spec.held_out = 40;
  spec.image_side = 16;
  RngStream rng(21, "corpus");
  Corpus corpus = generate_corpus(spec, rng);
  const AffectVector constant{3.0, 7.0};
  for (auto& s : corpus.train) s.label = constant;
  for (auto& s : corpus.test) s.label = constant;
  RamConfig c;
  c.image_side = 16;
  c.glimpse = {2, 4, 2, 3};
  c.glimpse_hidden = 32;
  c.location_hidden = 8;
  c.core_hidden = 32;
  c.adam.lr = 3e-3;
  auto result = train_ram(corpus.train, corpus.test, 30, c, 1);
  CHECK(result.held_out.valence < 0.05);
  CHECK(result.held_out.arousal < 0.05);
}

TEST_CASE("shuffled labels are no better than the mean predictor") {
  CorpusSpec spec;
  spec.size = 400;
  spec.held_out = 200;
  spec.image_side = 16;
  RngStream rng(22, "corpus");
  Corpus corpus = generate_corpus(spec, rng);
  auto shuffle = [&](std::vector<Stimulus>& items) {
    std::vector<AffectVector> labels;
    for (const auto& s : items) labels.push_back(s.label);
    for (std::size_t i = labels.size() - 1; i > 0; --i) std::swap(labels[i], labels[rng.uniform_index(i + 1)]);
    items = labelled(items, labels);
  };
  shuffle(corpus.train);
  shuffle(corpus.test);
  AffectVector mean;
  for (const auto& s : corpus.train) mean += s.label;
  mean = (1.0 / static_cast<double>(corpus.train.size())) * mean;
  double base_v = 0.0, base_a = 0.0;
  for (const auto& s : corpus.test) {
    base_v += std::abs(s.label.valence - mean.valence);
    base_a += std::abs(s.label.arousal - mean.arousal);
  }
  base_v /= static_cast<double>(corpus.test.size());
  base_a /= static_cast<double>(corpus.test.size());
  RamConfig c;
  c.image_side = 16;
  c.glimpse = {2, 4, 2, 3};
  c.glimpse_hidden = 32;
  c.location_hidden = 8;
  c.core_hidden = 32;
  auto result = train_ram(corpus.train, corpus.test, 15, c, 2);
  INFO("mae " << result.held_out.valence << "/" << result.held_out.arousal << " baseline " << base_v << "/" << base_a);
  CHECK(result.held_out.valence > 0.95 * base_v);
  CHECK(result.held_out.arousal > 0.95 * base_a);
}

TEST_CASE("training curve trends down on the synthetic corpus") {
  CorpusSpec spec;
  spec.size = 300;
  spec.held_out = 50;
  spec.image_side = 16;
  RngStream rng(23, "corpus");
  Corpus corpus = generate_corpus(spec, rng);
  RamConfig c;
  c.image_side = 16;
  c.glimpse = {2, 4, 2, 3};
  c.glimpse_hidden = 32;
  c.location_hidden = 8;
  c.core_hidden = 32;
  auto result = train_ram(corpus.train, corpus.test, 20, c, 3);
  REQUIRE(result.curve.size() == 20);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 5; ++i) {
    first += result.curve[i].regression_mse;
    last += result.curve[15 + i].regression_mse;
  }
  CHECK(last < first);
}
