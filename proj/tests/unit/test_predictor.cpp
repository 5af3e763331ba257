#include "doctest.h"

#include <cmath>

#include "emo/core/checkpoint.hpp"
#include "emo/core/errors.hpp"
#include "emo/core/predictor.hpp"
#include "unit/support.hpp"

using namespace emo;

namespace {

void zero_all(Predictor& p) {
  for (auto* q : p.parameters()) q->value.fill(0.0);
}

void randomize(std::vector<nn::Parameter*> params, RngStream& rng, double scale) {
  for (auto* p : params)
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = rng.uniform(-scale, scale);
}

Image random_image(std::size_t side, RngStream& rng) {
  Image img(side * side);
  for (double& v : img) v = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("zero cell opens every gate half way") {
  RngStream rng(1, "cell");
  ConvLstmCell cell(2, 3, 4, 3, rng);
  for (auto* p : cell.parameters()) p->value.fill(0.0);
  ConvLstmCell::Cache cache;
  const auto next = cell.step(test::random_tensor({1, 2, 4, 4}, rng), cell.zero_state(), &cache);
  for (std::size_t i = 0; i < cache.i.size(); ++i) {
    CHECK(cache.i[i] == 0.5);
    CHECK(cache.f[i] == 0.5);
    CHECK(cache.o[i] == 0.5);
    CHECK(next.c[i] == 0.0);
    CHECK(next.h[i] == 0.0);
  }
}

TEST_CASE("saturated forget gate keeps the cell") {
  RngStream rng(2, "cell");
  ConvLstmCell cell(1, 2, 4, 3, rng);
  for (auto* p : cell.parameters()) p->value.fill(0.0);
  // Gate order i, f, c, o: the forget biases are entries H..2H-1.
  for (std::size_t j = 2; j < 4; ++j) cell.bias().value[j] = 40.0;
  LstmLayerState s = cell.zero_state();
  s.c.fill(0.8);
  const auto next = cell.step(test::random_tensor({1, 1, 4, 4}, rng), s, nullptr);
  for (double v : next.c.values()) CHECK(v == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("gates lie in the open unit interval and H in (-1, 1)") {
  RngStream rng(3, "cell");
  ConvLstmCell cell(3, 2, 4, 3, rng);
  randomize(cell.parameters(), rng, 1.0);
  LstmLayerState s = cell.zero_state(2);
  for (int t = 0; t < 50; ++t) {
    ConvLstmCell::Cache cache;
    s = cell.step(test::random_tensor({2, 3, 4, 4}, rng, -3, 3), s, &cache);
    for (std::size_t i = 0; i < cache.i.size(); ++i) {
      REQUIRE((cache.i[i] > 0.0 && cache.i[i] < 1.0));
      REQUIRE((cache.f[i] > 0.0 && cache.f[i] < 1.0));
      REQUIRE((cache.o[i] > 0.0 && cache.o[i] < 1.0));
      REQUIRE(std::abs(s.h[i]) < 1.0);
    }
  }
}

TEST_CASE("cell gradients pass finite differences over two steps") {
  RngStream rng(4, "fd/cell");
  for (int k = 0; k < 100; ++k) {
    const std::size_t cin = 1 + rng.uniform_index(2), H = 1 + rng.uniform_index(2);
    const std::size_t kernel = rng.bernoulli(0.5) ? 3 : 1;
    ConvLstmCell cell(cin, H, 4, kernel, rng);
    randomize(cell.parameters(), rng, 0.8);
    const Shape hs{1, H, 4, 4};
    nn::Parameter x1("x1", test::random_tensor({1, cin, 4, 4}, rng)), x2("x2", test::random_tensor({1, cin, 4, 4}, rng));
    nn::Parameter h0("h0", test::random_tensor(hs, rng)), c0("c0", test::random_tensor(hs, rng));
    const Tensor a = test::random_tensor(hs, rng), b = test::random_tensor(hs, rng), e = test::random_tensor(hs, rng);
    auto dot = [](const Tensor& u, const Tensor& v) {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
      return s;
    };
    nn::GradProblem problem;
    problem.params = cell.parameters();
    for (auto* p : {&x1, &x2, &h0, &c0}) problem.params.push_back(p);
    problem.loss = [&] {
      const auto s1 = cell.step(x1.value, {h0.value, c0.value}, nullptr);
      const auto s2 = cell.step(x2.value, s1, nullptr);
      return dot(a, s2.h) + dot(b, s2.c) + dot(e, s1.h);
    };
    problem.backprop = [&] {
      for (auto* p : cell.parameters()) p->zero_grad();
      ConvLstmCell::Cache k1, k2;
      const auto s1 = cell.step(x1.value, {h0.value, c0.value}, &k1);
      cell.step(x2.value, s1, &k2);
      Tensor dh1, dc1, dh0, dc0;
      x2.grad = cell.backward(k2, a, b, dh1, dc1);
      dh1 += e;
      x1.grad = cell.backward(k1, dh1, dc1, dh0, dc0);
      h0.grad = dh0;
      c0.grad = dc0;
    };
    const auto report = nn::finite_difference_check(problem, 1e-4);
    INFO("instance " << k << " err " << report.max_rel_error);
    CHECK(report.passed);
  }
}

TEST_CASE("predictor sequence gradients pass finite differences") {
  RngStream rng(5, "fd/pred");
  for (int k = 0; k < 20; ++k) {
    PredictorConfig cfg;
    cfg.side = 4;
    cfg.hidden = 2;
    cfg.kernel = 3;
    Predictor p(cfg, rng);
    randomize(p.parameters(), rng, 0.6);
    PredictorState start = p.initial_state();
    for (auto& l : start.layers) {
      l.h = test::random_tensor(l.h.shape(), rng, -0.5, 0.5);
      l.c = test::random_tensor(l.c.shape(), rng, -0.5, 0.5);
    }
    std::vector<PredictorSample> seq;
    for (int t = 0; t < 3; ++t)
      seq.push_back({random_image(4, rng), {rng.uniform(1, 13), rng.uniform(1, 13)}, random_image(4, rng),
                     {rng.uniform(1, 13), rng.uniform(1, 13)}});
    nn::GradProblem problem;
    problem.params = p.parameters();
    problem.loss = [&] { return p.sequence_loss(start, seq); };
    problem.backprop = [&] { p.sequence_gradients(start, seq); };
    const auto report = nn::finite_difference_check(problem, 1e-4);
    INFO("instance " << k << " err " << report.max_rel_error);
    CHECK(report.passed);
  }
}

TEST_CASE("zero predictor forecasts grey and its interoception bias") {
  RngStream rng(6, "pred");
  PredictorConfig cfg;
  cfg.side = 4;
  Predictor p(cfg, rng);
  zero_all(p);
  p.intero_bias().value[0] = 0.25;
  p.intero_bias().value[1] = 0.5;
  PredictorState s = p.initial_state();
  const auto out = p.predict(random_image(4, rng), {5, 5}, s);
  for (double v : out.image) CHECK(v == 0.5);
  CHECK(out.interoception.valence == doctest::Approx(1.0 + 0.25 * 12.0));
  CHECK(out.interoception.arousal == doctest::Approx(1.0 + 0.5 * 12.0));
}

TEST_CASE("prediction is deterministic") {
  RngStream rng(7, "pred");
  PredictorConfig cfg;
  cfg.side = 8;
  Predictor p(cfg, rng);
  const Image img = random_image(8, rng);
  PredictorState a = p.initial_state(), b = p.initial_state();
  const auto pa = p.predict(img, {4, 6}, a), pb = p.predict(img, {4, 6}, b);
  CHECK(pa.image == pb.image);
  CHECK(pa.interoception == pb.interoception);
  CHECK(a.layers[1].h == b.layers[1].h);
}

TEST_CASE("loss on a 2x2 case matches hand arithmetic") {
  RngStream rng(8, "pred");
  PredictorConfig cfg;
  cfg.side = 2;
  cfg.hidden = 1;
  cfg.kernel = 1;
  cfg.layers = 1;
  Predictor p(cfg, rng);
  zero_all(p);
  p.intero_bias().value[0] = 0.5;
  p.intero_bias().value[1] = 0.25;
  // Forecast is image 0.5 everywhere and scaled interoception (0.5, 0.25).
  std::vector<PredictorSample> seq{
      {{0, 0, 0, 0}, {5, 5}, {0.0, 1.0, 0.25, 0.75}, {7.0, 1.0}},  // 0.15625 + (0 + 0.0625) / 2
      {{0, 0, 0, 0}, {5, 5}, {0.5, 0.5, 0.5, 1.0}, {1.0, 4.0}},    // 0.0625 + (0.25 + 0) / 2
  };
  const double expected = ((0.15625 + 0.03125) + (0.0625 + 0.125)) / 2.0;
  CHECK(p.sequence_loss(p.initial_state(), seq) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("perfect forecast has zero loss and leaves parameters alone") {
  RngStream rng(9, "pred");
  PredictorConfig cfg;
  cfg.side = 4;
  Predictor p(cfg, rng);
  zero_all(p);
  std::vector<PredictorSample> seq{{random_image(4, rng), {3, 3}, Image(16, 0.5), {1.0, 1.0}}};
  CHECK(p.train(p.initial_state(), seq) == 0.0);
  for (auto* q : p.parameters())
    for (double v : q->value.values()) CHECK(v == 0.0);
}

TEST_CASE("repeated training on one pair is nearly monotone") {
  RngStream rng(10, "pred");
  PredictorConfig cfg;
  cfg.side = 8;
  cfg.adam.lr = 1e-4;
  Predictor p(cfg, rng);
  Image in(64), out(64);
  for (std::size_t j = 0; j < 64; ++j) {
    in[j] = 0.5 + 0.4 * std::sin(0.7 * static_cast<double>(j / 8)) * std::cos(0.9 * static_cast<double>(j % 8));
    out[j] = 1.0 - in[j];
  }
  std::vector<PredictorSample> seq{{in, {4, 6}, out, {6, 4}}};
  double prev = p.sequence_loss(p.initial_state(), seq);
  const double first = prev;
  int increases = 0;
  for (int step = 0; step < 100; ++step) {
    p.train(p.initial_state(), seq);
    const double now = p.sequence_loss(p.initial_state(), seq);
    increases += now > prev;
    prev = now;
  }
  CHECK(increases <= 5);
  CHECK(prev < 0.8 * first);
}

TEST_CASE("alternating two-image sequence is learned") {
  RngStream rng(11, "pred");
  PredictorConfig cfg;
  cfg.side = 16;
  cfg.adam.lr = 0.01;
  Predictor p(cfg, rng);
  Image a(256), b(256);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c) {
      a[r * 16 + c] = 0.5 + 0.4 * std::sin(0.8 * static_cast<double>(r)) * std::cos(0.5 * static_cast<double>(c));
      b[r * 16 + c] = 1.0 - a[r * 16 + c];
    }
  std::vector<PredictorSample> seq;
  for (int t = 0; t < 20; ++t) {
    const bool even = t % 2 == 0;
    seq.push_back({even ? a : b, {5, 5}, even ? b : a, {5, 5}});
  }
  for (int step = 0; step < 300; ++step) p.train(p.initial_state(), seq);
  PredictorState s = p.initial_state();
  double mse = 0.0;
  for (const auto& smp : seq) {
    const auto out = p.predict(smp.image, smp.interoception, s);
    for (std::size_t j = 0; j < 256; ++j) mse += (out.image[j] - smp.next_image[j]) * (out.image[j] - smp.next_image[j]);
  }
  mse /= 256.0 * static_cast<double>(seq.size());
  INFO("mse " << mse);
  CHECK(mse < 0.01);
}

TEST_CASE("predictor and state round-trip through a container") {
  RngStream rng(12, "pred");
  PredictorConfig cfg;
  cfg.side = 8;
  Predictor p(cfg, rng);
  PredictorState s = p.initial_state();
  const Image img = random_image(8, rng);
  p.predict(img, {5, 6}, s);
  Container c;
  p.save(c, "pred");
  save_predictor_state(c, "state", s);
  Container d = Container::parse(c.serialize());
  RngStream other(99, "pred");
  Predictor q(cfg, other);
  q.load_into(d, "pred");
  PredictorState s2 = load_predictor_state(d, "state");
  const auto pa = p.predict(img, {5, 6}, s), pb = q.predict(img, {5, 6}, s2);
  CHECK(pa.image == pb.image);
  CHECK(pa.interoception == pb.interoception);
}

TEST_CASE("wrong shapes are rejected") {
  RngStream rng(13, "pred");
  PredictorConfig cfg;
  cfg.side = 4;
  Predictor p(cfg, rng);
  PredictorState s = p.initial_state();
  CHECK_THROWS_AS(p.predict(Image(9, 0.0), {5, 5}, s), ShapeError);
  CHECK_THROWS_AS(p.sequence_loss(s, {}), InvalidArgument);
  CHECK_THROWS_AS(ConvLstmCell(1, 1, 4, 2, rng), ShapeError);
}
