#include "doctest.h"

#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "emo/core/analysis.hpp"
#include "emo/core/errors.hpp"
#include "emo/core/orchestrator.hpp"
#include "unit/support.hpp"

using namespace emo;
namespace fs = std::filesystem;

namespace {

Samples gaussian_cloud(std::size_t n, std::size_t d, RngStream& rng, std::vector<double> scale = {}) {
  Samples out(n, std::vector<double>(d));
  for (auto& row : out)
    for (std::size_t j = 0; j < d; ++j) row[j] = rng.normal() * (scale.empty() ? 1.0 : scale[j]) + 3.0 * j;
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Fake run directory: every column the readers need, values drawn from a random walk with `step` spread.
void write_run(const fs::path& dir, bool second_layer, std::uint64_t seed, double step, std::size_t epochs,
               bool with_eval) {
  fs::create_directories(dir);
  RunConfig cfg;
  cfg.second_layer = second_layer;
  cfg.seed = seed;
  std::ofstream(dir / "config.txt") << serialize_config(cfg);
  RngStream rng(seed, "fake_run");
  std::ofstream log(dir / "runlog.csv"), act(dir / "activations.csv");
  log << runlog_header() << "\n";
  act << activation_header(3) << "\n";
  AffectVector a{5, 5};
  auto record = [&](std::uint64_t e) {
    EpochRecord r;
    r.epoch = e;
    a.valence += rng.uniform(-step, step);
    a.arousal += rng.uniform(-step, step);
    r.interoception = a;
    r.expression = static_cast<ExpressionLabel>(rng.uniform_index(4));
    r.reward = 40.0 - rng.uniform(0, 10);
    r.pred_loss = rng.uniform(0, 0.3);
    return r;
  };
  for (std::uint64_t e = 1; e <= epochs; ++e) {
    const EpochRecord r = record(e);
    log << format_record(r) << "\n";
    const double c = static_cast<double>(r.expression);
    act << format_activation(e, r.expression, {c + rng.normal() * 0.3, -c + rng.normal() * 0.3, rng.normal()})
        << "\n";
  }
  if (with_eval) {
    std::ofstream ev(dir / "eval.csv");
    ev << runlog_header() << "\n";
    for (std::uint64_t e = epochs + 1; e <= epochs + 300; ++e) ev << format_record(record(e)) << "\n";
  }
}

std::size_t tree_digest(const fs::path& dir) {
  std::size_t h = 0;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    h = h * 1000003u ^ std::hash<std::string>{}(f.string() + "\n" + ss.str());
  }
  return h;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("pca of a line finds the line and flags the missing rank") {
  RngStream rng(1, "pca");
  const std::vector<double> dir{1, 2, -2, 0, 4};
  const double norm = std::sqrt(dot(dir, dir));
  Samples data;
  for (int i = 0; i < 200; ++i) {
    const double t = rng.normal() * 3.0;
    std::vector<double> x(5);
    for (std::size_t j = 0; j < 5; ++j) x[j] = 1.0 + t * dir[j];
    data.push_back(x);
  }
  const auto m = fit_pca(data);
  CHECK(std::abs(dot(m.directions[0], dir)) / norm == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(m.explained[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(m.eigenvalues[1] < 1e-10 * m.eigenvalues[0]);
  CHECK(m.rank == 1);
  CHECK(m.rank_deficient);
}

TEST_CASE("isotropic cloud spreads variance evenly") {
  RngStream rng(2, "pca");
  const auto m = fit_pca(gaussian_cloud(10000, 3, rng));
  for (std::size_t k = 0; k < 3; ++k) CHECK(m.explained[k] == doctest::Approx(1.0 / 3.0).epsilon(0.1));
  CHECK_FALSE(m.rank_deficient);
}

TEST_CASE("pca identities") {
  RngStream rng(3, "pca");
  const std::size_t n = 500, d = 6;
  const auto data = gaussian_cloud(n, d, rng, {3.0, 2.0, 1.5, 1.0, 0.5, 0.1});
  const auto m = fit_pca(data, 2);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      CHECK(dot(m.directions[i], m.directions[j]) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    if (i > 0) CHECK(m.eigenvalues[i] <= m.eigenvalues[i - 1]);
  }
  double explained = 0;
  for (double e : m.explained) {
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    explained += e;
  }
  CHECK(explained == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> sum(d, 0.0), ss(d, 0.0);
  for (const auto& x : data) {
    const auto z = m.project(x, d);
    for (std::size_t k = 0; k < d; ++k) {
      sum[k] += z[k];
      ss[k] += z[k] * z[k];
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    CHECK(std::abs(sum[k] / n) < 1e-8);
    CHECK(ss[k] / (n - 1) == doctest::Approx(m.eigenvalues[k]).epsilon(1e-8));
  }

  for (std::size_t keep = 1; keep <= d; ++keep) {
    double err = 0;
    for (const auto& x : data) {
      const auto r = m.reconstruct(x, keep);
      for (std::size_t j = 0; j < d; ++j) err += (x[j] - r[j]) * (x[j] - r[j]);
    }
    err /= static_cast<double>(n - 1);
    double discarded = 0;
    for (std::size_t k = keep; k < d; ++k) discarded += m.eigenvalues[k];
    CHECK(std::abs(err - discarded) < 1e-8 * std::max(1.0, m.eigenvalues[0]));
  }
}

TEST_CASE("pca rejects too little data") {
  CHECK_THROWS_AS(fit_pca(Samples{{1, 2}, {3, 4}}), InvalidArgument);
  CHECK_THROWS_AS(fit_pca(Samples{{1}, {2}, {3}}), InvalidArgument);
  CHECK_THROWS_AS(fit_pca(Samples{{1, 2}, {3, 4}, {5}}), ShapeError);
}

TEST_CASE("mean absolute difference") {
  std::vector<AffectVector> constant(10, {3, 7});
  const Mad z = mad(constant);
  CHECK(z.valence == 0.0);
  CHECK(z.arousal == 0.0);
  std::vector<AffectVector> alt;
  for (int i = 0; i < 11; ++i) alt.push_back(i % 2 ? AffectVector{6, 6} : AffectVector{5, 5});
  const Mad one = mad(alt);
  CHECK(one.valence == doctest::Approx(1.0));
  CHECK(one.arousal == doctest::Approx(1.0));
  CHECK_THROWS_AS(mad(std::vector<AffectVector>{{1, 1}}), InvalidArgument);

  RngStream rng(4, "mad");
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(40);
    std::vector<AffectVector> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back({rng.uniform(1, 9), rng.uniform(1, 9)});
    auto twice = s;
    twice.insert(twice.end(), s.begin(), s.end());
    const Mad h = mad(s), w = mad(twice);
    const double jv = std::abs(s.front().valence - s.back().valence);
    const double ja = std::abs(s.front().arousal - s.back().arousal);
    CHECK(w.valence * (2 * n - 1) == doctest::Approx(2 * h.valence * (n - 1) + jv).epsilon(1e-12));
    CHECK(w.arousal * (2 * n - 1) == doctest::Approx(2 * h.arousal * (n - 1) + ja).epsilon(1e-12));
  }
}

TEST_CASE("welch test") {
  const std::vector<double> a{27.5, 21.0, 19.0, 23.6, 17.0};
  const std::vector<double> b{27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0};
  SUBCASE("identical samples") {
    const auto r = welch_t_test(a, a);
    CHECK(r.t == 0.0);
    CHECK(r.p == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("reference values") {
    // Evaluated independently at 30 significant digits.
    const auto r = welch_t_test(a, b);
    CHECK(r.t == doctest::Approx(-0.953052598609926457911356959572).epsilon(1e-12));
    CHECK(r.df == doctest::Approx(5.30499789291651713913249971145).epsilon(1e-12));
    CHECK(r.p == doctest::Approx(0.381942387081120479236875162916).epsilon(1e-10));
    const auto s = welch_t_test(b, a);
    CHECK(s.t == doctest::Approx(-r.t));
    CHECK(s.p == doctest::Approx(r.p).epsilon(1e-14));
  }
  SUBCASE("well separated normals") {
    RngStream rng(5, "welch");
    std::vector<double> x, y;
    for (int i = 0; i < 100; ++i) {
      x.push_back(rng.normal());
      y.push_back(rng.normal(5.0, 1.0));
    }
    CHECK(welch_t_test(x, y).p < 1e-10);
  }
  SUBCASE("degenerate variances") {
    const std::vector<double> c(4, 2.0), d(6, 2.0), e(3, 3.0);
    CHECK(welch_t_test(c, d).p == 1.0);
    CHECK(welch_t_test(c, e).p == 0.0);
    CHECK_THROWS_AS(welch_t_test(std::vector<double>{1.0}, c), InvalidArgument);
  }
  SUBCASE("p stays a probability") {
    RngStream rng(6, "welch");
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> x, y;
      const std::size_t nx = 2 + rng.uniform_index(20), ny = 2 + rng.uniform_index(20);
      for (std::size_t i = 0; i < nx; ++i) x.push_back(rng.normal());
      for (std::size_t i = 0; i < ny; ++i) y.push_back(rng.normal(rng.uniform(-2, 2), 2.0));
      const auto r = welch_t_test(x, y);
      CHECK(r.p >= 0.0);
      CHECK(r.p <= 1.0);
    }
  }
}

TEST_CASE("expression frequency") {
  std::vector<ExpressionLabel> only(30, ExpressionLabel::pleasure);
  const auto f = expression_frequency(only);
  CHECK(f[static_cast<std::size_t>(ExpressionLabel::pleasure)] == 1.0);
  CHECK_THROWS_AS(expression_frequency(std::vector<ExpressionLabel>{}), InvalidArgument);
  RngStream rng(7, "freq");
  std::vector<ExpressionLabel> random;
  for (int i = 0; i < 10000; ++i) random.push_back(static_cast<ExpressionLabel>(rng.uniform_index(4)));
  const auto g = expression_frequency(random);
  double total = 0;
  for (double v : g) {
    CHECK(std::abs(v - 0.25) < 0.02);
    total += v;
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("silhouette") {
  const Samples pts{{0}, {1}, {10}, {11}};
  const std::vector<int> labels{0, 0, 1, 1};
  const double expect = (2 * (9.5 / 10.5) + 2 * (8.5 / 9.5)) / 4;
  CHECK(silhouette(pts, labels) == doctest::Approx(expect).epsilon(1e-14));
  // A point alone in its cluster contributes zero.
  const Samples three{{0}, {1}, {10}};
  CHECK(silhouette(three, std::vector<int>{0, 0, 1}) == doctest::Approx((9.0 / 10.0 + 8.0 / 9.0) / 3).epsilon(1e-14));
  CHECK_THROWS_AS(silhouette(pts, std::vector<int>{1, 1, 1, 1}), InvalidArgument);
  CHECK_THROWS_AS(silhouette(pts, std::vector<int>{1, 0}), ShapeError);

  RngStream rng(8, "sil");
  Samples mixed;
  std::vector<int> random_labels;
  for (int i = 0; i < 400; ++i) {
    mixed.push_back({rng.normal(), rng.normal()});
    random_labels.push_back(static_cast<int>(rng.uniform_index(4)));
  }
  const double s = silhouette(mixed, random_labels);
  CHECK(s >= -1.0);
  CHECK(s < 0.1);
}

TEST_CASE("report bundle") {
  const auto root = test::scratch_dir("analysis");
  CHECK_THROWS_AS(emit_reports({}, root / "none"), InvalidArgument);

  write_run(root / "on", true, 1, 0.2, 600, true);
  write_run(root / "off", false, 2, 0.6, 600, true);
  const std::size_t before = tree_digest(root / "on") ^ (tree_digest(root / "off") << 1);

  SUBCASE("single run skips the comparison") {
    const auto out = emit_reports({root / "on"}, root / "single");
    CHECK(fs::exists(root / "single" / "curves.svg"));
    CHECK(fs::exists(root / "single" / "curves.csv"));
    for (int b = 0; b < 5; ++b) CHECK(fs::exists(root / "single" / ("pca_band_" + std::to_string(b) + ".svg")));
    bool notice = false;
    for (const auto& n : out.notices) notice = notice || n.find("MAD comparison skipped") != std::string::npos;
    CHECK(notice);
    CHECK(slurp(root / "single" / "mad.csv").find("component,") == std::string::npos);
  }
  SUBCASE("on and off runs produce the comparison table") {
    emit_reports({root / "on", root / "off"}, root / "pair", 4);
    const std::string text = slurp(root / "pair" / "mad.csv");
    const auto split = text.find("\n\n");
    REQUIRE(split != std::string::npos);
    const auto cmp = CsvTable::parse(text.substr(split + 2));
    REQUIRE(cmp.rows() == 2);
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(cmp.number(r, "mad_with_layer") < cmp.number(r, "mad_without_layer"));
      CHECK(cmp.number(r, "p") >= 0.0);
      CHECK(cmp.number(r, "p") < 1e-6);
      CHECK(cmp.number(r, "n_with") == 299);
    }
    const auto freq = CsvTable::read(root / "pair" / "freq.csv");
    CHECK(freq.rows() == 8);
    for (std::size_t r = 0; r < freq.rows(); ++r) {
      double total = 0;
      for (const char* c : {"pleasure", "anger", "sadness", "neutral"}) {
        const double v = freq.number(r, c);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        total += v;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
    const auto sil = CsvTable::read(root / "pair" / "silhouette.csv");
    CHECK(sil.rows() == 8);
    CHECK(fs::exists(root / "pair" / "0_on" / "pca_band_3.svg"));
    CHECK(fs::exists(root / "pair" / "1_off" / "freq.svg"));
  }
  SUBCASE("missing columns are named") {
    fs::copy(root / "on", root / "broken", fs::copy_options::recursive);
    std::string log = slurp(root / "broken" / "runlog.csv");
    const auto pos = log.find("pred_loss");
    log.replace(pos, 9, "prediction");
    std::ofstream(root / "broken" / "runlog.csv", std::ios::trunc) << log;
    try {
      emit_reports({root / "broken"}, root / "broken_out");
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("pred_loss") != std::string::npos);
    }
  }
  CHECK((tree_digest(root / "on") ^ (tree_digest(root / "off") << 1)) == before);
}

TEST_CASE("band analysis separates labelled activations") {
  const auto root = test::scratch_dir("analysis_bands");
  write_run(root / "run", true, 3, 0.2, 500, false);
  const auto run = load_run(root / "run");
  CHECK(run.activations.size() == 500);
  CHECK(run.eval_interoception.empty());
  std::vector<Samples> proj;
  const auto bands = band_analysis(run, 5, &proj);
  REQUIRE(bands.size() == 5);
  CHECK(bands[0].first_epoch == 1);
  CHECK(bands[4].last_epoch == 500);
  for (const auto& b : bands) {
    CHECK(b.silhouette > 0.3);
    CHECK(proj[b.band].size() == 100);
  }
  CHECK_THROWS_AS(band_analysis(run, 200), InvalidArgument);
  CHECK_THROWS_AS(load_run(root / "absent"), IoError);
}
