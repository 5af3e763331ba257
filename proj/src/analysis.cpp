#include "emo/core/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "emo/core/errors.hpp"
#include "emo/core/svg.hpp"

namespace emo {

// ---- PCA -----------------------------------------------------------------------

namespace {
constexpr double kRankTolerance = 1e-10;
}

PcaModel fit_pca(const Samples& data, std::size_t components) {
  if (data.size() < 3) throw InvalidArgument("pca needs at least 3 samples");
  const std::size_t d = data[0].size();
  if (d < 2) throw InvalidArgument("pca needs dimension >= 2");
  if (components == 0 || components > d) throw InvalidArgument("pca component count out of range");
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data[static_cast<std::size_t>(i)].size() != d) throw ShapeError("pca samples differ in dimension");
    for (std::size_t j = 0; j < d; ++j) X(i, static_cast<Eigen::Index>(j)) = data[static_cast<std::size_t>(i)][j];
  }
  const Eigen::RowVectorXd mu = X.colwise().mean();
  X.rowwise() -= mu;
  const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca eigendecomposition failed");
  PcaModel m;
  m.mean.assign(mu.data(), mu.data() + d);
  const auto& vals = solver.eigenvalues();
  const auto& vecs = solver.eigenvectors();
  double total = 0.0;
  for (Eigen::Index k = static_cast<Eigen::Index>(d); k-- > 0;) {
    m.eigenvalues.push_back(std::max(vals(k), 0.0));
    std::vector<double> dir(d);
    for (std::size_t j = 0; j < d; ++j) dir[j] = vecs(static_cast<Eigen::Index>(j), k);
    // Sign convention: largest-magnitude entry positive.
    const auto big = std::max_element(dir.begin(), dir.end(),
                                      [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*big < 0)
      for (auto& v : dir) v = -v;
    m.directions.push_back(std::move(dir));
    total += m.eigenvalues.back();
  }
  const double floor = kRankTolerance * std::max(total, 1.0);
  for (double v : m.eigenvalues) {
    m.explained.push_back(total > 0.0 ? v / total : 0.0);
    if (v > floor) ++m.rank;
  }
  m.rank_deficient = m.rank < components;
  return m;
}

std::vector<double> PcaModel::project(std::span<const double> x, std::size_t components) const {
  if (x.size() != mean.size()) throw ShapeError("pca projection input has the wrong dimension");
  std::vector<double> out(components, 0.0);
  for (std::size_t k = 0; k < components; ++k)
    for (std::size_t j = 0; j < x.size(); ++j) out[k] += (x[j] - mean[j]) * directions.at(k)[j];
  return out;
}

std::vector<double> PcaModel::reconstruct(std::span<const double> x, std::size_t components) const {
  const auto z = project(x, components);
  std::vector<double> out = mean;
  for (std::size_t k = 0; k < components; ++k)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += z[k] * directions[k][j];
  return out;
}

// ---- Statistics ------------------------------------------------------------------

Mad mad(std::span<const AffectVector> series) {
  if (series.size() < 2) throw InvalidArgument("mad needs at least two entries");
  Mad m;
  for (std::size_t i = 1; i < series.size(); ++i) {
    m.valence += std::abs(series[i].valence - series[i - 1].valence);
    m.arousal += std::abs(series[i].arousal - series[i - 1].arousal);
  }
  const auto n = static_cast<double>(series.size() - 1);
  m.valence /= n;
  m.arousal /= n;
  return m;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("welch test needs at least two values per sample");
  auto moments = [](std::span<const double> x) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  WelchResult r;
  if (sa + sb == 0.0) {
    r.t = ma == mb ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
    r.df = na + nb - 2.0;
    r.p = ma == mb ? 1.0 : 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.p = std::min(1.0, r.p);
  return r;
}

std::array<double, 4> expression_frequency(std::span<const ExpressionLabel> labels) {
  if (labels.empty()) throw InvalidArgument("expression frequency window is empty");
  std::array<double, 4> f{};
  for (auto l : labels) f.at(static_cast<std::size_t>(l)) += 1.0;
  for (auto& v : f) v /= static_cast<double>(labels.size());
  return f;
}

double silhouette(const Samples& points, std::span<const int> labels) {
  if (points.size() != labels.size()) throw ShapeError("silhouette labels do not match the points");
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw InvalidArgument("silhouette needs at least two clusters");
  std::vector<int> ids;
  for (const auto& [l, n] : sizes) ids.push_back(l);
  const std::size_t n = points.size();
  double total = 0.0;
  std::map<int, double> sums;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    for (int id : ids) sums[id] = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0.0;
      for (std::size_t k = 0; k < points[i].size(); ++k) {
        const double t = points[i][k] - points[j][k];
        d += t * t;
      }
      sums[labels[j]] += std::sqrt(d);
    }
    const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int id : ids)
      if (id != labels[i]) b = std::min(b, sums[id] / static_cast<double>(sizes[id]));
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

// ---- CSV -------------------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto c = line.find(',', start);
    out.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
    if (c == std::string::npos) break;
    start = c + 1;
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CsvTable CsvTable::read(const std::filesystem::path& path) { return parse(slurp(path), path.string()); }

CsvTable CsvTable::parse(const std::string& text, const std::string& source) {
  CsvTable t;
  t.source_ = source;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (header) {
      t.header_ = std::move(cells);
      header = false;
    } else {
      if (cells.size() != t.header_.size())
        throw IoError(source + ": row " + std::to_string(t.cells_.size() + 1) + " has " +
                      std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header_.size()));
      t.cells_.push_back(std::move(cells));
    }
  }
  if (header) throw IoError(source + ": missing header row");
  return t;
}

bool CsvTable::has(const std::string& column) const {
  return std::find(header_.begin(), header_.end(), column) != header_.end();
}

std::size_t CsvTable::index(const std::string& column) const {
  const auto it = std::find(header_.begin(), header_.end(), column);
  if (it == header_.end()) throw IoError(source_ + ": missing column '" + column + "'");
  return static_cast<std::size_t>(it - header_.begin());
}

const std::string& CsvTable::text(std::size_t row, const std::string& column) const {
  return cells_.at(row).at(index(column));
}

double CsvTable::number(std::size_t row, const std::string& column) const {
  const std::string& s = text(row, column);
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw IoError(source_ + ": column '" + column + "' row " + std::to_string(row + 1) + " is not numeric");
  return v;
}

std::vector<double> CsvTable::numbers(const std::string& column) const {
  index(column);
  std::vector<double> out;
  out.reserve(cells_.size());
  for (std::size_t r = 0; r < cells_.size(); ++r) out.push_back(number(r, column));
  return out;
}

// ---- Runs --------------------------------------------------------------------------

namespace {

std::vector<AffectVector> interoception_of(const CsvTable& t) {
  const auto v = t.numbers("valence");
  const auto a = t.numbers("arousal");
  std::vector<AffectVector> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back({v[i], a[i]});
  return out;
}

}  // namespace

RunSummary load_run(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("run directory not found: " + dir.string());
  RunSummary r;
  r.name = dir.filename().string();
  if (r.name.empty()) r.name = dir.parent_path().filename().string();
  {
    std::istringstream cfg(slurp(dir / "config.txt"));
    std::string line;
    while (std::getline(cfg, line)) {
      const auto h = line.find('#');
      if (h != std::string::npos) line = line.substr(0, h);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t") + 1);
        return s;
      };
      r.config[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
  }
  const CsvTable log = CsvTable::read(dir / "runlog.csv");
  r.reward = log.numbers("reward");
  r.pred_loss = log.numbers("pred_loss");
  r.interoception = interoception_of(log);
  const std::size_t ec = log.index("expression");
  for (std::size_t i = 0; i < log.rows(); ++i) r.expressions.push_back(parse_expression(log.text(i, log.header()[ec])));
  if (std::filesystem::exists(dir / "eval.csv")) r.eval_interoception = interoception_of(CsvTable::read(dir / "eval.csv"));
  const CsvTable act = CsvTable::read(dir / "activations.csv");
  act.index("expression");
  std::vector<std::size_t> hcols;
  for (std::size_t c = 0; c < act.header().size(); ++c)
    if (act.header()[c].size() > 1 && act.header()[c][0] == 'h') hcols.push_back(c);
  if (hcols.empty()) throw IoError((dir / "activations.csv").string() + ": missing column 'h0'");
  for (std::size_t i = 0; i < act.rows(); ++i) {
    std::vector<double> v;
    for (auto c : hcols) v.push_back(act.number(i, act.header()[c]));
    r.activations.push_back(std::move(v));
    r.activation_labels.push_back(parse_expression(act.text(i, "expression")));
  }
  return r;
}

std::vector<BandResult> band_analysis(const RunSummary& run, std::size_t bands, std::vector<Samples>* projections) {
  if (bands == 0) throw InvalidArgument("band count must be positive");
  const std::size_t n = run.activations.size();
  if (n < 3 * bands) throw InvalidArgument("too few activation rows for " + std::to_string(bands) + " bands");
  std::vector<BandResult> out;
  if (projections) projections->clear();
  for (std::size_t b = 0; b < bands; ++b) {
    const std::size_t lo = b * n / bands, hi = (b + 1) * n / bands;
    Samples data(run.activations.begin() + static_cast<std::ptrdiff_t>(lo),
                 run.activations.begin() + static_cast<std::ptrdiff_t>(hi));
    BandResult r;
    r.band = b;
    r.first_epoch = lo + 1;
    r.last_epoch = hi;
    const PcaModel pca = fit_pca(data, 2);
    r.explained = {pca.explained[0], pca.explained[1]};
    r.rank_deficient = pca.rank_deficient;
    Samples pts;
    std::vector<int> labels;
    std::vector<ExpressionLabel> el;
    for (std::size_t i = lo; i < hi; ++i) {
      pts.push_back(pca.project(run.activations[i], 2));
      labels.push_back(static_cast<int>(run.activation_labels[i]));
      el.push_back(run.activation_labels[i]);
    }
    std::set<int> distinct(labels.begin(), labels.end());
    r.silhouette = distinct.size() >= 2 ? silhouette(pts, labels) : std::numeric_limits<double>::quiet_NaN();
    r.frequency = expression_frequency(el);
    if (projections) projections->push_back(std::move(pts));
    out.push_back(r);
  }
  return out;
}

MadComparison compare_mad(const std::vector<const RunSummary*>& with_layer,
                          const std::vector<const RunSummary*>& without_layer) {
  auto pool = [](const std::vector<const RunSummary*>& runs, std::vector<double>& dv, std::vector<double>& da) {
    for (const auto* r : runs) {
      const auto& s = r->eval_interoception.empty() ? r->interoception : r->eval_interoception;
      for (std::size_t i = 1; i < s.size(); ++i) {
        dv.push_back(std::abs(s[i].valence - s[i - 1].valence));
        da.push_back(std::abs(s[i].arousal - s[i - 1].arousal));
      }
    }
  };
  std::vector<double> wv, wa, ov, oa;
  pool(with_layer, wv, wa);
  pool(without_layer, ov, oa);
  if (wv.size() < 2 || ov.size() < 2) throw InvalidArgument("mad comparison needs runs in both groups");
  auto mean = [](const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); };
  MadComparison c;
  c.with_layer = {mean(wv), mean(wa)};
  c.without_layer = {mean(ov), mean(oa)};
  c.valence = welch_t_test(wv, ov);
  c.arousal = welch_t_test(wa, oa);
  c.n_with = wv.size();
  c.n_without = ov.size();
  return c;
}

// ---- Reports ---------------------------------------------------------------------------

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_file(const std::filesystem::path& p, const std::string& s, ReportOutcome& out) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + p.string());
  f << s;
  out.files.push_back(p.string());
}

std::vector<double> binned(const std::vector<double>& v, std::size_t bins, std::vector<double>& x) {
  std::vector<double> out;
  x.clear();
  const std::size_t n = v.size();
  if (n == 0) return out;
  bins = std::min(bins, n);
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
    double s = 0.0;
    std::size_t k = 0;
    for (std::size_t i = lo; i < hi; ++i)
      if (std::isfinite(v[i])) {
        s += v[i];
        ++k;
      }
    out.push_back(k ? s / static_cast<double>(k) : std::numeric_limits<double>::quiet_NaN());
    x.push_back(static_cast<double>(hi));
  }
  return out;
}

}  // namespace

ReportOutcome emit_reports(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out_dir,
                           std::size_t bands) {
  if (run_dirs.empty()) throw InvalidArgument("no run directories given");
  std::vector<RunSummary> runs;
  for (const auto& d : run_dirs) runs.push_back(load_run(d));
  std::filesystem::create_directories(out_dir);
  ReportOutcome out;

  std::vector<svg::Series> reward_series, loss_series;
  std::string curves_csv = "run,epoch,mean_reward,mean_pred_loss\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::vector<double> x, x2;
    const auto r = binned(runs[i].reward, 100, x);
    const auto l = binned(runs[i].pred_loss, 100, x2);
    reward_series.push_back({runs[i].name, x, r, svg::palette(i)});
    loss_series.push_back({runs[i].name, x2, l, svg::palette(i)});
    for (std::size_t k = 0; k < x.size(); ++k)
      curves_csv += runs[i].name + "," + g17(x[k]) + "," + g17(r[k]) + "," + g17(l[k]) + "\n";
  }
  write_file(out_dir / "curves.csv", curves_csv, out);
  write_file(out_dir / "curves.svg",
             svg::stack({svg::line_chart("Reward", "epoch", "mean reward", reward_series),
                         svg::line_chart("Prediction loss", "epoch", "mean loss", loss_series)},
                        640, {360, 360}),
             out);

  std::string freq_csv = "run,band,first_epoch,last_epoch,pleasure,anger,sadness,neutral\n";
  std::string sil_csv = "run,band,first_epoch,last_epoch,silhouette,explained_pc1,explained_pc2,rank_deficient\n";
  const bool nested = runs.size() > 1;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::vector<Samples> proj;
    const auto res = band_analysis(runs[i], bands, &proj);
    std::filesystem::path dir = out_dir;
    if (nested) {
      dir = out_dir / (std::to_string(i) + "_" + runs[i].name);
      std::filesystem::create_directories(dir);
    }
    const std::size_t n = runs[i].activations.size();
    for (const auto& b : res) {
      freq_csv += runs[i].name + "," + std::to_string(b.band) + "," + std::to_string(b.first_epoch) + "," +
                  std::to_string(b.last_epoch);
      for (double f : b.frequency) freq_csv += "," + g17(f);
      freq_csv += "\n";
      sil_csv += runs[i].name + "," + std::to_string(b.band) + "," + std::to_string(b.first_epoch) + "," +
                 std::to_string(b.last_epoch) + "," + g17(b.silhouette) + "," + g17(b.explained[0]) + "," +
                 g17(b.explained[1]) + "," + (b.rank_deficient ? "1" : "0") + "\n";
      if (b.rank_deficient) out.notices.push_back(runs[i].name + " band " + std::to_string(b.band) + ": rank-deficient activations");
      std::vector<svg::ScatterGroup> groups(4);
      for (std::size_t e = 0; e < 4; ++e)
        groups[e] = {expression_name(static_cast<ExpressionLabel>(e)), {}, {}, svg::palette(e)};
      const std::size_t lo = b.band * n / bands;
      for (std::size_t k = 0; k < proj[b.band].size(); ++k) {
        auto& g = groups[static_cast<std::size_t>(runs[i].activation_labels[lo + k])];
        g.x.push_back(proj[b.band][k][0]);
        g.y.push_back(proj[b.band][k][1]);
      }
      write_file(dir / ("pca_band_" + std::to_string(b.band) + ".svg"),
                 svg::scatter_plot(runs[i].name + " epochs " + std::to_string(b.first_epoch) + "-" +
                                       std::to_string(b.last_epoch),
                                   groups),
                 out);
    }
    if (!res.empty()) {
      std::vector<svg::Bar> bars;
      for (std::size_t e = 0; e < 4; ++e)
        bars.push_back({expression_name(static_cast<ExpressionLabel>(e)), res.back().frequency[e], svg::palette(e)});
      write_file(dir / "freq.svg", svg::bar_chart(runs[i].name + " final band expression share", bars), out);
    }
  }
  write_file(out_dir / "freq.csv", freq_csv, out);
  write_file(out_dir / "silhouette.csv", sil_csv, out);

  std::vector<const RunSummary*> on, off;
  std::string mad_csv = "run,condition,second_layer,seed,source,n,mad_valence,mad_arousal\n";
  for (const auto& r : runs) {
    const bool eval = !r.eval_interoception.empty();
    const auto& s = eval ? r.eval_interoception : r.interoception;
    if (s.size() < 2) continue;
    const Mad m = mad(s);
    auto get = [&](const char* k) { auto it = r.config.find(k); return it == r.config.end() ? std::string() : it->second; };
    mad_csv += r.name + "," + get("run.condition") + "," + get("run.second_layer") + "," + get("run.seed") + "," +
               (eval ? "eval" : "train") + "," + std::to_string(s.size()) + "," + g17(m.valence) + "," +
               g17(m.arousal) + "\n";
    (get("run.second_layer") == "on" ? on : off).push_back(&r);
  }
  if (!on.empty() && !off.empty()) {
    const auto c = compare_mad(on, off);
    mad_csv += "\ncomponent,mad_with_layer,mad_without_layer,n_with,n_without,t,df,p\n";
    mad_csv += "valence," + g17(c.with_layer.valence) + "," + g17(c.without_layer.valence) + "," +
               std::to_string(c.n_with) + "," + std::to_string(c.n_without) + "," + g17(c.valence.t) + "," +
               g17(c.valence.df) + "," + g17(c.valence.p) + "\n";
    mad_csv += "arousal," + g17(c.with_layer.arousal) + "," + g17(c.without_layer.arousal) + "," +
               std::to_string(c.n_with) + "," + std::to_string(c.n_without) + "," + g17(c.arousal.t) + "," +
               g17(c.arousal.df) + "," + g17(c.arousal.p) + "\n";
  } else {
    out.notices.push_back("MAD comparison skipped: needs runs with the second layer both on and off");
  }
  write_file(out_dir / "mad.csv", mad_csv, out);
  return out;
}

}  // namespace emo
