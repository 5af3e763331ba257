#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "emo/core/affect.hpp"
#include "emo/core/environment.hpp"

namespace emo {

using Samples = std::vector<std::vector<double>>;

struct PcaModel {
  std::vector<double> mean;
  Samples directions;                // all eigenvectors, by decreasing eigenvalue
  std::vector<double> eigenvalues;   // sample covariance (n - 1), clamped at 0
  std::vector<double> explained;     // eigenvalue / total variance
  std::size_t rank = 0;              // eigenvalues above the noise floor
  bool rank_deficient = false;       // rank below the requested component count

  std::vector<double> project(std::span<const double> x, std::size_t components = 2) const;
  std::vector<double> reconstruct(std::span<const double> x, std::size_t components) const;
};

// Needs at least 3 samples of dimension >= 2.
PcaModel fit_pca(const Samples& data, std::size_t components = 2);

struct Mad {
  double valence = 0.0;
  double arousal = 0.0;
};

// Mean absolute successive difference per component; needs >= 2 entries.
Mad mad(std::span<const AffectVector> series);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Two-sided Welch t test. Both variances zero: p = 1 when the means agree,
// p = 0 otherwise.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Share of each expression label, indexed by ExpressionLabel; sums to 1.
std::array<double, 4> expression_frequency(std::span<const ExpressionLabel> labels);

// Mean silhouette over all points using Euclidean distance. Points alone in
// their cluster score 0. Needs >= 2 distinct labels.
double silhouette(const Samples& points, std::span<const int> labels);

/// Column-addressable CSV (header row + numeric or text cells).
class CsvTable {
 public:
  static CsvTable read(const std::filesystem::path& path);
  static CsvTable parse(const std::string& text, const std::string& source = "csv");

  std::size_t rows() const { return cells_.size(); }
  const std::vector<std::string>& header() const { return header_; }
  bool has(const std::string& column) const;
  // Throws Error naming the column when absent.
  std::size_t index(const std::string& column) const;
  const std::string& text(std::size_t row, const std::string& column) const;
  double number(std::size_t row, const std::string& column) const;  // NaN when empty
  std::vector<double> numbers(const std::string& column) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> cells_;
};

struct RunSummary {
  std::string name;
  std::map<std::string, std::string> config;
  std::vector<double> reward, pred_loss;
  std::vector<AffectVector> interoception;
  std::vector<AffectVector> eval_interoception;  // empty without an evaluation phase
  std::vector<ExpressionLabel> expressions;
  Samples activations;
  std::vector<ExpressionLabel> activation_labels;
};

RunSummary load_run(const std::filesystem::path& dir);

struct BandResult {
  std::size_t band = 0;
  std::size_t first_epoch = 0, last_epoch = 0;
  double silhouette = 0.0;
  std::array<double, 2> explained{};
  bool rank_deficient = false;
  std::array<double, 4> frequency{};
};

// Splits the activation dump into equal bands; PCA is fitted per band.
std::vector<BandResult> band_analysis(const RunSummary& run, std::size_t bands,
                                      std::vector<Samples>* projections = nullptr);

struct MadComparison {
  Mad with_layer, without_layer;
  WelchResult valence, arousal;
  std::size_t n_with = 0, n_without = 0;
};

// Pools |a(t+1) - a(t)| over the runs of each group (evaluation phase when present).
MadComparison compare_mad(const std::vector<const RunSummary*>& with_layer,
                          const std::vector<const RunSummary*>& without_layer);

struct ReportOutcome {
  std::vector<std::string> files;
  std::vector<std::string> notices;
};

ReportOutcome emit_reports(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out_dir,
                           std::size_t bands = 5);

}  // namespace emo
