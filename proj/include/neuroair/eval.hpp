#pragma once

#include "neuroair/core.hpp"
#include "neuroair/nets.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace neuroair::eval {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct FoldPlan {
  std::vector<Fold> folds;
};

/// Stratified k-fold split. Every class count must be divisible by k; within
/// each fold, `val_fraction` of each class's remaining trials is held out
/// for validation.
FoldPlan make_folds(std::span<const int> labels, int k, std::uint64_t seed, double val_fraction = 0.2);

/// P(T > t) for Student's t with `df` degrees of freedom, by adaptive
/// quadrature of the density.
double student_t_upper_tail(double t, int df);

struct TTest {
  double t = 0.0;
  int df = 0;
  double p = 0.5;  // one-tailed, H1: mean(a - b) > 0
  bool degenerate = false;  // zero variance with nonzero mean difference
};

TTest paired_t_one_tailed(std::span<const double> a, std::span<const double> b);

enum class Status { kOk, kFailed };

struct ResultRecord {
  std::string subject;
  std::string feature;
  std::string band;
  std::string model;
  int order = 0;  // harmonic order, or component count for component sweeps
  int fold = 0;
  double accuracy = 0.0;
  std::size_t n_test = 0;
  Status status = Status::kOk;
  std::string message;

  friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

/// Prepared features for one (subject, feature, band, order) combination.
struct Dataset {
  std::string subject;
  std::string feature;
  std::string band;
  int order = 0;
  std::shared_ptr<const EpochSet> epochs;
};

struct SweepConfig {
  int folds = 10;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  nets::TrainConfig train;
  unsigned workers = 0;  // 0: worker_count()
  std::function<void(const ResultRecord&)> progress;
};

/// One record per (dataset, model, fold). Jobs run on a worker pool; a job
/// that throws becomes a failed record and the sweep continues. Output order
/// is (dataset, model, fold) regardless of scheduling.
std::vector<ResultRecord> run_sweep(const std::vector<Dataset>& datasets,
                                    const std::vector<std::string>& models, const SweepConfig& cfg);

/// Accuracy versus the number of leading ICA components kept. Records carry
/// the component count in `order`.
std::vector<ResultRecord> component_sweep(const Dataset& ica, std::span<const int> k_values,
                                          const std::string& model, const SweepConfig& cfg);

struct CellKey {
  std::string feature;
  std::string band;
  std::string model;
  int order = 0;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct CellSummary {
  CellKey key;
  double mean = 0.0;  // mean over subjects of per-subject fold means
  std::vector<std::string> subjects;
  std::vector<double> subject_means;
  std::size_t folds_ok = 0;
  std::size_t folds_failed = 0;
};

/// Two-stage average; failed folds are excluded and counted.
std::vector<CellSummary> aggregate(const std::vector<ResultRecord>& records);

/// Display order of bands in the accuracy grid.
const std::vector<std::string>& band_columns();
std::string band_title(const std::string& band);
std::string model_title(const std::string& model);
std::string feature_title(const std::string& feature);

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path);

/// Models x bands grid of mean accuracies (percent) for one feature/order,
/// followed by a footer counting failed folds.
std::string render_accuracy_table(const std::vector<CellSummary>& cells, const std::string& feature,
                                  int order = 0);

/// Mean accuracy against component count for one (feature, band, model).
std::string render_component_curve(const std::vector<CellSummary>& cells, const std::string& feature,
                                   const std::string& band, const std::string& model);

enum class Axis { kModel, kFeature, kBand };

struct PValueMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> p;  // NaN on the diagonal and for missing pairs
};

/// Pairwise paired one-tailed tests across subjects. Entry (i, j) tests the
/// observed direction of the difference, so the matrix is symmetric.
PValueMatrix pvalue_matrix(const std::vector<CellSummary>& cells, Axis axis, const CellKey& fixed);
std::string render_pvalue_matrix(const PValueMatrix& m, double alpha = 0.05);

/// Writes results.csv, accuracy tables per feature/order and a summary text.
void emit_report(const std::filesystem::path& dir, const std::vector<ResultRecord>& records);

}  // namespace neuroair::eval
