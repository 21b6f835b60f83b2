#pragma once

#include "neuroair/core.hpp"
#include "neuroair/eval.hpp"
#include "neuroair/ica.hpp"
#include "neuroair/nets.hpp"
#include "neuroair/source.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace neuroair::pipeline {

inline constexpr const char* kVersion = "0.1.0";

/// Features: eeg (artifact-cleaned electrodes), ica (all components),
/// scout (sLORETA region averages), shd, hhd (harmonic coefficients).
const std::vector<std::string>& feature_names();

struct SubjectInput {
  std::string name;
  std::vector<std::filesystem::path> inputs;  // continuous NAIR files, merged in order
};

struct IcaSettings {
  int max_iter = 1000;
  double tol = 1e-6;
  std::size_t fit_stride = 1;
  std::optional<std::vector<std::size_t>> exclude;  // replaces the heuristic flags
  ica::ArtifactThresholds thresholds;
};

struct PipelineConfig {
  std::vector<SubjectInput> subjects;
  std::vector<std::string> features{"ica"};
  std::vector<std::string> bands{"delta_theta"};
  std::vector<std::string> models{"eegnet"};
  std::optional<int> order;  // required for shd / hhd
  std::optional<std::filesystem::path> leadfield;
  std::optional<std::filesystem::path> atlas;
  std::optional<double> sloreta_lambda;
  double sloreta_snr = 3.0;
  std::string broadband = "broadband";
  IcaSettings ica;
  TimeWindow window{-1.0, 2.0};
  ZScope zscope = ZScope::kPerTrialChannel;
  nets::TrainConfig train;
  int folds = 10;
  double val_fraction = 0.2;
  unsigned workers = 0;
  std::filesystem::path out_dir = "neuroair_out";
  std::uint64_t seed = 0;
  bool persist_intermediates = true;
  std::function<void(const eval::ResultRecord&)> progress;  // not serialized

  /// Throws kConfig with the offending key path, e.g. "subjects[0].inputs[1]".
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Concatenates sessions in time; annotations are shifted accordingly.
Recording merge_recordings(std::span<const Recording> sessions);

/// CAR followed by the zero-phase broadband filter.
Recording preprocess(const Recording& merged, const std::string& broadband = "broadband");

struct IcaStage {
  ica::IcaModel model;
  std::vector<bool> flags;
};

IcaStage run_ica(const Recording& broadband, const IcaSettings& settings, std::uint64_t seed);

/// Loaded lead field, atlas and inverse for the scout feature.
struct SourceModel {
  source::LeadField leadfield;
  source::Atlas atlas;
  source::InverseOperator inverse;
};

SourceModel load_source_model(const std::filesystem::path& leadfield, const std::filesystem::path& atlas,
                              std::optional<double> lambda, double snr);

struct FeatureRequest {
  std::string feature;
  std::string band;
  std::optional<int> order;
  TimeWindow window{-1.0, 2.0};
  ZScope zscope = ZScope::kPerTrialChannel;
};

/// Continuous feature signal (V or U) on broadband data, then band filter,
/// epoch, spatial transform (scout / harmonics) and z-normalization.
EpochSet feature_epochs(const Recording& broadband, const IcaStage& ica, const FeatureRequest& req,
                        const SourceModel* source = nullptr);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_file(const std::filesystem::path& path);
/// Hash of the float32 payload plus the shape.
std::string content_hash(const Matrix& data);
std::string content_hash(const EpochSet& epochs);

/// JSON manifest of a run: versions, config, and one entry per artifact with
/// its content hash. Written after every stage so a failure leaves a partial
/// record behind.
class Manifest {
 public:
  Manifest(std::filesystem::path path, nlohmann::json config, std::uint64_t seed);

  void begin_stage(const std::string& stage);
  void add_artifact(const std::string& name, const std::string& hash,
                    const std::optional<std::filesystem::path>& file, std::vector<std::size_t> shape);
  void end_stage();
  void fail_stage(const std::string& message);
  void finish();

  const nlohmann::json& json() const { return doc_; }
  /// Artifact name -> hash, the reproducibility fingerprint of a run.
  std::vector<std::pair<std::string, std::string>> hashes() const;

 private:
  void flush() const;

  std::filesystem::path path_;
  nlohmann::json doc_;
};

nlohmann::json version_info();

struct PipelineResult {
  std::vector<eval::ResultRecord> records;
  std::filesystem::path manifest;
  std::filesystem::path results_csv;
};

/// merge -> CAR -> broadband filter -> ICA -> features per band -> epoch ->
/// z-norm -> cross-validated training -> report, per subject. Stage failures
/// throw kPipelineStage naming the stage after the manifest is written.
PipelineResult run_pipeline(const PipelineConfig& cfg);

}  // namespace neuroair::pipeline
