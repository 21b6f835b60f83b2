#pragma once

#include "neuroair/core.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace neuroair::ica {

enum class RankPolicy {
  kStrict,  // rank-deficient data is an error
  kReduce,  // keep the numerically nonzero principal subspace (e.g. after CAR)
};

struct FitOptions {
  std::uint64_t seed = 0;
  int max_iter = 1000;
  double tol = 1e-6;
  RankPolicy rank = RankPolicy::kStrict;
  double rank_tol = 1e-10;      // eigenvalue floor relative to the largest
  std::size_t fit_stride = 1;   // fit on every n-th sample
};

/// X = A U with U = W (X - mean). Components are sorted by descending
/// variance of their back-projection ||A[:,k]|| U[k,:].
struct IcaModel {
  Matrix mixing;     // channels x components
  Matrix unmixing;   // components x channels
  Matrix whitener;   // components x channels (principal axes scaled to unit variance)
  Vector mean;       // per channel
  std::vector<std::size_t> component_order;  // pre-sort index of each sorted component
  std::vector<bool> artifact_flags;
  std::vector<std::string> channel_names;
  std::uint64_t seed = 0;
  int iterations = 0;

  std::size_t channels() const { return static_cast<std::size_t>(mixing.rows()); }
  std::size_t components() const { return static_cast<std::size_t>(mixing.cols()); }
};

/// FastICA, logcosh contrast, symmetric decorrelation. Convergence is
/// max_k | |<w_k_new, w_k_old>| - 1 | < tol.
IcaModel fit_ica(const Recording& rec, const FitOptions& options = {});

/// U = W (X - mean) as a pseudo-recording with channels IC01, IC02, ...
Recording components(const IcaModel& model, const Recording& rec);

/// V = Â U + mean, where Â zeroes the mixing columns of flagged components.
Recording remove_artifacts(const IcaModel& model, const Recording& rec,
                           const std::vector<bool>& flags);

struct ArtifactThresholds {
  double low_cut_hz = 3.0;
  double high_cut_hz = 32.0;
  double blink_low_fraction = 0.6;       // share of power below low_cut_hz
  double blink_frontal_weight = 0.5;     // share of squared topography on frontal channels
  double muscle_high_fraction = 0.5;     // share of power above high_cut_hz
  double frontal_min_anterior = 0.5;
  double welch_segment_s = 4.0;
};

struct ComponentFeatures {
  double low_fraction = 0.0;
  double high_fraction = 0.0;
  double frontal_weight = 0.0;
};

std::vector<ComponentFeatures> component_features(const IcaModel& model, const Recording& rec,
                                                  const ArtifactThresholds& thresholds = {});

/// Spectral/topographic stand-in for a learned component classifier. An
/// explicit exclusion list replaces the heuristic entirely.
std::vector<bool> flag_artifacts_heuristic(
    const IcaModel& model, const Recording& rec, const ArtifactThresholds& thresholds = {},
    const std::optional<std::vector<std::size_t>>& exclusion = std::nullopt);

/// First k variance-ordered components.
EpochSet component_subset(const EpochSet& components, std::size_t k);

void save_model(const std::filesystem::path& path, const IcaModel& model);
IcaModel load_model(const std::filesystem::path& path);

}  // namespace neuroair::ica
