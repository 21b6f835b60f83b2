#pragma once

#include "neuroair/core.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace neuroair::synth {

struct SignatureSpec {
  std::size_t sources = 5;       // neural sources carrying class information
  double lo_hz = 1.0;
  double hi_hz = 7.0;
  int tones = 3;                 // sinusoids per (class, source)
  double amplitude = 1.0;        // RMS of a signature over its Hann window
  double duration_s = 0.5;       // starts at the trial onset
  std::uint64_t seed = 0x5157;   // fixed across datasets: class identity stays put
};

struct ArtifactSpec {
  bool blink = true;
  double blink_amplitude = 9.0;
  double blink_rate_hz = 0.25;
  double blink_width_s = 0.4;
  bool muscle = true;
  double muscle_amplitude = 4.0;
  double muscle_rate_hz = 0.4;
  double muscle_burst_s = 0.5;
  double muscle_lo_hz = 40.0;
  double muscle_hi_hz = 90.0;
};

struct SynthConfig {
  std::size_t channels = 31;
  double fs = 500.0;
  int n_classes = kNumClasses;
  std::size_t trials_per_class = 100;
  std::size_t n_neural_sources = 28;
  // Neural sources are Laplace noise under a slow log-normal amplitude
  // envelope exp(depth * g(t)), g a unit-variance AR(1) with time constant
  // envelope_s. Depth 0 gives stationary white Laplace.
  double envelope_depth = 0.5;
  double envelope_s = 0.5;
  double trial_period_s = 0.6;
  double lead_in_s = 1.0;
  double tail_s = 2.0;
  SignatureSpec signature;
  ArtifactSpec artifacts;
  double noise_sd = 0.1;         // sensor noise
  std::optional<std::uint64_t> mixing_seed;  // default: derived from the generation seed
  double condition_bound = 20.0;
  bool identity_like_mixing = false;  // I + small perturbation; needs sources == channels

  std::size_t n_sources() const;
  std::size_t n_trials() const { return static_cast<std::size_t>(n_classes) * trials_per_class; }
  void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct GroundTruth {
  Matrix mixing;   // channels x sources, the A in X = A S + noise
  Matrix sources;  // sources x samples
  std::vector<std::string> source_names;
  std::vector<std::size_t> signal_sources;
  std::vector<std::size_t> artifact_sources;
  std::optional<std::size_t> blink_source;
  std::optional<std::size_t> muscle_source;
  std::uint64_t seed = 0;
};

struct Synthetic {
  Recording recording;
  GroundTruth truth;
};

/// Continuous recording with one annotation per trial, classes in seeded
/// random order. Samples are rounded to float32 so the result survives a
/// NAIR round trip unchanged.
Synthetic generate(const SynthConfig& cfg, std::uint64_t seed);

/// Mixing, index sets and config; the source series stay out of the JSON.
nlohmann::json truth_to_json(const GroundTruth& truth, const SynthConfig& cfg);
void write_truth(const std::filesystem::path& path, const GroundTruth& truth, const SynthConfig& cfg);

struct Separability {
  double accuracy = 0.0;  // two-fold nearest-centroid accuracy
  double margin = 0.0;    // mean (nearest wrong - true) centroid distance over the noise scale
  bool passed = false;
};

/// Nearest-centroid classification of the signal sources recovered with the
/// true mixing, pinv(A) X, over the signature window.
Separability separability_check(const Synthetic& data, const SynthConfig& cfg, double threshold = 0.99);
Separability separability_check(const SynthConfig& cfg, std::uint64_t seed, double threshold = 0.99);
/// Throws kConfig when the check fails.
void require_separable(const SynthConfig& cfg, std::uint64_t seed, double threshold = 0.99);

}  // namespace neuroair::synth
