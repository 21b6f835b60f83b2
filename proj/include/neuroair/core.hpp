#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace neuroair {

/// Channels are rows, samples are columns. Row-major keeps a channel's
/// time course contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr int kNumClasses = 26;
inline constexpr double kDefaultHeadRadius = 0.09;  // meters; harmonics only use angles

/// One of the 26 uppercase letters.
class ClassLabel {
 public:
  static ClassLabel from_index(int index);
  static ClassLabel from_letter(char letter);

  int index() const noexcept { return index_; }
  char letter() const noexcept { return static_cast<char>('A' + index_); }

  friend bool operator==(ClassLabel, ClassLabel) = default;

 private:
  explicit ClassLabel(int index) : index_(index) {}
  int index_;
};

struct ElectrodePosition {
  double theta = 0.0;  // elevation from vertex, [0, pi]
  double phi = 0.0;    // azimuth, [0, 2pi)
  double radius = kDefaultHeadRadius;

  friend bool operator==(const ElectrodePosition&, const ElectrodePosition&) = default;
};

/// Electrode labels and spherical positions. Azimuth zero points at the
/// nose and increases toward the left ear; the convention travels with the
/// data since montage files carry explicit angles.
class Montage {
 public:
  Montage(std::vector<std::string> names, std::vector<ElectrodePosition> positions);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<ElectrodePosition>& positions() const noexcept { return positions_; }
  const ElectrodePosition& position(std::size_t i) const { return positions_.at(i); }

  /// Unit vector (x anterior, y left, z up).
  Eigen::Vector3d unit_vector(std::size_t i) const;

  /// Channels whose anterior direction cosine is at least `min_anterior`.
  std::vector<std::size_t> frontal_channels(double min_anterior = 0.5) const;

  std::optional<std::size_t> index_of(const std::string& name) const;

  friend bool operator==(const Montage&, const Montage&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<ElectrodePosition> positions_;
};

/// 31-electrode 10-20 layout (32-channel actiCAP set without FT9/FT10, plus FCz).
Montage standard_montage_31();

/// Looks `names` up in the built-in 10-20 table; throws on unknown labels.
Montage montage_from_names(const std::vector<std::string>& names);

struct Annotation {
  std::int64_t sample = 0;
  int label = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Continuous multichannel signal. Electrode recordings carry a montage;
/// derived signals (ICA components, regions) carry names only.
class Recording {
 public:
  Recording(Matrix data, double fs, std::vector<std::string> channel_names,
            std::optional<Montage> montage = std::nullopt,
            std::vector<Annotation> annotations = {});
  Recording(Matrix data, double fs, Montage montage, std::vector<Annotation> annotations = {});

  const Matrix& data() const noexcept { return data_; }
  double fs() const noexcept { return fs_; }
  std::size_t channels() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t samples() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  const std::vector<std::string>& channel_names() const noexcept { return names_; }
  const std::optional<Montage>& montage() const noexcept { return montage_; }
  const std::vector<Annotation>& annotations() const noexcept { return annotations_; }

  /// Same metadata, new samples (row count must match).
  Recording with_data(Matrix data) const;
  /// New channel set (names replace montage), same timing and annotations.
  Recording with_channels(Matrix data, std::vector<std::string> names) const;

 private:
  Matrix data_;
  double fs_;
  std::vector<std::string> names_;
  std::optional<Montage> montage_;
  std::vector<Annotation> annotations_;
};

struct TimeWindow {
  double start_s = -1.0;
  double end_s = 2.0;

  std::size_t length(double fs) const;
};

enum class SampleUnit { kRaw, kZScored };

/// Trials x channels x samples, stored contiguously in that order.
class EpochSet {
 public:
  using TrialMap = Eigen::Map<const Matrix>;
  using MutableTrialMap = Eigen::Map<Matrix>;

  EpochSet(std::size_t trials, std::size_t channels, std::size_t samples, std::vector<int> labels,
           double fs, TimeWindow window, std::vector<std::string> channel_names,
           std::optional<Montage> montage = std::nullopt, SampleUnit unit = SampleUnit::kRaw);

  std::size_t trials() const noexcept { return trials_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t samples() const noexcept { return samples_; }
  double fs() const noexcept { return fs_; }
  TimeWindow window() const noexcept { return window_; }
  SampleUnit unit() const noexcept { return unit_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& channel_names() const noexcept { return names_; }
  const std::optional<Montage>& montage() const noexcept { return montage_; }

  TrialMap trial(std::size_t i) const;
  MutableTrialMap trial(std::size_t i);
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  void set_unit(SampleUnit unit) noexcept { unit_ = unit; }

  /// Empty copy with a new channel dimension; labels and timing are kept.
  EpochSet reshaped(std::size_t channels, std::vector<std::string> names,
                    std::optional<Montage> montage = std::nullopt) const;
  EpochSet subset(std::span<const std::size_t> trial_indices) const;

 private:
  std::size_t trials_;
  std::size_t channels_;
  std::size_t samples_;
  std::vector<double> values_;
  std::vector<int> labels_;
  double fs_;
  TimeWindow window_;
  std::vector<std::string> names_;
  std::optional<Montage> montage_;
  SampleUnit unit_;
};

Recording common_average_reference(const Recording& rec);

enum class PadMode { kZeroAtEnd };

struct EpochResult {
  EpochSet epochs;
  std::size_t skipped = 0;
};

/// One trial per annotation. Trials running past the end of the recording
/// are zero padded at the tail; annotations without enough history are
/// skipped and counted.
EpochResult epoch(const Recording& rec, TimeWindow window, PadMode pad = PadMode::kZeroAtEnd);

enum class ZScope {
  kPerTrialChannel,    // statistics of each (trial, channel) row
  kPerChannelDataset,  // statistics of each channel pooled over trials
};

/// Zero mean, unit (population) variance. Constant rows become zero.
EpochSet znormalize(const EpochSet& epochs, ZScope scope = ZScope::kPerTrialChannel);

}  // namespace neuroair
