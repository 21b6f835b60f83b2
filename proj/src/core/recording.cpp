#include "neuroair/core.hpp"

#include "neuroair/error.hpp"

#include <algorithm>
#include <cmath>

namespace neuroair {

Recording::Recording(Matrix data, double fs, std::vector<std::string> channel_names,
                     std::optional<Montage> montage, std::vector<Annotation> annotations)
    : data_(std::move(data)),
      fs_(fs),
      names_(std::move(channel_names)),
      montage_(std::move(montage)),
      annotations_(std::move(annotations)) {
  require(fs_ > 0.0, ErrorCode::kInvalidArgument, "sampling rate must be positive");
  require(data_.rows() >= 1, ErrorCode::kInvalidArgument, "recording needs at least one channel");
  require(names_.size() == static_cast<std::size_t>(data_.rows()), ErrorCode::kShapeMismatch,
          "channel name count " + std::to_string(names_.size()) + " != data rows " +
              std::to_string(data_.rows()));
  if (montage_) {
    require(montage_->names() == names_, ErrorCode::kShapeMismatch,
            "montage channels do not match recording channels");
  }
  std::int64_t prev = -1;
  for (const auto& a : annotations_) {
    require(a.sample > prev, ErrorCode::kInvalidArgument,
            "annotation indices must be strictly increasing");
    require(a.sample < data_.cols(), ErrorCode::kInvalidArgument,
            "annotation at sample " + std::to_string(a.sample) + " beyond recording end");
    prev = a.sample;
  }
}

Recording::Recording(Matrix data, double fs, Montage montage, std::vector<Annotation> annotations)
    : Recording(std::move(data), fs, montage.names(), montage, std::move(annotations)) {}

Recording Recording::with_data(Matrix data) const {
  require(data.rows() == data_.rows(), ErrorCode::kShapeMismatch,
          "replacement data has a different channel count");
  return Recording(std::move(data), fs_, names_, montage_, annotations_);
}

Recording Recording::with_channels(Matrix data, std::vector<std::string> names) const {
  require(data.cols() == data_.cols(), ErrorCode::kShapeMismatch,
          "replacement data has a different sample count");
  return Recording(std::move(data), fs_, std::move(names), std::nullopt, annotations_);
}

std::size_t TimeWindow::length(double fs) const {
  return static_cast<std::size_t>(std::llround((end_s - start_s) * fs));
}

EpochSet::EpochSet(std::size_t trials, std::size_t channels, std::size_t samples,
                   std::vector<int> labels, double fs, TimeWindow window,
                   std::vector<std::string> channel_names, std::optional<Montage> montage,
                   SampleUnit unit)
    : trials_(trials),
      channels_(channels),
      samples_(samples),
      values_(trials * channels * samples, 0.0),
      labels_(std::move(labels)),
      fs_(fs),
      window_(window),
      names_(std::move(channel_names)),
      montage_(std::move(montage)),
      unit_(unit) {
  require(trials_ > 0, ErrorCode::kInvalidArgument, "epoch set needs at least one trial");
  require(channels_ > 0 && samples_ > 0, ErrorCode::kInvalidArgument, "empty epoch dimensions");
  require(labels_.size() == trials_, ErrorCode::kShapeMismatch, "one label per trial required");
  require(fs_ > 0.0, ErrorCode::kInvalidArgument, "sampling rate must be positive");
  for (int l : labels_) {
    require(l >= 0 && l < kNumClasses, ErrorCode::kInvalidArgument,
            "label out of range: " + std::to_string(l));
  }
  require(names_.size() == channels_, ErrorCode::kShapeMismatch,
          "channel name count does not match channel dimension");
  if (montage_) {
    require(montage_->size() == channels_, ErrorCode::kShapeMismatch,
            "montage size does not match channel dimension");
  }
}

EpochSet::TrialMap EpochSet::trial(std::size_t i) const {
  require(i < trials_, ErrorCode::kInvalidArgument, "trial index out of range");
  return TrialMap(values_.data() + i * channels_ * samples_, static_cast<Eigen::Index>(channels_),
                  static_cast<Eigen::Index>(samples_));
}

EpochSet::MutableTrialMap EpochSet::trial(std::size_t i) {
  require(i < trials_, ErrorCode::kInvalidArgument, "trial index out of range");
  return MutableTrialMap(values_.data() + i * channels_ * samples_,
                         static_cast<Eigen::Index>(channels_), static_cast<Eigen::Index>(samples_));
}

EpochSet EpochSet::reshaped(std::size_t channels, std::vector<std::string> names,
                            std::optional<Montage> montage) const {
  return EpochSet(trials_, channels, samples_, labels_, fs_, window_, std::move(names),
                  std::move(montage), unit_);
}

EpochSet EpochSet::subset(std::span<const std::size_t> trial_indices) const {
  std::vector<int> labels;
  labels.reserve(trial_indices.size());
  for (auto i : trial_indices) {
    require(i < trials_, ErrorCode::kInvalidArgument, "subset index out of range");
    labels.push_back(labels_[i]);
  }
  EpochSet out(trial_indices.size(), channels_, samples_, std::move(labels), fs_, window_, names_,
               montage_, unit_);
  const std::size_t stride = channels_ * samples_;
  for (std::size_t k = 0; k < trial_indices.size(); ++k) {
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(trial_indices[k] * stride), stride,
                out.values_.begin() + static_cast<std::ptrdiff_t>(k * stride));
  }
  return out;
}

Recording common_average_reference(const Recording& rec) {
  require(rec.channels() >= 2, ErrorCode::kInvalidArgument,
          "CAR undefined for a single-channel recording");
  const Eigen::RowVectorXd mean = rec.data().colwise().mean();
  Matrix out = rec.data().rowwise() - mean;
  return rec.with_data(std::move(out));
}

EpochResult epoch(const Recording& rec, TimeWindow window, PadMode /*pad*/) {
  require(window.end_s > window.start_s, ErrorCode::kInvalidArgument, "empty epoch window");
  const double fs = rec.fs();
  const std::size_t n_samples = window.length(fs);
  const std::int64_t offset = std::llround(window.start_s * fs);
  const auto total = static_cast<std::int64_t>(rec.samples());

  std::vector<const Annotation*> kept;
  std::size_t skipped = 0;
  for (const auto& a : rec.annotations()) {
    if (a.sample + offset < 0 || a.sample + offset >= total) {
      ++skipped;
    } else {
      kept.push_back(&a);
    }
  }
  require(!kept.empty(), ErrorCode::kInvalidArgument,
          "no annotation has enough history for the epoch window");

  std::vector<int> labels;
  labels.reserve(kept.size());
  for (const auto* a : kept) labels.push_back(a->label);

  EpochSet out(kept.size(), rec.channels(), n_samples, std::move(labels), fs, window,
               rec.channel_names(), rec.montage(), SampleUnit::kRaw);
  for (std::size_t t = 0; t < kept.size(); ++t) {
    const std::int64_t begin = kept[t]->sample + offset;
    const std::int64_t available =
        std::min<std::int64_t>(static_cast<std::int64_t>(n_samples), total - begin);
    auto dst = out.trial(t);
    dst.leftCols(available) = rec.data().middleCols(begin, available);
    // tail stays zero
  }
  return {std::move(out), skipped};
}

namespace {

void standardize_row(double* row, std::size_t n, double mean, double sd) {
  // Constant rows (including all-zero padding) carry no variance.
  if (!(sd > 1e-12 * std::abs(mean)) || sd == 0.0 || !std::isfinite(sd)) {
    std::fill_n(row, n, 0.0);
    return;
  }
  for (std::size_t i = 0; i < n; ++i) row[i] = (row[i] - mean) / sd;
}

}  // namespace

EpochSet znormalize(const EpochSet& epochs, ZScope scope) {
  EpochSet out = epochs;
  const std::size_t n = epochs.samples();
  const std::size_t c = epochs.channels();
  auto values = out.values();

  if (scope == ZScope::kPerTrialChannel) {
    for (std::size_t r = 0; r < epochs.trials() * c; ++r) {
      double* row = values.data() + r * n;
      Eigen::Map<Eigen::ArrayXd> a(row, static_cast<Eigen::Index>(n));
      const double mean = a.mean();
      const double var = (a - mean).square().mean();
      standardize_row(row, n, mean, std::sqrt(var));
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      double sum_sq = 0.0;
      for (std::size_t t = 0; t < epochs.trials(); ++t) {
        const double* row = values.data() + (t * c + ch) * n;
        for (std::size_t i = 0; i < n; ++i) sum += row[i];
      }
      const double count = static_cast<double>(epochs.trials() * n);
      const double mean = sum / count;
      for (std::size_t t = 0; t < epochs.trials(); ++t) {
        const double* row = values.data() + (t * c + ch) * n;
        for (std::size_t i = 0; i < n; ++i) sum_sq += (row[i] - mean) * (row[i] - mean);
      }
      const double sd = std::sqrt(sum_sq / count);
      for (std::size_t t = 0; t < epochs.trials(); ++t) {
        standardize_row(values.data() + (t * c + ch) * n, n, mean, sd);
      }
    }
  }
  out.set_unit(SampleUnit::kZScored);
  return out;
}

}  // namespace neuroair
