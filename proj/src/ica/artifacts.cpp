#include "neuroair/error.hpp"
#include "neuroair/filters.hpp"
#include "neuroair/ica.hpp"

#include <cmath>

namespace neuroair::ica {

std::vector<ComponentFeatures> component_features(const IcaModel& model, const Recording& rec,
                                                  const ArtifactThresholds& th) {
  const Recording u = components(model, rec);
  std::vector<std::size_t> frontal;
  if (rec.montage()) frontal = rec.montage()->frontal_channels(th.frontal_min_anterior);

  auto segment = static_cast<std::size_t>(std::llround(th.welch_segment_s * rec.fs()));
  segment = std::max<std::size_t>(segment, 16);

  std::vector<ComponentFeatures> out(model.components());
  for (std::size_t k = 0; k < model.components(); ++k) {
    const auto row = u.data().row(static_cast<Eigen::Index>(k));
    const auto spec = filters::welch_psd(std::span<const double>(row.data(), u.samples()),
                                         rec.fs(), std::min(segment, u.samples()));
    out[k].low_fraction = filters::band_power_fraction(spec, 0.0, th.low_cut_hz);
    out[k].high_fraction = filters::band_power_fraction(spec, th.high_cut_hz, rec.fs());

    const auto col = model.mixing.col(static_cast<Eigen::Index>(k));
    const double total = col.squaredNorm();
    double front = 0.0;
    for (auto i : frontal) front += col(static_cast<Eigen::Index>(i)) * col(static_cast<Eigen::Index>(i));
    out[k].frontal_weight = total > 0.0 ? front / total : 0.0;
  }
  return out;
}

std::vector<bool> flag_artifacts_heuristic(const IcaModel& model, const Recording& rec,
                                           const ArtifactThresholds& th,
                                           const std::optional<std::vector<std::size_t>>& exclusion) {
  std::vector<bool> flags(model.components(), false);
  if (exclusion) {
    for (auto k : *exclusion) {
      require(k < flags.size(), ErrorCode::kInvalidArgument,
              "exclusion index " + std::to_string(k) + " beyond component count");
      flags[k] = true;
    }
    return flags;
  }
  const auto features = component_features(model, rec, th);
  for (std::size_t k = 0; k < features.size(); ++k) {
    const auto& f = features[k];
    const bool blink = f.low_fraction > th.blink_low_fraction &&
                       f.frontal_weight > th.blink_frontal_weight;
    const bool muscle = f.high_fraction > th.muscle_high_fraction;
    flags[k] = blink || muscle;
  }
  return flags;
}

}  // namespace neuroair::ica
