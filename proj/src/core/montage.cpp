#include "neuroair/core.hpp"

#include "neuroair/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>

namespace neuroair {

namespace {

struct BesaEntry {
  const char* name;
  double theta_deg;  // signed: negative values lie on the left hemisphere
  double phi_deg;
};

// Idealized spherical 10-20 positions in BESA convention
// (x right, y anterior, z up; a negative theta mirrors through the z axis).
constexpr std::array<BesaEntry, 36> kBesaTable{{
    {"Fp1", -92, -72}, {"Fpz", 92, 90},   {"Fp2", 92, 72},    {"F7", -92, -36},
    {"F3", -60, -51},  {"Fz", 46, 90},    {"F4", 60, 51},     {"F8", 92, 36},
    {"FT9", -115, -27}, {"FC5", -72, -21}, {"FC1", -32, -45}, {"FCz", 23, 90},
    {"FC2", 32, 45},   {"FC6", 72, 21},   {"FT10", 115, 27},  {"T7", -92, 0},
    {"C3", -46, 0},    {"Cz", 0, 0},      {"C4", 46, 0},      {"T8", 92, 0},
    {"TP9", -115, 27}, {"CP5", -72, 21},  {"CP1", -32, 45},   {"CPz", 23, -90},
    {"CP2", 32, -45},  {"CP6", 72, -21},  {"TP10", 115, -27}, {"P7", -92, 36},
    {"P3", -60, 51},   {"Pz", 46, -90},   {"P4", 60, -51},    {"P8", 92, -36},
    {"POz", 69, -90},  {"O1", -92, 72},   {"Oz", 92, -90},    {"O2", 92, -72},
}};

ElectrodePosition from_besa(double theta_deg, double phi_deg) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double t = theta_deg * deg;
  const double p = phi_deg * deg;
  const double x_right = std::sin(t) * std::cos(p);
  const double y_anterior = std::sin(t) * std::sin(p);
  const double z = std::cos(t);
  ElectrodePosition pos;
  pos.theta = std::acos(std::clamp(z, -1.0, 1.0));
  double phi = std::atan2(-x_right, y_anterior);
  if (phi < 0) phi += 2.0 * std::numbers::pi;
  if (phi >= 2.0 * std::numbers::pi) phi = 0.0;
  // The vertex has no azimuth.
  if (pos.theta < 1e-12) phi = 0.0;
  pos.phi = phi;
  return pos;
}

}  // namespace

ClassLabel ClassLabel::from_index(int index) {
  require(index >= 0 && index < kNumClasses, ErrorCode::kInvalidArgument,
          "class index out of range: " + std::to_string(index));
  return ClassLabel(index);
}

ClassLabel ClassLabel::from_letter(char letter) {
  require(letter >= 'A' && letter <= 'Z', ErrorCode::kInvalidArgument,
          std::string("class letter must be A-Z, got '") + letter + "'");
  return ClassLabel(letter - 'A');
}

Montage::Montage(std::vector<std::string> names, std::vector<ElectrodePosition> positions)
    : names_(std::move(names)), positions_(std::move(positions)) {
  require(!names_.empty(), ErrorCode::kInvalidArgument, "montage needs at least one channel");
  require(names_.size() == positions_.size(), ErrorCode::kShapeMismatch,
          "montage names/positions length mismatch");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    require(seen.insert(names_[i]).second, ErrorCode::kInvalidArgument,
            "duplicate channel name: " + names_[i]);
    const auto& p = positions_[i];
    require(p.theta >= 0.0 && p.theta <= std::numbers::pi, ErrorCode::kInvalidArgument,
            "theta out of [0, pi] for " + names_[i]);
    require(p.phi >= 0.0 && p.phi < 2.0 * std::numbers::pi, ErrorCode::kInvalidArgument,
            "phi out of [0, 2pi) for " + names_[i]);
    require(p.radius > 0.0, ErrorCode::kInvalidArgument, "radius must be positive");
  }
}

Eigen::Vector3d Montage::unit_vector(std::size_t i) const {
  const auto& p = positions_.at(i);
  return {std::sin(p.theta) * std::cos(p.phi), std::sin(p.theta) * std::sin(p.phi),
          std::cos(p.theta)};
}

std::vector<std::size_t> Montage::frontal_channels(double min_anterior) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (unit_vector(i).x() >= min_anterior) out.push_back(i);
  }
  return out;
}

std::optional<std::size_t> Montage::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

Montage montage_from_names(const std::vector<std::string>& names) {
  std::vector<ElectrodePosition> positions;
  positions.reserve(names.size());
  for (const auto& name : names) {
    auto it = std::find_if(kBesaTable.begin(), kBesaTable.end(),
                           [&](const BesaEntry& e) { return name == e.name; });
    require(it != kBesaTable.end(), ErrorCode::kInvalidArgument,
            "no built-in 10-20 position for channel '" + name + "'");
    positions.push_back(from_besa(it->theta_deg, it->phi_deg));
  }
  return Montage(names, std::move(positions));
}

Montage standard_montage_31() {
  return montage_from_names({"Fp1", "Fp2", "F7",  "F3",  "Fz",  "F4",  "F8",  "FC5",
                             "FC1", "FCz", "FC2", "FC6", "T7",  "C3",  "Cz",  "C4",
                             "T8",  "TP9", "CP5", "CP1", "CP2", "CP6", "TP10", "P7",
                             "P3",  "Pz",  "P4",  "P8",  "O1",  "Oz",  "O2"});
}

}  // namespace neuroair
