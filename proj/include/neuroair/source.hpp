#pragma once

#include "neuroair/core.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

namespace neuroair::source {

using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Fixed-orientation gain matrix, channels x dipoles.
struct LeadField {
  Matrix gain;
  std::optional<Positions> dipole_positions;  // meters, dipoles x 3
  std::vector<std::string> channel_names;

  std::size_t channels() const { return static_cast<std::size_t>(gain.rows()); }
  std::size_t dipoles() const { return static_cast<std::size_t>(gain.cols()); }
  void validate() const;
};

struct Atlas {
  std::vector<int> region_of;  // per dipole
  std::vector<std::string> region_names;

  std::size_t regions() const { return region_names.size(); }
  void validate(std::size_t dipoles) const;
};

/// Standardized minimum-norm operator working in the average-reference
/// subspace: kernel = diag(R_vv)^(-1/2) L^T (L L^T + lambda I)^+ with
/// resolution R = K L.
struct InverseOperator {
  Matrix kernel;         // dipoles x channels, standardized
  Vector resolution;     // diag(K L) before standardization
  double lambda = 0.0;
};

/// trace(L L^T) / (channels * snr^2) on the average-referenced lead field.
double default_lambda(const LeadField& lf, double snr = 3.0);

/// Rows of the returned gain are average-referenced (each column sums to 0).
Matrix average_reference(const Matrix& gain);

InverseOperator sloreta_kernel(const LeadField& lf, double lambda);

/// Standardized current density, trials x dipoles x samples. Power is s^2.
EpochSet apply_inverse(const InverseOperator& op, const EpochSet& epochs);

/// Mean of member dipole series per region.
EpochSet scout_average(const EpochSet& dipole_series, const Atlas& atlas);

/// Region-averaging matrix (regions x dipoles).
Matrix region_average_matrix(const Atlas& atlas, std::size_t dipoles);

/// apply_inverse followed by scout_average in one pass, without
/// materializing the dipole series.
EpochSet extract_scouts(const InverseOperator& op, const Atlas& atlas, const EpochSet& epochs);

/// Smooth dipole-potential gains for random cortical dipoles, average
/// referenced, with singular values floored so cond(L L^T) <= cond_bound on
/// the average-reference subspace.
LeadField synth_leadfield(const Montage& montage, std::size_t dipoles, std::uint64_t seed,
                          double cond_bound = 1e4);
/// Uses the built-in 31-channel montage when channels == 31, otherwise a
/// quasi-uniform cap of synthetic electrodes.
LeadField synth_leadfield(std::size_t channels, std::size_t dipoles, std::uint64_t seed,
                          double cond_bound = 1e4);

/// Nearest-seed parcellation into `regions` nonempty regions.
Atlas synth_atlas(const LeadField& lf, std::size_t regions, std::uint64_t seed);

void write_leadfield(const std::filesystem::path& path, const LeadField& lf);
LeadField read_leadfield(const std::filesystem::path& path);
void write_atlas(const std::filesystem::path& path, const Atlas& atlas);
Atlas read_atlas(const std::filesystem::path& path);

}  // namespace neuroair::source
