#pragma once

// NAIR v1 container: one line of compact UTF-8 JSON terminated by '\n',
// followed by little-endian float32 samples ordered trial-major, then
// channel-major, then sample.
//
// Header keys: version (1), kind ("epochs" | "continuous"), fs, n_channels,
// channel_names, montage_theta, montage_phi, montage_radius, n_trials,
// n_samples, labels, window [start_s, end_s], unit ("raw" | "zscored"),
// events [[sample, label], ...] (continuous only).

#include "neuroair/core.hpp"

#include "json.hpp"

#include <filesystem>
#include <variant>

namespace neuroair::io {

inline constexpr int kNairVersion = 1;

void write_nair(const std::filesystem::path& path, const EpochSet& epochs);
void write_nair(const std::filesystem::path& path, const Recording& rec);

nlohmann::json read_nair_header(const std::filesystem::path& path);

using NairContent = std::variant<Recording, EpochSet>;
NairContent read_nair(const std::filesystem::path& path);
EpochSet read_nair_epochs(const std::filesystem::path& path);
Recording read_nair_recording(const std::filesystem::path& path);

/// One CSV per trial (`trial_00000_A.csv`), channels as columns with a header
/// row of channel names, plus `meta.json` carrying the NAIR header fields.
/// Values are written with float32 round-trip precision.
void write_csv_dir(const std::filesystem::path& dir, const EpochSet& epochs);

/// Reads a CSV trial directory. Without `meta.json`, labels come from the
/// file-name letter suffix, the montage from the built-in 10-20 table, and
/// `fs` must be supplied.
EpochSet read_csv_dir(const std::filesystem::path& dir, std::optional<double> fs = std::nullopt);

/// Float32 little-endian blob helpers shared by the other binary formats.
void write_f32_blob(std::ostream& out, std::span<const double> values);
std::vector<double> read_f32_blob(std::istream& in, std::size_t count, const std::string& what);
std::string read_header_line(std::istream& in, const std::string& what);

}  // namespace neuroair::io
