#include "neuroair/error.hpp"
#include "neuroair/nair_io.hpp"
#include "neuroair/source.hpp"

#include <fstream>

namespace neuroair::source {

// Header line {"format","channels","dipoles","channel_names","positions"},
// then the float32 row-major gain, then optional dipoles x 3 positions.
void write_leadfield(const std::filesystem::path& path, const LeadField& lf) {
  lf.validate();
  nlohmann::json h;
  h["format"] = "neuroair-leadfield";
  h["channels"] = lf.channels();
  h["dipoles"] = lf.dipoles();
  h["channel_names"] = lf.channel_names;
  h["positions"] = lf.dipole_positions.has_value();
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << h.dump() << '\n';
  io::write_f32_blob(out, std::span<const double>(lf.gain.data(), lf.gain.size()));
  if (lf.dipole_positions) {
    io::write_f32_blob(out, std::span<const double>(lf.dipole_positions->data(),
                                                    lf.dipole_positions->size()));
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

LeadField read_leadfield(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  LeadField lf;
  try {
    const auto h = nlohmann::json::parse(io::read_header_line(in, path.string()));
    const auto c = h.at("channels").get<Eigen::Index>();
    const auto d = h.at("dipoles").get<Eigen::Index>();
    require(c > 0 && d > 0, ErrorCode::kFormat, path.string() + ": empty lead field");
    if (h.contains("channel_names")) lf.channel_names = h["channel_names"].get<std::vector<std::string>>();
    const auto g = io::read_f32_blob(in, static_cast<std::size_t>(c * d), path.string() + ":gain");
    lf.gain = Eigen::Map<const Matrix>(g.data(), c, d);
    if (h.value("positions", false)) {
      const auto p = io::read_f32_blob(in, static_cast<std::size_t>(d * 3), path.string() + ":positions");
      lf.dipole_positions = Eigen::Map<const Positions>(p.data(), d, 3);
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::kFormat, "bad lead field header in " + path.string() + ": " + ex.what());
  }
  lf.validate();
  return lf;
}

// Text format:
//   regions <R>
//   <name> (R lines)
//   dipoles <D>
//   <region index> (D lines)
void write_atlas(const std::filesystem::path& path, const Atlas& atlas) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << "regions " << atlas.regions() << '\n';
  for (const auto& n : atlas.region_names) out << n << '\n';
  out << "dipoles " << atlas.region_of.size() << '\n';
  for (int r : atlas.region_of) out << r << '\n';
}

Atlas read_atlas(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  Atlas atlas;
  std::string key;
  std::size_t count = 0;
  require(static_cast<bool>(in >> key >> count) && key == "regions", ErrorCode::kFormat,
          path.string() + ": expected 'regions <count>'");
  atlas.region_names.resize(count);
  for (auto& n : atlas.region_names) {
    require(static_cast<bool>(in >> n), ErrorCode::kFormat, path.string() + ": truncated region names");
  }
  require(static_cast<bool>(in >> key >> count) && key == "dipoles", ErrorCode::kFormat,
          path.string() + ": expected 'dipoles <count>'");
  atlas.region_of.resize(count);
  for (auto& r : atlas.region_of) {
    require(static_cast<bool>(in >> r), ErrorCode::kFormat, path.string() + ": truncated region indices");
  }
  atlas.validate(count);
  return atlas;
}

}  // namespace neuroair::source
