#include "neuroair/nair_io.hpp"

#include "neuroair/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace neuroair::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
  }
  return v;
}

json montage_fields(const std::vector<std::string>& names, const std::optional<Montage>& montage) {
  json j;
  j["channel_names"] = names;
  std::vector<double> theta;
  std::vector<double> phi;
  double radius = kDefaultHeadRadius;
  if (montage) {
    for (const auto& p : montage->positions()) {
      theta.push_back(p.theta);
      phi.push_back(p.phi);
    }
    radius = montage->positions().front().radius;
  }
  j["montage_theta"] = theta;
  j["montage_phi"] = phi;
  j["montage_radius"] = radius;
  return j;
}

std::optional<Montage> montage_from_header(const json& h, const std::vector<std::string>& names) {
  const auto theta = h.at("montage_theta").get<std::vector<double>>();
  const auto phi = h.at("montage_phi").get<std::vector<double>>();
  if (theta.empty() && phi.empty()) return std::nullopt;
  require(theta.size() == names.size() && phi.size() == names.size(), ErrorCode::kFormat,
          "montage_theta/montage_phi length must match channel_names");
  const double radius = h.value("montage_radius", kDefaultHeadRadius);
  std::vector<ElectrodePosition> pos(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) pos[i] = {theta[i], phi[i], radius};
  return Montage(names, std::move(pos));
}

void write_file(const fs::path& path, const json& header, std::span<const double> payload) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << header.dump() << '\n';
  write_f32_blob(out, payload);
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

json epochs_header(const EpochSet& e) {
  json h = montage_fields(e.channel_names(), e.montage());
  h["version"] = kNairVersion;
  h["kind"] = "epochs";
  h["fs"] = e.fs();
  h["n_channels"] = e.channels();
  h["n_trials"] = e.trials();
  h["n_samples"] = e.samples();
  h["labels"] = e.labels();
  h["window"] = {e.window().start_s, e.window().end_s};
  h["unit"] = e.unit() == SampleUnit::kZScored ? "zscored" : "raw";
  return h;
}

struct Parsed {
  json header;
  std::vector<double> payload;
};

Parsed read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open: " + path.string());
  const std::string line = read_header_line(in, path.string());
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& ex) {
    fail(ErrorCode::kFormat, "malformed NAIR header in " + path.string() + ": " + ex.what());
  }
  try {
    require(h.at("version").get<int>() == kNairVersion, ErrorCode::kFormat,
            "unsupported NAIR version in " + path.string());
    const auto n = h.at("n_trials").get<std::size_t>() * h.at("n_channels").get<std::size_t>() *
                   h.at("n_samples").get<std::size_t>();
    const auto header_bytes = static_cast<std::uintmax_t>(line.size() + 1);
    const auto file_bytes = fs::file_size(path);
    const auto expected = static_cast<std::uintmax_t>(n) * 4;
    require(file_bytes >= header_bytes && file_bytes - header_bytes == expected, ErrorCode::kFormat,
            "NAIR payload size mismatch in " + path.string() + ": expected " +
                std::to_string(expected) + " bytes, found " +
                std::to_string(file_bytes - header_bytes));
    return {std::move(h), read_f32_blob(in, n, path.string())};
  } catch (const json::exception& ex) {
    fail(ErrorCode::kFormat, "NAIR header field error in " + path.string() + ": " + ex.what());
  }
}

}  // namespace

void write_f32_blob(std::ostream& out, std::span<const double> values) {
  std::vector<std::uint32_t> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    buf[i] = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
}

std::vector<double> read_f32_blob(std::istream& in, std::size_t count, const std::string& what) {
  std::vector<std::uint32_t> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 4));
  const auto got = static_cast<std::size_t>(in.gcount());
  require(got == count * 4, ErrorCode::kFormat,
          "truncated float32 blob in " + what + ": expected " + std::to_string(count * 4) +
              " bytes, read " + std::to_string(got));
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = static_cast<double>(std::bit_cast<float>(to_le(buf[i])));
  }
  return out;
}

std::string read_header_line(std::istream& in, const std::string& what) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kFormat,
          "missing header line in " + what);
  require(!line.empty() && line.front() == '{', ErrorCode::kFormat,
          "header of " + what + " is not a JSON object");
  return line;
}

void write_nair(const fs::path& path, const EpochSet& epochs) {
  write_file(path, epochs_header(epochs), epochs.values());
}

void write_nair(const fs::path& path, const Recording& rec) {
  json h = montage_fields(rec.channel_names(), rec.montage());
  h["version"] = kNairVersion;
  h["kind"] = "continuous";
  h["fs"] = rec.fs();
  h["n_channels"] = rec.channels();
  h["n_trials"] = 1;
  h["n_samples"] = rec.samples();
  h["labels"] = json::array();
  h["unit"] = "raw";
  json events = json::array();
  for (const auto& a : rec.annotations()) events.push_back({a.sample, a.label});
  h["events"] = std::move(events);
  write_file(path, h, std::span<const double>(rec.data().data(), rec.data().size()));
}

json read_nair_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open: " + path.string());
  try {
    return json::parse(read_header_line(in, path.string()));
  } catch (const json::exception& ex) {
    fail(ErrorCode::kFormat, "malformed NAIR header in " + path.string() + ": " + ex.what());
  }
}

NairContent read_nair(const fs::path& path) {
  Parsed p = read_file(path);
  const json& h = p.header;
  try {
    const auto names = h.at("channel_names").get<std::vector<std::string>>();
    require(names.size() == h.at("n_channels").get<std::size_t>(), ErrorCode::kFormat,
            "channel_names length != n_channels");
    auto montage = montage_from_header(h, names);
    const double fs = h.at("fs").get<double>();
    const auto n_samples = h.at("n_samples").get<std::size_t>();
    const std::string kind = h.value("kind", "epochs");

    if (kind == "continuous") {
      Matrix data = Eigen::Map<const Matrix>(p.payload.data(),
                                             static_cast<Eigen::Index>(names.size()),
                                             static_cast<Eigen::Index>(n_samples));
      std::vector<Annotation> ann;
      for (const auto& ev : h.value("events", json::array())) {
        ann.push_back({ev.at(0).get<std::int64_t>(), ev.at(1).get<int>()});
      }
      return Recording(std::move(data), fs, names, std::move(montage), std::move(ann));
    }
    require(kind == "epochs", ErrorCode::kFormat, "unknown NAIR kind '" + kind + "'");
    const auto labels = h.at("labels").get<std::vector<int>>();
    const auto n_trials = h.at("n_trials").get<std::size_t>();
    require(labels.size() == n_trials, ErrorCode::kFormat, "labels length != n_trials");
    TimeWindow window{-1.0, 2.0};
    if (h.contains("window")) {
      window = {h["window"].at(0).get<double>(), h["window"].at(1).get<double>()};
    }
    const SampleUnit unit =
        h.value("unit", std::string("raw")) == "zscored" ? SampleUnit::kZScored : SampleUnit::kRaw;
    EpochSet e(n_trials, names.size(), n_samples, labels, fs, window, names, std::move(montage),
               unit);
    std::copy(p.payload.begin(), p.payload.end(), e.values().begin());
    return e;
  } catch (const json::exception& ex) {
    fail(ErrorCode::kFormat, "NAIR header field error in " + path.string() + ": " + ex.what());
  }
}

EpochSet read_nair_epochs(const fs::path& path) {
  auto content = read_nair(path);
  require(std::holds_alternative<EpochSet>(content), ErrorCode::kFormat,
          path.string() + " holds a continuous recording, expected epochs");
  return std::get<EpochSet>(std::move(content));
}

Recording read_nair_recording(const fs::path& path) {
  auto content = read_nair(path);
  require(std::holds_alternative<Recording>(content), ErrorCode::kFormat,
          path.string() + " holds epochs, expected a continuous recording");
  return std::get<Recording>(std::move(content));
}

void write_csv_dir(const fs::path& dir, const EpochSet& epochs) {
  fs::create_directories(dir);
  {
    json meta = epochs_header(epochs);
    std::ofstream m(dir / "meta.json");
    require(static_cast<bool>(m), ErrorCode::kIo, "cannot write meta.json in " + dir.string());
    m << meta.dump(2) << '\n';
  }
  for (std::size_t t = 0; t < epochs.trials(); ++t) {
    std::ostringstream name;
    name << "trial_" << std::setw(5) << std::setfill('0') << t << '_'
         << ClassLabel::from_index(epochs.labels()[t]).letter() << ".csv";
    std::ofstream out(dir / name.str());
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + name.str());
    const auto& names = epochs.channel_names();
    for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
    out << '\n';
    out << std::setprecision(std::numeric_limits<float>::max_digits10);
    const auto trial = epochs.trial(t);
    for (Eigen::Index s = 0; s < trial.cols(); ++s) {
      for (Eigen::Index c = 0; c < trial.rows(); ++c) {
        out << (c ? "," : "") << static_cast<float>(trial(c, s));
      }
      out << '\n';
    }
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

}  // namespace

EpochSet read_csv_dir(const fs::path& dir, std::optional<double> fs_override) {
  require(fs::is_directory(dir), ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::kFormat, "no CSV trials in " + dir.string());

  std::optional<json> meta;
  if (fs::exists(dir / "meta.json")) {
    std::ifstream m(dir / "meta.json");
    try {
      meta = json::parse(m);
    } catch (const json::exception& ex) {
      fail(ErrorCode::kFormat, "malformed meta.json: " + std::string(ex.what()));
    }
  }

  std::vector<std::vector<std::vector<double>>> trials;  // trial -> sample -> channel
  std::vector<std::string> names;
  std::vector<int> labels;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::kFormat,
            "empty CSV " + f.string());
    auto header = split(line);
    if (names.empty()) {
      names = header;
    } else {
      require(header == names, ErrorCode::kFormat, "channel header differs in " + f.string());
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      auto cells = split(line);
      require(cells.size() == names.size(), ErrorCode::kFormat,
              "row width mismatch in " + f.string());
      std::vector<double> row(cells.size());
      for (std::size_t c = 0; c < cells.size(); ++c) {
        float v = 0.0f;
        const char* b = cells[c].data();
        auto [ptr, ec] = std::from_chars(b, b + cells[c].size(), v);
        require(ec == std::errc() && ptr == b + cells[c].size(), ErrorCode::kFormat,
                "bad number '" + cells[c] + "' in " + f.string());
        row[c] = v;
      }
      rows.push_back(std::move(row));
    }
    require(!rows.empty(), ErrorCode::kFormat, "no samples in " + f.string());
    require(trials.empty() || rows.size() == trials.front().size(), ErrorCode::kFormat,
            "trial length differs in " + f.string());
    trials.push_back(std::move(rows));
    if (!meta) {
      const std::string stem = f.stem().string();
      require(stem.size() >= 2 && stem[stem.size() - 2] == '_', ErrorCode::kFormat,
              "cannot infer label from file name " + f.filename().string());
      labels.push_back(ClassLabel::from_letter(stem.back()).index());
    }
  }

  double fs = 0.0;
  TimeWindow window{-1.0, 2.0};
  std::optional<Montage> montage;
  SampleUnit unit = SampleUnit::kRaw;
  if (meta) {
    try {
      fs = meta->at("fs").get<double>();
      labels = meta->at("labels").get<std::vector<int>>();
      montage = montage_from_header(*meta, names);
      if (meta->contains("window")) {
        window = {(*meta)["window"].at(0).get<double>(), (*meta)["window"].at(1).get<double>()};
      }
      if (meta->value("unit", std::string("raw")) == "zscored") unit = SampleUnit::kZScored;
    } catch (const json::exception& ex) {
      fail(ErrorCode::kFormat, "meta.json field error: " + std::string(ex.what()));
    }
    require(labels.size() == trials.size(), ErrorCode::kFormat,
            "meta.json labels do not match CSV trial count");
  } else {
    require(fs_override.has_value(), ErrorCode::kConfig,
            "CSV directory without meta.json needs an explicit sampling rate");
    montage = montage_from_names(names);
  }
  if (fs_override) fs = *fs_override;

  EpochSet e(trials.size(), names.size(), trials.front().size(), labels, fs, window, names,
             std::move(montage), unit);
  for (std::size_t t = 0; t < trials.size(); ++t) {
    auto dst = e.trial(t);
    for (std::size_t s = 0; s < trials[t].size(); ++s) {
      for (std::size_t c = 0; c < names.size(); ++c) {
        dst(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(s)) = trials[t][s][c];
      }
    }
  }
  return e;
}

}  // namespace neuroair::io
