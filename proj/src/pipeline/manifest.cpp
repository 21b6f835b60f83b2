#include "neuroair/error.hpp"
#include "neuroair/pipeline.hpp"

#include <Eigen/Core>
#include <fftw3.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <memory>

namespace neuroair::pipeline {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    require(ctx_ && EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) == 1, ErrorCode::kIo,
            "sha256: digest init failed");
  }
  void update(const void* data, std::size_t n) {
    require(EVP_DigestUpdate(ctx_.get(), data, n) == 1, ErrorCode::kIo, "sha256: update failed");
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    require(EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) == 1, ErrorCode::kIo, "sha256: final failed");
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += kDigits[md[i] >> 4];
      out += kDigits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

void update_f32(Sha256& h, const double* values, std::size_t n) {
  std::vector<unsigned char> buf;
  buf.reserve(4 * std::min<std::size_t>(n, 1 << 16));
  for (std::size_t i = 0; i < n; ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) buf.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    if (buf.size() >= 4 * (1 << 16)) {
      h.update(buf.data(), buf.size());
      buf.clear();
    }
  }
  if (!buf.empty()) h.update(buf.data(), buf.size());
}

}  // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot read " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string content_hash(const Matrix& data) {
  Sha256 h;
  const std::string shape = std::to_string(data.rows()) + "x" + std::to_string(data.cols());
  h.update(shape.data(), shape.size());
  update_f32(h, data.data(), static_cast<std::size_t>(data.size()));
  return h.hex();
}

std::string content_hash(const EpochSet& epochs) {
  Sha256 h;
  const std::string shape = std::to_string(epochs.trials()) + "x" + std::to_string(epochs.channels()) + "x" +
                            std::to_string(epochs.samples());
  h.update(shape.data(), shape.size());
  for (int label : epochs.labels()) {
    const auto l = static_cast<std::int32_t>(label);
    h.update(&l, sizeof l);
  }
  update_f32(h, epochs.values().data(), epochs.values().size());
  return h.hex();
}

nlohmann::json version_info() {
  return {{"neuroair", std::string(kVersion)},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"fftw", std::string(fftw_version)},
          {"openssl", std::string(OPENSSL_VERSION_TEXT)},
          {"compiler", std::string(__VERSION__)}};
}

Manifest::Manifest(std::filesystem::path path, nlohmann::json config, std::uint64_t seed) : path_(std::move(path)) {
  doc_["format"] = "neuroair-manifest";
  doc_["versions"] = version_info();
  doc_["seed"] = seed;
  doc_["config"] = std::move(config);
  doc_["status"] = "running";
  doc_["stages"] = nlohmann::json::array();
  flush();
}

void Manifest::begin_stage(const std::string& stage) {
  doc_["stages"].push_back({{"stage", stage}, {"status", "running"}, {"artifacts", nlohmann::json::array()}});
}

void Manifest::add_artifact(const std::string& name, const std::string& hash,
                            const std::optional<std::filesystem::path>& file, std::vector<std::size_t> shape) {
  require(!doc_["stages"].empty(), ErrorCode::kConfig, "manifest: artifact outside a stage");
  nlohmann::json a{{"name", name}, {"sha256", hash}, {"shape", shape}};
  if (file) a["file"] = std::filesystem::relative(*file, path_.parent_path()).generic_string();
  doc_["stages"].back()["artifacts"].push_back(std::move(a));
}

void Manifest::end_stage() {
  doc_["stages"].back()["status"] = "ok";
  flush();
}

void Manifest::fail_stage(const std::string& message) {
  if (!doc_["stages"].empty()) {
    doc_["stages"].back()["status"] = "failed";
    doc_["failed_stage"] = doc_["stages"].back()["stage"];
  }
  doc_["status"] = "failed";
  doc_["error"] = message;
  flush();
}

void Manifest::finish() {
  doc_["status"] = "ok";
  flush();
}

std::vector<std::pair<std::string, std::string>> Manifest::hashes() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : doc_["stages"]) {
    for (const auto& a : s["artifacts"]) {
      out.emplace_back(s["stage"].get<std::string>() + "/" + a["name"].get<std::string>(),
                       a["sha256"].get<std::string>());
    }
  }
  return out;
}

void Manifest::flush() const {
  if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
  const auto tmp = path_.string() + ".tmp";
  {
    std::ofstream out(tmp);
    require(out.good(), ErrorCode::kIo, "cannot write " + tmp);
    out << doc_.dump(2) << '\n';
    require(out.good(), ErrorCode::kIo, "error writing " + tmp);
  }
  std::filesystem::rename(tmp, path_);
}

}  // namespace neuroair::pipeline
