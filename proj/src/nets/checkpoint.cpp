#include "neuroair/error.hpp"
#include "neuroair/nair_io.hpp"
#include "neuroair/nets.hpp"

#include <fstream>

namespace neuroair::nets {

// Header line: {"format", "spec", "best_epoch", "log", "tensors": [{name, shape}]}
// followed by one float32 blob per tensor in header order.
void save_checkpoint(const std::filesystem::path& path, TrainedNet& trained) {
  require(trained.net != nullptr, ErrorCode::kInvalidArgument, "save_checkpoint: no network");
  Model& net = *trained.net;
  nlohmann::json h;
  h["format"] = "neuroair-net";
  h["spec"] = to_json(net.spec());
  h["best_epoch"] = trained.best_epoch;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : trained.log) {
    log.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"train_accuracy", e.train_accuracy},
                   {"val_loss", e.val_loss},
                   {"val_accuracy", e.val_accuracy}});
  }
  h["log"] = std::move(log);
  nlohmann::json tensors = nlohmann::json::array();
  for (auto* p : net.params()) tensors.push_back({{"name", p->name}, {"shape", p->shape}});
  for (auto* b : net.buffers()) tensors.push_back({{"name", "buffer"}, {"shape", {b->size()}}});
  h["tensors"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << h.dump() << '\n';
  for (const auto& t : net.snapshot()) {
    const Eigen::VectorXd d = t.cast<double>();
    io::write_f32_blob(out, std::span<const double>(d.data(), static_cast<std::size_t>(d.size())));
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

TrainedNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  TrainedNet trained;
  try {
    const auto h = nlohmann::json::parse(io::read_header_line(in, path.string()));
    require(h.at("format") == "neuroair-net", ErrorCode::kFormat,
            path.string() + " is not a network checkpoint");
    trained.net = std::make_unique<Model>(net_spec_from_json(h.at("spec")), 0);
    trained.best_epoch = h.at("best_epoch").get<int>();
    for (const auto& e : h.at("log")) {
      trained.log.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                             e.at("train_accuracy").get<double>(), e.at("val_loss").get<double>(),
                             e.at("val_accuracy").get<double>()});
    }
    auto state = trained.net->snapshot();
    const auto& tensors = h.at("tensors");
    require(tensors.size() == state.size(), ErrorCode::kFormat,
            path.string() + ": tensor count does not match the network");
    for (std::size_t k = 0; k < state.size(); ++k) {
      const auto v = io::read_f32_blob(in, static_cast<std::size_t>(state[k].size()),
                                       path.string() + ":" + tensors[k].at("name").get<std::string>());
      for (std::size_t i = 0; i < v.size(); ++i) state[k](static_cast<Eigen::Index>(i)) = static_cast<float>(v[i]);
    }
    trained.net->restore(state);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "bad checkpoint header in " + path.string() + ": " + e.what());
  }
  return trained;
}

}  // namespace neuroair::nets
