#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "neuroair/error.hpp"
#include "neuroair/nair_io.hpp"
#include "neuroair/pipeline.hpp"
#include "neuroair/synth.hpp"
#include "oracles.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace neuroair;
namespace fs = std::filesystem;

namespace {

struct Shell {
  int status = 0;
  std::string out;
};

Shell run(const std::string& args) {
  const std::string cmd = std::string(NEUROAIR_CLI) + " " + args + " 2>&1";
  Shell r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

/// Small synthetic subject: 10 trials per class.
fs::path small_dataset(const fs::path& dir) {
  synth::SynthConfig cfg;
  cfg.trials_per_class = 10;
  const auto s = synth::generate(cfg, 21);
  io::write_nair(dir / "s1.nair", s.recording);
  return dir / "s1.nair";
}

pipeline::PipelineConfig small_config(const fs::path& input, const fs::path& out) {
  pipeline::PipelineConfig cfg;
  cfg.subjects = {{"s1", {input}}};
  cfg.features = {"ica", "shd"};
  cfg.order = 2;
  cfg.bands = {"delta_theta"};
  cfg.models = {"eegnet"};
  cfg.window = {0.0, 0.5};
  cfg.train.max_epochs = 2;
  cfg.train.batch_size = 64;
  cfg.ica.fit_stride = 2;
  cfg.out_dir = out;
  cfg.seed = 5;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config validation names the offending key") {
  const auto dir = oracle::scratch("pipe_cfg");
  const auto input = small_dataset(dir);
  auto cfg = small_config(input, dir / "out");
  CHECK_NOTHROW(cfg.validate());

  auto no_order = cfg;
  no_order.order.reset();
  try {
    no_order.validate();
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    CHECK(std::string(e.what()).find("'order'") != std::string::npos);
  }

  auto missing = cfg;
  missing.subjects[0].inputs.push_back(dir / "nope.nair");
  try {
    missing.validate();
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("subjects[0].inputs[1]") != std::string::npos);
  }

  auto scout = cfg;
  scout.features = {"scout"};
  CHECK_THROWS_AS(scout.validate(), Error);
  auto band = cfg;
  band.bands = {"mu"};
  CHECK_THROWS_AS(band.validate(), Error);
}

TEST_CASE("config JSON round trips and rejects unknown keys") {
  const auto dir = oracle::scratch("pipe_json");
  const auto input = small_dataset(dir);
  const auto cfg = small_config(input, dir / "out");
  const auto j = pipeline::to_json(cfg);
  const auto back = pipeline::pipeline_config_from_json(j);
  CHECK(back.features == cfg.features);
  CHECK(back.order == cfg.order);
  CHECK(back.train.max_epochs == 2);
  CHECK(back.window.end_s == 0.5);
  CHECK(pipeline::to_json(back) == j);
  auto bad = j;
  bad["train"]["momentum"] = 0.9;
  try {
    pipeline::pipeline_config_from_json(bad);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("train.momentum") != std::string::npos);
  }
}

TEST_CASE("merge shifts annotations of later sessions") {
  Matrix a = Matrix::Ones(2, 100);
  Matrix b = Matrix::Zero(2, 50);
  const auto m = montage_from_names({"Fz", "Cz"});
  std::vector<Recording> sessions{Recording(a, 500.0, m, {{10, 1}}), Recording(b, 500.0, m, {{5, 2}})};
  const auto merged = pipeline::merge_recordings(sessions);
  CHECK(merged.samples() == 150);
  REQUIRE(merged.annotations().size() == 2);
  CHECK(merged.annotations()[1].sample == 105);
  CHECK(merged.annotations()[1].label == 2);
  std::vector<Recording> mismatched{Recording(a, 500.0, m), Recording(b, 250.0, m)};
  CHECK_THROWS_AS(pipeline::merge_recordings(mismatched), Error);
}

TEST_CASE("end-to-end run writes records, report and a complete manifest") {
  const auto dir = oracle::scratch("pipe_run");
  const auto input = small_dataset(dir);
  const auto cfg = small_config(input, dir / "out");
  std::size_t seen = 0;
  auto with_progress = cfg;
  with_progress.progress = [&](const eval::ResultRecord&) { ++seen; };
  const auto result = pipeline::run_pipeline(with_progress);
  CHECK(result.records.size() == 20);
  CHECK(seen == 20);
  for (const auto& r : result.records) {
    CHECK(r.status == eval::Status::kOk);
    CHECK(r.n_test == 26);
  }
  CHECK(fs::exists(result.results_csv));
  const auto summary = slurp(cfg.out_dir / "report" / "summary.txt");
  CHECK(summary.find("Fold accuracies") != std::string::npos);
  const auto manifest = nlohmann::json::parse(slurp(result.manifest));
  CHECK(manifest["status"] == "ok");
  std::set<std::string> stages;
  for (const auto& s : manifest["stages"]) {
    CHECK(s["status"] == "ok");
    stages.insert(s["stage"].get<std::string>());
  }
  for (const auto* s : {"merge:s1", "preprocess:s1", "ica:s1", "features:s1", "train", "report"}) {
    CHECK(stages.count(s) == 1);
  }
  CHECK(manifest["versions"].contains("eigen"));
  CHECK(fs::exists(cfg.out_dir / "s1" / "ica_delta_theta.nair"));
  const auto feats = io::read_nair_epochs(cfg.out_dir / "s1" / "shd_delta_theta.nair");
  CHECK(feats.channels() == 9);
  CHECK(feats.samples() == 250);
  CHECK(feats.unit() == SampleUnit::kZScored);
}

TEST_CASE("a failing stage is named and leaves a partial manifest") {
  const auto dir = oracle::scratch("pipe_fail");
  std::ofstream(dir / "broken.nair") << "{\"version\":1}\n";
  auto cfg = small_config(dir / "broken.nair", dir / "out");
  try {
    pipeline::run_pipeline(cfg);
    FAIL("expected a stage failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPipelineStage);
    CHECK(std::string(e.what()).find("merge:s1") != std::string::npos);
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(manifest["status"] == "failed");
  CHECK(manifest["failed_stage"] == "merge:s1");
}

TEST_CASE("content hashes depend on values and shape") {
  Matrix a = Matrix::Zero(2, 3);
  Matrix b = Matrix::Zero(3, 2);
  CHECK(pipeline::content_hash(a) != pipeline::content_hash(b));
  Matrix c = a;
  c(1, 2) = 1e-3;
  CHECK(pipeline::content_hash(a) != pipeline::content_hash(c));
  CHECK(pipeline::content_hash(a) == pipeline::content_hash(Matrix(a)));
  const std::string abc = "abc";
  CHECK(pipeline::sha256_hex({reinterpret_cast<const unsigned char*>(abc.data()), abc.size()}) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("cli: synth, inspect and convert") {
  const auto dir = oracle::scratch("cli_basic");
  auto r = run("synth --out " + (dir / "d.nair").string() + " --truth " + (dir / "t.json").string() +
               " --trials-per-class 2 --seed 3");
  CHECK(r.status == 0);
  r = run("inspect " + (dir / "d.nair").string());
  CHECK(r.status == 0);
  CHECK(r.out.find("channels=31") != std::string::npos);
  CHECK(r.out.find("fs=500") != std::string::npos);

  synth::SynthConfig sc;
  sc.trials_per_class = 2;
  const auto s = synth::generate(sc, 3);
  const auto ep = epoch(s.recording, {0.0, 0.2}).epochs;
  io::write_nair(dir / "e.nair", ep);
  r = run("convert --in " + (dir / "e.nair").string() + " --out " + (dir / "csv").string());
  CHECK(r.status == 0);
  r = run("convert --in " + (dir / "csv").string() + " --out " + (dir / "back.nair").string());
  CHECK(r.status == 0);
  const auto back = io::read_nair_epochs(dir / "back.nair");
  CHECK(std::equal(back.values().begin(), back.values().end(), ep.values().begin()));
}

TEST_CASE("cli: failures exit nonzero with a parsable code") {
  const auto dir = oracle::scratch("cli_fail");
  auto r = run("inspect " + (dir / "missing.nair").string());
  CHECK(r.status == static_cast<int>(ErrorCode::kIo));
  CHECK(r.out.find("error[") != std::string::npos);
  r = run("train --bogus-flag");
  CHECK(r.status == static_cast<int>(ErrorCode::kInvalidArgument));
  std::ofstream(dir / "bad.json") << R"({"subjects": [], "features": ["shd"]})";
  r = run("validate --config " + (dir / "bad.json").string());
  CHECK(r.status == static_cast<int>(ErrorCode::kConfig));
  r = run("ttest --a 1,2,3 --b 0,0,0");
  CHECK(r.status == 0);
  CHECK(r.out.find("p=0.0370") != std::string::npos);
}
