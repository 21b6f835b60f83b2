#include "neuroair/pipeline.hpp"

#include "neuroair/error.hpp"
#include "neuroair/filters.hpp"
#include "neuroair/harmonics.hpp"
#include "neuroair/nair_io.hpp"
#include "neuroair/seed.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace neuroair::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names{"eeg", "ica", "scout", "shd", "hhd"};
  return names;
}

namespace {

bool needs_order(const std::string& feature) { return feature == "shd" || feature == "hhd"; }

// Reads fields of one JSON object, naming the full key path in errors and
// rejecting keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j_.is_object(), ErrorCode::kConfig, "config" + where() + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, "config" + where(key) + ": " + e.what());
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& at(const char* key) const { return j_.at(key); }
  std::string where(const std::string& key = "") const {
    std::string p = path_;
    if (!key.empty()) p += (p.empty() ? "" : ".") + key;
    return p.empty() ? "" : " '" + p + "'";
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      require(seen_.count(key) > 0, ErrorCode::kConfig, "config" + where(key) + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string zscope_name(ZScope z) { return z == ZScope::kPerTrialChannel ? "per_trial_channel" : "per_channel_dataset"; }

json thresholds_json(const ica::ArtifactThresholds& t) {
  return {{"low_cut_hz", t.low_cut_hz},
          {"high_cut_hz", t.high_cut_hz},
          {"blink_low_fraction", t.blink_low_fraction},
          {"blink_frontal_weight", t.blink_frontal_weight},
          {"muscle_high_fraction", t.muscle_high_fraction},
          {"frontal_min_anterior", t.frontal_min_anterior},
          {"welch_segment_s", t.welch_segment_s}};
}

template <typename F>
auto run_stage(Manifest& m, const std::string& name, F&& body) {
  m.begin_stage(name);
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      m.end_stage();
    } else {
      auto result = body();
      m.end_stage();
      return result;
    }
  } catch (const std::exception& e) {
    m.fail_stage(e.what());
    fail(ErrorCode::kPipelineStage, "stage '" + name + "' failed: " + e.what());
  }
}

std::vector<std::size_t> shape_of(const Matrix& m) {
  return {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
}
std::vector<std::size_t> shape_of(const EpochSet& e) { return {e.trials(), e.channels(), e.samples()}; }

}  // namespace

void PipelineConfig::validate() const {
  require(!subjects.empty(), ErrorCode::kConfig, "config 'subjects': at least one subject required");
  std::set<std::string> names;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const std::string p = "subjects[" + std::to_string(s) + "]";
    const auto& sub = subjects[s];
    require(!sub.name.empty() && sub.name.find_first_of(",/\\\n") == std::string::npos, ErrorCode::kConfig,
            "config '" + p + ".name': must be nonempty without ',', '/' or newlines");
    require(names.insert(sub.name).second, ErrorCode::kConfig, "config '" + p + ".name': duplicate subject " + sub.name);
    require(!sub.inputs.empty(), ErrorCode::kConfig, "config '" + p + ".inputs': no input files");
    for (std::size_t i = 0; i < sub.inputs.size(); ++i) {
      require(fs::is_regular_file(sub.inputs[i]), ErrorCode::kConfig,
              "config '" + p + ".inputs[" + std::to_string(i) + "]': file not found: " + sub.inputs[i].string());
    }
  }
  require(!features.empty(), ErrorCode::kConfig, "config 'features': empty");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = feature_names();
    require(std::find(f.begin(), f.end(), features[i]) != f.end(), ErrorCode::kConfig,
            "config 'features[" + std::to_string(i) + "]': unknown feature '" + features[i] +
                "' (expected eeg, ica, scout, shd, hhd)");
    if (needs_order(features[i])) {
      require(order.has_value(), ErrorCode::kConfig,
              "config 'order': feature " + features[i] + " needs a harmonic order");
      require(*order >= 1, ErrorCode::kConfig, "config 'order': must be >= 1");
    }
    if (features[i] == "scout") {
      require(leadfield.has_value(), ErrorCode::kConfig, "config 'leadfield': required by feature scout");
      require(atlas.has_value(), ErrorCode::kConfig, "config 'atlas': required by feature scout");
      require(fs::is_regular_file(*leadfield), ErrorCode::kConfig,
              "config 'leadfield': file not found: " + leadfield->string());
      require(fs::is_regular_file(*atlas), ErrorCode::kConfig, "config 'atlas': file not found: " + atlas->string());
    }
  }
  require(!bands.empty(), ErrorCode::kConfig, "config 'bands': empty");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    try {
      filters::band_by_name(bands[i]);
    } catch (const std::exception& e) {
      fail(ErrorCode::kConfig, "config 'bands[" + std::to_string(i) + "]': " + e.what());
    }
  }
  try {
    filters::band_by_name(broadband);
  } catch (const std::exception& e) {
    fail(ErrorCode::kConfig, std::string("config 'broadband': ") + e.what());
  }
  require(!models.empty(), ErrorCode::kConfig, "config 'models': empty");
  for (std::size_t i = 0; i < models.size(); ++i) {
    try {
      nets::build(models[i], 1, 4096);
    } catch (const std::exception& e) {
      fail(ErrorCode::kConfig, "config 'models[" + std::to_string(i) + "]': " + e.what());
    }
  }
  require(window.end_s > window.start_s, ErrorCode::kConfig, "config 'window': end must exceed start");
  require(folds >= 2, ErrorCode::kConfig, "config 'eval.folds': must be >= 2");
  require(val_fraction >= 0.0 && val_fraction < 1.0, ErrorCode::kConfig, "config 'eval.val_fraction': outside [0, 1)");
  require(ica.max_iter > 0 && ica.tol > 0.0 && ica.fit_stride >= 1, ErrorCode::kConfig,
          "config 'ica': max_iter, tol and fit_stride must be positive");
  require(sloreta_snr > 0.0, ErrorCode::kConfig, "config 'sloreta.snr': must be positive");
  require(!sloreta_lambda || *sloreta_lambda > 0.0, ErrorCode::kConfig, "config 'sloreta.lambda': must be positive");
  try {
    train.validate();
  } catch (const std::exception& e) {
    fail(ErrorCode::kConfig, std::string("config 'train': ") + e.what());
  }
}

json to_json(const PipelineConfig& c) {
  json j;
  auto subjects = json::array();
  for (const auto& s : c.subjects) {
    auto inputs = json::array();
    for (const auto& p : s.inputs) inputs.push_back(p.generic_string());
    subjects.push_back({{"name", s.name}, {"inputs", inputs}});
  }
  j["subjects"] = subjects;
  j["features"] = c.features;
  j["bands"] = c.bands;
  j["models"] = c.models;
  j["order"] = c.order ? json(*c.order) : json(nullptr);
  j["leadfield"] = c.leadfield ? json(c.leadfield->generic_string()) : json(nullptr);
  j["atlas"] = c.atlas ? json(c.atlas->generic_string()) : json(nullptr);
  j["sloreta"] = {{"lambda", c.sloreta_lambda ? json(*c.sloreta_lambda) : json(nullptr)}, {"snr", c.sloreta_snr}};
  j["broadband"] = c.broadband;
  j["ica"] = {{"max_iter", c.ica.max_iter},
              {"tol", c.ica.tol},
              {"fit_stride", c.ica.fit_stride},
              {"exclude", c.ica.exclude ? json(*c.ica.exclude) : json(nullptr)},
              {"thresholds", thresholds_json(c.ica.thresholds)}};
  j["window"] = {c.window.start_s, c.window.end_s};
  j["zscore"] = zscope_name(c.zscope);
  j["train"] = {{"batch_size", c.train.batch_size}, {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},     {"lr", c.train.adam.lr},
                {"beta1", c.train.adam.beta1},      {"beta2", c.train.adam.beta2},
                {"epsilon", c.train.adam.epsilon}};
  j["eval"] = {{"folds", c.folds}, {"val_fraction", c.val_fraction}, {"workers", c.workers}};
  j["out_dir"] = c.out_dir.generic_string();
  j["seed"] = c.seed;
  j["persist_intermediates"] = c.persist_intermediates;
  return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  Reader r(j, "");
  if (r.has("subjects")) {
    const json& subs = r.at("subjects");
    require(subs.is_array(), ErrorCode::kConfig, "config 'subjects': expected an array");
    for (std::size_t s = 0; s < subs.size(); ++s) {
      Reader rs(subs[s], "subjects[" + std::to_string(s) + "]");
      SubjectInput in;
      rs.get("name", in.name);
      std::vector<std::string> inputs;
      rs.get("inputs", inputs);
      for (auto& p : inputs) in.inputs.emplace_back(p);
      rs.finish();
      c.subjects.push_back(std::move(in));
    }
  }
  r.get("features", c.features);
  r.get("bands", c.bands);
  r.get("models", c.models);
  r.get_optional("order", c.order);
  std::optional<std::string> lf;
  std::optional<std::string> atlas;
  r.get_optional("leadfield", lf);
  r.get_optional("atlas", atlas);
  if (lf) c.leadfield = *lf;
  if (atlas) c.atlas = *atlas;
  if (r.has("sloreta")) {
    Reader rs(r.at("sloreta"), "sloreta");
    rs.get_optional("lambda", c.sloreta_lambda);
    rs.get("snr", c.sloreta_snr);
    rs.finish();
  }
  r.get("broadband", c.broadband);
  if (r.has("ica")) {
    Reader ri(r.at("ica"), "ica");
    ri.get("max_iter", c.ica.max_iter);
    ri.get("tol", c.ica.tol);
    ri.get("fit_stride", c.ica.fit_stride);
    ri.get_optional("exclude", c.ica.exclude);
    if (ri.has("thresholds")) {
      Reader rt(ri.at("thresholds"), "ica.thresholds");
      auto& t = c.ica.thresholds;
      rt.get("low_cut_hz", t.low_cut_hz);
      rt.get("high_cut_hz", t.high_cut_hz);
      rt.get("blink_low_fraction", t.blink_low_fraction);
      rt.get("blink_frontal_weight", t.blink_frontal_weight);
      rt.get("muscle_high_fraction", t.muscle_high_fraction);
      rt.get("frontal_min_anterior", t.frontal_min_anterior);
      rt.get("welch_segment_s", t.welch_segment_s);
      rt.finish();
    }
    ri.finish();
  }
  if (r.has("window")) {
    std::vector<double> w;
    r.get("window", w);
    require(w.size() == 2, ErrorCode::kConfig, "config 'window': expected [start_s, end_s]");
    c.window = {w[0], w[1]};
  }
  std::string z = zscope_name(c.zscope);
  r.get("zscore", z);
  if (z == "per_trial_channel") {
    c.zscope = ZScope::kPerTrialChannel;
  } else if (z == "per_channel_dataset") {
    c.zscope = ZScope::kPerChannelDataset;
  } else {
    fail(ErrorCode::kConfig, "config 'zscore': expected per_trial_channel or per_channel_dataset");
  }
  if (r.has("train")) {
    Reader rt(r.at("train"), "train");
    rt.get("batch_size", c.train.batch_size);
    rt.get("max_epochs", c.train.max_epochs);
    rt.get("patience", c.train.patience);
    rt.get("lr", c.train.adam.lr);
    rt.get("beta1", c.train.adam.beta1);
    rt.get("beta2", c.train.adam.beta2);
    rt.get("epsilon", c.train.adam.epsilon);
    rt.finish();
  }
  if (r.has("eval")) {
    Reader re(r.at("eval"), "eval");
    re.get("folds", c.folds);
    re.get("val_fraction", c.val_fraction);
    re.get("workers", c.workers);
    re.finish();
  }
  std::string out = c.out_dir.generic_string();
  r.get("out_dir", out);
  c.out_dir = out;
  r.get("seed", c.seed);
  r.get("persist_intermediates", c.persist_intermediates);
  r.finish();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  PipelineConfig c = pipeline_config_from_json(j);
  // Relative paths are taken relative to the config file.
  const fs::path base = path.parent_path();
  auto resolve = [&](fs::path& p) {
    if (p.is_relative()) p = base / p;
  };
  for (auto& s : c.subjects) {
    for (auto& p : s.inputs) resolve(p);
  }
  if (c.leadfield) resolve(*c.leadfield);
  if (c.atlas) resolve(*c.atlas);
  resolve(c.out_dir);
  return c;
}

Recording merge_recordings(std::span<const Recording> sessions) {
  require(!sessions.empty(), ErrorCode::kInvalidArgument, "merge: no recordings");
  const Recording& first = sessions.front();
  std::size_t total = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    require(sessions[i].channel_names() == first.channel_names(), ErrorCode::kShapeMismatch,
            "merge: recording " + std::to_string(i) + " has different channels");
    require(sessions[i].fs() == first.fs(), ErrorCode::kShapeMismatch,
            "merge: recording " + std::to_string(i) + " has a different sampling rate");
    total += sessions[i].samples();
  }
  if (sessions.size() == 1) return first;
  Matrix data(static_cast<Eigen::Index>(first.channels()), static_cast<Eigen::Index>(total));
  std::vector<Annotation> annotations;
  std::size_t offset = 0;
  for (const auto& s : sessions) {
    data.middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(s.samples())) = s.data();
    for (auto a : s.annotations()) {
      a.sample += static_cast<std::int64_t>(offset);
      annotations.push_back(a);
    }
    offset += s.samples();
  }
  return Recording(std::move(data), first.fs(), first.channel_names(), first.montage(), std::move(annotations));
}

Recording preprocess(const Recording& merged, const std::string& broadband) {
  const Recording car = common_average_reference(merged);
  return filters::filter_zero_phase(car, filters::design_fir(filters::band_by_name(broadband), car.fs()));
}

IcaStage run_ica(const Recording& broadband, const IcaSettings& settings, std::uint64_t seed) {
  ica::FitOptions opt;
  opt.seed = seed;
  opt.max_iter = settings.max_iter;
  opt.tol = settings.tol;
  opt.fit_stride = settings.fit_stride;
  // CAR removes one dimension.
  opt.rank = ica::RankPolicy::kReduce;
  IcaStage out;
  out.model = ica::fit_ica(broadband, opt);
  out.flags = ica::flag_artifacts_heuristic(out.model, broadband, settings.thresholds, settings.exclude);
  out.model.artifact_flags = out.flags;
  return out;
}

SourceModel load_source_model(const fs::path& leadfield, const fs::path& atlas, std::optional<double> lambda,
                              double snr) {
  SourceModel m{source::read_leadfield(leadfield), source::read_atlas(atlas), {}};
  m.atlas.validate(m.leadfield.dipoles());
  m.inverse = source::sloreta_kernel(m.leadfield, lambda ? *lambda : source::default_lambda(m.leadfield, snr));
  return m;
}

EpochSet feature_epochs(const Recording& broadband, const IcaStage& ica, const FeatureRequest& req,
                        const SourceModel* source) {
  const auto& known = feature_names();
  require(std::find(known.begin(), known.end(), req.feature) != known.end(), ErrorCode::kInvalidArgument,
          "unknown feature '" + req.feature + "'");
  const auto filter = filters::design_fir(filters::band_by_name(req.band), broadband.fs());
  EpochSet epochs = [&] {
    const Recording base = req.feature == "ica" ? ica::components(ica.model, broadband)
                                                : ica::remove_artifacts(ica.model, broadband, ica.flags);
    return epoch(filters::filter_zero_phase(base, filter), req.window).epochs;
  }();
  if (req.feature == "scout") {
    require(source != nullptr, ErrorCode::kConfig, "feature scout needs a lead field and atlas");
    require(source->leadfield.channel_names == epochs.channel_names(), ErrorCode::kShapeMismatch,
            "scout: lead field channels do not match the recording channels");
    epochs = source::extract_scouts(source->inverse, source->atlas, epochs);
  } else if (needs_order(req.feature)) {
    require(req.order.has_value(), ErrorCode::kConfig, "feature " + req.feature + " needs a harmonic order");
    require(epochs.montage().has_value(), ErrorCode::kConfig, "feature " + req.feature + " needs a montage");
    const auto kind = req.feature == "shd" ? harmonics::BasisKind::kSpherical : harmonics::BasisKind::kHead;
    const auto basis = harmonics::build_basis(kind, *req.order, *epochs.montage());
    epochs = harmonics::decompose(epochs, basis, harmonics::SamplingWeights::identity(epochs.channels()));
  }
  return znormalize(epochs, req.zscope);
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  PipelineResult result;
  result.manifest = cfg.out_dir / "manifest.json";
  Manifest manifest(result.manifest, to_json(cfg), cfg.seed);
  auto persisted = [&](const fs::path& rel) -> std::optional<fs::path> {
    if (!cfg.persist_intermediates) return std::nullopt;
    const fs::path p = cfg.out_dir / rel;
    fs::create_directories(p.parent_path());
    return p;
  };

  std::optional<SourceModel> source;
  if (std::find(cfg.features.begin(), cfg.features.end(), "scout") != cfg.features.end()) {
    source = run_stage(manifest, "source-model", [&] {
      auto m = load_source_model(*cfg.leadfield, *cfg.atlas, cfg.sloreta_lambda, cfg.sloreta_snr);
      manifest.add_artifact("kernel", content_hash(m.inverse.kernel), std::nullopt, shape_of(m.inverse.kernel));
      return m;
    });
  }

  std::vector<eval::Dataset> datasets;
  for (const auto& subject : cfg.subjects) {
    const std::string& name = subject.name;
    const Recording merged = run_stage(manifest, "merge:" + name, [&] {
      std::vector<Recording> sessions;
      for (const auto& p : subject.inputs) sessions.push_back(io::read_nair_recording(p));
      Recording m = merge_recordings(sessions);
      const auto file = persisted(fs::path(name) / "merged.nair");
      if (file) io::write_nair(*file, m);
      manifest.add_artifact("merged", content_hash(m.data()), file, shape_of(m.data()));
      return m;
    });
    const Recording broadband = run_stage(manifest, "preprocess:" + name, [&] {
      Recording b = preprocess(merged, cfg.broadband);
      const auto file = persisted(fs::path(name) / "broadband.nair");
      if (file) io::write_nair(*file, b);
      manifest.add_artifact("broadband", content_hash(b.data()), file, shape_of(b.data()));
      return b;
    });
    const IcaStage ica_stage = run_stage(manifest, "ica:" + name, [&] {
      IcaStage s = run_ica(broadband, cfg.ica, derive_seed(cfg.seed, "ica:" + name));
      const auto file = persisted(fs::path(name) / "ica_model.bin");
      if (file) ica::save_model(*file, s.model);
      manifest.add_artifact("unmixing", content_hash(s.model.unmixing), file, shape_of(s.model.unmixing));
      std::vector<std::size_t> flagged;
      for (std::size_t k = 0; k < s.flags.size(); ++k) {
        if (s.flags[k]) flagged.push_back(k);
      }
      manifest.add_artifact("artifact_flags", sha256_hex({}), std::nullopt, flagged);
      return s;
    });
    run_stage(manifest, "features:" + name, [&] {
      for (const auto& feature : cfg.features) {
        for (const auto& band : cfg.bands) {
          FeatureRequest req{feature, band, cfg.order, cfg.window, cfg.zscope};
          auto epochs = std::make_shared<const EpochSet>(
              feature_epochs(broadband, ica_stage, req, source ? &*source : nullptr));
          const std::string tag = feature + "_" + band;
          const auto file = persisted(fs::path(name) / (tag + ".nair"));
          if (file) io::write_nair(*file, *epochs);
          manifest.add_artifact(tag, content_hash(*epochs), file, shape_of(*epochs));
          const int order = needs_order(feature) ? *cfg.order : 0;
          datasets.push_back({name, feature, band, order, std::move(epochs)});
        }
      }
    });
  }

  result.records = run_stage(manifest, "train", [&] {
    eval::SweepConfig sc;
    sc.folds = cfg.folds;
    sc.val_fraction = cfg.val_fraction;
    sc.seed = derive_seed(cfg.seed, "sweep");
    sc.train = cfg.train;
    sc.workers = cfg.workers;
    sc.progress = cfg.progress;
    auto records = eval::run_sweep(datasets, cfg.models, sc);
    std::size_t failed = 0;
    for (const auto& r : records) failed += r.status == eval::Status::kFailed ? 1 : 0;
    manifest.add_artifact("folds_failed", sha256_hex({}), std::nullopt, {failed});
    return records;
  });
  datasets.clear();

  run_stage(manifest, "report", [&] {
    const fs::path dir = cfg.out_dir / "report";
    eval::emit_report(dir, result.records);
    result.results_csv = dir / "results.csv";
    manifest.add_artifact("results.csv", sha256_file(result.results_csv), result.results_csv,
                          {result.records.size()});
    manifest.add_artifact("summary.txt", sha256_file(dir / "summary.txt"), dir / "summary.txt", {});
  });
  manifest.finish();
  return result;
}

}  // namespace neuroair::pipeline
