#include "neuroair/error.hpp"
#include "neuroair/eval.hpp"
#include "neuroair/filters.hpp"
#include "neuroair/ica.hpp"
#include "neuroair/nair_io.hpp"
#include "neuroair/nets.hpp"
#include "neuroair/pipeline.hpp"
#include "neuroair/seed.hpp"
#include "neuroair/synth.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace neuroair;

namespace {

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    try {
      if (dots == std::string::npos) {
        out.push_back(std::stoi(item));
      } else {
        const int lo = std::stoi(item.substr(0, dots));
        const int hi = std::stoi(item.substr(dots + 2));
        require(lo <= hi, ErrorCode::kInvalidArgument, "empty range '" + item + "'");
        for (int k = lo; k <= hi; ++k) out.push_back(k);
      }
    } catch (const std::logic_error&) {
      fail(ErrorCode::kInvalidArgument, "cannot parse '" + item + "' as an integer or range a..b");
    }
  }
  require(!out.empty(), ErrorCode::kInvalidArgument, "empty integer list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      fail(ErrorCode::kInvalidArgument, "cannot parse '" + item + "' as a number");
    }
  }
  return out;
}

TimeWindow parse_window(const std::string& text) {
  const auto v = parse_double_list(text);
  require(v.size() == 2 && v[1] > v[0], ErrorCode::kInvalidArgument, "window must be 'start,end' with end > start");
  return {v[0], v[1]};
}

std::vector<Recording> read_recordings(const std::vector<std::string>& paths) {
  std::vector<Recording> out;
  for (const auto& p : paths) out.push_back(io::read_nair_recording(p));
  return out;
}

struct TrainFlags {
  int batch = 128;
  int max_epochs = 500;
  int patience = 20;
  double lr = 1e-3;
  bool verbose = false;

  void add(CLI::App* app) {
    app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--max-epochs", max_epochs, "Epoch limit")->capture_default_str();
    app->add_option("--patience", patience, "Early-stopping patience in epochs")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
  }
  nets::TrainConfig config() const {
    nets::TrainConfig c;
    c.batch_size = batch;
    c.max_epochs = max_epochs;
    c.patience = patience;
    c.adam.lr = lr;
    c.verbose = verbose;
    return c;
  }
};

void print_progress(const eval::ResultRecord& r) {
  std::cerr << r.subject << ' ' << r.feature << ' ' << r.band << ' ' << r.model;
  if (r.order) std::cerr << " order " << r.order;
  std::cerr << " fold " << r.fold << ": ";
  if (r.status == eval::Status::kOk) {
    std::cerr << r.accuracy << '\n';
  } else {
    std::cerr << "failed (" << r.message << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG airwriting recognition toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pipeline::kVersion));

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic continuous dataset");
  std::string synth_config;
  std::string synth_out;
  std::string synth_truth;
  std::uint64_t synth_seed = 0;
  std::optional<std::size_t> synth_tpc;
  bool synth_check = false;
  synth_cmd->add_option("--config", synth_config, "Synth config JSON (defaults if omitted)");
  synth_cmd->add_option("--out", synth_out, "Output NAIR file")->required();
  synth_cmd->add_option("--truth", synth_truth, "Ground-truth JSON output");
  synth_cmd->add_option("--seed", synth_seed, "Generation seed")->capture_default_str();
  synth_cmd->add_option("--trials-per-class", synth_tpc, "Override trials per class");
  synth_cmd->add_flag("--check", synth_check, "Fail unless oracle nearest-centroid accuracy >= 99%");

  // convert
  auto* convert_cmd = app.add_subcommand("convert", "Convert epochs between NAIR and a CSV trial directory");
  std::string conv_in;
  std::string conv_out;
  std::optional<double> conv_fs;
  convert_cmd->add_option("--in", conv_in, "NAIR epoch file or CSV directory")->required();
  convert_cmd->add_option("--out", conv_out, "CSV directory or NAIR file")->required();
  convert_cmd->add_option("--fs", conv_fs, "Sampling rate for CSV directories without meta.json");

  // inspect
  auto* inspect_cmd = app.add_subcommand("inspect", "Print a NAIR header summary");
  std::string inspect_path;
  inspect_cmd->add_option("file", inspect_path, "NAIR file")->required();

  // preprocess
  auto* pre_cmd = app.add_subcommand("preprocess", "Merge sessions, re-reference (CAR) and broadband filter");
  std::vector<std::string> pre_in;
  std::string pre_out;
  std::string pre_band = "broadband";
  pre_cmd->add_option("--in", pre_in, "Continuous NAIR files, merged in order")->required();
  pre_cmd->add_option("--out", pre_out, "Output NAIR file")->required();
  pre_cmd->add_option("--band", pre_band, "Broadband filter name")->capture_default_str();

  // ica
  auto* ica_cmd = app.add_subcommand("ica", "Fit FastICA and flag artifact components");
  std::string ica_in;
  std::string ica_model;
  std::string ica_components;
  std::string ica_clean;
  std::string ica_exclude;
  std::uint64_t ica_seed = 0;
  pipeline::IcaSettings ica_settings;
  ica_cmd->add_option("--in", ica_in, "Preprocessed continuous NAIR file")->required();
  ica_cmd->add_option("--model", ica_model, "Output model file")->required();
  ica_cmd->add_option("--components", ica_components, "Write U as a continuous NAIR file");
  ica_cmd->add_option("--clean", ica_clean, "Write artifact-cleaned EEG as a continuous NAIR file");
  ica_cmd->add_option("--exclude", ica_exclude, "Comma-separated component indices to flag instead of the heuristic");
  ica_cmd->add_option("--seed", ica_seed, "FastICA seed")->capture_default_str();
  ica_cmd->add_option("--max-iter", ica_settings.max_iter, "Iteration limit")->capture_default_str();
  ica_cmd->add_option("--tol", ica_settings.tol, "Convergence tolerance")->capture_default_str();
  ica_cmd->add_option("--fit-stride", ica_settings.fit_stride, "Fit on every n-th sample")->capture_default_str();

  // feat
  auto* feat_cmd = app.add_subcommand("feat", "Extract band-filtered, epoched, z-normalized features");
  std::string feat_in;
  std::string feat_model;
  std::string feat_out;
  std::string feat_window = "-1,2";
  std::string feat_leadfield;
  std::string feat_atlas;
  pipeline::FeatureRequest feat_req{"ica", "delta_theta", std::nullopt, {-1.0, 2.0}, ZScope::kPerTrialChannel};
  feat_cmd->add_option("--in", feat_in, "Preprocessed continuous NAIR file")->required();
  feat_cmd->add_option("--ica-model", feat_model, "Model written by 'ica'")->required();
  feat_cmd->add_option("--feature", feat_req.feature, "eeg, ica, scout, shd or hhd")->capture_default_str();
  feat_cmd->add_option("--band", feat_req.band, "Band name")->capture_default_str();
  feat_cmd->add_option("--order", feat_req.order, "Harmonic order (shd, hhd)");
  feat_cmd->add_option("--window", feat_window, "Epoch window start,end in seconds")->capture_default_str();
  feat_cmd->add_option("--leadfield", feat_leadfield, "Lead field file (scout)");
  feat_cmd->add_option("--atlas", feat_atlas, "Atlas file (scout)");
  feat_cmd->add_option("--out", feat_out, "Output epoch NAIR file")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one cross-validation fold and report test accuracy");
  std::string train_data;
  std::string train_model = "eegnet";
  std::string train_out;
  int train_folds = 10;
  int train_fold = 0;
  std::uint64_t train_seed = 0;
  TrainFlags train_flags;
  train_cmd->add_option("--data", train_data, "Epoch NAIR file")->required();
  train_cmd->add_option("--model", train_model, "eegnet, deepconvnet or shallowconvnet")->capture_default_str();
  train_cmd->add_option("--folds", train_folds, "Number of folds")->capture_default_str();
  train_cmd->add_option("--fold", train_fold, "Fold to train")->capture_default_str();
  train_cmd->add_option("--seed", train_seed, "Seed")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Checkpoint output");
  train_cmd->add_flag("--verbose", train_flags.verbose, "Per-epoch log");
  train_flags.add(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Cross-validated sweeps and significance tests");
  eval_cmd->require_subcommand(1);

  auto* sweep_cmd = eval_cmd->add_subcommand("sweep", "Feature x band x model sweep over subjects");
  std::vector<std::string> sweep_in;
  std::string sweep_features = "ica";
  std::string sweep_bands = "delta_theta";
  std::string sweep_models = "eegnet";
  std::string sweep_out = "neuroair_out";
  std::string sweep_window = "-1,2";
  std::optional<int> sweep_order;
  std::string sweep_leadfield;
  std::string sweep_atlas;
  int sweep_folds = 10;
  std::uint64_t sweep_seed = 0;
  std::size_t sweep_stride = 1;
  TrainFlags sweep_train;
  sweep_cmd->add_option("--in", sweep_in, "One continuous NAIR file per subject")->required();
  sweep_cmd->add_option("--features", sweep_features, "Comma-separated features")->capture_default_str();
  sweep_cmd->add_option("--bands", sweep_bands, "Comma-separated bands")->capture_default_str();
  sweep_cmd->add_option("--models", sweep_models, "Comma-separated models")->capture_default_str();
  sweep_cmd->add_option("--order", sweep_order, "Harmonic order (shd, hhd)");
  sweep_cmd->add_option("--leadfield", sweep_leadfield, "Lead field file (scout)");
  sweep_cmd->add_option("--atlas", sweep_atlas, "Atlas file (scout)");
  sweep_cmd->add_option("--window", sweep_window, "Epoch window start,end in seconds")->capture_default_str();
  sweep_cmd->add_option("--folds", sweep_folds, "Number of folds")->capture_default_str();
  sweep_cmd->add_option("--seed", sweep_seed, "Global seed")->capture_default_str();
  sweep_cmd->add_option("--ica-stride", sweep_stride, "Fit ICA on every n-th sample")->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "Output directory")->capture_default_str();
  sweep_train.add(sweep_cmd);

  auto* comp_cmd = eval_cmd->add_subcommand("components", "Accuracy versus number of leading ICA components");
  std::string comp_in;
  std::string comp_k = "1..30";
  std::string comp_band = "delta_theta";
  std::string comp_model = "eegnet";
  std::string comp_window = "-1,2";
  std::string comp_out = "neuroair_components";
  int comp_folds = 10;
  std::uint64_t comp_seed = 0;
  std::size_t comp_stride = 1;
  TrainFlags comp_train;
  comp_cmd->add_option("--in", comp_in, "Continuous NAIR file")->required();
  comp_cmd->add_option("--k", comp_k, "Component counts, e.g. 1..30 or 1,5,10")->capture_default_str();
  comp_cmd->add_option("--band", comp_band, "Band")->capture_default_str();
  comp_cmd->add_option("--model", comp_model, "Model")->capture_default_str();
  comp_cmd->add_option("--window", comp_window, "Epoch window start,end in seconds")->capture_default_str();
  comp_cmd->add_option("--folds", comp_folds, "Number of folds")->capture_default_str();
  comp_cmd->add_option("--seed", comp_seed, "Global seed")->capture_default_str();
  comp_cmd->add_option("--ica-stride", comp_stride, "Fit ICA on every n-th sample")->capture_default_str();
  comp_cmd->add_option("--out", comp_out, "Output directory")->capture_default_str();
  comp_train.add(comp_cmd);

  auto* ettest_cmd = eval_cmd->add_subcommand("ttest", "Pairwise p-value matrix from a results CSV");
  std::string et_results;
  std::string et_axis = "model";
  eval::CellKey et_fixed{"ica", "delta_theta", "eegnet", 0};
  double et_alpha = 0.05;
  ettest_cmd->add_option("--results", et_results, "results.csv")->required();
  ettest_cmd->add_option("--axis", et_axis, "model, feature or band")
      ->check(CLI::IsMember({"model", "feature", "band"}))
      ->capture_default_str();
  ettest_cmd->add_option("--feature", et_fixed.feature, "Fixed feature")->capture_default_str();
  ettest_cmd->add_option("--band", et_fixed.band, "Fixed band")->capture_default_str();
  ettest_cmd->add_option("--model", et_fixed.model, "Fixed model")->capture_default_str();
  ettest_cmd->add_option("--order", et_fixed.order, "Fixed order")->capture_default_str();
  ettest_cmd->add_option("--alpha", et_alpha, "Significance marker threshold")->capture_default_str();

  // report
  auto* report_cmd = app.add_subcommand("report", "Render accuracy tables and p-values from a results CSV");
  std::string report_results;
  std::string report_out;
  report_cmd->add_option("--results", report_results, "results.csv")->required();
  report_cmd->add_option("--out", report_out, "Output directory")->required();

  // ttest
  auto* ttest_cmd = app.add_subcommand("ttest", "Paired one-tailed t-test, H1: mean(a - b) > 0");
  std::string tt_a;
  std::string tt_b;
  ttest_cmd->add_option("--a", tt_a, "Comma-separated values")->required();
  ttest_cmd->add_option("--b", tt_b, "Comma-separated values")->required();

  // run / validate
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline from a config file");
  std::string run_config;
  run_cmd->add_option("--config", run_config, "Pipeline config JSON")->required();
  auto* validate_cmd = app.add_subcommand("validate", "Validate a pipeline config file");
  std::string validate_config;
  validate_cmd->add_option("--config", validate_config, "Pipeline config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[" << to_string(ErrorCode::kInvalidArgument) << "]: " << e.what() << '\n';
    std::cerr << "run with --help for usage\n";
    return static_cast<int>(ErrorCode::kInvalidArgument);
  }

  try {
    if (*synth_cmd) {
      synth::SynthConfig cfg;
      if (!synth_config.empty()) {
        std::ifstream in(synth_config);
        require(in.good(), ErrorCode::kIo, "cannot read " + synth_config);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorCode::kConfig, synth_config + ": " + e.what());
        }
        cfg = synth::synth_config_from_json(j);
      }
      if (synth_tpc) cfg.trials_per_class = *synth_tpc;
      const auto data = synth::generate(cfg, synth_seed);
      if (synth_check) {
        const auto s = synth::separability_check(data, cfg);
        std::cout << "oracle accuracy " << s.accuracy << ", margin " << s.margin << '\n';
        require(s.passed, ErrorCode::kConfig, "synth: oracle accuracy below 0.99");
      }
      io::write_nair(synth_out, data.recording);
      if (!synth_truth.empty()) synth::write_truth(synth_truth, data.truth, cfg);
      std::cout << "wrote " << synth_out << ": " << data.recording.channels() << " channels, "
                << data.recording.samples() << " samples, " << data.recording.annotations().size() << " trials\n";
    } else if (*convert_cmd) {
      if (fs::is_directory(conv_in)) {
        io::write_nair(conv_out, io::read_csv_dir(conv_in, conv_fs));
      } else {
        io::write_csv_dir(conv_out, io::read_nair_epochs(conv_in));
      }
      std::cout << "wrote " << conv_out << '\n';
    } else if (*inspect_cmd) {
      const auto h = io::read_nair_header(inspect_path);
      const auto fsize = fs::file_size(inspect_path);
      std::cout << "kind=" << h.value("kind", std::string("?")) << '\n'
                << "channels=" << h.value("n_channels", 0) << '\n'
                << "fs=" << h.value("fs", 0.0) << '\n'
                << "trials=" << h.value("n_trials", 0) << '\n'
                << "samples=" << h.value("n_samples", 0) << '\n';
      if (h.contains("events")) std::cout << "events=" << h["events"].size() << '\n';
      if (h.contains("unit")) std::cout << "unit=" << h["unit"].get<std::string>() << '\n';
      if (h.contains("channel_names")) {
        std::cout << "channel_names=";
        bool first = true;
        for (const auto& n : h["channel_names"]) {
          std::cout << (first ? "" : ",") << n.get<std::string>();
          first = false;
        }
        std::cout << '\n';
      }
      std::cout << "bytes=" << fsize << '\n';
    } else if (*pre_cmd) {
      const auto sessions = read_recordings(pre_in);
      const auto out = pipeline::preprocess(pipeline::merge_recordings(sessions), pre_band);
      io::write_nair(pre_out, out);
      std::cout << "wrote " << pre_out << '\n';
    } else if (*ica_cmd) {
      const auto rec = io::read_nair_recording(ica_in);
      if (!ica_exclude.empty()) {
        std::vector<std::size_t> ex;
        for (int k : parse_int_list(ica_exclude)) {
          require(k >= 0, ErrorCode::kInvalidArgument, "--exclude: negative index");
          ex.push_back(static_cast<std::size_t>(k));
        }
        ica_settings.exclude = ex;
      }
      const auto stage = pipeline::run_ica(rec, ica_settings, ica_seed);
      ica::save_model(ica_model, stage.model);
      std::cout << stage.model.components() << " components after " << stage.model.iterations
                << " iterations; flagged:";
      for (std::size_t k = 0; k < stage.flags.size(); ++k) {
        if (stage.flags[k]) std::cout << ' ' << k;
      }
      std::cout << '\n';
      if (!ica_components.empty()) io::write_nair(ica_components, ica::components(stage.model, rec));
      if (!ica_clean.empty()) io::write_nair(ica_clean, ica::remove_artifacts(stage.model, rec, stage.flags));
    } else if (*feat_cmd) {
      const auto rec = io::read_nair_recording(feat_in);
      pipeline::IcaStage stage{ica::load_model(feat_model), {}};
      stage.flags = stage.model.artifact_flags;
      if (stage.flags.size() != stage.model.components()) stage.flags.assign(stage.model.components(), false);
      feat_req.window = parse_window(feat_window);
      std::optional<pipeline::SourceModel> src;
      if (feat_req.feature == "scout") {
        require(!feat_leadfield.empty() && !feat_atlas.empty(), ErrorCode::kConfig,
                "feature scout needs --leadfield and --atlas");
        src = pipeline::load_source_model(feat_leadfield, feat_atlas, std::nullopt, 3.0);
      }
      const auto epochs = pipeline::feature_epochs(rec, stage, feat_req, src ? &*src : nullptr);
      io::write_nair(feat_out, epochs);
      std::cout << "wrote " << feat_out << ": " << epochs.trials() << " x " << epochs.channels() << " x "
                << epochs.samples() << '\n';
    } else if (*train_cmd) {
      const auto data = io::read_nair_epochs(train_data);
      const auto plan = eval::make_folds(data.labels(), train_folds, derive_seed(train_seed, "folds"));
      require(train_fold >= 0 && train_fold < train_folds, ErrorCode::kInvalidArgument, "--fold out of range");
      const auto& f = plan.folds[static_cast<std::size_t>(train_fold)];
      auto tc = train_flags.config();
      tc.seed = derive_seed(train_seed, "train");
      const auto spec = nets::build(train_model, static_cast<int>(data.channels()), static_cast<int>(data.samples()));
      auto trained = nets::train(spec, data.subset(f.train), data.subset(f.val), tc);
      const auto ev = nets::evaluate(*trained.net, data.subset(f.test), tc.batch_size);
      std::cout << "best epoch " << trained.best_epoch << ", test accuracy " << ev.accuracy << '\n';
      if (!train_out.empty()) nets::save_checkpoint(train_out, trained);
    } else if (*sweep_cmd) {
      pipeline::PipelineConfig cfg;
      for (const auto& p : sweep_in) cfg.subjects.push_back({fs::path(p).stem().string(), {p}});
      auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(item);
        return out;
      };
      cfg.features = split(sweep_features);
      cfg.bands = split(sweep_bands);
      cfg.models = split(sweep_models);
      cfg.order = sweep_order;
      if (!sweep_leadfield.empty()) cfg.leadfield = sweep_leadfield;
      if (!sweep_atlas.empty()) cfg.atlas = sweep_atlas;
      cfg.window = parse_window(sweep_window);
      cfg.folds = sweep_folds;
      cfg.seed = sweep_seed;
      cfg.ica.fit_stride = sweep_stride;
      cfg.train = sweep_train.config();
      cfg.out_dir = sweep_out;
      cfg.progress = print_progress;
      const auto result = pipeline::run_pipeline(cfg);
      std::ifstream summary(fs::path(sweep_out) / "report" / "summary.txt");
      std::cout << summary.rdbuf();
    } else if (*comp_cmd) {
      const auto rec = io::read_nair_recording(comp_in);
      const auto broadband = pipeline::preprocess(rec);
      pipeline::IcaSettings settings;
      settings.fit_stride = comp_stride;
      const std::string subject = fs::path(comp_in).stem().string();
      const auto stage = pipeline::run_ica(broadband, settings, derive_seed(comp_seed, "ica:" + subject));
      pipeline::FeatureRequest req{"ica", comp_band, std::nullopt, parse_window(comp_window),
                                   ZScope::kPerTrialChannel};
      eval::Dataset ds{subject, "ica", comp_band, 0,
                       std::make_shared<const EpochSet>(pipeline::feature_epochs(broadband, stage, req))};
      eval::SweepConfig sc;
      sc.folds = comp_folds;
      sc.seed = derive_seed(comp_seed, "sweep");
      sc.train = comp_train.config();
      sc.progress = print_progress;
      const auto ks = parse_int_list(comp_k);
      const auto records = eval::component_sweep(ds, ks, comp_model, sc);
      fs::create_directories(comp_out);
      eval::write_results_csv(fs::path(comp_out) / "components.csv", records);
      const auto curve = eval::render_component_curve(eval::aggregate(records), "ica", comp_band,
                                                       nets::build(comp_model, 1, 4096).name);
      std::ofstream(fs::path(comp_out) / "components.txt") << curve;
      std::cout << curve;
    } else if (*ettest_cmd) {
      const auto cells = eval::aggregate(eval::read_results_csv(et_results));
      const eval::Axis axis = et_axis == "model" ? eval::Axis::kModel
                              : et_axis == "band" ? eval::Axis::kBand
                                                  : eval::Axis::kFeature;
      et_fixed.model = nets::build(et_fixed.model, 1, 4096).name;
      std::cout << eval::render_pvalue_matrix(eval::pvalue_matrix(cells, axis, et_fixed), et_alpha);
    } else if (*report_cmd) {
      eval::emit_report(report_out, eval::read_results_csv(report_results));
      std::ifstream summary(fs::path(report_out) / "summary.txt");
      std::cout << summary.rdbuf();
    } else if (*ttest_cmd) {
      const auto a = parse_double_list(tt_a);
      const auto b = parse_double_list(tt_b);
      const auto t = eval::paired_t_one_tailed(a, b);
      std::cout << "t=" << t.t << " df=" << t.df << " p=" << t.p << (t.degenerate ? " degenerate" : "") << '\n';
    } else if (*run_cmd) {
      auto cfg = pipeline::load_pipeline_config(run_config);
      cfg.progress = print_progress;
      const auto result = pipeline::run_pipeline(cfg);
      std::cout << "manifest " << result.manifest.string() << "\nresults " << result.results_csv.string() << '\n';
    } else if (*validate_cmd) {
      pipeline::load_pipeline_config(validate_config).validate();
      std::cout << "config ok\n";
    }
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
