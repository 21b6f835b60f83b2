#include "neuroair/error.hpp"
#include "neuroair/eval.hpp"
#include "neuroair/ica.hpp"
#include "neuroair/seed.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <thread>

namespace neuroair::eval {

namespace {

struct Job {
  std::size_t dataset = 0;
  std::size_t model = 0;
  int fold = 0;
};

ResultRecord run_job(const Dataset& ds, const std::string& model, int fold, const FoldPlan& plan,
                     const SweepConfig& cfg) {
  ResultRecord rec{ds.subject, ds.feature, ds.band, model, ds.order, fold, 0.0, 0, Status::kOk, ""};
  try {
    const Fold& f = plan.folds.at(static_cast<std::size_t>(fold));
    rec.n_test = f.test.size();
    const EpochSet train_set = ds.epochs->subset(f.train);
    const EpochSet val_set = ds.epochs->subset(f.val);
    const EpochSet test_set = ds.epochs->subset(f.test);
    const auto spec = nets::build(model, static_cast<int>(ds.epochs->channels()),
                                  static_cast<int>(ds.epochs->samples()));
    nets::TrainConfig tc = cfg.train;
    // The seed ignores feature and order so a full component subset
    // reproduces the plain ICA cell.
    tc.seed = derive_seed(cfg.seed, "train:" + ds.subject + ":" + ds.band + ":" + spec.name + ":" +
                                        std::to_string(fold));
    auto trained = nets::train(spec, train_set, val_set, tc);
    rec.accuracy = nets::evaluate(*trained.net, test_set, tc.batch_size).accuracy;
  } catch (const std::exception& e) {
    rec.status = Status::kFailed;
    rec.accuracy = 0.0;
    rec.message = e.what();
  }
  return rec;
}

}  // namespace

std::vector<ResultRecord> run_sweep(const std::vector<Dataset>& datasets,
                                    const std::vector<std::string>& models, const SweepConfig& cfg) {
  require(cfg.folds >= 2, ErrorCode::kConfig, "sweep: need at least 2 folds");
  require(!models.empty() && !datasets.empty(), ErrorCode::kConfig, "sweep: nothing to run");
  cfg.train.validate();
  std::vector<std::string> names;  // canonical, so aliases share cells
  for (const auto& m : models) names.push_back(nets::build(m, 1, 4096).name);

  // One fold plan per subject so every cell of a subject shares its splits.
  std::map<std::string, FoldPlan> plans;
  for (const auto& ds : datasets) {
    require(ds.epochs != nullptr, ErrorCode::kConfig, "sweep: dataset without epochs");
    auto it = plans.find(ds.subject);
    if (it == plans.end()) {
      plans.emplace(ds.subject, make_folds(ds.epochs->labels(), cfg.folds,
                                           derive_seed(cfg.seed, "folds:" + ds.subject), cfg.val_fraction));
    } else {
      require(it->second.folds.front().test.size() + it->second.folds.front().train.size() +
                      it->second.folds.front().val.size() == ds.epochs->trials(),
              ErrorCode::kConfig, "sweep: datasets of subject " + ds.subject + " differ in trial count");
    }
  }

  std::vector<Job> jobs;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      for (int f = 0; f < cfg.folds; ++f) jobs.push_back({d, m, f});
    }
  }
  std::vector<ResultRecord> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      const Dataset& ds = datasets[job.dataset];
      results[j] = run_job(ds, names[job.model], job.fold, plans.at(ds.subject), cfg);
      if (cfg.progress) {
        std::lock_guard lock(progress_mutex);
        cfg.progress(results[j]);
      }
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(cfg.workers ? cfg.workers : worker_count(),
                                                              static_cast<unsigned>(jobs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

std::vector<ResultRecord> component_sweep(const Dataset& ica, std::span<const int> k_values,
                                          const std::string& model, const SweepConfig& cfg) {
  require(ica.epochs != nullptr, ErrorCode::kConfig, "component sweep: dataset without epochs");
  std::vector<Dataset> sets;
  for (int k : k_values) {
    require(k >= 1 && static_cast<std::size_t>(k) <= ica.epochs->channels(), ErrorCode::kInvalidArgument,
            "component sweep: k=" + std::to_string(k) + " outside [1, " +
                std::to_string(ica.epochs->channels()) + "]");
    Dataset d = ica;
    d.order = k;
    d.epochs = std::make_shared<const EpochSet>(ica::component_subset(*ica.epochs, static_cast<std::size_t>(k)));
    sets.push_back(std::move(d));
  }
  return run_sweep(sets, {model}, cfg);
}

std::vector<CellSummary> aggregate(const std::vector<ResultRecord>& records) {
  struct Acc {
    std::map<std::string, std::pair<double, std::size_t>> per_subject;
    std::size_t ok = 0;
    std::size_t failed = 0;
  };
  std::map<CellKey, Acc> cells;
  for (const auto& r : records) {
    Acc& a = cells[{r.feature, r.band, r.model, r.order}];
    auto& s = a.per_subject[r.subject];
    if (r.status == Status::kOk) {
      s.first += r.accuracy;
      s.second += 1;
      ++a.ok;
    } else {
      ++a.failed;
    }
  }
  std::vector<CellSummary> out;
  for (const auto& [key, a] : cells) {
    CellSummary c;
    c.key = key;
    c.folds_ok = a.ok;
    c.folds_failed = a.failed;
    double total = 0.0;
    for (const auto& [subject, sum] : a.per_subject) {
      if (sum.second == 0) continue;
      c.subjects.push_back(subject);
      c.subject_means.push_back(sum.first / static_cast<double>(sum.second));
      total += c.subject_means.back();
    }
    c.mean = c.subject_means.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : total / static_cast<double>(c.subject_means.size());
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace neuroair::eval
