#include "neuroair/error.hpp"
#include "neuroair/eval.hpp"
#include "neuroair/seed.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace neuroair::eval {

FoldPlan make_folds(std::span<const int> labels, int k, std::uint64_t seed, double val_fraction) {
  require(k >= 2, ErrorCode::kInvalidArgument, "make_folds: need k >= 2");
  require(val_fraction >= 0.0 && val_fraction < 1.0, ErrorCode::kInvalidArgument,
          "make_folds: val_fraction must lie in [0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  require(!by_class.empty(), ErrorCode::kInvalidArgument, "make_folds: no trials");

  std::ostringstream bad;
  for (const auto& [label, idx] : by_class) {
    if (idx.size() % static_cast<std::size_t>(k) != 0) {
      bad << " class " << label << ": " << idx.size() << " trials, remainder "
          << idx.size() % static_cast<std::size_t>(k) << ";";
    }
  }
  require(bad.str().empty(), ErrorCode::kInvalidArgument,
          "make_folds: class counts not divisible by " + std::to_string(k) + ":" + bad.str());

  std::mt19937_64 rng(derive_seed(seed, "folds"));
  for (auto& [label, idx] : by_class) std::shuffle(idx.begin(), idx.end(), rng);

  FoldPlan plan;
  plan.folds.resize(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    Fold& fold = plan.folds[static_cast<std::size_t>(f)];
    std::mt19937_64 val_rng(derive_seed(seed, static_cast<std::uint64_t>(f) + 1));
    for (const auto& [label, idx] : by_class) {
      const std::size_t per = idx.size() / static_cast<std::size_t>(k);
      std::vector<std::size_t> rest;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        if (j / per == static_cast<std::size_t>(f)) {
          fold.test.push_back(idx[j]);
        } else {
          rest.push_back(idx[j]);
        }
      }
      std::shuffle(rest.begin(), rest.end(), val_rng);
      const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(rest.size())));
      fold.val.insert(fold.val.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
      fold.train.insert(fold.train.end(), rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    }
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.val.begin(), fold.val.end());
    std::sort(fold.test.begin(), fold.test.end());
  }
  return plan;
}

}  // namespace neuroair::eval
