#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace eegwl {

/// Binary class labels: 0 = Low, 1 = High.
using Labels = std::vector<int>;

struct FoldPlan {
  int k = 0;
  std::vector<int> assignment;  // fold index per sample
  std::uint64_t seed = 0;

  std::vector<std::size_t> members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> complement(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] != fold) out.push_back(i);
    return out;
  }
};

namespace detail {

inline std::map<int, std::vector<std::size_t>> by_class(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

}  // namespace detail

/// Per-class seeded shuffle, then round-robin over folds. The fold cursor
/// carries over between classes so fold sizes differ by at most one.
inline FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidArgument, "k must be >= 2");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(labels.size(), -1);
  Rng rng(seed);
  int cursor = 0;
  for (auto& [cls, idx] : detail::by_class(labels)) {
    if (idx.size() < static_cast<std::size_t>(k))
      throw Error(Errc::ClassSmallerThanK, "class " + std::to_string(cls) + " has " +
                                               std::to_string(idx.size()) + " samples for k=" +
                                               std::to_string(k));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (auto i : idx) {
      plan.assignment[i] = cursor;
      cursor = (cursor + 1) % k;
    }
  }
  return plan;
}

/// Sum of fold sizes equals n and, within every fold, class counts differ
/// from perfect stratification by at most one.
inline bool fold_plan_valid(const FoldPlan& plan, std::span<const int> labels) {
  if (plan.assignment.size() != labels.size()) return false;
  std::map<int, std::vector<int>> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int f = plan.assignment[i];
    if (f < 0 || f >= plan.k) return false;
    auto& c = counts[labels[i]];
    c.resize(static_cast<std::size_t>(plan.k), 0);
    ++c[static_cast<std::size_t>(f)];
  }
  for (auto& [cls, c] : counts) {
    const auto [lo, hi] = std::ranges::minmax(c);
    if (hi - lo > 1) return false;
  }
  return true;
}

struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified holdout: each class contributes round(test_fraction * n_class)
/// samples to the test side.
inline TrainTestSplit split_80_20(std::span<const int> labels, std::uint64_t seed,
                                  double test_fraction = 0.2) {
  if (labels.size() < 10) throw Error(Errc::ClassTooSmall, "need at least 10 samples");
  auto classes = detail::by_class(labels);
  if (classes.size() < 2) throw Error(Errc::ClassTooSmall, "only one class present");
  Rng rng(seed);
  TrainTestSplit out;
  for (auto& [cls, idx] : classes) {
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * idx.size()));
    if (n_test == 0 || n_test >= idx.size())
      throw Error(Errc::ClassTooSmall, "class " + std::to_string(cls) + " too small to split");
    std::shuffle(idx.begin(), idx.end(), rng);
    out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::ranges::sort(out.train);
  std::ranges::sort(out.test);
  return out;
}

}  // namespace eegwl
