#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "error.hpp"

namespace eegwl {

inline double accuracy(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size() || truth.empty())
    throw Error(Errc::ShapeMismatch, "accuracy inputs differ in length");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

/// Binary F1 with High (1) as the positive class; 0 when undefined.
inline double f1_score(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw Error(Errc::ShapeMismatch, "f1 inputs differ in length");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    tp += truth[i] == 1 && pred[i] == 1;
    fp += truth[i] == 0 && pred[i] == 1;
    fn += truth[i] == 1 && pred[i] == 0;
  }
  const double denom = 2 * tp + fp + fn;
  return denom > 0 ? 2 * tp / denom : 0.0;
}

inline double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Population standard deviation (divides by n).
inline double sd_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace eegwl
