#pragma once

#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eegwl/eegwl.hpp"

namespace eegwl::testing {

inline constexpr double kPi = std::numbers::pi;

inline std::vector<double> sine(std::size_t n, double fs, double f, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::cos(2 * kPi * f * static_cast<double>(i) / fs + phase);
  return x;
}

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> N(0.0, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = N(rng);
  return x;
}

inline Recording make_recording(const std::vector<Channel>& montage, std::size_t n, double fs, std::uint64_t seed) {
  Recording r;
  r.subject_id = "S01";
  r.fs = fs;
  r.channels = montage;
  r.samples.resize(static_cast<Eigen::Index>(montage.size()), static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < montage.size(); ++c) {
    const auto x = gaussian(n, derive_seed(seed, {c}));
    for (std::size_t i = 0; i < n; ++i) r.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = x[i];
  }
  return r;
}

/// Direct O(n^2) one-sided periodogram, no window, mean removed.
inline double brute_force_band_log_power(const std::vector<double>& x, double fs, double lo, double hi) {
  const std::size_t n = x.size();
  double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  std::vector<std::complex<double>> twiddle(n);
  for (std::size_t m = 0; m < n; ++m)
    twiddle[m] = std::polar(1.0, -2 * kPi * static_cast<double>(m) / static_cast<double>(n));
  double sum = 0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    if (f < lo || f >= hi) continue;
    std::complex<double> acc = 0;
    std::size_t m = 0;
    for (std::size_t t = 0; t < n; ++t, m = (m + k) % n) acc += (x[t] - mean) * twiddle[m];
    double p = std::norm(acc) / (fs * static_cast<double>(n));
    if (k != 0 && !(n % 2 == 0 && k == n / 2)) p *= 2;
    sum += p;
  }
  return std::log(sum);
}

/// n x d standard normal matrix.
inline Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = N(rng);
  return X;
}

inline FeatureMatrix make_matrix(const Eigen::MatrixXd& X, const std::vector<int>& y) {
  FeatureMatrix fm;
  fm.values = X;
  fm.labels = y;
  for (Eigen::Index j = 0; j < X.cols(); ++j) fm.names.push_back("f" + std::to_string(j));
  return fm;
}

/// Planted RFE instance: label = sign(f0 + f1), remaining columns noise.
inline FeatureMatrix planted_rfe_instance(std::uint64_t seed, Eigen::Index n = 200, Eigen::Index d = 72) {
  const auto X = random_matrix(n, d, seed);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = X(i, 0) + X(i, 1) > 0 ? 1 : 0;
  return make_matrix(X, y);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("eegwl_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace eegwl::testing
