#pragma once

// Paired t-test, KS normality check and the carryover analysis used to
// justify merging the VR and Desktop sessions.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "labeling.hpp"
#include "random.hpp"

namespace eegwl {

struct TestResult {
  double statistic = 0.0;
  std::optional<double> df;
  double p_value = 1.0;
  std::size_t n = 0;
  double mean_a = 0, sd_a = 0, mean_b = 0, sd_b = 0;
  std::string method;
  // KS only: the asymptotic Kolmogorov p, and the estimated-parameter caveat.
  std::optional<double> p_asymptotic;
  bool parameters_estimated = false;
};

namespace detail {
inline double sample_sd(std::span<const double> x, double mean) {
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}
inline double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}
}  // namespace detail

inline double students_t_two_sided(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

/// t on d = a - b with the n-1 SD; two-sided p.
inline TestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::LengthMismatch, "paired samples differ in length");
  if (a.size() < 2) throw Error(Errc::InvalidArgument, "paired t-test needs n >= 2");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double md = detail::mean(d);
  const double sd = detail::sample_sd(d, md);
  if (!(sd > 0.0)) throw Error(Errc::DegenerateVariance, "all paired differences are equal");
  TestResult r;
  r.method = "paired t-test (two-sided)";
  r.n = n;
  // Divide before multiplying so that swapping a and b flips the sign exactly.
  r.statistic = md / sd * std::sqrt(static_cast<double>(n));
  r.df = static_cast<double>(n - 1);
  r.p_value = students_t_two_sided(r.statistic, *r.df);
  r.mean_a = detail::mean(a);
  r.sd_a = detail::sample_sd(a, r.mean_a);
  r.mean_b = detail::mean(b);
  r.sd_b = detail::sample_sd(b, r.mean_b);
  return r;
}

/// Kolmogorov limiting survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;  // series converges too slowly; Q is 1 to double precision here
  double s = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// Asymptotic p with the small-sample correction lambda = (sqrt n + 0.12 + 0.11/sqrt n) D.
inline double ks_asymptotic_p(double D, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  return kolmogorov_sf((sn + 0.12 + 0.11 / sn) * D);
}

/// sup |F_n - N(mean, sd)| with sample mean and n-1 SD.
inline double ks_statistic_normal(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  std::ranges::sort(s);
  const double m = detail::mean(s);
  const double sd = detail::sample_sd(s, m);
  if (!(sd > 0.0)) throw Error(Errc::DegenerateVariance, "sample has zero variance");
  const double n = static_cast<double>(s.size());
  double D = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = 0.5 * std::erfc(-(s[i] - m) / (sd * std::numbers::sqrt2));
    D = std::max({D, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  return D;
}

inline constexpr int kLillieforsReplicates = 2000;

/// Sorted null distribution of D under estimated normal parameters, simulated
/// once per n from a seed fixed by n.
inline const std::vector<double>& lilliefors_null(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::vector<double>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Rng rng(derive_seed(hash_string("lilliefors"), {n}));
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> null(kLillieforsReplicates), x(n);
  for (auto& d : null) {
    for (auto& v : x) v = N(rng);
    d = ks_statistic_normal(x);
  }
  std::ranges::sort(null);
  return cache.emplace(n, std::move(null)).first->second;
}

/// KS test of normality. p_value is the Monte Carlo Lilliefors p, which
/// accounts for the estimated mean and SD; p_asymptotic is the plain
/// Kolmogorov p with the same D.
inline TestResult ks_normality(std::span<const double> x) {
  if (x.size() < 5) throw Error(Errc::InvalidArgument, "KS normality needs n >= 5");
  TestResult r;
  r.method = "Kolmogorov-Smirnov vs fitted normal";
  r.n = x.size();
  r.statistic = ks_statistic_normal(x);
  r.mean_a = detail::mean(x);
  r.sd_a = detail::sample_sd(x, r.mean_a);
  r.parameters_estimated = true;
  r.p_asymptotic = ks_asymptotic_p(r.statistic, x.size());
  const auto& null = lilliefors_null(x.size());
  const auto ge = null.end() - std::ranges::lower_bound(null, r.statistic);
  r.p_value = (1.0 + static_cast<double>(ge)) / (1.0 + static_cast<double>(null.size()));
  return r;
}

// Carryover ------------------------------------------------------------------------

struct PairedCheck {
  std::optional<TestResult> normality;
  std::optional<TestResult> t_test;
  std::string note;  // set when the test could not be computed
};

struct CarryoverResult {
  PairedCheck condition;  // Desktop - VR
  PairedCheck order;      // first - second exposure
  bool no_blocker = false;
  std::string verdict;
};

inline PairedCheck paired_check(const std::vector<double>& a, const std::vector<double>& b) {
  PairedCheck c;
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  try {
    c.normality = ks_normality(d);
  } catch (const Error& e) {
    c.note = std::string("normality: ") + e.what();
  }
  try {
    c.t_test = paired_t_test(a, b);
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateVariance) throw;
    c.note = "no evidence computable: " + std::string(e.what());
  }
  return c;
}

/// Pairs each subject's Desktop and VR scores (aggregated over `subset`) and
/// tests condition and exposure-order differences.
inline CarryoverResult carryover_analysis(std::span<const TlxRecord> tlx,
                                          const SubscaleSet& subset = SubscaleSet::full()) {
  std::map<std::string, std::array<const TlxRecord*, 2>> by_subject;
  for (const auto& r : tlx) {
    validate(r);
    auto& slot = by_subject[r.subject_id][r.condition == Condition::Desktop ? 0 : 1];
    if (slot) throw Error(Errc::IncompletePairs, "subject " + r.subject_id + " has a repeated condition");
    slot = &r;
  }
  std::vector<double> desk, vr, first, second;
  for (const auto& [id, p] : by_subject) {
    if (!p[0] || !p[1])
      throw Error(Errc::IncompletePairs,
                  "subject " + id + " lacks a " + std::string(p[0] ? "VR" : "Desktop") + " session");
    if (p[0]->order == p[1]->order)
      throw Error(Errc::IncompletePairs, "subject " + id + " has no distinct exposure order");
    const double sd = aggregate_subscales(*p[0], subset);
    const double sv = aggregate_subscales(*p[1], subset);
    desk.push_back(sd);
    vr.push_back(sv);
    const bool desk_first = p[0]->order < p[1]->order;
    first.push_back(desk_first ? sd : sv);
    second.push_back(desk_first ? sv : sd);
  }
  CarryoverResult out;
  out.condition = paired_check(desk, vr);
  out.order = paired_check(first, second);
  if (!out.condition.t_test || !out.order.t_test) {
    out.verdict = "no evidence computable";
  } else {
    out.no_blocker = out.condition.t_test->p_value >= 0.05 && out.order.t_test->p_value >= 0.05;
    out.verdict = out.no_blocker ? "no blocker" : "blocker";
  }
  return out;
}

inline nlohmann::json to_json(const TestResult& r) {
  nlohmann::json j = {{"method", r.method}, {"statistic", r.statistic}, {"p_value", r.p_value}, {"n", r.n},
                      {"mean_a", r.mean_a}, {"sd_a", r.sd_a}};
  j["df"] = r.df ? nlohmann::json(*r.df) : nlohmann::json(nullptr);
  if (r.df) {
    j["mean_b"] = r.mean_b;
    j["sd_b"] = r.sd_b;
  }
  if (r.p_asymptotic) {
    j["p_asymptotic"] = *r.p_asymptotic;
    j["caveat"] = "mean and SD estimated from the sample; p_value uses the Lilliefors null, "
                  "p_asymptotic the plain Kolmogorov distribution";
  }
  return j;
}

inline nlohmann::json to_json(const CarryoverResult& c) {
  auto check = [](const PairedCheck& p) {
    nlohmann::json j = nlohmann::json::object();
    j["normality"] = p.normality ? to_json(*p.normality) : nlohmann::json(nullptr);
    j["t_test"] = p.t_test ? to_json(*p.t_test) : nlohmann::json(nullptr);
    if (!p.note.empty()) j["note"] = p.note;
    return j;
  };
  return {{"schema", "STAT1"},
          {"condition", check(c.condition)},
          {"order", check(c.order)},
          {"verdict", c.verdict}};
}

}  // namespace eegwl
