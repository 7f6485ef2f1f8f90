#include <boost/math/distributions/normal.hpp>

#include "test_support.hpp"

using namespace eegwl;
using namespace eegwl::testing;

namespace {

TlxRecord row(const std::string& id, Condition c, int order, double v) {
  TlxRecord r;
  r.subject_id = id;
  r.condition = c;
  r.order = order;
  r.scores.fill(std::clamp(v, 0.0, 100.0));
  return r;
}

/// TLX table: n subjects, intercept SD 16, noise SD 7, counterbalanced order.
std::vector<TlxRecord> tlx_table(std::uint64_t seed, int n, double order_effect, double condition_effect) {
  Rng rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<TlxRecord> out;
  for (int i = 0; i < n; ++i) {
    const auto id = "S" + std::to_string(i);
    const double u = 47 + 16 * N(rng);
    const bool desk_first = i % 2 == 0;
    out.push_back(row(id, Condition::Desktop, desk_first ? 1 : 2, u + (desk_first ? 0 : order_effect) + 7 * N(rng)));
    out.push_back(row(id, Condition::VR, desk_first ? 2 : 1,
                      u + condition_effect + (desk_first ? order_effect : 0) + 7 * N(rng)));
  }
  return out;
}

}  // namespace

TEST(PairedT, ClosedFormThreeDifferences) {
  const std::vector<double> a{1, 2, 3}, b{0, 0, 0};
  const auto r = paired_t_test(a, b);
  EXPECT_NEAR(r.statistic, 2 * std::sqrt(3.0), 1e-12);
  EXPECT_EQ(*r.df, 2.0);
  // df = 2: two-sided p = 1 - t / sqrt(2 + t^2).
  const double t = r.statistic;
  EXPECT_NEAR(r.p_value, 1 - t / std::sqrt(2 + t * t), 1e-12);
  EXPECT_NEAR(r.p_value, 0.0742, 5e-4);
}

TEST(PairedT, DegenerateAndSymmetricCases) {
  const std::vector<double> a{1, 2, 3};
  try {
    paired_t_test(a, a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateVariance);
  }
  const auto r = paired_t_test(std::vector<double>{-1, 1}, std::vector<double>{0, 0});
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
  EXPECT_THROW(paired_t_test(std::vector<double>{1}, std::vector<double>{0}), Error);
}

TEST(PairedT, AntisymmetryAndScaling) {
  const auto a = gaussian(30, 1), b = gaussian(30, 2);
  const auto ab = paired_t_test(a, b), ba = paired_t_test(b, a);
  EXPECT_EQ(ab.statistic, -ba.statistic);
  EXPECT_EQ(ab.p_value, ba.p_value);
  std::vector<double> as(a), bs(b);
  for (auto& v : as) v *= 3.0;
  for (auto& v : bs) v *= 3.0;
  EXPECT_NEAR(paired_t_test(as, bs).statistic, ab.statistic, 1e-12);
  double prev = -1;
  // |t| grows monotonically once the shift has the sign of the mean difference.
  const double sign = ab.statistic >= 0 ? 1.0 : -1.0;
  for (double shift : {0.0, 0.5, 1.0, 2.0}) {
    std::vector<double> s(a);
    for (auto& v : s) v += sign * shift;
    const double t = std::abs(paired_t_test(s, b).statistic);
    EXPECT_GT(t, prev);
    prev = t;
  }
}

TEST(Ks, PlottingPositionsBoundD) {
  for (std::size_t n : {10u, 49u, 200u}) {
    boost::math::normal N;
    std::vector<double> x;
    for (std::size_t i = 0; i < n; ++i) x.push_back(boost::math::quantile(N, (static_cast<double>(i) + 0.5) / static_cast<double>(n)));
    const auto r = ks_normality(x);
    EXPECT_LE(r.statistic, 1.0 / static_cast<double>(n)) << n;
    EXPECT_TRUE(r.parameters_estimated);
  }
}

TEST(Ks, AsymptoticPValueKnownPoint) {
  EXPECT_NEAR(ks_asymptotic_p(0.13, 49), 0.36, 0.01);
  EXPECT_NEAR(kolmogorov_sf(1.36), 0.049, 0.001);
}

TEST(Ks, RejectionRateOnNormals) {
  int rejections = 0;
  const int seeds = 1000;
  for (int s = 0; s < seeds; ++s) rejections += ks_normality(gaussian(500, 5000 + static_cast<std::uint64_t>(s))).p_value < 0.05;
  EXPECT_GE(rejections, 10);
  EXPECT_LE(rejections, 80);
}

TEST(Ks, DetectsSkewAndRejectsDegenerate) {
  auto x = gaussian(200, 3);
  for (auto& v : x) v = std::exp(1.5 * v);
  EXPECT_LT(ks_normality(x).p_value, 0.01);
  EXPECT_THROW(ks_normality(std::vector<double>(10, 2.0)), Error);
  EXPECT_THROW(ks_normality(std::vector<double>{1, 2, 3}), Error);
}

TEST(Carryover, OrderEffectDetected) {
  int detected = 0;
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) {
    const auto r = carryover_analysis(tlx_table(100 + static_cast<std::uint64_t>(s), 50, 10, 0));
    detected += r.order.t_test->p_value < 0.01;
    EXPECT_EQ(r.order.t_test->n, 50u);
  }
  EXPECT_GE(detected, 0.95 * seeds);
}

TEST(Carryover, BalancedTableHasNoBlocker) {
  // Desktop - VR differences cancel in pairs, so both tests give t = 0.
  std::vector<TlxRecord> t;
  for (int k = 0; k < 25; ++k) {
    const double base = 30 + k, delta = 1 + 0.3 * k;
    t.push_back(row("A" + std::to_string(k), Condition::Desktop, 1, base + delta));
    t.push_back(row("A" + std::to_string(k), Condition::VR, 2, base));
    t.push_back(row("B" + std::to_string(k), Condition::Desktop, 1, base));
    t.push_back(row("B" + std::to_string(k), Condition::VR, 2, base + delta));
  }
  const auto r = carryover_analysis(t);
  EXPECT_TRUE(r.no_blocker);
  EXPECT_EQ(r.verdict, "no blocker");
  EXPECT_TRUE(r.condition.normality);
  const auto j = to_json(r);
  EXPECT_EQ(j["verdict"], "no blocker");
}

TEST(Carryover, IdenticalConditionsNoEvidence) {
  std::vector<TlxRecord> t;
  for (int i = 0; i < 10; ++i) {
    t.push_back(row("S" + std::to_string(i), Condition::Desktop, 1 + i % 2, 40 + i));
    t.push_back(row("S" + std::to_string(i), Condition::VR, 2 - i % 2, 40 + i));
  }
  const auto r = carryover_analysis(t);
  EXPECT_EQ(r.verdict, "no evidence computable");
  EXPECT_FALSE(r.no_blocker);
}

TEST(Carryover, IncompletePairs) {
  auto t = tlx_table(1, 10, 0, 0);
  t.pop_back();
  try {
    carryover_analysis(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IncompletePairs);
  }
}
