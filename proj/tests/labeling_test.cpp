#include <sstream>

#include "test_support.hpp"

using namespace eegwl;
using namespace eegwl::testing;

namespace {

struct LmmInput {
  std::vector<double> y;
  std::vector<int> cond, task;
  std::vector<std::string> subj;
};

/// Two observations per subject (condition 0/1). `task_within` alternates the
/// task inside each subject, otherwise task is a between-subject factor.
LmmInput simulate(int n_subjects, double sg2, double s2, double b1, std::uint64_t seed, bool task_within = false,
                  double b2 = 0.0) {
  Rng rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  LmmInput in;
  for (int i = 0; i < n_subjects; ++i) {
    const double u = std::sqrt(sg2) * N(rng);
    for (int c = 0; c < 2; ++c) {
      const int t = task_within ? (c ^ ((i / 2) % 2)) : i % 2;
      in.y.push_back(50 + b1 * c + b2 * t + u + std::sqrt(s2) * N(rng));
      in.cond.push_back(c);
      in.task.push_back(t);
      in.subj.push_back("S" + std::to_string(i));
    }
  }
  return in;
}

MixedModelFit fit(const LmmInput& in) { return fit_random_intercept_lmm(in.y, in.cond, in.task, in.subj); }

TlxRecord tlx(std::string id, Condition c, std::array<double, 6> s, int order = 1) {
  TlxRecord r;
  r.subject_id = std::move(id);
  r.condition = c;
  r.order = order;
  r.scores = s;
  return r;
}

double between_subject_variance(const std::vector<double>& v) {
  std::vector<double> means;
  for (std::size_t i = 0; i + 1 < v.size(); i += 2) means.push_back(0.5 * (v[i] + v[i + 1]));
  const double m = mean_of(means);
  double ss = 0;
  for (double x : means) ss += (x - m) * (x - m);
  return ss / static_cast<double>(means.size() - 1);
}

}  // namespace

TEST(Aggregate, EqualWeightMean) {
  const auto r = tlx("S1", Condition::VR, {60, 40, 90, 50, 50, 10});
  EXPECT_DOUBLE_EQ(aggregate_subscales(r, SubscaleSet::four_scale()), 50.0);
  EXPECT_DOUBLE_EQ(aggregate_subscales(tlx("S1", Condition::VR, {100, 100, 100, 100, 100, 100}), SubscaleSet::full()), 100.0);
  EXPECT_EQ(SubscaleSet::four_scale().to_string(), "md,pd,perf,effort");
}

TEST(Aggregate, MemberOrderIrrelevant) {
  const auto r = tlx("S1", Condition::VR, {13, 27, 31, 47, 59, 61});
  EXPECT_EQ(SubscaleSet::parse("effort,md,td"), SubscaleSet::parse("td,effort,md"));
  EXPECT_DOUBLE_EQ(aggregate_subscales(r, SubscaleSet{Subscale::Effort, Subscale::MentalDemand}),
                   aggregate_subscales(r, SubscaleSet{Subscale::MentalDemand, Subscale::Effort}));
  EXPECT_EQ(all_subscale_sets().size(), 63u);
  EXPECT_THROW(SubscaleSet::parse(""), Error);
  EXPECT_THROW(SubscaleSet::parse("md,bogus"), Error);
}

TEST(Lmm, BalancedDesignMatchesAnovaEstimator) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto in = simulate(40, 200, 50, 4, seed);
    const auto f = fit(in);
    // Within-subject contrast gives sigma^2; subject means regressed on the
    // between-subject task factor give sigma_g^2 + sigma^2 / 2.
    const std::size_t n = in.y.size() / 2;
    std::vector<double> d(n), m(n);
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = in.y[2 * i + 1] - in.y[2 * i];
      m[i] = 0.5 * (in.y[2 * i] + in.y[2 * i + 1]);
    }
    const double dbar = mean_of(d);
    double ssd = 0;
    for (double v : d) ssd += (v - dbar) * (v - dbar);
    const double s2 = ssd / static_cast<double>(n - 1) / 2.0;
    double g0 = 0, g1 = 0, n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < n; ++i) (i % 2 ? g1 : g0) += m[i], (i % 2 ? n1 : n0) += 1;
    g0 /= n0, g1 /= n1;
    double ssb = 0;
    for (std::size_t i = 0; i < n; ++i) ssb += std::pow(m[i] - (i % 2 ? g1 : g0), 2);
    const double sg2 = ssb / static_cast<double>(n - 2) - s2 / 2.0;
    ASSERT_GT(sg2, 0.0);
    EXPECT_NEAR(f.residual_variance, s2, 1e-6 * s2) << seed;
    EXPECT_NEAR(f.group_variance, sg2, 1e-6 * sg2) << seed;
    EXPECT_NEAR(f.fixed[1].coef, dbar, 1e-6) << seed;
    EXPECT_NEAR(f.fixed[2].coef, g1 - g0, 1e-6) << seed;
  }
}

TEST(Lmm, NoGroupEffectHitsBoundary) {
  // Subject means identical by construction.
  LmmInput in;
  Rng rng(4);
  std::normal_distribution<double> N(0.0, 5.0);
  for (int i = 0; i < 30; ++i) {
    const double e = N(rng);
    for (int c = 0; c < 2; ++c) {
      in.y.push_back(50 + 3 * c + (c ? e : -e));
      in.cond.push_back(c);
      in.task.push_back(c ^ (i % 2));
      in.subj.push_back("S" + std::to_string(i));
    }
  }
  const auto f = fit(in);
  EXPECT_LE(f.group_variance, 1e-3 * f.residual_variance);
}

TEST(Lmm, RecoveryAgainstSamplingDistribution) {
  // 50 subjects x 2, sigma_g^2 = 260, sigma^2 = 50, beta_1 = 4. The condition
  // effect is covered at the nominal rate; the variance component is unbiased
  // but its spread (SD ~ 22%) caps the 25%-band hit rate near 0.75.
  int beta_hits = 0, sg_hits = 0;
  double sg_sum = 0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    const auto f = fit(simulate(50, 260, 50, 4, 1000 + static_cast<std::uint64_t>(s), true));
    beta_hits += std::abs(f.fixed[1].coef - 4) <= 2 * f.fixed[1].se;
    sg_hits += std::abs(f.group_variance - 260) <= 0.25 * 260;
    sg_sum += f.group_variance;
  }
  EXPECT_GE(beta_hits, 0.9 * seeds);
  EXPECT_NEAR(sg_sum / seeds, 260, 0.08 * 260);
  EXPECT_GT(sg_hits, 0.6 * seeds);
  EXPECT_LT(sg_hits, 0.88 * seeds);
}

TEST(Lmm, CollinearDesignRejected) {
  auto in = simulate(10, 100, 50, 4, 2);
  in.task = in.cond;
  try {
    fit(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SingularDesign);
  }
}

TEST(Residuals, DefinitionAndZeroMean) {
  const auto in = simulate(49, 258.82, 50, 3.87, 7, true, 0.14);
  const auto f = fit(in);
  double sum = 0;
  for (std::size_t i = 0; i < in.y.size(); ++i) {
    const double pred = f.fixed[0].coef + f.fixed[1].coef * in.cond[i] + f.fixed[2].coef * in.task[i];
    EXPECT_NEAR(f.residuals[i], in.y[i] - pred - f.intercepts[f.group[i]], 1e-9);
    sum += f.residuals[i];
  }
  double sd = 0;
  for (double v : in.y) sd += std::pow(v - mean_of(in.y), 2);
  sd = std::sqrt(sd / static_cast<double>(in.y.size()));
  EXPECT_LT(std::abs(sum / static_cast<double>(in.y.size())), 1e-6 * sd);
}

TEST(Residuals, SubjectOffsetMostlyAbsorbed) {
  auto in = simulate(49, 258.82, 50, 3.87, 8, true);
  const auto before = fit(in);
  const double c = 10;
  in.y[0] += c;
  in.y[1] += c;
  const auto after = fit(in);
  EXPECT_LT(std::abs(after.residuals[0] - before.residuals[0]), c / 2);
  EXPECT_LT(std::abs(after.residuals[1] - before.residuals[1]), c / 2);
}

TEST(Residuals, IdentitySignalRemoved) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto in = simulate(49, 400, 50, 4, seed, true);
    const auto f = fit(in);
    EXPECT_LE(between_subject_variance(f.residuals), 0.2 * between_subject_variance(in.y)) << seed;
  }
}

TEST(MedianSplit, Examples) {
  const std::vector<double> v{-1, 0, 1, 2};
  const auto s = median_split(v);
  EXPECT_DOUBLE_EQ(s.threshold, 0.5);
  EXPECT_EQ(s.labels, (std::vector<WorkloadLabel>{WorkloadLabel::Low, WorkloadLabel::Low, WorkloadLabel::High,
                                                 WorkloadLabel::High}));
  const auto odd = median_split(std::vector<double>{3, 1, 2});
  EXPECT_EQ(odd.n_low, 2u);
  EXPECT_EQ(odd.n_high, 1u);
  EXPECT_FALSE(odd.warning);
  EXPECT_THROW(median_split(std::vector<double>{4, 4, 4}), Error);
  const auto tied = median_split(std::vector<double>{1, 1, 1, 1, 2, 3});
  EXPECT_TRUE(tied.warning);
  EXPECT_EQ(tied.n_low, 4u);
}

TEST(MedianSplit, NinetyEightDistinctValuesBalance) {
  const auto x = gaussian(98, 3);
  const auto s = median_split(x);
  EXPECT_EQ(s.n_low, 49u);
  EXPECT_EQ(s.n_high, 49u);
}

TEST(MedianSplit, AffineInvariance) {
  const auto x = gaussian(51, 4);
  std::vector<double> y(x);
  for (auto& v : y) v = 3.5 * v - 17;
  EXPECT_EQ(median_split(x).labels, median_split(y).labels);
}

TEST(TlxCsv, RoundTripAndValidation) {
  std::vector<TlxRecord> rows{tlx("S01", Condition::Desktop, {10, 20, 30, 40, 50, 60}, 1),
                              tlx("S01", Condition::VR, {15.5, 25, 35, 45, 55, 65}, 2)};
  rows[1].task = Task::SpeedChange;
  std::stringstream ss;
  write_tlx_csv(ss, rows);
  const auto back = read_tlx_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].task, Task::SpeedChange);
  EXPECT_EQ(back[1].order, 2);
  EXPECT_DOUBLE_EQ(back[1].scores[0], 15.5);

  std::stringstream bad(std::string(kTlxHeader) + "\nS01,VR,MediumTurn,1,10,20,30,40,50,160\n");
  EXPECT_THROW(read_tlx_csv(bad), Error);
  std::stringstream short_row(std::string(kTlxHeader) + "\nS01,VR,MediumTurn,1,10\n");
  EXPECT_THROW(read_tlx_csv(short_row), Error);
}

TEST(LabelSet, JsonRoundTrip) {
  std::vector<TlxRecord> rows;
  const auto in = simulate(20, 200, 50, 4, 9, true);
  for (std::size_t i = 0; i < in.y.size(); ++i) {
    double v = std::clamp(in.y[i], 0.0, 100.0);
    auto r = tlx(in.subj[i], in.cond[i] ? Condition::VR : Condition::Desktop, {v, v, v, v, v, v}, 1 + in.cond[i]);
    r.task = in.task[i] ? Task::SpeedChange : Task::MediumTurn;
    rows.push_back(r);
  }
  const auto ls = make_labels(rows, SubscaleSet::four_scale());
  const auto j = to_json(ls);
  EXPECT_EQ(j["schema"], "LBL1");
  EXPECT_EQ(j["model"]["estimation"], "REML");
  const auto back = labels_from_json(nlohmann::json::parse(j.dump()));
  ASSERT_EQ(back.size(), rows.size());
  std::size_t low = 0;
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].label, ls.split.labels[i]);
    low += back[i].label == WorkloadLabel::Low;
  }
  EXPECT_EQ(low, rows.size() / 2);
}
