#include "test_support.hpp"

using namespace eegwl;
using namespace eegwl::testing;

namespace {

/// Gradient descent with step 1/L on the (C^1, strongly convex) squared-hinge primal.
double reference_objective(const Eigen::MatrixXd& X, const std::vector<int>& y, double C) {
  const Eigen::Index n = X.rows(), d = X.cols();
  Eigen::MatrixXd Xt(n, d + 1);
  Xt << X, Eigen::VectorXd::Ones(n);
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
  const double L = 1.0 + 2.0 * C * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Xt.transpose() * Xt).eigenvalues().maxCoeff();
  Eigen::VectorXd th = Eigen::VectorXd::Zero(d + 1);
  for (int it = 0; it < 50000; ++it) {
    const Eigen::VectorXd m = (1.0 - (s.array() * (Xt * th).array())).max(0.0);
    const Eigen::VectorXd g = th - 2.0 * C * Xt.transpose() * (s.array() * m.array()).matrix();
    th -= g / L;
    if (g.norm() < 1e-12) break;
  }
  return squared_hinge_objective(X, y, th.head(d), th(d), C);
}

std::vector<int> labels_from(const Eigen::MatrixXd& X, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < X.rows(); ++i) y.push_back(X(i, 0) - 0.5 * X(i, 1) + 0.7 * N(rng) > 0);
  return y;
}

int evictions(const std::vector<std::string>& before, const std::vector<std::string>& after) {
  int out = 0;
  for (const auto& f : before) out += std::ranges::find(after, f) == after.end();
  return out;
}

}  // namespace

TEST(LinearSvm, OneDimensionalSymmetricCase) {
  Eigen::MatrixXd X(2, 1);
  X << 1, -1;
  const std::vector<int> y{1, 0};
  const auto m = fit_linear_svm(X, y, {1e4});
  EXPECT_GT(m.weights(0), 0.0);
  EXPECT_NEAR(m.bias, 0.0, 1e-6);
  EXPECT_GT(m.decision(X.row(0)), 0.0);
  EXPECT_LT(m.decision(X.row(1)), 0.0);
}

TEST(LinearSvm, DuplicatedColumnsShareWeight) {
  Eigen::MatrixXd X = random_matrix(80, 4, 1);
  X.col(3) = X.col(0);
  const auto y = labels_from(X, 2);
  const auto m = fit_linear_svm(X, y, {1.0, 30000, 1e-8});
  EXPECT_NEAR(m.weights(0), m.weights(3), 1e-6);
}

TEST(LinearSvm, ObjectiveMatchesSlowReference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto X = random_matrix(50, 10, 10 + seed);
    const auto y = labels_from(X, 20 + seed);
    for (double C : {0.1, 1.0}) {
      const auto m = fit_linear_svm(X, y, {C, 30000, 1e-6});
      EXPECT_TRUE(m.converged);
      const double ref = reference_objective(X, y, C);
      EXPECT_NEAR(m.objective, ref, 1e-3 * ref) << seed << " C=" << C;
      EXPECT_GE(m.duality_gap, -1e-9);
    }
  }
}

TEST(LinearSvm, SingleClassRejected) {
  const auto X = random_matrix(10, 2, 3);
  try {
    fit_linear_svm(X, std::vector<int>(10, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SingleClassInput);
  }
}

TEST(Rfe, KeepAllIsNoOp) {
  const auto fm = planted_rfe_instance(1, 60, 6);
  RfeConfig cfg;
  cfg.n_select = 6;
  const auto r = rfe(fm, cfg);
  EXPECT_TRUE(r.eliminated.empty());
  EXPECT_EQ(r.ranking.size(), 6u);
}

TEST(Rfe, PlantedFeaturesRecovered) {
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto r = rfe(planted_rfe_instance(seed), {});
    ASSERT_EQ(r.selected.size(), 8u);
    ASSERT_EQ(r.ranking.size(), 72u);
    hits += std::ranges::find(r.selected, "f0") != r.selected.end() &&
            std::ranges::find(r.selected, "f1") != r.selected.end();
  }
  EXPECT_GE(hits, 8);
}

TEST(Rfe, TiesBreakByName) {
  // "a" and "b" are identical columns, so their weights tie exactly.
  Eigen::MatrixXd X = random_matrix(60, 3, 4);
  X.col(2) = X.col(1);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < X.rows(); ++i) y.push_back(X(i, 0) > 0);
  FeatureMatrix fm = make_matrix(X, y);
  fm.names = {"signal", "b", "a"};
  RfeConfig cfg;
  cfg.n_select = 2;
  const auto r = rfe(fm, cfg);
  ASSERT_EQ(r.eliminated.size(), 1u);
  EXPECT_EQ(r.eliminated[0], "a");
  ASSERT_EQ(r.tie_events.size(), 1u);
  EXPECT_EQ(r.tie_events[0].tied_with, "b");
}

TEST(Rfe, DeterministicSerialization) {
  const auto fm = planted_rfe_instance(5, 100, 20);
  RfeConfig cfg;
  cfg.estimator.seed = 42;
  EXPECT_EQ(to_json(rfe(fm, cfg), cfg).dump(), to_json(rfe(fm, cfg), cfg).dump());
}

TEST(Rfe, AppendedNoiseColumnKeepsInformativeFeatures) {
  // The six non-informative slots of the selected 8 are exchangeable noise
  // picks, so an extra column reshuffles them freely (<= 1 eviction in only
  // ~60% of trials). The informative pair must never be evicted.
  int small = 0;
  const int trials = 10;
  for (int s = 0; s < trials; ++s) {
    const auto fm = planted_rfe_instance(100 + static_cast<std::uint64_t>(s));
    const auto before = rfe(fm, {});
    auto wider = fm;
    wider.values.conservativeResize(Eigen::NoChange, fm.values.cols() + 1);
    wider.values.col(fm.values.cols()) = random_matrix(fm.values.rows(), 1, 900 + static_cast<std::uint64_t>(s));
    wider.names.push_back("extra");
    const auto after = rfe(wider, {}).selected;
    EXPECT_TRUE(std::ranges::count(after, "f0") && std::ranges::count(after, "f1")) << s;
    small += evictions(before.selected, after) <= 1;
  }
  EXPECT_GE(small, 3);
}

TEST(Rfe, ColumnRescalingLeavesRankingUnchanged) {
  const auto fm = planted_rfe_instance(7, 120, 16);
  auto scaled = fm;
  scaled.values.col(3) *= 250.0;
  scaled.values.col(0) *= 0.01;
  EXPECT_EQ(rfe(fm, {}).ranking, rfe(scaled, {}).ranking);
}

TEST(Rfe, InvalidSelectionSize) {
  const auto fm = planted_rfe_instance(1, 40, 5);
  RfeConfig cfg;
  cfg.n_select = 6;
  EXPECT_THROW(rfe(fm, cfg), Error);
}

TEST(Standardizer, PopulationSdAndConstantColumns) {
  Eigen::MatrixXd X(4, 2);
  X << 1, 5, 2, 5, 3, 5, 4, 5;
  const auto s = Standardizer::fit(X);
  EXPECT_DOUBLE_EQ(s.mean(0), 2.5);
  EXPECT_DOUBLE_EQ(s.sd(0), std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(s.sd(1), 1.0);
  EXPECT_TRUE((s.transform(X).col(1).array() == 0.0).all());
}
