#pragma once

// Base learners (random forest, L2 logistic regression, linear SVM), the
// stacked ensemble with an SVM meta-model, and grid search over its
// hyperparameters.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "error.hpp"
#include "folds.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "selection.hpp"

namespace eegwl {

// Random forest ---------------------------------------------------------------

struct RandomForestConfig {
  int n_estimators = 100;
  std::optional<int> max_depth;  // unrestricted when empty
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  bool bootstrap = true;
  std::optional<int> features_per_split;  // floor(sqrt(d)) when empty
  std::uint64_t seed = 0;

  void validate() const {
    if (n_estimators < 1) throw Error(Errc::InvalidArgument, "n_estimators must be >= 1");
    if (min_samples_split < 2) throw Error(Errc::InvalidArgument, "min_samples_split must be >= 2");
    if (min_samples_leaf < 1) throw Error(Errc::InvalidArgument, "min_samples_leaf must be >= 1");
    if (max_depth && *max_depth < 1) throw Error(Errc::InvalidArgument, "max_depth must be >= 1");
    if (features_per_split && *features_per_split < 1)
      throw Error(Errc::InvalidArgument, "features_per_split must be >= 1");
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double p_high = 0.0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].p_high > 0.5 ? 1 : 0;
  }
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, std::span<const int> y, const RandomForestConfig& cfg,
              int mtry, Rng& rng)
      : X_(X), y_(y), cfg_(cfg), mtry_(mtry), rng_(rng) {}

  DecisionTree build(std::vector<std::size_t> idx) {
    DecisionTree tree;
    grow(tree, std::move(idx), 0);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
  };

  static double gini(double n1, double n) {
    if (n <= 0) return 0.0;
    const double p = n1 / n;
    return 2.0 * p * (1.0 - p);
  }

  int grow(DecisionTree& tree, std::vector<std::size_t> idx, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double n1 = 0;
    for (auto i : idx) n1 += y_[i];
    const double n = static_cast<double>(idx.size());
    tree.nodes.back().p_high = n1 / n;

    const bool pure = n1 == 0 || n1 == n;
    const bool too_small = static_cast<int>(idx.size()) < cfg_.min_samples_split;
    const bool too_deep = cfg_.max_depth && depth >= *cfg_.max_depth;
    if (pure || too_small || too_deep) return id;

    const auto split = best_split(idx);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx)
      (X_(static_cast<Eigen::Index>(i), split.feature) <= split.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(tree, std::move(left), depth + 1);
    const int r = grow(tree, std::move(right), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Visits features in random order until mtry non-constant ones have been
  // evaluated (more if none of them admits a valid split).
  Split best_split(const std::vector<std::size_t>& idx) {
    std::vector<int> feats(static_cast<std::size_t>(X_.cols()));
    std::iota(feats.begin(), feats.end(), 0);
    std::shuffle(feats.begin(), feats.end(), rng_);
    Split best;
    int evaluated = 0;
    std::vector<std::pair<double, int>> col(idx.size());
    const double n = static_cast<double>(idx.size());
    double total1 = 0;
    for (auto i : idx) total1 += y_[i];
    for (int f : feats) {
      if (evaluated >= mtry_ && best.feature >= 0) break;
      for (std::size_t k = 0; k < idx.size(); ++k)
        col[k] = {X_(static_cast<Eigen::Index>(idx[k]), f), y_[idx[k]]};
      std::ranges::sort(col);
      if (col.front().first == col.back().first) continue;
      ++evaluated;
      double left1 = 0;
      const auto leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);
      for (std::size_t k = 0; k + 1 < col.size(); ++k) {
        left1 += col[k].second;
        if (col[k].first == col[k + 1].first) continue;
        const std::size_t nl = k + 1, nr = col.size() - nl;
        if (nl < leaf || nr < leaf) continue;
        const double imp = static_cast<double>(nl) * gini(left1, static_cast<double>(nl)) +
                           static_cast<double>(nr) * gini(total1 - left1, static_cast<double>(nr));
        if (imp < best.impurity) {
          double thr = 0.5 * (col[k].first + col[k + 1].first);
          if (thr >= col[k + 1].first) thr = col[k].first;
          best = {f, thr, imp / n};
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& X_;
  std::span<const int> y_;
  const RandomForestConfig& cfg_;
  int mtry_;
  Rng& rng_;
};

}  // namespace detail

struct RandomForest {
  std::vector<DecisionTree> trees;

  /// Fraction of trees voting High.
  double score(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double votes = 0;
    for (const auto& t : trees) votes += t.predict(x);
    return votes / static_cast<double>(trees.size());
  }
  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return score(x) > 0.5 ? 1 : 0; }
};

inline RandomForest train_random_forest(const Eigen::MatrixXd& X, std::span<const int> y,
                                        const RandomForestConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw Error(Errc::ShapeMismatch, "rows vs labels");
  require_two_classes(y);
  const int d = static_cast<int>(X.cols());
  const int mtry = std::clamp(
      cfg.features_per_split.value_or(static_cast<int>(std::floor(std::sqrt(static_cast<double>(d))))),
      1, d);
  RandomForest forest;
  forest.trees.reserve(static_cast<std::size_t>(cfg.n_estimators));
  const auto n = static_cast<std::size_t>(X.rows());
  for (int t = 0; t < cfg.n_estimators; ++t) {
    Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(t)}));
    std::vector<std::size_t> idx(n);
    if (cfg.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& i : idx) i = pick(rng);
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    detail::TreeBuilder builder(X, y, cfg, mtry, rng);
    forest.trees.push_back(builder.build(std::move(idx)));
  }
  return forest;
}

// Logistic regression ---------------------------------------------------------

struct LogRegConfig {
  double C = 1.0;
  double tolerance = 1e-6;
  int max_iterations = 100;
};

struct LogRegModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  int iterations = 0;
  bool converged = true;

  double decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return x.dot(weights) + bias; }
  double probability(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return 1.0 / (1.0 + std::exp(-decision(x)));
  }
};

namespace detail {
inline double log1pexp_neg(double m) {  // log(1 + exp(-m)), overflow-safe
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}
}  // namespace detail

/// 0.5*|theta|^2 + C*sum log(1 + exp(-y_i theta.x~_i)), theta = (w, b),
/// x~ = (x, 1), y in {-1, +1}. The bias is regularized, as in liblinear.
inline double logreg_objective(const Eigen::MatrixXd& X, std::span<const int> y,
                               const Eigen::VectorXd& theta, double C) {
  const Eigen::Index d = X.cols();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double yi = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    loss += detail::log1pexp_neg(yi * (X.row(i).dot(theta.head(d)) + theta(d)));
  }
  return 0.5 * theta.squaredNorm() + C * loss;
}

inline Eigen::VectorXd logreg_gradient(const Eigen::MatrixXd& X, std::span<const int> y,
                                       const Eigen::VectorXd& theta, double C) {
  const Eigen::Index d = X.cols();
  Eigen::VectorXd g = theta;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double yi = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    const double m = yi * (X.row(i).dot(theta.head(d)) + theta(d));
    const double s = 1.0 / (1.0 + std::exp(m));  // sigma(-m)
    g.head(d).noalias() -= C * yi * s * X.row(i).transpose();
    g(d) -= C * yi * s;
  }
  return g;
}

/// Damped Newton iterations on the regularized logistic loss.
inline LogRegModel train_logreg(const Eigen::MatrixXd& X, std::span<const int> y,
                                const LogRegConfig& cfg = {}) {
  if (!(cfg.C > 0.0)) throw Error(Errc::InvalidArgument, "C must be positive");
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw Error(Errc::ShapeMismatch, "rows vs labels");
  require_two_classes(y);
  const Eigen::Index d = X.cols();
  Eigen::MatrixXd Xt(X.rows(), d + 1);
  Xt << X, Eigen::VectorXd::Ones(X.rows());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  double f = logreg_objective(X, y, theta, cfg.C);
  LogRegModel model;
  model.converged = false;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    const Eigen::VectorXd g = logreg_gradient(X, y, theta, cfg.C);
    if (g.lpNorm<Eigen::Infinity>() <= cfg.tolerance) {
      model.converged = true;
      break;
    }
    Eigen::VectorXd dvec(Xt.rows());
    const Eigen::VectorXd margin = Xt * theta;
    for (Eigen::Index i = 0; i < Xt.rows(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-margin(i)));
      dvec(i) = p * (1.0 - p);
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d + 1, d + 1);
    H.noalias() += cfg.C * Xt.transpose() * dvec.asDiagonal() * Xt;
    const Eigen::VectorXd step = H.ldlt().solve(-g);
    double t = 1.0;
    const double slope = g.dot(step);
    for (int ls = 0; ls < 50; ++ls) {
      const Eigen::VectorXd cand = theta + t * step;
      const double fc = logreg_objective(X, y, cand, cfg.C);
      if (fc <= f + 1e-4 * t * slope) {
        theta = cand;
        f = fc;
        break;
      }
      t *= 0.5;
    }
  }
  model.iterations = it;
  model.weights = theta.head(d);
  model.bias = theta(d);
  return model;
}

// Linear SVM ------------------------------------------------------------------

struct SvmConfig {
  double C = 1.0;
  std::string gamma_mode = "scale";  // kept for parity; no effect on a linear kernel
  int max_iterations = 30000;
  double tolerance = 1e-4;

  void validate() const {
    if (!(C > 0.0)) throw Error(Errc::InvalidArgument, "SVM C must be positive");
  }
};

/// Linear-kernel SVM; decision value is the signed margin.
inline LinearModel train_svm(const Eigen::MatrixXd& X, std::span<const int> y, const SvmConfig& cfg) {
  cfg.validate();
  return fit_linear_svm(X, y, {cfg.C, cfg.max_iterations, cfg.tolerance, 0});
}

// Stacked ensemble -------------------------------------------------------------

struct StackedConfig {
  RandomForestConfig rf{};
  LogRegConfig lr{};
  SvmConfig svm{};
  SvmConfig meta_svm{10.0};
  int oof_folds = 5;
  std::uint64_t seed = 0;

  void validate() const {
    rf.validate();
    svm.validate();
    meta_svm.validate();
    if (!(lr.C > 0.0)) throw Error(Errc::InvalidArgument, "LR C must be positive");
    if (oof_folds < 2) throw Error(Errc::InvalidArgument, "oof_folds must be >= 2");
  }
};

struct BaseModels {
  RandomForest rf;
  LogRegModel lr;
  LinearModel svm;
};

struct TrainedModel {
  std::vector<std::string> feature_names;
  Standardizer scaler;
  BaseModels base;
  Standardizer meta_scaler;
  LinearModel meta;
  StackedConfig config;

  /// Columns: RF vote fraction, LR probability, SVM margin.
  static Eigen::MatrixXd base_scores(const BaseModels& m, const Eigen::MatrixXd& Z) {
    Eigen::MatrixXd s(Z.rows(), 3);
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
      s(i, 0) = m.rf.score(Z.row(i));
      s(i, 1) = m.lr.probability(Z.row(i));
      s(i, 2) = m.svm.decision(Z.row(i));
    }
    return s;
  }

  std::vector<double> decision(const FeatureMatrix& fm) const {
    const auto aligned = fm.select_columns(feature_names);
    const Eigen::MatrixXd meta_x = meta_scaler.transform(base_scores(base, scaler.transform(aligned.values)));
    std::vector<double> out(static_cast<std::size_t>(meta_x.rows()));
    for (Eigen::Index i = 0; i < meta_x.rows(); ++i) out[static_cast<std::size_t>(i)] = meta.decision(meta_x.row(i));
    return out;
  }

  std::vector<int> predict(const FeatureMatrix& fm) const {
    const auto d = decision(fm);
    std::vector<int> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = d[i] > 0.0 ? 1 : 0;
    return out;
  }
};

inline BaseModels train_base_models(const Eigen::MatrixXd& Z, std::span<const int> y,
                                    const StackedConfig& cfg, std::uint64_t rf_seed) {
  BaseModels m;
  auto rf_cfg = cfg.rf;
  rf_cfg.seed = rf_seed;
  m.rf = train_random_forest(Z, y, rf_cfg);
  m.lr = train_logreg(Z, y, cfg.lr);
  m.svm = train_svm(Z, y, cfg.svm);
  return m;
}

/// Meta SVM on (already computed) base-model scores, z-scored first.
inline std::pair<Standardizer, LinearModel> train_meta(const Eigen::MatrixXd& meta_features,
                                                       std::span<const int> y, const SvmConfig& cfg) {
  auto scaler = Standardizer::fit(meta_features);
  auto model = train_svm(scaler.transform(meta_features), y, cfg);
  return {std::move(scaler), std::move(model)};
}

inline TrainedModel train_stacked(const FeatureMatrix& fm, const StackedConfig& cfg) {
  fm.validate();
  cfg.validate();
  require_two_classes(fm.labels);
  const auto n1 = static_cast<int>(std::ranges::count(fm.labels, 1));
  const auto n0 = static_cast<int>(fm.labels.size()) - n1;
  if (std::min(n0, n1) < 2 * cfg.oof_folds)
    throw Error(Errc::InsufficientSamplesForStacking,
                "need " + std::to_string(2 * cfg.oof_folds) + " samples per class, have " +
                    std::to_string(std::min(n0, n1)));

  TrainedModel model;
  model.config = cfg;
  model.feature_names = fm.names;
  model.scaler = Standardizer::fit(fm.values);
  const Eigen::MatrixXd Z = model.scaler.transform(fm.values);

  const auto plan = stratified_kfold(fm.labels, cfg.oof_folds, derive_seed(cfg.seed, {1}));
  Eigen::MatrixXd meta(Z.rows(), 3);
  for (int f = 0; f < cfg.oof_folds; ++f) {
    const auto tr = plan.complement(f);
    const auto va = plan.members(f);
    Eigen::MatrixXd Ztr(static_cast<Eigen::Index>(tr.size()), Z.cols());
    Labels ytr;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      Ztr.row(static_cast<Eigen::Index>(i)) = Z.row(static_cast<Eigen::Index>(tr[i]));
      ytr.push_back(fm.labels[tr[i]]);
    }
    const auto base = train_base_models(Ztr, ytr, cfg, derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(f)}));
    Eigen::MatrixXd Zva(static_cast<Eigen::Index>(va.size()), Z.cols());
    for (std::size_t i = 0; i < va.size(); ++i)
      Zva.row(static_cast<Eigen::Index>(i)) = Z.row(static_cast<Eigen::Index>(va[i]));
    const auto s = TrainedModel::base_scores(base, Zva);
    for (std::size_t i = 0; i < va.size(); ++i)
      meta.row(static_cast<Eigen::Index>(va[i])) = s.row(static_cast<Eigen::Index>(i));
  }
  std::tie(model.meta_scaler, model.meta) = train_meta(meta, fm.labels, cfg.meta_svm);
  model.base = train_base_models(Z, fm.labels, cfg, derive_seed(cfg.seed, {3}));
  return model;
}

// Grid search -------------------------------------------------------------------

struct StackedGrid {
  std::vector<int> rf_n_estimators{50, 100};
  std::vector<double> lr_C{0.01, 1.0};
  std::vector<double> svm_C{0.01, 10.0};
  std::vector<double> meta_C{10.0};

  std::size_t size() const {
    return rf_n_estimators.size() * lr_C.size() * svm_C.size() * meta_C.size();
  }
};

struct GridCell {
  int rf_n_estimators = 0;
  double lr_C = 0, svm_C = 0, meta_C = 0;
  std::vector<double> fold_accuracy;
  std::vector<double> fold_f1;
  double mean_accuracy = 0, sd_accuracy = 0, mean_f1 = 0;
  bool failed = false;
  std::string error;

  auto key() const { return std::tuple(rf_n_estimators, lr_C, svm_C, meta_C); }
};

struct GridResult {
  StackedConfig best;
  std::size_t best_index = 0;
  std::vector<GridCell> cells;
};

inline StackedConfig apply_cell(StackedConfig cfg, const GridCell& c) {
  cfg.rf.n_estimators = c.rf_n_estimators;
  cfg.lr.C = c.lr_C;
  cfg.svm.C = c.svm_C;
  cfg.meta_svm.C = c.meta_C;
  return cfg;
}

/// Cross-validated accuracy/F1 of a stacked configuration.
inline void score_cell(const FeatureMatrix& fm, const StackedConfig& cfg, const FoldPlan& plan,
                       GridCell& cell) {
  for (int f = 0; f < plan.k; ++f) {
    const auto tr = plan.complement(f);
    const auto va = plan.members(f);
    const auto model = train_stacked(fm.select_rows(tr), cfg);
    const auto val = fm.select_rows(va);
    const auto pred = model.predict(val);
    cell.fold_accuracy.push_back(accuracy(val.labels, pred));
    cell.fold_f1.push_back(f1_score(val.labels, pred));
  }
  cell.mean_accuracy = mean_of(cell.fold_accuracy);
  cell.sd_accuracy = sd_of(cell.fold_accuracy);
  cell.mean_f1 = mean_of(cell.fold_f1);
}

/// Exhaustive search under stratified k-fold CV. Best = highest mean
/// accuracy, then highest mean F1, then the smallest configuration tuple.
/// Every cell trains with the same seed, so cells differ only in their
/// hyperparameters.
inline GridResult grid_search(const FeatureMatrix& fm, const StackedGrid& grid, int folds,
                              std::uint64_t seed, const StackedConfig& base = {}, unsigned jobs = 1) {
  if (grid.size() == 0) throw Error(Errc::InvalidArgument, "empty hyperparameter grid");
  GridResult result;
  for (int n : grid.rf_n_estimators)
    for (double lc : grid.lr_C)
      for (double sc : grid.svm_C)
        for (double mc : grid.meta_C) {
          GridCell c;
          c.rf_n_estimators = n;
          c.lr_C = lc;
          c.svm_C = sc;
          c.meta_C = mc;
          result.cells.push_back(c);
        }
  const auto plan = stratified_kfold(fm.labels, folds, seed);
  parallel_for(result.cells.size(), jobs, [&](std::size_t i) {
    auto& cell = result.cells[i];
    try {
      auto cfg = apply_cell(base, cell);
      cfg.seed = derive_seed(seed, {17});
      score_cell(fm, cfg, plan, cell);
    } catch (const Error& e) {
      cell.failed = true;
      cell.error = e.what();
    }
  });
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& c = result.cells[i];
    if (c.failed) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = result.cells[*best];
    if (c.mean_accuracy != b.mean_accuracy) {
      if (c.mean_accuracy > b.mean_accuracy) best = i;
    } else if (c.mean_f1 != b.mean_f1) {
      if (c.mean_f1 > b.mean_f1) best = i;
    } else if (c.key() < b.key()) {
      best = i;
    }
  }
  if (!best) throw Error(Errc::NonConvergence, "every grid cell failed: " + result.cells.front().error);
  result.best_index = *best;
  result.best = apply_cell(base, result.cells[*best]);
  return result;
}

inline void write_grid_csv(std::ostream& os, const GridResult& r) {
  std::size_t k = 0;
  for (const auto& c : r.cells) k = std::max(k, c.fold_accuracy.size());
  os << "rf_n_estimators,lr_C,svm_C,meta_C";
  for (std::size_t f = 0; f < k; ++f) os << ",fold_" << f + 1;
  os << ",mean,sd,status\n";
  for (const auto& c : r.cells) {
    os << c.rf_n_estimators << ',' << c.lr_C << ',' << c.svm_C << ',' << c.meta_C;
    for (std::size_t f = 0; f < k; ++f) {
      os << ',';
      if (f < c.fold_accuracy.size()) os << c.fold_accuracy[f];
    }
    os << ',' << c.mean_accuracy << ',' << c.sd_accuracy << ',' << (c.failed ? "failed" : "ok") << '\n';
  }
}

// MDL1 container ------------------------------------------------------------------

inline nlohmann::json to_json(const StackedConfig& c) {
  nlohmann::json rf = {{"n_estimators", c.rf.n_estimators},
                       {"min_samples_split", c.rf.min_samples_split},
                       {"min_samples_leaf", c.rf.min_samples_leaf},
                       {"bootstrap", c.rf.bootstrap},
                       {"seed", c.rf.seed}};
  rf["max_depth"] = c.rf.max_depth ? nlohmann::json(*c.rf.max_depth) : nlohmann::json(nullptr);
  rf["features_per_split"] =
      c.rf.features_per_split ? nlohmann::json(*c.rf.features_per_split) : nlohmann::json(nullptr);
  auto svm = [](const SvmConfig& s) {
    return nlohmann::json{{"C", s.C}, {"kernel", "linear"}, {"gamma", s.gamma_mode},
                          {"max_iterations", s.max_iterations}, {"tolerance", s.tolerance}};
  };
  return {{"rf", rf},
          {"lr", {{"C", c.lr.C}, {"penalty", "l2"}, {"tolerance", c.lr.tolerance},
                  {"max_iterations", c.lr.max_iterations}}},
          {"svm", svm(c.svm)},
          {"meta_svm", svm(c.meta_svm)},
          {"oof_folds", c.oof_folds},
          {"seed", c.seed}};
}

inline StackedConfig stacked_config_from_json(const nlohmann::json& j) {
  StackedConfig c;
  const auto& rf = j.at("rf");
  c.rf.n_estimators = rf.at("n_estimators").get<int>();
  c.rf.min_samples_split = rf.at("min_samples_split").get<int>();
  c.rf.min_samples_leaf = rf.at("min_samples_leaf").get<int>();
  c.rf.bootstrap = rf.at("bootstrap").get<bool>();
  c.rf.seed = rf.at("seed").get<std::uint64_t>();
  if (!rf.at("max_depth").is_null()) c.rf.max_depth = rf.at("max_depth").get<int>();
  if (!rf.at("features_per_split").is_null())
    c.rf.features_per_split = rf.at("features_per_split").get<int>();
  c.lr.C = j.at("lr").at("C").get<double>();
  c.lr.tolerance = j.at("lr").at("tolerance").get<double>();
  c.lr.max_iterations = j.at("lr").at("max_iterations").get<int>();
  auto svm = [](const nlohmann::json& s) {
    SvmConfig o;
    o.C = s.at("C").get<double>();
    o.gamma_mode = s.at("gamma").get<std::string>();
    o.max_iterations = s.at("max_iterations").get<int>();
    o.tolerance = s.at("tolerance").get<double>();
    return o;
  };
  c.svm = svm(j.at("svm"));
  c.meta_svm = svm(j.at("meta_svm"));
  c.oof_folds = j.at("oof_folds").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace detail {

inline nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}
inline Eigen::VectorXd json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
inline nlohmann::json linear_json(const LinearModel& m) {
  return {{"weights", vec_json(m.weights)}, {"bias", m.bias}};
}
inline LinearModel json_linear(const nlohmann::json& j) {
  LinearModel m;
  m.weights = json_vec(j.at("weights"));
  m.bias = j.at("bias").get<double>();
  return m;
}

}  // namespace detail

inline nlohmann::json model_payload(const TrainedModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.base.rf.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.p_high});
    trees.push_back(nodes);
  }
  return {{"config", to_json(m.config)},
          {"feature_names", m.feature_names},
          {"scaler", {{"mean", detail::vec_json(m.scaler.mean)}, {"sd", detail::vec_json(m.scaler.sd)}}},
          {"meta_scaler",
           {{"mean", detail::vec_json(m.meta_scaler.mean)}, {"sd", detail::vec_json(m.meta_scaler.sd)}}},
          {"rf", trees},
          {"lr", {{"weights", detail::vec_json(m.base.lr.weights)}, {"bias", m.base.lr.bias}}},
          {"svm", detail::linear_json(m.base.svm)},
          {"meta", detail::linear_json(m.meta)}};
}

inline TrainedModel model_from_payload(const nlohmann::json& j) {
  TrainedModel m;
  m.config = stacked_config_from_json(j.at("config"));
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.scaler.mean = detail::json_vec(j.at("scaler").at("mean"));
  m.scaler.sd = detail::json_vec(j.at("scaler").at("sd"));
  m.meta_scaler.mean = detail::json_vec(j.at("meta_scaler").at("mean"));
  m.meta_scaler.sd = detail::json_vec(j.at("meta_scaler").at("sd"));
  for (const auto& t : j.at("rf")) {
    DecisionTree tree;
    for (const auto& n : t)
      tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                            n.at(3).get<int>(), n.at(4).get<double>()});
    m.base.rf.trees.push_back(std::move(tree));
  }
  m.base.lr.weights = detail::json_vec(j.at("lr").at("weights"));
  m.base.lr.bias = j.at("lr").at("bias").get<double>();
  m.base.svm = detail::json_linear(j.at("svm"));
  m.meta = detail::json_linear(j.at("meta"));
  return m;
}

inline constexpr std::uint32_t kModelVersion = 1;

/// "MDL1" magic, u32 version, u64 payload length (little-endian), JSON payload.
inline void save_model(const TrainedModel& m, const std::filesystem::path& path,
                       const nlohmann::json& provenance = nlohmann::json::object()) {
  auto payload = model_payload(m);
  payload["provenance"] = provenance;
  const std::string body = payload.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write " + path.string());
  out.write("MDL1", 4);
  auto put = [&](std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xff));
  };
  put(kModelVersion, 4);
  put(body.size(), 8);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "MDL1")
    throw Error(Errc::MalformedHeader, path.string() + " is not an MDL1 model");
  auto get = [&](int bytes) {
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in.get())) << (8 * b);
    return v;
  };
  const auto version = get(4);
  if (version != kModelVersion)
    throw Error(Errc::MalformedHeader, "unsupported model version " + std::to_string(version));
  const auto len = get(8);
  std::string body(len, '\0');
  in.read(body.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(Errc::MalformedHeader, "truncated model payload");
  try {
    return model_from_payload(nlohmann::json::parse(body));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedHeader, std::string("bad model payload: ") + e.what());
  }
}

}  // namespace eegwl
