#pragma once

// Feature matrices, z-scoring, the L2-regularized squared-hinge linear SVM
// (dual coordinate descent) and recursive feature elimination driven by it.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "folds.hpp"
#include "random.hpp"

namespace eegwl {

struct FeatureMatrix {
  std::vector<std::string> names;    // column names, unique
  Eigen::MatrixXd values;            // [samples x features]
  Labels labels;                     // 0 = Low, 1 = High
  std::vector<std::string> row_ids;  // optional sample identifiers

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

  void validate() const {
    if (names.size() != cols()) throw Error(Errc::ShapeMismatch, "column names vs values");
    if (labels.size() != rows()) throw Error(Errc::ShapeMismatch, "label count vs rows");
    if (!row_ids.empty() && row_ids.size() != rows())
      throw Error(Errc::ShapeMismatch, "row id count vs rows");
    if (std::set<std::string>(names.begin(), names.end()).size() != names.size())
      throw Error(Errc::InvalidArgument, "duplicate feature names");
    if (!values.allFinite()) throw Error(Errc::InvalidArgument, "feature matrix has missing values");
  }

  FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
    FeatureMatrix out;
    out.names = names;
    out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(idx[r]));
      out.labels.push_back(labels[idx[r]]);
      if (!row_ids.empty()) out.row_ids.push_back(row_ids[idx[r]]);
    }
    return out;
  }

  FeatureMatrix select_columns(std::span<const std::string> wanted) const {
    FeatureMatrix out;
    out.labels = labels;
    out.row_ids = row_ids;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(wanted.size()));
    for (std::size_t c = 0; c < wanted.size(); ++c) {
      auto it = std::ranges::find(names, wanted[c]);
      if (it == names.end()) throw Error(Errc::FeatureContractMismatch, "missing feature " + wanted[c]);
      out.values.col(static_cast<Eigen::Index>(c)) = values.col(it - names.begin());
      out.names.push_back(wanted[c]);
    }
    return out;
  }
};

/// Per-column z-scoring with population SD; constant columns get SD 1.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;

  static Standardizer fit(const Eigen::MatrixXd& X) {
    Standardizer s;
    const auto n = static_cast<double>(X.rows());
    s.mean = X.colwise().mean().transpose();
    s.sd.resize(X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      const double var = (X.col(c).array() - s.mean(c)).square().sum() / n;
      s.sd(c) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd out = X.rowwise() - mean.transpose();
    return out.array().rowwise() / sd.transpose().array();
  }
};

inline void require_two_classes(std::span<const int> y) {
  const bool has0 = std::ranges::find(y, 0) != y.end();
  const bool has1 = std::ranges::find(y, 1) != y.end();
  if (!has0 || !has1) throw Error(Errc::SingleClassInput, "training labels contain one class");
}

// ---------------------------------------------------------------------------

struct LinearSvmConfig {
  double C = 1.0;
  int max_iterations = 30000;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;  // coordinate visiting order
};

struct LinearModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  int iterations = 0;
  bool converged = true;
  double duality_gap = 0.0;
  double objective = 0.0;

  double decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return x.dot(weights) + bias;
  }
};

/// Primal objective 0.5*|w~|^2 + C*sum max(0, 1 - y_i w~.x~_i)^2, where
/// w~ = (w, b) and x~ = (x, 1); the bias is regularized like liblinear.
inline double squared_hinge_objective(const Eigen::MatrixXd& X, std::span<const int> y,
                                      const Eigen::VectorXd& w, double b, double C) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double yi = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    const double m = std::max(0.0, 1.0 - yi * (X.row(i).dot(w) + b));
    loss += m * m;
  }
  return 0.5 * (w.squaredNorm() + b * b) + C * loss;
}

/// Dual coordinate descent for the L2-loss SVM. On hitting the iteration cap
/// the current iterate is returned with converged = false and its duality gap.
inline LinearModel fit_linear_svm(const Eigen::MatrixXd& X, std::span<const int> y,
                                  const LinearSvmConfig& cfg = {}) {
  if (static_cast<std::size_t>(X.rows()) != y.size())
    throw Error(Errc::ShapeMismatch, "rows vs labels");
  if (!(cfg.C > 0.0)) throw Error(Errc::InvalidArgument, "C must be positive");
  require_two_classes(y);

  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const double diag = 0.5 / cfg.C;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  std::vector<double> qd(static_cast<std::size_t>(n));
  std::vector<double> sign(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    qd[static_cast<std::size_t>(i)] = X.row(i).squaredNorm() + 1.0 + diag;
    sign[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);

  LinearModel model;
  model.converged = false;
  int iter = 0;
  while (iter < cfg.max_iterations) {
    ++iter;
    std::shuffle(order.begin(), order.end(), rng);
    double pg_max = -std::numeric_limits<double>::infinity();
    double pg_min = std::numeric_limits<double>::infinity();
    for (auto i : order) {
      const auto r = static_cast<Eigen::Index>(i);
      const double yi = sign[i];
      const double g = yi * (X.row(r).dot(w) + b) - 1.0 + diag * alpha[i];
      const double pg = alpha[i] == 0.0 ? std::min(g, 0.0) : g;
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg != 0.0) {
        const double old = alpha[i];
        alpha[i] = std::max(old - g / qd[i], 0.0);
        const double delta = (alpha[i] - old) * yi;
        w.noalias() += delta * X.row(r).transpose();
        b += delta;
      }
    }
    if (pg_max - pg_min <= cfg.tolerance) {
      model.converged = true;
      break;
    }
  }
  model.weights = std::move(w);
  model.bias = b;
  model.iterations = iter;
  model.objective = squared_hinge_objective(X, y, model.weights, model.bias, cfg.C);
  double asum = 0.0, asq = 0.0;
  for (double a : alpha) {
    asum += a;
    asq += a * a;
  }
  const double wn = model.weights.squaredNorm() + model.bias * model.bias;
  const double dual = asum - 0.5 * wn - 0.5 * diag * asq;
  model.duality_gap = model.objective - dual;
  return model;
}

// ---------------------------------------------------------------------------

struct RfeConfig {
  std::size_t n_select = 8;
  std::size_t step = 1;
  LinearSvmConfig estimator{};
};

struct TieEvent {
  std::string eliminated;
  std::string tied_with;
  double abs_weight;
};

struct FeatureRanking {
  std::vector<std::string> ranking;  // most important first
  std::vector<std::string> selected;
  std::vector<std::string> eliminated;  // in elimination order
  std::vector<TieEvent> tie_events;
  int non_converged_fits = 0;
};

namespace detail {

struct WeightedName {
  double abs_w;
  std::string name;
  std::size_t column;
};

inline bool weights_tied(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

/// Repeatedly fits the SVM on the surviving columns and drops the feature(s)
/// with the smallest |weight| (ties: lexicographically smaller name first).
/// Columns are z-scored once up front.
inline FeatureRanking rfe(const FeatureMatrix& fm, const RfeConfig& cfg) {
  fm.validate();
  const std::size_t d = fm.cols();
  if (cfg.n_select < 1 || cfg.n_select > d)
    throw Error(Errc::InvalidArgument, "n_select must lie in [1, n_features]");
  if (cfg.step < 1) throw Error(Errc::InvalidArgument, "step must be >= 1");
  const Eigen::MatrixXd Z = Standardizer::fit(fm.values).transform(fm.values);

  FeatureRanking out;
  std::vector<std::size_t> alive(d);
  std::iota(alive.begin(), alive.end(), 0);

  auto fit_alive = [&] {
    Eigen::MatrixXd sub(Z.rows(), static_cast<Eigen::Index>(alive.size()));
    for (std::size_t c = 0; c < alive.size(); ++c)
      sub.col(static_cast<Eigen::Index>(c)) = Z.col(static_cast<Eigen::Index>(alive[c]));
    auto model = fit_linear_svm(sub, fm.labels, cfg.estimator);
    if (!model.converged) ++out.non_converged_fits;
    std::vector<detail::WeightedName> ws;
    for (std::size_t c = 0; c < alive.size(); ++c)
      ws.push_back({std::abs(model.weights(static_cast<Eigen::Index>(c))), fm.names[alive[c]],
                    alive[c]});
    std::ranges::sort(ws, [](const auto& a, const auto& b) {
      if (a.abs_w != b.abs_w) return a.abs_w < b.abs_w;
      return a.name < b.name;
    });
    return ws;
  };

  while (alive.size() > cfg.n_select) {
    const auto ws = fit_alive();
    const std::size_t drop = std::min(cfg.step, alive.size() - cfg.n_select);
    for (std::size_t k = 0; k < drop; ++k) {
      out.eliminated.push_back(ws[k].name);
      if (k + 1 < ws.size() && detail::weights_tied(ws[k].abs_w, ws[k + 1].abs_w))
        out.tie_events.push_back({ws[k].name, ws[k + 1].name, ws[k].abs_w});
      std::erase(alive, ws[k].column);
    }
  }
  auto final_ws = fit_alive();
  std::ranges::sort(final_ws, [](const auto& a, const auto& b) {
    if (a.abs_w != b.abs_w) return a.abs_w > b.abs_w;
    return a.name < b.name;
  });
  for (const auto& w : final_ws) out.selected.push_back(w.name);
  out.ranking = out.selected;
  out.ranking.insert(out.ranking.end(), out.eliminated.rbegin(), out.eliminated.rend());
  return out;
}

inline nlohmann::json to_json(const FeatureRanking& r, const RfeConfig& cfg) {
  nlohmann::json ties = nlohmann::json::array();
  for (const auto& t : r.tie_events)
    ties.push_back({{"eliminated", t.eliminated}, {"tied_with", t.tied_with}, {"abs_weight", t.abs_weight}});
  return {{"schema", "RANK1"},
          {"config",
           {{"n_select", cfg.n_select},
            {"step", cfg.step},
            {"estimator", "linear_svm_squared_hinge"},
            {"C", cfg.estimator.C},
            {"max_iterations", cfg.estimator.max_iterations},
            {"max_iterations_applies_to", "linear SVM solver"},
            {"tolerance", cfg.estimator.tolerance}}},
          {"ranking", r.ranking},
          {"selected", r.selected},
          {"tie_events", ties},
          {"non_converged_fits", r.non_converged_fits}};
}

}  // namespace eegwl
