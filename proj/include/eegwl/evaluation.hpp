#pragma once

// Evaluation protocol: stratified 80/20 split, k-fold CV inside the training
// part (standardize, RFE, nested grid search, stacked model per fold), then a
// single refit scored on the held-out part.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "classifiers.hpp"
#include "dataset.hpp"
#include "folds.hpp"
#include "metrics.hpp"
#include "selection.hpp"

namespace eegwl {

enum class GridMode { Nested, Global };
enum class RfeMode { PerFold, FullData };

struct EvalConfig {
  int folds = 8;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  int n_select = 8;
  int rfe_max_iterations = 30000;
  StackedGrid grid{};
  int inner_folds = 5;
  GridMode grid_mode = GridMode::Nested;  // Global is optimistic
  RfeMode rfe_mode = RfeMode::PerFold;    // FullData is optimistic
  bool holdout = true;
  StackedConfig base{};
  unsigned jobs = 1;

  void validate() const {
    if (folds < 2) throw Error(Errc::InvalidConfig, "folds must be >= 2");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
      throw Error(Errc::InvalidConfig, "test_fraction must lie in (0, 1)");
    if (n_select < 1) throw Error(Errc::InvalidConfig, "n_select must be >= 1");
    if (rfe_max_iterations < 1) throw Error(Errc::InvalidConfig, "rfe max_iterations must be >= 1");
    if (inner_folds < 2) throw Error(Errc::InvalidConfig, "inner_folds must be >= 2");
    if (grid.size() == 0) throw Error(Errc::InvalidConfig, "empty hyperparameter grid");
    base.validate();
  }
};

struct FoldResult {
  int fold = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::vector<std::string> selected;
  StackedConfig chosen{};
};

/// Statistics fitted inside one fold, exposed for leakage checks.
struct FoldDiagnostics {
  Standardizer scaler;
  FeatureRanking ranking;
};

struct HoldoutResult {
  double accuracy = 0.0;
  double f1 = 0.0;
  std::vector<std::string> selected;
};

struct EvalReport {
  ModelKind kind = ModelKind::Connectivity;
  std::vector<FoldResult> per_fold;
  double mean_accuracy = 0, sd_accuracy = 0, mean_f1 = 0, sd_f1 = 0;
  std::optional<HoldoutResult> holdout;
  std::vector<std::pair<std::string, int>> selection_frequency;  // count desc, name asc
  std::vector<std::string> flags;
  nlohmann::json provenance = nlohmann::json::object();
};

/// Standardize on fold-train, RFE, grid search (or a fixed config), fit the
/// stacked model, score on the validation rows.
inline FoldResult fit_and_score(const FeatureMatrix& train, const FeatureMatrix& val, const EvalConfig& cfg,
                                std::uint64_t seed, const std::optional<StackedConfig>& fixed,
                                const std::optional<std::vector<std::string>>& fixed_selection,
                                FoldDiagnostics* diag = nullptr) {
  auto scaler = Standardizer::fit(train.values);
  FeatureMatrix ztrain = train;
  ztrain.values = scaler.transform(train.values);
  FeatureMatrix zval = val;
  zval.values = scaler.transform(val.values);

  FoldResult r;
  if (fixed_selection) {
    r.selected = *fixed_selection;
  } else {
    RfeConfig rc;
    rc.n_select = static_cast<std::size_t>(cfg.n_select);
    rc.estimator.max_iterations = cfg.rfe_max_iterations;
    rc.estimator.seed = derive_seed(seed, {11});
    auto ranking = rfe(ztrain, rc);
    r.selected = ranking.selected;
    if (diag) diag->ranking = std::move(ranking);
  }
  if (diag) diag->scaler = scaler;
  const auto tr = ztrain.select_columns(r.selected);
  const auto va = zval.select_columns(r.selected);

  if (fixed) {
    r.chosen = *fixed;
  } else {
    r.chosen = grid_search(tr, cfg.grid, cfg.inner_folds, derive_seed(seed, {12}), cfg.base).best;
  }
  r.chosen.seed = derive_seed(seed, {13});
  const auto model = train_stacked(tr, r.chosen);
  const auto pred = model.predict(va);
  r.accuracy = accuracy(va.labels, pred);
  r.f1 = f1_score(va.labels, pred);
  return r;
}

inline std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  return derive_seed(seed, {hash_string("fold"), static_cast<std::uint64_t>(fold)});
}

/// One outer fold of the CV protocol on `train` (the 80% part).
inline FoldResult run_fold(const FeatureMatrix& train, const FoldPlan& plan, int fold, const EvalConfig& cfg,
                           FoldDiagnostics* diag = nullptr,
                           const std::optional<StackedConfig>& fixed = std::nullopt,
                           const std::optional<std::vector<std::string>>& fixed_selection = std::nullopt) {
  const auto tr = plan.complement(fold);
  const auto va = plan.members(fold);
  try {
    auto r = fit_and_score(train.select_rows(tr), train.select_rows(va), cfg, fold_seed(cfg.seed, fold),
                           fixed, fixed_selection, diag);
    r.fold = fold;
    return r;
  } catch (const Error& e) {
    throw Error(e.code(), "fold " + std::to_string(fold + 1) + ": " + e.what());
  }
}

inline void summarize(EvalReport& rep) {
  std::vector<double> acc, f1;
  std::map<std::string, int> freq;
  for (const auto& f : rep.per_fold) {
    acc.push_back(f.accuracy);
    f1.push_back(f.f1);
    for (const auto& s : f.selected) ++freq[s];
  }
  rep.mean_accuracy = mean_of(acc);
  rep.sd_accuracy = sd_of(acc);
  rep.mean_f1 = mean_of(f1);
  rep.sd_f1 = sd_of(f1);
  rep.selection_frequency.assign(freq.begin(), freq.end());
  std::ranges::stable_sort(rep.selection_frequency,
                           [](const auto& a, const auto& b) { return a.second > b.second; });
}

inline EvalReport evaluate_matrix(const FeatureMatrix& fm, ModelKind kind, const EvalConfig& cfg) {
  cfg.validate();
  fm.validate();
  require_two_classes(fm.labels);
  EvalReport rep;
  rep.kind = kind;

  const auto split = split_80_20(fm.labels, derive_seed(cfg.seed, {hash_string("split")}), cfg.test_fraction);
  const auto train = fm.select_rows(split.train);
  const auto plan = stratified_kfold(train.labels, cfg.folds, derive_seed(cfg.seed, {hash_string("cv")}));

  std::optional<std::vector<std::string>> global_sel;
  std::optional<StackedConfig> global_cfg;
  if (cfg.rfe_mode == RfeMode::FullData) {
    rep.flags.push_back("rfe_full_data: selection fitted on the whole training split (optimistic)");
    RfeConfig rc;
    rc.n_select = static_cast<std::size_t>(cfg.n_select);
    rc.estimator.max_iterations = cfg.rfe_max_iterations;
    rc.estimator.seed = derive_seed(cfg.seed, {hash_string("rfe")});
    global_sel = rfe(train, rc).selected;
  }
  if (cfg.grid_mode == GridMode::Global) {
    rep.flags.push_back("grid_global: hyperparameters tuned once on the whole training split (optimistic)");
    auto sub = train;
    sub.values = Standardizer::fit(train.values).transform(train.values);
    if (global_sel) sub = sub.select_columns(*global_sel);
    global_cfg = grid_search(sub, cfg.grid, cfg.inner_folds, derive_seed(cfg.seed, {hash_string("grid")}),
                             cfg.base)
                     .best;
  }

  rep.per_fold.resize(static_cast<std::size_t>(cfg.folds));
  parallel_for(rep.per_fold.size(), cfg.jobs, [&](std::size_t f) {
    rep.per_fold[f] = run_fold(train, plan, static_cast<int>(f), cfg, nullptr, global_cfg, global_sel);
  });
  summarize(rep);

  if (cfg.holdout) {
    const auto test = fm.select_rows(split.test);
    const auto r = fit_and_score(train, test, cfg, derive_seed(cfg.seed, {hash_string("holdout")}), global_cfg,
                                 global_sel);
    rep.holdout = HoldoutResult{r.accuracy, r.f1, r.selected};
  }
  return rep;
}

// EVAL1 --------------------------------------------------------------------------

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.per_fold)
    folds.push_back({{"fold", f.fold + 1},
                     {"accuracy", f.accuracy},
                     {"f1", f.f1},
                     {"selected_features", f.selected},
                     {"config", to_json(f.chosen)}});
  nlohmann::json freq = nlohmann::json::array();
  for (const auto& [n, c] : r.selection_frequency) freq.push_back({{"feature", n}, {"folds", c}});
  nlohmann::json j = {{"schema", "EVAL1"},
                      {"model_kind", to_string(r.kind)},
                      {"f1_positive_class", "High"},
                      {"per_fold", folds},
                      {"mean_accuracy", r.mean_accuracy},
                      {"sd_accuracy", r.sd_accuracy},
                      {"mean_f1", r.mean_f1},
                      {"sd_f1", r.sd_f1},
                      {"sd_convention", "population"},
                      {"feature_ranking", {{"method", "per-fold selection frequency"}, {"ranking", freq}}},
                      {"flags", r.flags},
                      {"provenance", r.provenance}};
  if (r.holdout)
    j["holdout"] = {{"accuracy", r.holdout->accuracy},
                    {"f1", r.holdout->f1},
                    {"selected_features", r.holdout->selected}};
  else
    j["holdout"] = nullptr;
  return j;
}

/// Parses an EVAL1 document and checks that the stored means and SDs match
/// the per-fold values.
inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "EVAL1") throw Error(Errc::InvalidArgument, "expected EVAL1 schema");
    EvalReport r;
    r.kind = parse_model_kind(j.at("model_kind").get<std::string>());
    for (const auto& f : j.at("per_fold")) {
      FoldResult fr;
      fr.fold = f.at("fold").get<int>() - 1;
      fr.accuracy = f.at("accuracy").get<double>();
      fr.f1 = f.at("f1").get<double>();
      fr.selected = f.at("selected_features").get<std::vector<std::string>>();
      if (f.contains("config")) fr.chosen = stacked_config_from_json(f.at("config"));
      r.per_fold.push_back(std::move(fr));
    }
    summarize(r);
    auto check = [&](const char* key, double v) {
      if (std::abs(j.at(key).get<double>() - v) > 1e-12)
        throw Error(Errc::InvalidArgument, std::string("EVAL1 ") + key + " disagrees with per-fold values");
    };
    check("mean_accuracy", r.mean_accuracy);
    check("sd_accuracy", r.sd_accuracy);
    check("mean_f1", r.mean_f1);
    check("sd_f1", r.sd_f1);
    if (!j.at("holdout").is_null())
      r.holdout = HoldoutResult{j["holdout"].at("accuracy").get<double>(), j["holdout"].at("f1").get<double>(),
                                j["holdout"].at("selected_features").get<std::vector<std::string>>()};
    r.flags = j.at("flags").get<std::vector<std::string>>();
    r.provenance = j.at("provenance");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed EVAL1 document: ") + e.what());
  }
}

/// Plain-text results table: one row per model.
inline std::string render_table(std::span<const EvalReport> reports, std::size_t top_features = 8) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %-24s %-20s %s\n", "Model", "Accuracy (Mean ± SD, %)",
                "F1 (Mean ± SD, %)", "Ranked Features");
  os << buf;
  for (const auto& r : reports) {
    std::string feats;
    for (std::size_t i = 0; i < r.selection_frequency.size() && i < top_features; ++i) {
      if (i) feats += ", ";
      feats += r.selection_frequency[i].first;
    }
    char acc[64], f1[64];
    std::snprintf(acc, sizeof acc, "%.0f ± %.0f", 100 * r.mean_accuracy, 100 * r.sd_accuracy);
    std::snprintf(f1, sizeof f1, "%.0f ± %.0f", 100 * r.mean_f1, 100 * r.sd_f1);
    std::string kind = to_string(r.kind);
    kind[0] = static_cast<char>(std::toupper(kind[0]));
    std::snprintf(buf, sizeof buf, "%-14s %-25s %-21s ", kind.c_str(), acc, f1);
    os << buf << feats << '\n';
  }
  os << "F1 positive class: High. SD over folds (population). Features ranked by per-fold selection frequency.\n";
  return os.str();
}

}  // namespace eegwl
