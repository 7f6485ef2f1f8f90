#pragma once

// Exhaustive search over the 63 nonempty NASA-TLX subscale subsets: each
// subset yields its own residual labels, which are scored with the same CV
// protocol as the main evaluation.

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "dataset.hpp"
#include "evaluation.hpp"
#include "labeling.hpp"

namespace eegwl {

struct SubsetScore {
  SubscaleSet subset;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  double mean_f1 = 0.0;
  bool failed = false;
  std::string error;
};

struct SubsetSearchResult {
  ModelKind kind = ModelKind::Connectivity;
  std::vector<SubsetScore> ranked;  // failed subsets last
  SubscaleSet chosen;
};

/// Higher accuracy, then higher F1, then fewer subscales, then mask order.
inline bool subset_better(const SubsetScore& a, const SubsetScore& b) {
  if (a.failed != b.failed) return !a.failed;
  if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
  if (a.mean_f1 != b.mean_f1) return a.mean_f1 > b.mean_f1;
  if (a.subset.size() != b.subset.size()) return a.subset.size() < b.subset.size();
  return a.subset.mask() < b.subset.mask();
}

inline SubsetSearchResult subscale_subset_search(std::span<const TlxRecord> tlx, const FeatureDataset& features,
                                                 EvalConfig cfg, ModelKind kind = ModelKind::Connectivity) {
  cfg.validate();
  const unsigned jobs = cfg.jobs;
  cfg.jobs = 1;
  SubsetSearchResult out;
  out.kind = kind;
  const auto sets = all_subscale_sets();
  out.ranked.resize(sets.size());
  parallel_for(sets.size(), jobs, [&](std::size_t i) {
    auto& s = out.ranked[i];
    s.subset = sets[i];
    try {
      const auto labels = make_labels(tlx, sets[i]);
      const auto fm = assemble_matrix(features, label_map(labels), kind);
      const auto rep = evaluate_matrix(fm, kind, cfg);
      s.mean_accuracy = rep.mean_accuracy;
      s.sd_accuracy = rep.sd_accuracy;
      s.mean_f1 = rep.mean_f1;
    } catch (const Error& e) {
      s.failed = true;
      s.error = e.what();
    }
  });
  std::ranges::sort(out.ranked, subset_better);
  if (out.ranked.front().failed) throw Error(Errc::NonConvergence, "every subscale subset failed");
  out.chosen = out.ranked.front().subset;
  return out;
}

inline nlohmann::json to_json(const SubsetSearchResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : r.ranked) {
    nlohmann::json j = {{"subset", s.subset.to_string()},
                        {"size", s.subset.size()},
                        {"mean_accuracy", s.mean_accuracy},
                        {"sd_accuracy", s.sd_accuracy},
                        {"mean_f1", s.mean_f1},
                        {"status", s.failed ? "failed" : "ok"}};
    if (s.failed) j["error"] = s.error;
    rows.push_back(j);
  }
  return {{"schema", "SUBSET1"},
          {"model_kind", to_string(r.kind)},
          {"criterion", "mean CV accuracy, then mean F1, then fewer subscales"},
          {"chosen", r.chosen.to_string()},
          {"ranking", rows}};
}

}  // namespace eegwl
