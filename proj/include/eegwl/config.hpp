#pragma once

// Pipeline configuration file: JSON, validated against a fixed schema before
// anything runs. Errors carry the JSON-pointer path of the offending value.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "connectivity.hpp"
#include "evaluation.hpp"
#include "features.hpp"

#ifndef EEGWL_VERSION
#define EEGWL_VERSION "0.0.0"
#endif

namespace eegwl {

inline constexpr const char* kVersion = EEGWL_VERSION;

struct SynthSettings {
  int subjects = 49;
  std::string effect = "connectivity";
  double duration_s = 300.0;
  double baseline_duration_s = 60.0;
};

struct PipelineConfig {
  BandSet bands = default_bands();
  WaveletConfig wavelet{};
  double lowpass_hz = 45.0;
  int rfe_n_select = 8;
  int rfe_max_iterations = 30000;
  StackedGrid grid{};
  int k = 8;
  double split = 0.2;
  std::uint64_t seed = 0;
  int inner_folds = 5;
  GridMode grid_mode = GridMode::Nested;
  RfeMode rfe_mode = RfeMode::PerFold;
  std::string subscales = "md,pd,perf,effort";  // or "search"
  SynthSettings synth{};
  std::map<std::string, std::string> paths;
};

namespace detail {

class ConfigReader {
 public:
  [[noreturn]] static void fail(const std::string& ptr, const std::string& msg) {
    throw Error(Errc::InvalidConfig, (ptr.empty() ? "/" : ptr) + ": " + msg);
  }

  static void object(const nlohmann::json& j, const std::string& ptr, std::initializer_list<const char*> keys) {
    if (!j.is_object()) fail(ptr, "expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
      if (!allowed.contains(k)) fail(ptr + "/" + k, "unknown key");
  }

  static double number(const nlohmann::json& j, const std::string& ptr, double lo, double hi) {
    if (!j.is_number()) fail(ptr, "expected a number");
    const double v = j.get<double>();
    if (!(v >= lo && v <= hi)) fail(ptr, "value " + j.dump() + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
    return v;
  }

  static int integer(const nlohmann::json& j, const std::string& ptr, long lo, long hi) {
    if (!j.is_number_integer()) fail(ptr, "expected an integer");
    const auto v = j.get<long>();
    if (v < lo || v > hi)
      fail(ptr, "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
  }

  static std::string string(const nlohmann::json& j, const std::string& ptr,
                            std::initializer_list<const char*> choices = {}) {
    if (!j.is_string()) fail(ptr, "expected a string");
    auto s = j.get<std::string>();
    if (choices.size() == 0) return s;
    std::string all;
    for (auto c : choices) {
      if (s == c) return s;
      all += all.empty() ? c : std::string(", ") + c;
    }
    fail(ptr, "expected one of " + all);
  }

  template <class T, class F>
  static std::vector<T> list(const nlohmann::json& j, const std::string& ptr, F&& item) {
    if (!j.is_array() || j.empty()) fail(ptr, "expected a nonempty array");
    std::vector<T> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(item(j[i], ptr + "/" + std::to_string(i)));
    return out;
  }

 private:
  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }
};

}  // namespace detail

inline PipelineConfig parse_config(const nlohmann::json& j) {
  using R = detail::ConfigReader;
  PipelineConfig c;
  R::object(j, "", {"bands", "wavelet", "filter", "rfe", "grids", "eval", "labeling", "synth", "paths", "seed"});
  constexpr double big = 1e12;
  if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(R::integer(j["seed"], "/seed", 0, 2147483647));
  if (j.contains("bands")) {
    const auto& b = j["bands"];
    R::object(b, "/bands", {"theta", "alpha", "beta"});
    const char* names[] = {"theta", "alpha", "beta"};
    for (std::size_t i = 0; i < 3; ++i) {
      if (!b.contains(names[i])) continue;
      const std::string p = std::string("/bands/") + names[i];
      const auto& e = b[names[i]];
      if (!e.is_array() || e.size() != 2) R::fail(p, "expected [low_hz, high_hz]");
      c.bands[i].lo_hz = R::number(e[0], p + "/0", 0.0, big);
      c.bands[i].hi_hz = R::number(e[1], p + "/1", 0.0, big);
      if (!(c.bands[i].lo_hz < c.bands[i].hi_hz)) R::fail(p, "low edge must be below high edge");
    }
  }
  if (j.contains("wavelet")) {
    const auto& w = j["wavelet"];
    R::object(w, "/wavelet", {"n_cycles", "n_freqs"});
    if (w.contains("n_cycles")) c.wavelet.n_cycles = R::number(w["n_cycles"], "/wavelet/n_cycles", 1.0, 100.0);
    if (w.contains("n_freqs")) c.wavelet.n_freqs = R::integer(w["n_freqs"], "/wavelet/n_freqs", 1, 100);
  }
  if (j.contains("filter")) {
    R::object(j["filter"], "/filter", {"cutoff_hz"});
    if (j["filter"].contains("cutoff_hz"))
      c.lowpass_hz = R::number(j["filter"]["cutoff_hz"], "/filter/cutoff_hz", 1e-6, big);
  }
  if (j.contains("rfe")) {
    const auto& r = j["rfe"];
    R::object(r, "/rfe", {"n_select", "max_iterations"});
    if (r.contains("n_select")) c.rfe_n_select = R::integer(r["n_select"], "/rfe/n_select", 1, 100000);
    if (r.contains("max_iterations"))
      c.rfe_max_iterations = R::integer(r["max_iterations"], "/rfe/max_iterations", 1, 100000000);
  }
  if (j.contains("grids")) {
    const auto& g = j["grids"];
    R::object(g, "/grids", {"rf_n_estimators", "lr_C", "svm_C", "meta_C"});
    auto pos = [](const nlohmann::json& v, const std::string& p) {
      const double x = R::number(v, p, 0.0, big);
      if (!(x > 0.0)) R::fail(p, "must be positive");
      return x;
    };
    if (g.contains("rf_n_estimators"))
      c.grid.rf_n_estimators = R::list<int>(g["rf_n_estimators"], "/grids/rf_n_estimators",
                                            [](const nlohmann::json& v, const std::string& p) {
                                              return R::integer(v, p, 1, 100000);
                                            });
    if (g.contains("lr_C")) c.grid.lr_C = R::list<double>(g["lr_C"], "/grids/lr_C", pos);
    if (g.contains("svm_C")) c.grid.svm_C = R::list<double>(g["svm_C"], "/grids/svm_C", pos);
    if (g.contains("meta_C")) c.grid.meta_C = R::list<double>(g["meta_C"], "/grids/meta_C", pos);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    R::object(e, "/eval", {"k", "split", "seed", "inner_folds", "grid_mode", "rfe_mode"});
    if (e.contains("k")) c.k = R::integer(e["k"], "/eval/k", 2, 1000);
    if (e.contains("split")) {
      c.split = R::number(e["split"], "/eval/split", 0.0, 1.0);
      if (c.split == 0.0 || c.split == 1.0) R::fail("/eval/split", "must lie strictly between 0 and 1");
    }
    if (e.contains("seed")) c.seed = static_cast<std::uint64_t>(R::integer(e["seed"], "/eval/seed", 0, 2147483647));
    if (e.contains("inner_folds")) c.inner_folds = R::integer(e["inner_folds"], "/eval/inner_folds", 2, 1000);
    if (e.contains("grid_mode"))
      c.grid_mode = R::string(e["grid_mode"], "/eval/grid_mode", {"nested", "global"}) == "nested"
                        ? GridMode::Nested
                        : GridMode::Global;
    if (e.contains("rfe_mode"))
      c.rfe_mode = R::string(e["rfe_mode"], "/eval/rfe_mode", {"per_fold", "full_data"}) == "per_fold"
                       ? RfeMode::PerFold
                       : RfeMode::FullData;
  }
  if (j.contains("labeling")) {
    R::object(j["labeling"], "/labeling", {"subscales"});
    if (j["labeling"].contains("subscales")) {
      c.subscales = R::string(j["labeling"]["subscales"], "/labeling/subscales");
      if (c.subscales != "search") {
        try {
          SubscaleSet::parse(c.subscales);
        } catch (const Error& e) {
          R::fail("/labeling/subscales", e.what());
        }
      }
    }
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    R::object(s, "/synth", {"subjects", "effect", "duration_s", "baseline_duration_s"});
    if (s.contains("subjects")) c.synth.subjects = R::integer(s["subjects"], "/synth/subjects", 4, 100000);
    if (s.contains("effect"))
      c.synth.effect = R::string(s["effect"], "/synth/effect", {"none", "power", "connectivity", "both"});
    if (s.contains("duration_s")) c.synth.duration_s = R::number(s["duration_s"], "/synth/duration_s", 60.0, big);
    if (s.contains("baseline_duration_s"))
      c.synth.baseline_duration_s = R::number(s["baseline_duration_s"], "/synth/baseline_duration_s", 8.0, big);
  }
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    R::object(p, "/paths", {"dataset", "features", "labels", "output"});
    for (const auto& [k, v] : p.items()) c.paths[k] = R::string(v, "/paths/" + k);
  }
  try {
    validate_bands(c.bands, c.lowpass_hz);
  } catch (const Error& e) {
    R::fail("/bands", e.what());
  }
  return c;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json bands = nlohmann::json::object();
  for (const auto& b : c.bands) {
    auto name = to_string(b.name);
    for (auto& ch : name) ch = static_cast<char>(std::tolower(ch));
    bands[name] = {b.lo_hz, b.hi_hz};
  }
  return {{"seed", c.seed},
          {"bands", bands},
          {"wavelet", {{"n_cycles", c.wavelet.n_cycles}, {"n_freqs", c.wavelet.n_freqs}}},
          {"filter", {{"cutoff_hz", c.lowpass_hz}}},
          {"rfe", {{"n_select", c.rfe_n_select}, {"max_iterations", c.rfe_max_iterations}}},
          {"grids",
           {{"rf_n_estimators", c.grid.rf_n_estimators},
            {"lr_C", c.grid.lr_C},
            {"svm_C", c.grid.svm_C},
            {"meta_C", c.grid.meta_C}}},
          {"eval",
           {{"k", c.k},
            {"split", c.split},
            {"inner_folds", c.inner_folds},
            {"grid_mode", c.grid_mode == GridMode::Nested ? "nested" : "global"},
            {"rfe_mode", c.rfe_mode == RfeMode::PerFold ? "per_fold" : "full_data"}}},
          {"labeling", {{"subscales", c.subscales}}},
          {"synth",
           {{"subjects", c.synth.subjects},
            {"effect", c.synth.effect},
            {"duration_s", c.synth.duration_s},
            {"baseline_duration_s", c.synth.baseline_duration_s}}}};
}

inline std::string config_hash(const PipelineConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_string(to_json(c).dump())));
  return buf;
}

inline nlohmann::json provenance(const PipelineConfig& c, std::string_view stage) {
  return {{"stage", stage}, {"config_hash", config_hash(c)}, {"seed", c.seed}, {"tool_version", kVersion},
          {"config", to_json(c)}};
}

inline EvalConfig make_eval_config(const PipelineConfig& c, unsigned jobs = 1) {
  EvalConfig e;
  e.folds = c.k;
  e.test_fraction = c.split;
  e.seed = c.seed;
  e.n_select = c.rfe_n_select;
  e.rfe_max_iterations = c.rfe_max_iterations;
  e.grid = c.grid;
  e.inner_folds = c.inner_folds;
  e.grid_mode = c.grid_mode;
  e.rfe_mode = c.rfe_mode;
  e.jobs = jobs;
  return e;
}

inline FeaturePipelineConfig make_feature_config(const PipelineConfig& c, bool spectral_only = false) {
  return {c.bands, c.wavelet, c.lowpass_hz, spectral_only};
}

}  // namespace eegwl
