// eegwl: command-line front end for the workload pipeline.
//
// Stages exchange files: synth -> features -> labels -> select/train/evaluate,
// plus stats on a TLX table and report over EVAL1 files.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "eegwl/eegwl.hpp"

namespace {

using namespace eegwl;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string output;
};

PipelineConfig load_config(const Globals& g) {
  PipelineConfig cfg;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw Error(Errc::InvalidConfig, "cannot open config " + g.config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidConfig, g.config_path + ": " + e.what());
    }
    cfg = parse_config(j);
  }
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

std::string pick(const std::string& flag, const PipelineConfig& cfg, const char* key, const char* what) {
  if (!flag.empty()) return flag;
  if (auto it = cfg.paths.find(key); it != cfg.paths.end()) return it->second;
  throw Error(Errc::InvalidArgument, std::string("missing ") + what);
}

void emit(const Globals& g, const std::string& text) {
  if (g.output.empty() || g.output == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(g.output);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write " + g.output);
  out << text;
}

void emit_json(const Globals& g, const nlohmann::json& j) { emit(g, j.dump(2) + "\n"); }

FeatureMatrix load_matrix(const std::string& features, const std::string& labels, ModelKind kind) {
  const auto ds = feature_dataset_from_json(read_json_file(features));
  const auto rows = labels_from_json(read_json_file(labels));
  return assemble_matrix(ds, label_map(rows), kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG workload classification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "pipeline configuration (JSON)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed_value, "master seed (overrides the config)");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::Range(1u, 256u));
  app.add_option("--output,-o", g.output, "output file or directory");
  app.fallthrough();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
  std::optional<int> subjects;
  std::string effect;
  std::optional<double> duration, baseline_duration;
  synth->add_option("--subjects", subjects, "number of subjects (>= 4)");
  synth->add_option("--effect", effect, "none | power | connectivity | both")
      ->check(CLI::IsMember({"none", "power", "connectivity", "both"}));
  synth->add_option("--duration", duration, "test-phase seconds (>= 60)");
  synth->add_option("--baseline-duration", baseline_duration, "baseline seconds (>= 8)");

  // features
  auto* features = app.add_subcommand("features", "extract baseline-normalized features");
  std::string dataset_dir;
  bool spectral_only = false;
  features->add_option("--dataset", dataset_dir, "dataset directory");
  features->add_flag("--spectral-only", spectral_only, "only the 42 spectral features");

  // labels
  auto* labels = app.add_subcommand("labels", "TLX aggregation, mixed-model residuals, median split");
  std::string tlx_path, subscales, features_path, model_kind = "connectivity";
  labels->add_option("--tlx", tlx_path, "TLX CSV");
  labels->add_option("--subscales", subscales, "e.g. md,pd,perf,effort or 'search'");
  labels->add_option("--features", features_path, "FEAT1 file (needed by 'search')");
  labels->add_option("--model", model_kind, "model used by 'search'")
      ->check(CLI::IsMember({"baseline", "connectivity"}));

  // select / train / evaluate share inputs
  std::string labels_path;
  auto add_io = [&](CLI::App* c) {
    c->add_option("--features", features_path, "FEAT1 file");
    c->add_option("--labels", labels_path, "LBL1 file");
    c->add_option("--model", model_kind, "baseline | connectivity")
        ->check(CLI::IsMember({"baseline", "connectivity"}));
  };
  auto* select = app.add_subcommand("select", "RFE ranking on the full dataset");
  add_io(select);
  auto* train = app.add_subcommand("train", "RFE, grid search and a stacked model on all samples");
  add_io(train);
  std::string grid_csv;
  train->add_option("--grid-csv", grid_csv, "write the grid score table here");
  auto* evaluate = app.add_subcommand("evaluate", "80/20 split with stratified k-fold CV");
  add_io(evaluate);
  bool print_table = false;
  evaluate->add_flag("--table", print_table, "also print the summary table to stderr");

  auto* stats = app.add_subcommand("stats", "paired t-tests and KS checks on a TLX table");
  stats->add_option("--tlx", tlx_path, "TLX CSV");
  stats->add_option("--subscales", subscales, "subscales to aggregate (default: config)");

  auto* report = app.add_subcommand("report", "render EVAL1 reports as a table");
  std::vector<std::string> eval_files;
  report->add_option("--eval", eval_files, "EVAL1 files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    const auto cfg = load_config(g);

    if (*synth) {
      if (g.output.empty()) throw Error(Errc::InvalidArgument, "synth needs --output DIR");
      auto c = cfg;
      if (subjects) c.synth.subjects = *subjects;
      if (!effect.empty()) c.synth.effect = effect;
      if (duration) c.synth.duration_s = *duration;
      if (baseline_duration) c.synth.baseline_duration_s = *baseline_duration;
      if (c.synth.subjects < 4) throw Error(Errc::InvalidArgument, "--subjects must be at least 4");
      auto spec = effect_preset(c.synth.effect);
      spec.seed = c.seed;
      spec.duration_s = c.synth.duration_s;
      spec.baseline_duration_s = c.synth.baseline_duration_s;
      TlxParams tlx;
      if (c.subscales != "search") tlx.label_subset = SubscaleSet::parse(c.subscales);
      write_dataset(g.output, c.synth.subjects, spec, tlx, g.jobs, provenance(c, "synth"));
      std::cerr << "wrote " << 4 * c.synth.subjects << " recordings to " << g.output << "\n";
      return 0;
    }

    if (*features) {
      const auto dir = pick(dataset_dir, cfg, "dataset", "--dataset");
      auto ds = extract_dataset_dir(dir, make_feature_config(cfg, spectral_only), g.jobs);
      ds.provenance = provenance(cfg, "features");
      ds.provenance["spectral_only"] = spectral_only;
      emit_json(g, to_json(ds));
      return 0;
    }

    if (*labels) {
      const auto tlx = read_tlx_csv(pick(tlx_path, cfg, "dataset", "--tlx"));
      const auto which = subscales.empty() ? cfg.subscales : subscales;
      nlohmann::json out;
      if (which == "search") {
        const auto ds = feature_dataset_from_json(read_json_file(pick(features_path, cfg, "features", "--features")));
        auto ec = make_eval_config(cfg, g.jobs);
        ec.holdout = false;
        const auto result = subscale_subset_search(tlx, ds, ec, parse_model_kind(model_kind));
        out = to_json(make_labels(tlx, result.chosen));
        out["subset_search"] = to_json(result);
      } else {
        out = to_json(make_labels(tlx, SubscaleSet::parse(which)));
      }
      out["provenance"] = provenance(cfg, "labels");
      emit_json(g, out);
      return 0;
    }

    if (*select || *train || *evaluate) {
      const auto kind = parse_model_kind(model_kind);
      const auto fm = load_matrix(pick(features_path, cfg, "features", "--features"),
                                  pick(labels_path, cfg, "labels", "--labels"), kind);
      if (*select) {
        RfeConfig rc;
        rc.n_select = static_cast<std::size_t>(cfg.rfe_n_select);
        rc.estimator.max_iterations = cfg.rfe_max_iterations;
        rc.estimator.seed = derive_seed(cfg.seed, {hash_string("rfe")});
        auto j = to_json(rfe(fm, rc), rc);
        j["model_kind"] = to_string(kind);
        j["provenance"] = provenance(cfg, "select");
        emit_json(g, j);
        return 0;
      }
      if (*train) {
        if (g.output.empty()) throw Error(Errc::InvalidArgument, "train needs --output FILE");
        RfeConfig rc;
        rc.n_select = static_cast<std::size_t>(cfg.rfe_n_select);
        rc.estimator.max_iterations = cfg.rfe_max_iterations;
        rc.estimator.seed = derive_seed(cfg.seed, {hash_string("rfe")});
        const auto sub = fm.select_columns(rfe(fm, rc).selected);
        const auto grid = grid_search(sub, cfg.grid, cfg.k, derive_seed(cfg.seed, {hash_string("grid")}), {}, g.jobs);
        if (!grid_csv.empty()) {
          std::ofstream csv(grid_csv);
          write_grid_csv(csv, grid);
        }
        auto best = grid.best;
        best.seed = derive_seed(cfg.seed, {hash_string("train")});
        const auto model = train_stacked(sub, best);
        auto prov = provenance(cfg, "train");
        prov["model_kind"] = to_string(kind);
        save_model(model, g.output, prov);
        std::cerr << "selected:";
        for (const auto& n : model.feature_names) std::cerr << " [" << n << "]";
        std::cerr << "\n";
        return 0;
      }
      auto rep = evaluate_matrix(fm, kind, make_eval_config(cfg, g.jobs));
      rep.provenance = provenance(cfg, "evaluate");
      emit_json(g, to_json(rep));
      if (print_table) std::cerr << render_table(std::span<const EvalReport>(&rep, 1));
      return 0;
    }

    if (*stats) {
      const auto tlx = read_tlx_csv(pick(tlx_path, cfg, "dataset", "--tlx"));
      const auto which = subscales.empty() ? cfg.subscales : subscales;
      const auto set = which == "search" ? SubscaleSet::four_scale() : SubscaleSet::parse(which);
      const auto result = carryover_analysis(tlx, set);
      auto j = to_json(result);
      j["subscales"] = set.to_string();
      j["provenance"] = provenance(cfg, "stats");
      emit_json(g, j);
      std::cerr << "verdict: " << result.verdict << "\n";
      return 0;
    }

    if (*report) {
      std::vector<EvalReport> reps;
      for (const auto& f : eval_files) reps.push_back(eval_report_from_json(read_json_file(f)));
      emit(g, render_table(reps));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_input_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
