#include <sys/wait.h>

#include "test_support.hpp"

using namespace eegwl;
using namespace eegwl::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Run cli(const std::string& args, const fs::path& scratch) {
  const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const auto cmd = std::string(EEGWL_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

const std::string kSmall = "--subjects 4 --duration 60 --baseline-duration 16";

class Cli : public ::testing::Test {
 protected:
  TempDir tmp{"cli"};
  fs::path p(const std::string& name) const { return tmp.path() / name; }
};

}  // namespace

TEST_F(Cli, SynthWritesFourRecordingsPerSubject) {
  const auto r = cli("synth " + kSmall + " --seed 3 -o " + p("ds").string(), tmp.path());
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(p("ds") / "eeg")) n += e.path().extension() == ".eegr";
  EXPECT_EQ(n, 16u);
  EXPECT_TRUE(fs::exists(p("ds") / "tlx.csv"));
  EXPECT_TRUE(fs::exists(p("ds") / "ground_truth.json"));
}

TEST_F(Cli, SynthIsByteDeterministic) {
  ASSERT_EQ(cli("synth " + kSmall + " --seed 9 -o " + p("a").string(), tmp.path()).code, 0);
  ASSERT_EQ(cli("synth " + kSmall + " --seed 9 -o " + p("b").string(), tmp.path()).code, 0);
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(p("a"))) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), p("a"));
    EXPECT_EQ(slurp(e.path()), slurp(p("b") / rel)) << rel;
    ++compared;
  }
  EXPECT_EQ(compared, 18u);
}

TEST_F(Cli, TooFewSubjectsIsInputError) {
  const auto r = cli("synth --subjects 3 -o " + p("x").string(), tmp.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("subjects"), std::string::npos);
}

TEST_F(Cli, FeaturesAndLabels) {
  ASSERT_EQ(cli("synth " + kSmall + " --effect both --seed 1 -o " + p("ds").string(), tmp.path()).code, 0);
  auto r = cli("features --dataset " + p("ds").string() + " -o " + p("f.json").string(), tmp.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto feats = nlohmann::json::parse(slurp(p("f.json")));
  const auto ds = feature_dataset_from_json(feats);
  EXPECT_EQ(ds.names.size(), 72u);
  EXPECT_EQ(ds.rows.size(), 8u);

  r = cli("features --spectral-only --dataset " + p("ds").string(), tmp.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(feature_dataset_from_json(nlohmann::json::parse(r.out)).names.size(), 42u);

  r = cli("labels --tlx " + (p("ds") / "tlx.csv").string() + " -o " + p("l.json").string(), tmp.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = labels_from_json(nlohmann::json::parse(slurp(p("l.json"))));
  ASSERT_EQ(rows.size(), 8u);
  int high = 0;
  for (const auto& row : rows) high += row.label == WorkloadLabel::High;
  EXPECT_EQ(high, 4);
}

TEST_F(Cli, MissingBaselineIsNamed) {
  ASSERT_EQ(cli("synth " + kSmall + " --seed 2 -o " + p("ds").string(), tmp.path()).code, 0);
  RecordingIds ids{subject_name(1), Condition::VR, Task::MediumTurn, 1};
  const auto victim = p("ds") / "eeg" / recording_filename(ids, Phase::Baseline);
  ASSERT_TRUE(fs::remove(victim)) << victim;
  const auto r = cli("features --dataset " + p("ds").string(), tmp.path());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find(subject_name(1) + "/VR"), std::string::npos) << r.err;
}

TEST_F(Cli, StatsVerdictOnBalancedTable) {
  std::vector<TlxRecord> t;
  for (int k = 0; k < 25; ++k) {
    const double base = 30 + k, delta = 1 + 0.3 * k;
    for (int half = 0; half < 2; ++half) {
      const auto id = (half ? "B" : "A") + std::to_string(k);
      TlxRecord d{id, Condition::Desktop, Task::MediumTurn, 1, {}}, v{id, Condition::VR, Task::SpeedChange, 2, {}};
      d.scores.fill(base + (half ? 0 : delta));
      v.scores.fill(base + (half ? delta : 0));
      t.push_back(d);
      t.push_back(v);
    }
  }
  {
    std::ofstream out(p("tlx.csv"));
    write_tlx_csv(out, t);
  }
  const auto r = cli("stats --tlx " + p("tlx.csv").string(), tmp.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["verdict"], "no blocker");
  EXPECT_NE(r.err.find("verdict: no blocker"), std::string::npos);
}

TEST_F(Cli, MalformedConfigIsInputError) {
  {
    std::ofstream(p("bad.json")) << R"({"eval": {"k": 1}})";
    std::ofstream(p("broken.json")) << "{ not json";
  }
  auto r = cli("--config " + p("bad.json").string() + " stats --tlx x.csv", tmp.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/eval/k"), std::string::npos) << r.err;
  r = cli("--config " + p("broken.json").string() + " stats --tlx x.csv", tmp.path());
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, ReportRendersEvalFiles) {
  EvalReport a;
  a.kind = ModelKind::Connectivity;
  a.per_fold = {{0, 0.75, 0.7, {"Theta Oz"}, {}}, {1, 0.85, 0.8, {"Theta Oz"}, {}}};
  summarize(a);
  {
    std::ofstream(p("e.json")) << to_json(a).dump();
  }
  const auto r = cli("report --eval " + p("e.json").string(), tmp.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("80 ± 5"), std::string::npos) << r.out;
}
