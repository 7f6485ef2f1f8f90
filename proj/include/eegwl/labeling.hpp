#pragma once

// NASA-TLX workload labels: equal-weight subscale aggregation, a
// random-intercept mixed model fitted by profiled REML, conditional
// residuals, and the median split into Low/High.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "eeg_data.hpp"
#include "error.hpp"

namespace eegwl {

enum class Subscale { MentalDemand, PhysicalDemand, TemporalDemand, Performance, Effort, Frustration };

inline constexpr std::size_t kNumSubscales = 6;

inline constexpr std::array<std::string_view, kNumSubscales> kSubscaleShort{
    "md", "pd", "td", "perf", "effort", "frus"};
inline constexpr std::array<std::string_view, kNumSubscales> kSubscaleColumn{
    "mental", "physical", "temporal", "performance", "effort", "frustration"};

struct TlxRecord {
  std::string subject_id;
  Condition condition = Condition::Desktop;
  Task task = Task::MediumTurn;
  int order = 1;
  std::array<double, kNumSubscales> scores{};

  double score(Subscale s) const { return scores[static_cast<std::size_t>(s)]; }
};

inline void validate(const TlxRecord& r) {
  for (std::size_t i = 0; i < kNumSubscales; ++i)
    if (!(r.scores[i] >= 0.0 && r.scores[i] <= 100.0))
      throw Error(Errc::InvalidArgument, "subscale " + std::string(kSubscaleColumn[i]) + " of " +
                                             r.subject_id + " outside [0, 100]");
}

/// Nonempty subset of the six subscales, stored as a bit mask.
class SubscaleSet {
 public:
  SubscaleSet() = default;
  explicit SubscaleSet(std::uint8_t mask) : mask_(mask) {
    if (mask_ == 0 || mask_ >= (1u << kNumSubscales))
      throw Error(Errc::EmptySubset, "subscale mask " + std::to_string(mask));
  }
  SubscaleSet(std::initializer_list<Subscale> members) {
    for (auto s : members) mask_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(s));
    if (mask_ == 0) throw Error(Errc::EmptySubset, "no subscales selected");
  }

  static SubscaleSet full() { return SubscaleSet(static_cast<std::uint8_t>(0x3f)); }
  static SubscaleSet four_scale() {
    return {Subscale::MentalDemand, Subscale::PhysicalDemand, Subscale::Performance,
            Subscale::Effort};
  }

  /// Parses "md,pd,perf,effort" (order-insensitive).
  static SubscaleSet parse(std::string_view text) {
    std::uint8_t mask = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto comma = text.find(',', pos);
      const auto tok = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
      if (!tok.empty()) {
        auto it = std::ranges::find(kSubscaleShort, tok);
        if (it == kSubscaleShort.end())
          throw Error(Errc::InvalidArgument, "unknown subscale '" + std::string(tok) + "'");
        mask |= static_cast<std::uint8_t>(1u << (it - kSubscaleShort.begin()));
      }
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (mask == 0) throw Error(Errc::EmptySubset, "no subscales in '" + std::string(text) + "'");
    return SubscaleSet(mask);
  }

  std::uint8_t mask() const { return mask_; }
  std::size_t size() const { return static_cast<std::size_t>(std::popcount(mask_)); }
  bool contains(Subscale s) const { return mask_ & (1u << static_cast<unsigned>(s)); }

  std::vector<Subscale> members() const {
    std::vector<Subscale> out;
    for (unsigned i = 0; i < kNumSubscales; ++i)
      if (mask_ & (1u << i)) out.push_back(static_cast<Subscale>(i));
    return out;
  }

  std::string to_string() const {
    std::string out;
    for (auto s : members()) {
      if (!out.empty()) out += ',';
      out += kSubscaleShort[static_cast<std::size_t>(s)];
    }
    return out;
  }

  friend bool operator==(const SubscaleSet&, const SubscaleSet&) = default;

 private:
  std::uint8_t mask_ = 0;
};

/// All 63 nonempty subsets in mask order.
inline std::vector<SubscaleSet> all_subscale_sets() {
  std::vector<SubscaleSet> out;
  for (unsigned m = 1; m < (1u << kNumSubscales); ++m)
    out.emplace_back(static_cast<std::uint8_t>(m));
  return out;
}

/// Equal-weight mean of the selected subscales.
inline double aggregate_subscales(const TlxRecord& rec, const SubscaleSet& set) {
  if (set.size() == 0) throw Error(Errc::EmptySubset, "empty subscale set");
  double sum = 0.0;
  for (auto s : set.members()) sum += rec.score(s);
  return sum / static_cast<double>(set.size());
}

// ---------------------------------------------------------------------------
// Random-intercept model: score = b0 + b1*condition + b2*task + u_subject + e

struct FixedEffect {
  std::string name;
  double coef = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;  // two-sided Wald
};

struct MixedModelFit {
  std::array<FixedEffect, 3> fixed;  // intercept, condition, task
  double group_variance = 0.0;
  double residual_variance = 0.0;
  double reml_objective = 0.0;  // -2 * restricted log-likelihood, up to a constant
  int iterations = 0;
  std::vector<std::string> subjects;  // first-appearance order
  std::vector<double> intercepts;     // BLUPs, aligned with `subjects`
  std::vector<std::size_t> group;     // per-sample index into `subjects`
  std::vector<double> residuals;      // score - fixed prediction - subject intercept
};

struct LmmOptions {
  double tolerance = 1e-8;  // golden-section bracket width on lambda / (1 + lambda)
  int max_iterations = 500;
};

namespace detail {

struct LmmData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::size_t> group;
  std::vector<double> group_size;
  // per-group column sums of X and sums of y
  Eigen::MatrixXd Xsum;  // [groups x p]
  Eigen::VectorXd ysum;
};

struct LmmEval {
  double objective;
  Eigen::VectorXd beta;
  Eigen::MatrixXd xtx_inv;
  double rss;  // r' H^-1 r
};

// H = I + lambda Z Z'; H^-1 restricted to group i is I - c_i J with
// c_i = lambda / (1 + lambda n_i).
inline LmmEval lmm_evaluate(const LmmData& d, double lambda) {
  const auto p = d.X.cols();
  const auto n = static_cast<double>(d.X.rows());
  Eigen::MatrixXd A = d.X.transpose() * d.X;
  Eigen::VectorXd b = d.X.transpose() * d.y;
  double logdet_h = 0.0;
  for (Eigen::Index g = 0; g < d.Xsum.rows(); ++g) {
    const double ni = d.group_size[static_cast<std::size_t>(g)];
    const double c = lambda / (1.0 + lambda * ni);
    A.noalias() -= c * d.Xsum.row(g).transpose() * d.Xsum.row(g);
    b.noalias() -= c * d.ysum(g) * d.Xsum.row(g).transpose();
    logdet_h += std::log1p(lambda * ni);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw Error(Errc::SingularDesign, "X' H^-1 X not positive definite");
  LmmEval e;
  e.beta = llt.solve(b);
  e.xtx_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd r = d.y - d.X * e.beta;
  double rss = r.squaredNorm();
  std::vector<double> rsum(d.group_size.size(), 0.0);
  for (Eigen::Index i = 0; i < r.size(); ++i) rsum[d.group[static_cast<std::size_t>(i)]] += r(i);
  for (std::size_t g = 0; g < rsum.size(); ++g) {
    const double c = lambda / (1.0 + lambda * d.group_size[g]);
    rss -= c * rsum[g] * rsum[g];
  }
  e.rss = rss;
  double logdet_a = 0.0;
  const Eigen::MatrixXd L = llt.matrixL();
  for (Eigen::Index i = 0; i < p; ++i) logdet_a += 2.0 * std::log(L(i, i));
  e.objective = logdet_h + logdet_a + (n - static_cast<double>(p)) * std::log(rss);
  return e;
}

inline double standard_normal_sf2(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

}  // namespace detail

/// REML fit, profiled over the variance ratio lambda = group_var / residual_var.
/// condition and task are 0/1 contrasts.
inline MixedModelFit fit_random_intercept_lmm(std::span<const double> scores,
                                              std::span<const int> condition,
                                              std::span<const int> task,
                                              std::span<const std::string> subject,
                                              const LmmOptions& opt = {}) {
  const std::size_t n = scores.size();
  if (condition.size() != n || task.size() != n || subject.size() != n)
    throw Error(Errc::ShapeMismatch, "LMM inputs differ in length");
  if (n < 4) throw Error(Errc::InvalidArgument, "too few samples for the mixed model");

  detail::LmmData d;
  MixedModelFit fit;
  std::map<std::string, std::size_t> gid;
  d.group.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = gid.try_emplace(subject[i], fit.subjects.size());
    if (inserted) fit.subjects.push_back(subject[i]);
    d.group[i] = it->second;
  }
  const std::size_t groups = fit.subjects.size();
  d.X.resize(static_cast<Eigen::Index>(n), 3);
  d.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (!std::isfinite(scores[i])) throw Error(Errc::InvalidArgument, "non-finite score");
    d.X(r, 0) = 1.0;
    d.X(r, 1) = condition[i];
    d.X(r, 2) = task[i];
    d.y(r) = scores[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
  qr.setThreshold(1e-10);
  if (qr.rank() < d.X.cols())
    throw Error(Errc::SingularDesign, "fixed-effect columns are collinear");

  d.group_size.assign(groups, 0.0);
  d.Xsum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups), 3);
  d.ysum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(groups));
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = static_cast<Eigen::Index>(d.group[i]);
    d.group_size[d.group[i]] += 1.0;
    d.Xsum.row(g) += d.X.row(static_cast<Eigen::Index>(i));
    d.ysum(g) += d.y(static_cast<Eigen::Index>(i));
  }
  if (std::ranges::none_of(d.group_size, [](double s) { return s >= 2.0; }))
    throw Error(Errc::InvalidArgument, "no subject has repeated measurements");

  // Golden-section search over rho = lambda / (1 + lambda) in [0, 1).
  auto objective = [&](double rho) { return detail::lmm_evaluate(d, rho / (1.0 - rho)).objective; };
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = 1.0 - 1e-9;
  double c = b - gr * (b - a), e = a + gr * (b - a);
  double fc = objective(c), fe = objective(e);
  int it = 0;
  while (b - a > opt.tolerance) {
    if (++it > opt.max_iterations)
      throw Error(Errc::NonConvergence, "REML search did not reach tolerance");
    if (fc <= fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - gr * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + gr * (b - a);
      fe = objective(e);
    }
  }
  double rho = 0.5 * (a + b);
  if (objective(0.0) <= objective(rho)) rho = 0.0;  // boundary: no group variance
  const double lambda = rho / (1.0 - rho);
  const auto best = detail::lmm_evaluate(d, lambda);

  const double dof = static_cast<double>(n) - 3.0;
  fit.residual_variance = best.rss / dof;
  if (!(fit.residual_variance > 0.0))
    throw Error(Errc::DegenerateVariance, "residual variance is zero");
  fit.group_variance = lambda * fit.residual_variance;
  fit.reml_objective = best.objective;
  fit.iterations = it;

  static constexpr std::array<std::string_view, 3> names{"Intercept", "Condition", "Task"};
  for (Eigen::Index k = 0; k < 3; ++k) {
    auto& fe_k = fit.fixed[static_cast<std::size_t>(k)];
    fe_k.name = names[static_cast<std::size_t>(k)];
    fe_k.coef = best.beta(k);
    fe_k.se = std::sqrt(fit.residual_variance * best.xtx_inv(k, k));
    fe_k.z = fe_k.coef / fe_k.se;
    fe_k.p = detail::standard_normal_sf2(fe_k.z);
  }

  const Eigen::VectorXd r = d.y - d.X * best.beta;
  std::vector<double> rsum(groups, 0.0);
  for (std::size_t i = 0; i < n; ++i) rsum[d.group[i]] += r(static_cast<Eigen::Index>(i));
  fit.intercepts.resize(groups);
  for (std::size_t g = 0; g < groups; ++g)
    fit.intercepts[g] = lambda / (1.0 + lambda * d.group_size[g]) * rsum[g];
  fit.group = d.group;
  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    fit.residuals[i] = r(static_cast<Eigen::Index>(i)) - fit.intercepts[d.group[i]];
  return fit;
}

/// Conditional residuals used as replacement workload scores.
inline const std::vector<double>& residual_labels(const MixedModelFit& fit) { return fit.residuals; }

// ---------------------------------------------------------------------------

enum class WorkloadLabel { Low = 0, High = 1 };

inline std::string to_string(WorkloadLabel l) { return l == WorkloadLabel::Low ? "Low" : "High"; }

struct SplitResult {
  std::vector<WorkloadLabel> labels;
  double threshold = 0.0;
  std::size_t n_low = 0;
  std::size_t n_high = 0;
  std::optional<std::string> warning;  // set when ties unbalance the classes
};

/// Values at or below the sample median are Low, above are High.
inline SplitResult median_split(std::span<const double> values) {
  if (values.size() < 2) throw Error(Errc::InvalidArgument, "median split needs n >= 2");
  std::vector<double> sorted(values.begin(), values.end());
  std::ranges::sort(sorted);
  if (sorted.front() == sorted.back())
    throw Error(Errc::DegenerateSplit, "all values are equal");
  const auto n = sorted.size();
  SplitResult out;
  out.threshold = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  out.labels.reserve(n);
  for (double v : values) {
    const bool high = v > out.threshold;
    out.labels.push_back(high ? WorkloadLabel::High : WorkloadLabel::Low);
    ++(high ? out.n_high : out.n_low);
  }
  const auto diff = out.n_low > out.n_high ? out.n_low - out.n_high : out.n_high - out.n_low;
  if (diff > 1)
    out.warning = "tied values at the median: " + std::to_string(out.n_low) + " Low vs " +
                  std::to_string(out.n_high) + " High";
  return out;
}

// ---------------------------------------------------------------------------

struct SampleKey {
  std::string subject_id;
  Condition condition;
  friend auto operator<=>(const SampleKey&, const SampleKey&) = default;
};

inline std::string to_string(const SampleKey& k) { return k.subject_id + "/" + to_string(k.condition); }

struct LabelSet {
  SubscaleSet subset;
  std::vector<SampleKey> keys;
  std::vector<double> scores;     // aggregated subscale means
  std::vector<double> residuals;
  SplitResult split;
  MixedModelFit fit;
};

/// Aggregate -> mixed model -> residuals -> median split.
inline LabelSet make_labels(std::span<const TlxRecord> tlx, const SubscaleSet& subset) {
  LabelSet out;
  out.subset = subset;
  std::vector<int> cond, task;
  std::vector<std::string> subj;
  for (const auto& r : tlx) {
    validate(r);
    out.keys.push_back({r.subject_id, r.condition});
    out.scores.push_back(aggregate_subscales(r, subset));
    cond.push_back(r.condition == Condition::VR ? 1 : 0);
    task.push_back(r.task == Task::SpeedChange ? 1 : 0);
    subj.push_back(r.subject_id);
  }
  out.fit = fit_random_intercept_lmm(out.scores, cond, task, subj);
  out.residuals = residual_labels(out.fit);
  out.split = median_split(out.residuals);
  return out;
}

// TLX CSV --------------------------------------------------------------------

inline constexpr std::string_view kTlxHeader =
    "subject_id,condition,task,order,mental,physical,temporal,performance,effort,frustration";

inline std::vector<TlxRecord> read_tlx_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::InvalidArgument, "empty TLX file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTlxHeader) throw Error(Errc::InvalidArgument, "unexpected TLX header: " + line);
  std::vector<TlxRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10)
      throw Error(Errc::InvalidArgument, "TLX line " + std::to_string(lineno) + ": expected 10 fields");
    TlxRecord r;
    try {
      r.subject_id = f[0];
      r.condition = parse_condition(f[1]);
      r.task = parse_task(f[2]);
      r.order = std::stoi(f[3]);
      for (std::size_t i = 0; i < kNumSubscales; ++i) {
        std::size_t used = 0;
        r.scores[i] = std::stod(f[4 + i], &used);
        if (used != f[4 + i].size()) throw std::invalid_argument(f[4 + i]);
      }
    } catch (const std::logic_error& e) {
      throw Error(Errc::InvalidArgument,
                  "TLX line " + std::to_string(lineno) + ": bad number '" + e.what() + "'");
    } catch (const Error& e) {
      throw Error(Errc::InvalidArgument, "TLX line " + std::to_string(lineno) + ": " + e.what());
    }
    validate(r);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<TlxRecord> read_tlx_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open " + path.string());
  return read_tlx_csv(in);
}

inline void write_tlx_csv(std::ostream& os, std::span<const TlxRecord> rows) {
  os << kTlxHeader << '\n';
  char buf[32];
  for (const auto& r : rows) {
    os << r.subject_id << ',' << to_string(r.condition) << ',' << to_string(r.task) << ','
       << r.order;
    for (double s : r.scores) {
      std::snprintf(buf, sizeof buf, "%.4f", s);
      os << ',' << buf;
    }
    os << '\n';
  }
}

// LBL1 -----------------------------------------------------------------------

inline nlohmann::json to_json(const LabelSet& ls) {
  nlohmann::json labels = nlohmann::json::array();
  for (std::size_t i = 0; i < ls.keys.size(); ++i)
    labels.push_back({{"subject_id", ls.keys[i].subject_id},
                      {"condition", to_string(ls.keys[i].condition)},
                      {"residual", ls.residuals[i]},
                      {"label", to_string(ls.split.labels[i])}});
  nlohmann::json fixed = nlohmann::json::array();
  for (const auto& f : ls.fit.fixed)
    fixed.push_back({{"name", f.name}, {"coef", f.coef}, {"se", f.se}, {"z", f.z}, {"p", f.p}});
  nlohmann::json j = {{"schema", "LBL1"},
                      {"threshold", ls.split.threshold},
                      {"subset", ls.subset.to_string()},
                      {"labels", labels},
                      {"model",
                       {{"fixed_effects", fixed},
                        {"group_variance", ls.fit.group_variance},
                        {"residual_variance", ls.fit.residual_variance},
                        {"estimation", "REML"}}}};
  if (ls.split.warning) j["warning"] = *ls.split.warning;
  return j;
}

struct LabelRow {
  SampleKey key;
  double residual;
  WorkloadLabel label;
};

inline std::vector<LabelRow> labels_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "LBL1")
      throw Error(Errc::InvalidArgument, "expected LBL1 schema");
    std::vector<LabelRow> out;
    for (const auto& l : j.at("labels")) {
      const auto lab = l.at("label").get<std::string>();
      if (lab != "Low" && lab != "High") throw Error(Errc::InvalidArgument, "bad label " + lab);
      out.push_back({{l.at("subject_id").get<std::string>(),
                      parse_condition(l.at("condition").get<std::string>())},
                     l.at("residual").get<double>(),
                     lab == "High" ? WorkloadLabel::High : WorkloadLabel::Low});
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed LBL1 document: ") + e.what());
  }
}

}  // namespace eegwl
