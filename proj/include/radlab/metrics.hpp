#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "radlab/corpus.hpp"

namespace radlab {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R); empty denominators give 0.
PRF precision_recall_f1(long long tp, long long fp, long long fn);

struct StatusCounts {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
};

// One-vs-rest counts per (finding, target status) over scored pairs, i.e.
// pairs whose gold status is Present/Absent/Uncertain. Gold NotMentioned
// pairs are excluded and tallied separately.
struct ConfusionCounts {
  std::array<std::array<StatusCounts, kNumTargetStatuses>, kNumFindings> by{};
  std::array<long long, kNumFindings> scored_pairs{};
  long long excluded_not_mentioned = 0;
  long long total_pairs = 0;
};

ConfusionCounts confusion_counts(const AnnotationSet& pred, const AnnotationSet& gold);

struct FindingScore {
  Finding finding = Finding::Atelectasis;
  PRF prf;
  long long scored_pairs = 0;
  bool unscored = false;
};

// Micro-pools the three one-vs-rest status counts within each finding.
std::array<FindingScore, kNumFindings> per_finding_f1(const ConfusionCounts& counts);

// Unweighted mean; requires exactly 13 values.
double macro_f1(const std::vector<double>& f1_values);

struct StatusScore {
  CertaintyStatus status = CertaintyStatus::Present;
  PRF prf;
};

// Pools counts across findings for each target status.
std::array<StatusScore, kNumTargetStatuses> per_status_f1(const ConfusionCounts& counts);

struct Agreement {
  double percent = 0.0;  // in [0, 100]
  double kappa = 0.0;
  long long pairs = 0;
};

// Over all (report, finding) pairs with all four statuses as categories.
Agreement agreement_and_kappa(const AnnotationSet& a, const AnnotationSet& b);

enum class TestMethod { PairedT, Wilcoxon };

struct SignificanceResult {
  double statistic = 0.0;
  double p_value = 1.0;
  size_t n = 0;
  TestMethod method = TestMethod::PairedT;
};

// Two-sided paired t-test; p from the t distribution via the regularized
// incomplete beta function.
SignificanceResult paired_t_test(const std::vector<double>& x, const std::vector<double>& y);

// Two-sided Wilcoxon signed-rank test; zero differences dropped, ties get
// average ranks. Exact sign-assignment distribution for n <= 25, else normal
// approximation with tie and continuity corrections. statistic is W, the sum
// of positive-difference ranks.
SignificanceResult wilcoxon_signed_rank(const std::vector<double>& x,
                                        const std::vector<double>& y);

struct PairedTests {
  std::optional<SignificanceResult> paired_t;
  std::optional<SignificanceResult> wilcoxon;
  std::string note;  // set when a test degenerates (e.g. "no difference")
};

struct ModelComparison {
  std::string name_a;
  std::string name_b;
  PairedTests per_report;   // unit: per-report accuracy over scored pairs
  PairedTests per_finding;  // unit: the 13 per-finding F1 values
  size_t per_report_n = 0;
};

ModelComparison compare_models(const std::string& name_a, const AnnotationSet& pred_a,
                               const std::string& name_b, const AnnotationSet& pred_b,
                               const AnnotationSet& gold);

struct EvalReport {
  std::string model_name;
  std::array<FindingScore, kNumFindings> per_finding{};
  double macro_f1 = 0.0;
  std::array<StatusScore, kNumTargetStatuses> per_status{};
  Agreement agreement;
  long long excluded_not_mentioned = 0;
  std::optional<double> reports_per_sec;
};

EvalReport evaluate(const std::string& model_name, const AnnotationSet& pred,
                    const AnnotationSet& gold);

nlohmann::json eval_report_to_json(const EvalReport& report);
std::string eval_report_to_text(const EvalReport& report);
nlohmann::json comparisons_to_json(const std::vector<ModelComparison>& comparisons);
std::string comparisons_to_text(const std::vector<ModelComparison>& comparisons);

struct ThroughputResult {
  std::vector<double> rates;  // reports/sec per repetition
  double median_rate = 0.0;
  std::string hardware_note;
};

// Median wall-clock rate over full-set passes; one untimed warmup pass runs
// first. repetitions must be >= 3.
ThroughputResult throughput(const std::function<LabelSet(const Report&)>& label_fn,
                            const ReportSet& reports, int repetitions);

namespace stats {
// Regularized incomplete beta function I_x(a, b), absolute error <= 1e-10.
double incomplete_beta(double a, double b, double x);
// Two-sided p for a t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, double df);
double normal_cdf(double z);
}  // namespace stats

}  // namespace radlab
