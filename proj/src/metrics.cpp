#include "radlab/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace radlab {

using nlohmann::json;

PRF precision_recall_f1(long long tp, long long fp, long long fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw ValidationError("confusion counts must be nonnegative");
  PRF out;
  out.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double pr = out.precision + out.recall;
  out.f1 = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
  return out;
}

namespace {

void require_same_ids(const AnnotationSet& pred, const AnnotationSet& gold) {
  std::vector<std::string> missing_in_pred, missing_in_gold;
  for (const auto& [id, ls] : gold) {
    if (!pred.find(id)) missing_in_pred.push_back(id);
  }
  for (const auto& [id, ls] : pred) {
    if (!gold.find(id)) missing_in_gold.push_back(id);
  }
  if (!missing_in_pred.empty() || !missing_in_gold.empty()) {
    std::string msg = "annotation sets cover different report ids;";
    if (!missing_in_pred.empty()) {
      msg += " missing from predictions:";
      for (const auto& id : missing_in_pred) msg += " " + id;
      msg += ";";
    }
    if (!missing_in_gold.empty()) {
      msg += " missing from gold:";
      for (const auto& id : missing_in_gold) msg += " " + id;
    }
    throw ValidationError(msg);
  }
}

bool is_target_status(CertaintyStatus s) { return static_cast<int>(s) < kNumTargetStatuses; }

}  // namespace

ConfusionCounts confusion_counts(const AnnotationSet& pred, const AnnotationSet& gold) {
  require_same_ids(pred, gold);
  ConfusionCounts counts;
  for (const auto& [id, gold_ls] : gold) {
    const LabelSet& pred_ls = *pred.find(id);
    for (Finding f : all_findings()) {
      const int fi = static_cast<int>(f);
      counts.total_pairs++;
      const CertaintyStatus g = gold_ls.get(f);
      if (!is_target_status(g)) {
        counts.excluded_not_mentioned++;
        continue;
      }
      counts.scored_pairs[fi]++;
      const CertaintyStatus p = pred_ls.get(f);
      for (int k = 0; k < kNumTargetStatuses; ++k) {
        const bool pred_k = static_cast<int>(p) == k;
        const bool gold_k = static_cast<int>(g) == k;
        StatusCounts& c = counts.by[fi][k];
        if (pred_k && gold_k) c.tp++;
        else if (pred_k && !gold_k) c.fp++;
        else if (!pred_k && gold_k) c.fn++;
        else c.tn++;
      }
    }
  }
  return counts;
}

std::array<FindingScore, kNumFindings> per_finding_f1(const ConfusionCounts& counts) {
  std::array<FindingScore, kNumFindings> rows{};
  for (Finding f : all_findings()) {
    const int fi = static_cast<int>(f);
    long long tp = 0, fp = 0, fn = 0;
    for (int k = 0; k < kNumTargetStatuses; ++k) {
      tp += counts.by[fi][k].tp;
      fp += counts.by[fi][k].fp;
      fn += counts.by[fi][k].fn;
    }
    rows[fi].finding = f;
    rows[fi].scored_pairs = counts.scored_pairs[fi];
    rows[fi].unscored = counts.scored_pairs[fi] == 0;
    rows[fi].prf = rows[fi].unscored ? PRF{} : precision_recall_f1(tp, fp, fn);
  }
  return rows;
}

double macro_f1(const std::vector<double>& f1_values) {
  if (f1_values.size() != kNumFindings) {
    throw ValidationError("macro_f1 expects exactly 13 per-finding values, got " +
                          std::to_string(f1_values.size()));
  }
  double sum = 0.0;
  for (double v : f1_values) sum += v;
  return sum / static_cast<double>(kNumFindings);
}

std::array<StatusScore, kNumTargetStatuses> per_status_f1(const ConfusionCounts& counts) {
  std::array<StatusScore, kNumTargetStatuses> rows{};
  for (int k = 0; k < kNumTargetStatuses; ++k) {
    long long tp = 0, fp = 0, fn = 0;
    for (int fi = 0; fi < kNumFindings; ++fi) {
      tp += counts.by[fi][k].tp;
      fp += counts.by[fi][k].fp;
      fn += counts.by[fi][k].fn;
    }
    rows[k].status = static_cast<CertaintyStatus>(k);
    rows[k].prf = precision_recall_f1(tp, fp, fn);
  }
  return rows;
}

Agreement agreement_and_kappa(const AnnotationSet& a, const AnnotationSet& b) {
  require_same_ids(a, b);
  long long pairs = 0;
  long long agree = 0;
  std::array<long long, 4> marg_a{};
  std::array<long long, 4> marg_b{};
  for (const auto& [id, la] : a) {
    const LabelSet& lb = *b.find(id);
    for (Finding f : all_findings()) {
      const CertaintyStatus sa = la.get(f);
      const CertaintyStatus sb = lb.get(f);
      pairs++;
      marg_a[static_cast<int>(sa)]++;
      marg_b[static_cast<int>(sb)]++;
      if (sa == sb) agree++;
    }
  }
  if (pairs == 0) throw ValidationError("agreement_and_kappa: zero (report, finding) pairs");
  Agreement out;
  out.pairs = pairs;
  const double po = static_cast<double>(agree) / static_cast<double>(pairs);
  out.percent = 100.0 * po;
  double pe = 0.0;
  for (int c = 0; c < 4; ++c) {
    pe += (static_cast<double>(marg_a[c]) / static_cast<double>(pairs)) *
          (static_cast<double>(marg_b[c]) / static_cast<double>(pairs));
  }
  out.kappa = po >= 1.0 ? 1.0 : (po - pe) / (1.0 - pe);
  return out;
}

// ---------------------------------------------------------------------------
// significance tests

namespace stats {

namespace {

// Continued fraction for the incomplete beta function (Lentz's method).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  const double x = df / (df + t * t);
  return incomplete_beta(df / 2.0, 0.5, x);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace stats

SignificanceResult paired_t_test(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("paired_t_test: length mismatch");
  const size_t n = x.size();
  if (n < 2) throw ValidationError("paired_t_test: need at least 2 pairs");
  std::vector<double> d(n);
  for (size_t i = 0; i < n; ++i) d[i] = x[i] - y[i];
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(n - 1);  // sample variance
  SignificanceResult res;
  res.n = n;
  res.method = TestMethod::PairedT;
  if (var == 0.0) {
    if (mean != 0.0) {
      throw ValidationError("paired_t_test: degenerate zero variance with nonzero mean");
    }
    res.statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }
  const double sd = std::sqrt(var);
  res.statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  res.p_value = stats::student_t_two_sided_p(res.statistic, static_cast<double>(n - 1));
  return res;
}

SignificanceResult wilcoxon_signed_rank(const std::vector<double>& x,
                                        const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("wilcoxon_signed_rank: length mismatch");
  std::vector<double> d;
  for (size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    if (diff != 0.0) d.push_back(diff);
  }
  const size_t n = d.size();
  if (n == 0) throw ValidationError("wilcoxon_signed_rank: no nonzero pairs");

  // average ranks of |d|, ties averaged
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> rank(n, 0.0);
  std::vector<size_t> tie_sizes;
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j < n && std::abs(d[idx[j]]) == std::abs(d[idx[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k) rank[idx[k]] = avg;
    tie_sizes.push_back(j - i);
    i = j;
  }

  double w_pos = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (d[i] > 0.0) w_pos += rank[i];
  }

  SignificanceResult res;
  res.n = n;
  res.method = TestMethod::Wilcoxon;
  res.statistic = w_pos;

  if (n <= 25) {
    // Exact distribution of W over all 2^n sign assignments. Ranks are
    // multiples of 1/2, so doubling makes them integers; the polynomial
    // product over (1 + z^{2r}) counts assignments per doubled sum.
    std::vector<long long> r2(n);
    long long total2 = 0;
    for (size_t i = 0; i < n; ++i) {
      r2[i] = std::llround(2.0 * rank[i]);
      total2 += r2[i];
    }
    std::vector<double> count(static_cast<size_t>(total2) + 1, 0.0);
    count[0] = 1.0;
    long long upto = 0;
    for (size_t i = 0; i < n; ++i) {
      upto += r2[i];
      for (long long s = upto; s >= r2[i]; --s) {
        count[static_cast<size_t>(s)] += count[static_cast<size_t>(s - r2[i])];
      }
    }
    const double total = std::ldexp(1.0, static_cast<int>(n));  // 2^n
    const long long w2 = std::llround(2.0 * w_pos);
    double le = 0.0, ge = 0.0;
    for (long long s = 0; s <= total2; ++s) {
      if (s <= w2) le += count[static_cast<size_t>(s)];
      if (s >= w2) ge += count[static_cast<size_t>(s)];
    }
    res.p_value = std::min(1.0, 2.0 * std::min(le, ge) / total);
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    for (size_t t : tie_sizes) {
      const double td = static_cast<double>(t);
      var -= (td * td * td - td) / 48.0;
    }
    const double num = std::max(0.0, std::abs(w_pos - mean) - 0.5);  // continuity
    const double z = var > 0.0 ? num / std::sqrt(var) : 0.0;
    res.p_value = std::min(1.0, 2.0 * (1.0 - stats::normal_cdf(z)));
  }
  return res;
}

// ---------------------------------------------------------------------------
// model comparison

namespace {

// Fraction of scored (gold in {Present, Absent, Uncertain}) pairs predicted
// exactly; reports without scored pairs yield no entry.
std::vector<double> per_report_accuracy(const AnnotationSet& pred, const AnnotationSet& gold,
                                        std::vector<std::string>* ids_out = nullptr) {
  std::vector<double> scores;
  for (const auto& [id, gold_ls] : gold) {
    const LabelSet& pred_ls = *pred.find(id);
    int scored = 0, correct = 0;
    for (Finding f : all_findings()) {
      const CertaintyStatus g = gold_ls.get(f);
      if (!is_target_status(g)) continue;
      scored++;
      if (pred_ls.get(f) == g) correct++;
    }
    if (scored == 0) continue;
    scores.push_back(static_cast<double>(correct) / static_cast<double>(scored));
    if (ids_out) ids_out->push_back(id);
  }
  return scores;
}

std::vector<double> per_finding_f1_vector(const AnnotationSet& pred, const AnnotationSet& gold) {
  const auto rows = per_finding_f1(confusion_counts(pred, gold));
  std::vector<double> out;
  out.reserve(kNumFindings);
  for (const auto& row : rows) out.push_back(row.prf.f1);
  return out;
}

PairedTests run_paired_tests(const std::vector<double>& x, const std::vector<double>& y) {
  PairedTests out;
  try {
    out.paired_t = paired_t_test(x, y);
  } catch (const ValidationError& e) {
    out.note = e.what();
  }
  try {
    out.wilcoxon = wilcoxon_signed_rank(x, y);
  } catch (const ValidationError& e) {
    if (!out.note.empty()) out.note += "; ";
    out.note += e.what();
    if (std::string(e.what()).find("no nonzero pairs") != std::string::npos) {
      out.note += " (no difference between models)";
    }
  }
  return out;
}

}  // namespace

ModelComparison compare_models(const std::string& name_a, const AnnotationSet& pred_a,
                               const std::string& name_b, const AnnotationSet& pred_b,
                               const AnnotationSet& gold) {
  require_same_ids(pred_a, gold);
  require_same_ids(pred_b, gold);
  ModelComparison cmp;
  cmp.name_a = name_a;
  cmp.name_b = name_b;
  const std::vector<double> xa = per_report_accuracy(pred_a, gold);
  const std::vector<double> xb = per_report_accuracy(pred_b, gold);
  cmp.per_report_n = xa.size();
  cmp.per_report = run_paired_tests(xa, xb);
  cmp.per_finding = run_paired_tests(per_finding_f1_vector(pred_a, gold),
                                     per_finding_f1_vector(pred_b, gold));
  return cmp;
}

EvalReport evaluate(const std::string& model_name, const AnnotationSet& pred,
                    const AnnotationSet& gold) {
  EvalReport report;
  report.model_name = model_name;
  const ConfusionCounts counts = confusion_counts(pred, gold);
  report.per_finding = per_finding_f1(counts);
  std::vector<double> f1s;
  for (const auto& row : report.per_finding) f1s.push_back(row.prf.f1);
  report.macro_f1 = macro_f1(f1s);
  report.per_status = per_status_f1(counts);
  report.agreement = agreement_and_kappa(pred, gold);
  report.excluded_not_mentioned = counts.excluded_not_mentioned;
  return report;
}

// ---------------------------------------------------------------------------
// rendering

json eval_report_to_json(const EvalReport& report) {
  json per_finding = json::array();
  for (const auto& row : report.per_finding) {
    per_finding.push_back({{"finding", std::string(finding_name(row.finding))},
                           {"precision", row.prf.precision},
                           {"recall", row.prf.recall},
                           {"f1", row.prf.f1},
                           {"scored_pairs", row.scored_pairs},
                           {"unscored", row.unscored}});
  }
  json per_status = json::array();
  for (const auto& row : report.per_status) {
    per_status.push_back({{"status", std::string(status_name(row.status))},
                          {"precision", row.prf.precision},
                          {"recall", row.prf.recall},
                          {"f1", row.prf.f1}});
  }
  json j;
  j["model"] = report.model_name;
  j["macro_f1"] = report.macro_f1;
  j["per_finding"] = per_finding;
  j["per_status"] = per_status;
  j["agreement_percent"] = report.agreement.percent;
  j["kappa"] = report.agreement.kappa;
  j["pairs"] = report.agreement.pairs;
  j["excluded_not_mentioned"] = report.excluded_not_mentioned;
  if (report.reports_per_sec) {
    j["reports_per_sec"] = *report.reports_per_sec;
  } else {
    j["reports_per_sec"] = nullptr;
  }
  return j;
}

namespace {

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string fmt_p(double p) { return fmt(p, "%.4g"); }

}  // namespace

std::string eval_report_to_text(const EvalReport& report) {
  std::ostringstream os;
  os << "== Overall ==\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-28s %10s %22s\n", "Model", "Macro F1", "Reports/sec");
  os << line;
  std::snprintf(line, sizeof(line), "%-28s %10.4f %22s\n", report.model_name.c_str(),
                report.macro_f1,
                report.reports_per_sec ? fmt(*report.reports_per_sec, "%.1f").c_str() : "n/a");
  os << line;
  os << "\n== Per finding ==\n";
  std::snprintf(line, sizeof(line), "%-28s %8s %10s %8s %8s\n", "Finding", "F1", "Precision",
                "Recall", "Pairs");
  os << line;
  for (const auto& row : report.per_finding) {
    std::snprintf(line, sizeof(line), "%-28s %8.4f %10.4f %8.4f %8lld%s\n",
                  std::string(finding_name(row.finding)).c_str(), row.prf.f1, row.prf.precision,
                  row.prf.recall, row.scored_pairs, row.unscored ? "  (unscored)" : "");
    os << line;
  }
  os << "\n== Per status ==\n";
  std::snprintf(line, sizeof(line), "%-12s %8s %10s %8s\n", "Status", "F1", "Precision", "Recall");
  os << line;
  for (const auto& row : report.per_status) {
    std::snprintf(line, sizeof(line), "%-12s %8.4f %10.4f %8.4f\n",
                  std::string(status_name(row.status)).c_str(), row.prf.f1, row.prf.precision,
                  row.prf.recall);
    os << line;
  }
  os << "\n== Agreement ==\n";
  std::snprintf(line, sizeof(line), "Overall agreement: %.2f%%  Cohen's kappa: %.4f  (%lld pairs, "
                "%lld gold not_mentioned pairs excluded from PRF)\n",
                report.agreement.percent, report.agreement.kappa, report.agreement.pairs,
                report.excluded_not_mentioned);
  os << line;
  return os.str();
}

namespace {

json paired_tests_to_json(const PairedTests& tests) {
  json j;
  if (tests.paired_t) {
    j["paired_t"] = {{"statistic", tests.paired_t->statistic},
                     {"p_value", tests.paired_t->p_value},
                     {"n", tests.paired_t->n}};
  } else {
    j["paired_t"] = nullptr;
  }
  if (tests.wilcoxon) {
    j["wilcoxon"] = {{"statistic", tests.wilcoxon->statistic},
                     {"p_value", tests.wilcoxon->p_value},
                     {"n", tests.wilcoxon->n}};
  } else {
    j["wilcoxon"] = nullptr;
  }
  j["note"] = tests.note;
  return j;
}

std::string p_or_note(const std::optional<SignificanceResult>& r) {
  return r ? fmt_p(r->p_value) : std::string("n/a");
}

}  // namespace

json comparisons_to_json(const std::vector<ModelComparison>& comparisons) {
  json arr = json::array();
  for (const auto& cmp : comparisons) {
    json j;
    j["a"] = cmp.name_a;
    j["b"] = cmp.name_b;
    j["per_report"] = paired_tests_to_json(cmp.per_report);
    j["per_report_n"] = cmp.per_report_n;
    j["per_finding"] = paired_tests_to_json(cmp.per_finding);
    arr.push_back(j);
  }
  return json{{"comparisons", arr}};
}

std::string comparisons_to_text(const std::vector<ModelComparison>& comparisons) {
  std::ostringstream os;
  char line[200];
  os << "== Significance tests (unit: per-report accuracy over scored pairs) ==\n";
  std::snprintf(line, sizeof(line), "%-44s %16s %16s\n", "Comparison", "Paired t p", "Wilcoxon p");
  os << line;
  for (const auto& cmp : comparisons) {
    const std::string name = cmp.name_a + " vs. " + cmp.name_b;
    std::snprintf(line, sizeof(line), "%-44s %16s %16s\n", name.c_str(),
                  p_or_note(cmp.per_report.paired_t).c_str(),
                  p_or_note(cmp.per_report.wilcoxon).c_str());
    os << line;
    if (!cmp.per_report.note.empty()) os << "    note: " << cmp.per_report.note << "\n";
  }
  os << "\n== Significance tests (unit: per-finding F1, 13 pairs) ==\n";
  std::snprintf(line, sizeof(line), "%-44s %16s %16s\n", "Comparison", "Paired t p", "Wilcoxon p");
  os << line;
  for (const auto& cmp : comparisons) {
    const std::string name = cmp.name_a + " vs. " + cmp.name_b;
    std::snprintf(line, sizeof(line), "%-44s %16s %16s\n", name.c_str(),
                  p_or_note(cmp.per_finding.paired_t).c_str(),
                  p_or_note(cmp.per_finding.wilcoxon).c_str());
    os << line;
    if (!cmp.per_finding.note.empty()) os << "    note: " << cmp.per_finding.note << "\n";
  }
  return os.str();
}

ThroughputResult throughput(const std::function<LabelSet(const Report&)>& label_fn,
                            const ReportSet& reports, int repetitions) {
  if (repetitions < 3) throw ValidationError("throughput: repetitions must be >= 3");
  if (reports.empty()) throw ValidationError("throughput: empty report set");
  using clock = std::chrono::steady_clock;
  // warmup pass, untimed
  for (const auto& r : reports) (void)label_fn(r);
  ThroughputResult result;
  for (int rep = 0; rep < repetitions; ++rep) {
    const auto start = clock::now();
    for (const auto& r : reports) (void)label_fn(r);
    const std::chrono::duration<double> elapsed = clock::now() - start;
    result.rates.push_back(static_cast<double>(reports.size()) /
                           std::max(elapsed.count(), 1e-12));
  }
  std::vector<double> sorted = result.rates;
  std::sort(sorted.begin(), sorted.end());
  const size_t mid = sorted.size() / 2;
  result.median_rate = sorted.size() % 2 == 1 ? sorted[mid]
                                              : 0.5 * (sorted[mid - 1] + sorted[mid]);
  result.hardware_note = "single-threaded CPU, wall clock";
  return result;
}

}  // namespace radlab
