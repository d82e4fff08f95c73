#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "radlab/error.hpp"

namespace radlab {

inline constexpr int kNumFindings = 13;
inline constexpr int kNumTargetStatuses = 3;  // Present, Absent, Uncertain

// Canonical ordering; index is used for classifier heads and serialization.
enum class Finding : int {
  Atelectasis = 0,
  Cardiomegaly,
  Consolidation,
  Edema,
  EnlargedCardiomediastinum,
  Fracture,
  Infiltrate,
  LungLesion,
  LungOpacity,
  NoFinding,
  PleuralEffusion,
  PleuralThickening,
  Pneumothorax,
};

enum class CertaintyStatus : int {
  Present = 0,
  Absent = 1,
  Uncertain = 2,
  NotMentioned = 3,
};

const std::array<Finding, kNumFindings>& all_findings();
std::string_view finding_name(Finding f);
std::optional<Finding> finding_from_name(std::string_view name);

std::string_view status_name(CertaintyStatus s);  // "present", "absent", ...
std::optional<CertaintyStatus> status_from_name(std::string_view name);

struct Report {
  std::string id;
  std::string text;
  bool operator==(const Report&) const = default;
};

// One status per finding, total over all 13.
struct LabelSet {
  std::array<CertaintyStatus, kNumFindings> statuses{};

  LabelSet() { statuses.fill(CertaintyStatus::NotMentioned); }

  CertaintyStatus get(Finding f) const { return statuses[static_cast<int>(f)]; }
  void set(Finding f, CertaintyStatus s) { statuses[static_cast<int>(f)] = s; }
  bool operator==(const LabelSet&) const = default;
};

// Ordered report collection with unique ids.
class ReportSet {
 public:
  ReportSet() = default;
  static ReportSet from_reports(std::vector<Report> reports);

  void add(Report report);
  size_t size() const { return reports_.size(); }
  bool empty() const { return reports_.empty(); }
  const Report& operator[](size_t i) const { return reports_[i]; }
  const Report* find(std::string_view id) const;
  auto begin() const { return reports_.begin(); }
  auto end() const { return reports_.end(); }
  bool operator==(const ReportSet& o) const { return reports_ == o.reports_; }

 private:
  std::vector<Report> reports_;
  std::unordered_map<std::string, size_t> index_;
};

enum class AnnotationSource { Gold, Pseudo, Predicted };

std::string_view annotation_source_name(AnnotationSource s);

// Insertion-ordered map report-id -> LabelSet.
class AnnotationSet {
 public:
  AnnotationSet() = default;
  explicit AnnotationSet(AnnotationSource source) : source_(source) {}

  void add(std::string id, LabelSet labels);
  const LabelSet* find(std::string_view id) const;
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  AnnotationSource source() const { return source_; }
  const std::pair<std::string, LabelSet>& operator[](size_t i) const { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  bool operator==(const AnnotationSet& o) const {
    return source_ == o.source_ && entries_ == o.entries_;
  }

 private:
  AnnotationSource source_ = AnnotationSource::Gold;
  std::vector<std::pair<std::string, LabelSet>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

struct SynthConfig {
  size_t n_reports = 1000;
  double mention_prob = 0.4;
  // Present, Absent, Uncertain; must sum to 1 within 1e-9.
  std::array<double, 3> status_prior{0.5, 0.3, 0.2};
  double distractor_sentence_rate = 0.5;
  uint64_t seed = 1;

  void validate() const;
};

// reports.jsonl: {"id": string, "text": string} per line.
ReportSet load_reports(const std::filesystem::path& path);
void save_reports(const ReportSet& reports, const std::filesystem::path& path);

// labels.jsonl: {"id": string, "labels": {"<FindingName>": "<status>", x13}}.
AnnotationSet load_annotations(const std::filesystem::path& path, AnnotationSource source);
void save_annotations(const AnnotationSet& annotations, const std::filesystem::path& path);

// Disjoint, exhaustive partition; sizes by largest remainder; deterministic.
std::vector<ReportSet> split_corpus(const ReportSet& set, const std::vector<double>& fractions,
                                    uint64_t seed);

}  // namespace radlab
