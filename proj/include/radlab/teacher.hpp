#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "radlab/corpus.hpp"

namespace radlab {

struct PromptTemplate {
  std::string instruction_text;
  std::string output_schema_text;

  static const PromptTemplate& default_template();
};

// Deterministic; the report text appears verbatim exactly once.
std::string build_prompt(const Report& report, const PromptTemplate& tmpl);

struct PseudoLabelRecord {
  std::string report_id;
  LabelSet labels;
  std::string teacher_id;
  std::string raw_response;
  // Findings absent from the response, resolved to NotMentioned.
  std::vector<Finding> defaulted;
};

// Extracts the first JSON object from raw; finding keys match
// case-insensitively (spaces/underscores ignored); a missing finding becomes
// NotMentioned and is recorded in `defaulted`.
PseudoLabelRecord parse_teacher_output(const std::string& raw, const std::string& report_id,
                                       const std::string& teacher_id = {});

// The labels-as-JSON form the default prompt requests.
std::string serialize_labels_json(const LabelSet& labels);

struct TeacherClientConfig {
  std::string base_url;    // e.g. http://127.0.0.1:8080 or http://host/v1
  std::string model_name;
  std::string api_key_env = "TEACHER_API_KEY";  // key read only from here
  int max_in_flight = 4;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::filesystem::path cache_path;  // empty: no cache
};

struct AnnotateFailure {
  std::string report_id;
  std::string message;
  int attempts = 0;
};

struct RemoteAnnotateResult {
  AnnotationSet labels{AnnotationSource::Pseudo};  // input order, failures skipped
  std::vector<AnnotateFailure> failures;
  size_t retries = 0;
  size_t cache_hits = 0;
  size_t defaulted_findings = 0;
};

// POST {base_url}/chat/completions per report, at most max_in_flight
// concurrent requests, exponential backoff up to max_retries retries.
// Responses are cached by (model, prompt hash) when cache_path is set.
RemoteAnnotateResult annotate_remote(const ReportSet& reports, const PromptTemplate& tmpl,
                                     const TeacherClientConfig& cfg);

struct NoiseConfig {
  double flip_prob = 0.0;  // epsilon
  // Optional row per true status: distribution over the four statuses.
  std::map<CertaintyStatus, std::array<double, 4>> confusion;
  uint64_t seed = 1;

  void validate() const;
};

// Deterministic noisy copy of gold. With no confusion row, each
// Present/Absent/Uncertain entry flips with probability epsilon to a
// uniformly random different status among the four; NotMentioned entries
// change only when the confusion map has a row for them.
AnnotationSet simulate_teacher(const AnnotationSet& gold, const NoiseConfig& noise);

uint64_t fnv1a64(std::string_view data);

}  // namespace radlab
