#include "radlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "radlab/rng.hpp"
#include "radlab/text.hpp"

namespace radlab {

using nlohmann::json;

const std::array<Finding, kNumFindings>& all_findings() {
  static const std::array<Finding, kNumFindings> findings = {
      Finding::Atelectasis,    Finding::Cardiomegaly,
      Finding::Consolidation,  Finding::Edema,
      Finding::EnlargedCardiomediastinum,
      Finding::Fracture,       Finding::Infiltrate,
      Finding::LungLesion,     Finding::LungOpacity,
      Finding::NoFinding,      Finding::PleuralEffusion,
      Finding::PleuralThickening, Finding::Pneumothorax,
  };
  return findings;
}

namespace {
constexpr std::array<std::string_view, kNumFindings> kFindingNames = {
    "Atelectasis",
    "Cardiomegaly",
    "Consolidation",
    "Edema",
    "EnlargedCardiomediastinum",
    "Fracture",
    "Infiltrate",
    "LungLesion",
    "LungOpacity",
    "NoFinding",
    "PleuralEffusion",
    "PleuralThickening",
    "Pneumothorax",
};

constexpr std::array<std::string_view, 4> kStatusNames = {
    "present",
    "absent",
    "uncertain",
    "not_mentioned",
};
}  // namespace

std::string_view finding_name(Finding f) { return kFindingNames[static_cast<int>(f)]; }

std::optional<Finding> finding_from_name(std::string_view name) {
  for (int i = 0; i < kNumFindings; ++i) {
    if (kFindingNames[i] == name) return static_cast<Finding>(i);
  }
  return std::nullopt;
}

std::string_view status_name(CertaintyStatus s) { return kStatusNames[static_cast<int>(s)]; }

std::optional<CertaintyStatus> status_from_name(std::string_view name) {
  for (int i = 0; i < 4; ++i) {
    if (kStatusNames[i] == name) return static_cast<CertaintyStatus>(i);
  }
  return std::nullopt;
}

std::string_view annotation_source_name(AnnotationSource s) {
  switch (s) {
    case AnnotationSource::Gold: return "gold";
    case AnnotationSource::Pseudo: return "pseudo";
    case AnnotationSource::Predicted: return "predicted";
  }
  return "unknown";
}

ReportSet ReportSet::from_reports(std::vector<Report> reports) {
  ReportSet set;
  for (auto& r : reports) set.add(std::move(r));
  return set;
}

void ReportSet::add(Report report) {
  if (report.id.empty()) throw ValidationError("report id must be nonempty");
  if (trim(report.text).empty()) {
    throw ValidationError("report '" + report.id + "': text must be nonempty");
  }
  auto [it, inserted] = index_.emplace(report.id, reports_.size());
  if (!inserted) throw ValidationError("duplicate report id: " + report.id);
  reports_.push_back(std::move(report));
}

const Report* ReportSet::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &reports_[it->second];
}

void AnnotationSet::add(std::string id, LabelSet labels) {
  if (id.empty()) throw ValidationError("annotation id must be nonempty");
  auto [it, inserted] = index_.emplace(id, entries_.size());
  if (!inserted) throw ValidationError("duplicate annotation id: " + id);
  entries_.emplace_back(std::move(id), labels);
}

const LabelSet* AnnotationSet::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

void SynthConfig::validate() const {
  if (n_reports == 0) throw ValidationError("n_reports must be positive");
  if (mention_prob < 0.0 || mention_prob > 1.0) {
    throw ValidationError("mention_prob must lie in [0,1]");
  }
  if (distractor_sentence_rate < 0.0 || distractor_sentence_rate > 1.0) {
    throw ValidationError("distractor_sentence_rate must lie in [0,1]");
  }
  double sum = 0.0;
  for (double p : status_prior) {
    if (p < 0.0 || p > 1.0) throw ValidationError("status_prior entries must lie in [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("status_prior must sum to 1");
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path.string());
  return in;
}

json parse_line(const std::string& line, size_t lineno, const std::filesystem::path& path) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

}  // namespace

ReportSet load_reports(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  ReportSet set;
  std::unordered_map<std::string, size_t> first_line_of;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = parse_line(line, lineno, path);
    if (!j.is_object() || !j.contains("id") || !j.contains("text") ||
        !j["id"].is_string() || !j["text"].is_string()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected object with string keys 'id' and 'text'");
    }
    Report r{j["id"].get<std::string>(), j["text"].get<std::string>()};
    auto [it, inserted] = first_line_of.emplace(r.id, lineno);
    if (!inserted) {
      throw ValidationError(path.string() + ": duplicate id '" + r.id + "' on lines " +
                            std::to_string(it->second) + " and " + std::to_string(lineno));
    }
    if (r.id.empty()) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": empty id");
    }
    if (trim(r.text).empty()) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": empty text for id '" + r.id + "'");
    }
    set.add(std::move(r));
  }
  return set;
}

void save_reports(const ReportSet& reports, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  for (const auto& r : reports) {
    json j;
    j["id"] = r.id;
    j["text"] = r.text;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

AnnotationSet load_annotations(const std::filesystem::path& path, AnnotationSource source) {
  std::ifstream in = open_input(path);
  AnnotationSet set(source);
  std::unordered_map<std::string, size_t> first_line_of;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = parse_line(line, lineno, path);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
        !j.contains("labels") || !j["labels"].is_object()) {
      throw ParseError(where + ": expected object with 'id' and 'labels'");
    }
    const std::string id = j["id"].get<std::string>();
    auto [it, inserted] = first_line_of.emplace(id, lineno);
    if (!inserted) {
      throw ValidationError(path.string() + ": duplicate id '" + id + "' on lines " +
                            std::to_string(it->second) + " and " + std::to_string(lineno));
    }
    const json& labels = j["labels"];
    for (auto& [key, value] : labels.items()) {
      if (!finding_from_name(key)) {
        throw SchemaError(where + ": unknown finding '" + key + "'");
      }
      (void)value;
    }
    LabelSet ls;
    for (Finding f : all_findings()) {
      const std::string key(finding_name(f));
      if (!labels.contains(key)) {
        throw SchemaError(where + ": missing finding '" + key + "'");
      }
      if (!labels[key].is_string()) {
        throw SchemaError(where + ": status for '" + key + "' must be a string");
      }
      const std::string status_str = labels[key].get<std::string>();
      auto status = status_from_name(status_str);
      if (!status) {
        throw SchemaError(where + ": unknown status '" + status_str + "' for '" + key +
                          "' (allowed: present, absent, uncertain, not_mentioned)");
      }
      ls.set(f, *status);
    }
    set.add(id, ls);
  }
  return set;
}

void save_annotations(const AnnotationSet& annotations, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  for (const auto& [id, ls] : annotations) {
    json labels = json::object();
    for (Finding f : all_findings()) {
      labels[std::string(finding_name(f))] = std::string(status_name(ls.get(f)));
    }
    json j;
    j["id"] = id;
    j["labels"] = labels;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ReportSet> split_corpus(const ReportSet& set, const std::vector<double>& fractions,
                                    uint64_t seed) {
  if (fractions.empty()) throw ValidationError("fractions must be nonempty");
  double sum = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw ValidationError("fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("fractions must sum to 1");

  const size_t n = set.size();
  // largest-remainder apportionment keeps the totals exact
  std::vector<size_t> sizes(fractions.size());
  std::vector<std::pair<double, size_t>> remainders;
  size_t assigned = 0;
  for (size_t i = 0; i < fractions.size(); ++i) {
    const double target = fractions[i] * static_cast<double>(n);
    sizes[i] = static_cast<size_t>(std::floor(target));
    assigned += sizes[i];
    remainders.emplace_back(target - std::floor(target), i);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (size_t i = 0; assigned < n; ++i, ++assigned) {
    sizes[remainders[i % remainders.size()].second]++;
  }

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<ReportSet> out(fractions.size());
  size_t pos = 0;
  for (size_t part = 0; part < sizes.size(); ++part) {
    std::vector<size_t> chunk(order.begin() + pos, order.begin() + pos + sizes[part]);
    pos += sizes[part];
    std::sort(chunk.begin(), chunk.end());  // keep original relative order
    for (size_t idx : chunk) out[part].add(set[idx]);
  }
  return out;
}

}  // namespace radlab
