#include "radlab/teacher.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "radlab/rng.hpp"
#include "radlab/text.hpp"

namespace radlab {

using nlohmann::json;

const PromptTemplate& PromptTemplate::default_template() {
  static const PromptTemplate tmpl = [] {
    PromptTemplate t;
    std::ostringstream inst;
    inst << "You annotate chest x-ray reports. For each of the 13 findings listed below, "
            "decide how the report characterizes it.\n"
         << "Findings:";
    for (Finding f : all_findings()) inst << ' ' << finding_name(f) << ',';
    std::string text = inst.str();
    text.back() = '.';
    text +=
        "\nStatuses:\n"
        "  present: the report affirms the finding.\n"
        "  absent: the report explicitly negates the finding.\n"
        "  uncertain: the report hedges or questions the finding.\n"
        "  not_mentioned: the report does not address the finding.";
    t.instruction_text = std::move(text);
    t.output_schema_text =
        "Answer with a single JSON object and nothing else. Use each finding name as a key and "
        "one of present, absent, uncertain, not_mentioned as its value. Cover all 13 findings. "
        "Do not explain.";
    return t;
  }();
  return tmpl;
}

std::string build_prompt(const Report& report, const PromptTemplate& tmpl) {
  std::string out;
  out.reserve(tmpl.instruction_text.size() + report.text.size() +
              tmpl.output_schema_text.size() + 32);
  out += tmpl.instruction_text;
  out += "\n\nReport:\n";
  out += report.text;
  out += "\n\n";
  out += tmpl.output_schema_text;
  return out;
}

namespace {

// lowercase with spaces/underscores removed, for tolerant key matching
std::string normalized_key(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' || c == '_' || c == '-') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::optional<Finding> fuzzy_finding(std::string_view key) {
  const std::string norm = normalized_key(key);
  for (Finding f : all_findings()) {
    if (normalized_key(finding_name(f)) == norm) return f;
  }
  return std::nullopt;
}

std::optional<CertaintyStatus> fuzzy_status(std::string_view value) {
  const std::string norm = normalized_key(value);
  if (norm == "present") return CertaintyStatus::Present;
  if (norm == "absent") return CertaintyStatus::Absent;
  if (norm == "uncertain") return CertaintyStatus::Uncertain;
  if (norm == "notmentioned") return CertaintyStatus::NotMentioned;
  return std::nullopt;
}

// First balanced JSON object in raw, string-literal aware.
std::optional<json> extract_first_object(const std::string& raw) {
  for (size_t start = raw.find('{'); start != std::string::npos;
       start = raw.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < raw.size(); ++i) {
      const char c = raw[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') depth++;
      else if (c == '}') {
        depth--;
        if (depth == 0) {
          json parsed = json::parse(raw.substr(start, i - start + 1), nullptr, false);
          if (!parsed.is_discarded() && parsed.is_object()) return parsed;
          break;  // malformed candidate; try the next '{'
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace

PseudoLabelRecord parse_teacher_output(const std::string& raw, const std::string& report_id,
                                       const std::string& teacher_id) {
  const auto obj = extract_first_object(raw);
  if (!obj) {
    throw ParseError("teacher response for report '" + report_id +
                     "' contains no JSON object");
  }
  PseudoLabelRecord record;
  record.report_id = report_id;
  record.teacher_id = teacher_id;
  record.raw_response = raw;

  std::array<bool, kNumFindings> seen{};
  for (const auto& [key, value] : obj->items()) {
    const auto finding = fuzzy_finding(key);
    if (!finding) continue;  // extraneous keys are ignored
    if (!value.is_string()) {
      throw ParseError("teacher response for report '" + report_id + "': status for '" +
                       std::string(finding_name(*finding)) + "' is not a string");
    }
    const auto status = fuzzy_status(value.get<std::string>());
    if (!status) {
      throw ParseError("teacher response for report '" + report_id + "': status '" +
                       value.get<std::string>() + "' for '" +
                       std::string(finding_name(*finding)) +
                       "' is not one of present/absent/uncertain/not_mentioned");
    }
    record.labels.set(*finding, *status);
    seen[static_cast<int>(*finding)] = true;
  }
  for (Finding f : all_findings()) {
    if (!seen[static_cast<int>(f)]) {
      record.labels.set(f, CertaintyStatus::NotMentioned);
      record.defaulted.push_back(f);
    }
  }
  return record;
}

std::string serialize_labels_json(const LabelSet& labels) {
  json j = json::object();
  for (Finding f : all_findings()) {
    j[std::string(finding_name(f))] = std::string(status_name(labels.get(f)));
  }
  return j.dump();
}

uint64_t fnv1a64(std::string_view data) {
  uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

// ---------------------------------------------------------------------------
// remote annotation

namespace {

struct ParsedUrl {
  std::string host_port;  // scheme://host[:port]
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("teacher base_url must start with http:// or https://: " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.host_port = base_url;
  } else {
    out.host_port = base_url.substr(0, path_start);
    out.path_prefix = base_url.substr(path_start);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
      out.path_prefix.pop_back();
    }
  }
  return out;
}

std::string cache_key(const std::string& model, const std::string& prompt) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(model + '\x1f' + prompt)));
  return buf;
}

}  // namespace

RemoteAnnotateResult annotate_remote(const ReportSet& reports, const PromptTemplate& tmpl,
                                     const TeacherClientConfig& cfg) {
  if (cfg.base_url.empty()) throw ConfigError("teacher base_url is not set");
  if (cfg.model_name.empty()) throw ConfigError("teacher model_name is not set");
  if (cfg.max_in_flight < 1) throw ConfigError("teacher max_in_flight must be >= 1");
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ConfigError("teacher API key environment variable '" + cfg.api_key_env +
                      "' is not set");
  }
  const ParsedUrl url = parse_base_url(cfg.base_url);
  const std::string endpoint = url.path_prefix + "/chat/completions";

  // cache: one JSONL line {"key": hex, "raw": string} per response
  std::map<std::string, std::string> cache;
  if (!cfg.cache_path.empty() && std::filesystem::exists(cfg.cache_path)) {
    std::ifstream in(cfg.cache_path);
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("key") || !j.contains("raw")) continue;
      cache[j["key"].get<std::string>()] = j["raw"].get<std::string>();
    }
  }

  const size_t n = reports.size();
  std::vector<std::optional<PseudoLabelRecord>> records(n);
  std::vector<std::optional<AnnotateFailure>> failures(n);
  std::atomic<size_t> next{0};
  std::atomic<size_t> retries{0};
  std::atomic<size_t> cache_hits{0};
  std::mutex cache_mutex;
  std::ofstream cache_out;
  if (!cfg.cache_path.empty()) {
    cache_out.open(cfg.cache_path, std::ios::app);
  }

  auto worker = [&]() {
    httplib::Client client(url.host_port);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(60, 0);
    std::string bearer = std::string("Bearer ") + key;
    while (true) {
      const size_t idx = next.fetch_add(1);
      if (idx >= n) break;
      const Report& report = reports[idx];
      const std::string prompt = build_prompt(report, tmpl);
      const std::string ckey = cache_key(cfg.model_name, prompt);

      std::string raw;
      bool have_raw = false;
      {
        std::lock_guard<std::mutex> lock(cache_mutex);
        auto it = cache.find(ckey);
        if (it != cache.end()) {
          raw = it->second;
          have_raw = true;
          cache_hits.fetch_add(1);
        }
      }

      int attempts = 0;
      if (!have_raw) {
        json body;
        body["model"] = cfg.model_name;
        body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
        body["temperature"] = 0;
        const std::string payload = body.dump();
        std::string last_error;
        for (attempts = 0; attempts <= cfg.max_retries; ++attempts) {
          if (attempts > 0) {
            retries.fetch_add(1);
            std::this_thread::sleep_for(cfg.initial_backoff * (1LL << (attempts - 1)));
          }
          httplib::Headers headers = {{"Authorization", bearer}};
          auto res = client.Post(endpoint, headers, payload, "application/json");
          if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
          }
          if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
          }
          json envelope = json::parse(res->body, nullptr, false);
          if (envelope.is_discarded() || !envelope.contains("choices") ||
              !envelope["choices"].is_array() || envelope["choices"].empty() ||
              !envelope["choices"][0].contains("message") ||
              !envelope["choices"][0]["message"].contains("content") ||
              !envelope["choices"][0]["message"]["content"].is_string()) {
            last_error = "malformed completion envelope";
            continue;
          }
          raw = envelope["choices"][0]["message"]["content"].get<std::string>();
          have_raw = true;
          break;
        }
        if (!have_raw) {
          failures[idx] = AnnotateFailure{report.id, last_error, attempts};
          continue;
        }
        std::lock_guard<std::mutex> lock(cache_mutex);
        cache[ckey] = raw;
        if (cache_out.is_open()) {
          cache_out << json{{"key", ckey}, {"raw", raw}}.dump() << '\n';
          cache_out.flush();
        }
      }

      try {
        records[idx] = parse_teacher_output(raw, report.id, cfg.model_name);
      } catch (const ParseError& e) {
        failures[idx] = AnnotateFailure{report.id, e.what(), std::max(attempts, 1)};
      }
    }
  };

  const size_t n_workers = std::min<size_t>(static_cast<size_t>(cfg.max_in_flight), std::max<size_t>(n, 1));
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  RemoteAnnotateResult result;
  result.retries = retries.load();
  result.cache_hits = cache_hits.load();
  for (size_t i = 0; i < n; ++i) {
    if (records[i]) {
      result.defaulted_findings += records[i]->defaulted.size();
      result.labels.add(records[i]->report_id, records[i]->labels);
    } else if (failures[i]) {
      result.failures.push_back(*failures[i]);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// simulated teacher

void NoiseConfig::validate() const {
  if (flip_prob < 0.0 || flip_prob > 1.0) {
    throw ValidationError("noise config: flip_prob must lie in [0,1]");
  }
  for (const auto& [status, row] : confusion) {
    double sum = 0.0;
    for (double p : row) {
      if (p < 0.0 || p > 1.0) {
        throw ValidationError("noise config: confusion entries must lie in [0,1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("noise config: confusion row for status '" +
                            std::string(status_name(status)) + "' must sum to 1");
    }
  }
}

AnnotationSet simulate_teacher(const AnnotationSet& gold, const NoiseConfig& noise) {
  noise.validate();
  Rng rng(noise.seed);
  AnnotationSet out(AnnotationSource::Pseudo);
  for (const auto& [id, gold_labels] : gold) {
    LabelSet labels = gold_labels;
    for (Finding f : all_findings()) {
      const CertaintyStatus truth = gold_labels.get(f);
      auto row = noise.confusion.find(truth);
      if (row != noise.confusion.end()) {
        const std::vector<double> weights(row->second.begin(), row->second.end());
        labels.set(f, static_cast<CertaintyStatus>(rng.categorical(weights)));
        continue;
      }
      if (truth == CertaintyStatus::NotMentioned) continue;
      if (rng.bernoulli(noise.flip_prob)) {
        // uniform among the three other statuses
        int pick = static_cast<int>(rng.below(3));
        if (pick >= static_cast<int>(truth)) ++pick;
        labels.set(f, static_cast<CertaintyStatus>(pick));
      }
    }
    out.add(id, labels);
  }
  return out;
}

}  // namespace radlab
