#include "radlab/rulelab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "radlab/text.hpp"

namespace radlab {

using nlohmann::json;

void Lexicon::validate() const {
  for (Finding f : all_findings()) {
    auto it = phrases.find(f);
    if (it == phrases.end() || it->second.empty()) {
      throw ValidationError("lexicon: no phrases for finding " + std::string(finding_name(f)));
    }
    for (const auto& p : it->second) {
      if (word_tokens(p).empty()) {
        throw ValidationError("lexicon: phrase with no tokens for " +
                              std::string(finding_name(f)));
      }
    }
  }
  if (negation_cues.empty()) throw ValidationError("lexicon: negation cue list is empty");
  if (uncertainty_cues.empty()) throw ValidationError("lexicon: uncertainty cue list is empty");
  if (scope_window < 1) throw ValidationError("lexicon: scope_window must be >= 1");
}

const Lexicon& default_lexicon() {
  static const Lexicon lex = [] {
    Lexicon l;
    l.phrases[Finding::Atelectasis] = {"atelectasis", "atelectatic change", "volume loss"};
    l.phrases[Finding::Cardiomegaly] = {"cardiomegaly", "enlarged heart",
                                        "enlarged cardiac silhouette"};
    l.phrases[Finding::Consolidation] = {"consolidation", "airspace consolidation"};
    l.phrases[Finding::Edema] = {"edema", "pulmonary edema", "vascular congestion"};
    l.phrases[Finding::EnlargedCardiomediastinum] = {"enlarged cardiomediastinum",
                                                     "widened mediastinum",
                                                     "mediastinal widening"};
    l.phrases[Finding::Fracture] = {"fracture", "rib fracture", "clavicle fracture"};
    l.phrases[Finding::Infiltrate] = {"infiltrate", "infiltration", "infiltrates"};
    l.phrases[Finding::LungLesion] = {"lung lesion", "pulmonary nodule", "lung mass",
                                      "nodular density"};
    l.phrases[Finding::LungOpacity] = {"lung opacity", "pulmonary opacity", "opacities",
                                       "airspace opacity"};
    l.phrases[Finding::NoFinding] = {"no acute cardiopulmonary process", "normal study",
                                     "unremarkable examination"};
    l.phrases[Finding::PleuralEffusion] = {"pleural effusion", "effusion", "pleural fluid"};
    l.phrases[Finding::PleuralThickening] = {"pleural thickening", "pleural scarring"};
    l.phrases[Finding::Pneumothorax] = {"pneumothorax", "apical pneumothorax"};
    l.negation_cues = {"no",      "no evidence of", "without",      "absence of",
                       "free of", "negative for",   "clear of",     "resolved"};
    l.uncertainty_cues = {"possible",       "possibly",      "probable",      "may",
                          "might",          "questionable",  "suspected",     "suspicious for",
                          "suggestion of",  "concerning for", "cannot exclude", "cannot rule out"};
    l.scope_window = 6;
    l.validate();
    return l;
  }();
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  Lexicon lex;
  if (!j.is_object() || !j.contains("phrases") || !j["phrases"].is_object()) {
    throw SchemaError(path.string() + ": expected object with 'phrases'");
  }
  for (auto& [key, value] : j["phrases"].items()) {
    auto f = finding_from_name(key);
    if (!f) throw SchemaError(path.string() + ": unknown finding '" + key + "'");
    if (!value.is_array()) throw SchemaError(path.string() + ": phrases must be arrays");
    for (const auto& p : value) lex.phrases[*f].push_back(to_lower(p.get<std::string>()));
  }
  for (const auto& c : j.value("negation_cues", json::array())) {
    lex.negation_cues.push_back(to_lower(c.get<std::string>()));
  }
  for (const auto& c : j.value("uncertainty_cues", json::array())) {
    lex.uncertainty_cues.push_back(to_lower(c.get<std::string>()));
  }
  lex.scope_window = j.value("scope_window", 6);
  lex.validate();
  return lex;
}

void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path) {
  json phrases = json::object();
  for (const auto& [f, list] : lexicon.phrases) {
    phrases[std::string(finding_name(f))] = list;
  }
  json j;
  j["phrases"] = phrases;
  j["negation_cues"] = lexicon.negation_cues;
  j["uncertainty_cues"] = lexicon.uncertainty_cues;
  j["scope_window"] = lexicon.scope_window;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write lexicon: " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<std::string> segment_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::string cur;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    cur.push_back(c);
    bool is_break = (c == ';' || c == '\n');
    if (c == '.') {
      const bool digit_before = i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1]));
      const bool digit_after =
          i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
      is_break = !(digit_before && digit_after);
    }
    if (is_break) {
      std::string s = trim(cur);
      if (!s.empty()) sentences.push_back(std::move(s));
      cur.clear();
    }
  }
  std::string tail = trim(cur);
  if (!tail.empty()) sentences.push_back(std::move(tail));
  return sentences;
}

namespace {

struct TokenizedPhrase {
  std::vector<std::string> tokens;
  std::string text;
};

// Matches tokens[at..] against the phrase.
bool match_at(const std::vector<std::string>& tokens, size_t at,
              const std::vector<std::string>& phrase) {
  if (at + phrase.size() > tokens.size()) return false;
  for (size_t i = 0; i < phrase.size(); ++i) {
    if (tokens[at + i] != phrase[i]) return false;
  }
  return true;
}

std::vector<Mention> detect_in_tokens(const std::vector<std::string>& tokens,
                                      const Lexicon& lexicon, int sentence_index) {
  std::vector<Mention> mentions;
  for (Finding f : all_findings()) {
    auto it = lexicon.phrases.find(f);
    if (it == lexicon.phrases.end()) continue;
    std::vector<TokenizedPhrase> phrases;
    phrases.reserve(it->second.size());
    for (const auto& p : it->second) phrases.push_back({word_tokens(p), p});
    std::sort(phrases.begin(), phrases.end(), [](const auto& a, const auto& b) {
      return a.tokens.size() > b.tokens.size();
    });
    // leftmost-longest, non-overlapping per finding
    for (size_t i = 0; i < tokens.size();) {
      const TokenizedPhrase* hit = nullptr;
      for (const auto& p : phrases) {
        if (match_at(tokens, i, p.tokens)) {
          hit = &p;
          break;
        }
      }
      if (hit) {
        Mention m;
        m.finding = f;
        m.sentence_index = sentence_index;
        m.begin = static_cast<int>(i);
        m.end = static_cast<int>(i + hit->tokens.size());
        m.matched_phrase = hit->text;
        mentions.push_back(std::move(m));
        i += hit->tokens.size();
      } else {
        ++i;
      }
    }
  }
  std::sort(mentions.begin(), mentions.end(), [](const Mention& a, const Mention& b) {
    if (a.begin != b.begin) return a.begin < b.begin;
    return static_cast<int>(a.finding) < static_cast<int>(b.finding);
  });
  return mentions;
}

// Does any cue end within [begin-window, begin]?
bool cue_before(const std::vector<std::string>& tokens, int begin,
                const std::vector<std::string>& cues, int window, bool anywhere) {
  for (const auto& cue : cues) {
    const std::vector<std::string> cue_tokens = word_tokens(cue);
    if (cue_tokens.empty()) continue;
    const int len = static_cast<int>(cue_tokens.size());
    for (int start = 0; start + len <= begin; ++start) {
      const int end = start + len;
      if (!anywhere && begin - end >= window) continue;
      if (match_at(tokens, static_cast<size_t>(start), cue_tokens)) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<Mention> detect_mentions(std::string_view sentence, const Lexicon& lexicon,
                                     int sentence_index) {
  return detect_in_tokens(word_tokens(sentence), lexicon, sentence_index);
}

CertaintyStatus classify_mention(const std::vector<std::string>& tokens, const Mention& mention,
                                 const Lexicon& lexicon) {
  static const std::vector<std::string> kAnywhereCues = {"cannot exclude", "cannot rule out"};
  if (cue_before(tokens, mention.begin, lexicon.uncertainty_cues, lexicon.scope_window, false) ||
      cue_before(tokens, mention.begin, kAnywhereCues, lexicon.scope_window, true)) {
    return CertaintyStatus::Uncertain;
  }
  if (cue_before(tokens, mention.begin, lexicon.negation_cues, lexicon.scope_window, false)) {
    return CertaintyStatus::Absent;
  }
  return CertaintyStatus::Present;
}

LabelSet label_report(const Report& report, const Lexicon& lexicon) {
  LabelSet labels;
  const std::vector<std::string> sentences = segment_sentences(report.text);
  std::array<bool, kNumFindings> seen{};
  std::array<bool, kNumFindings> present{};
  std::array<bool, kNumFindings> uncertain{};
  for (size_t s = 0; s < sentences.size(); ++s) {
    const std::vector<std::string> tokens = word_tokens(sentences[s]);
    for (const Mention& m : detect_in_tokens(tokens, lexicon, static_cast<int>(s))) {
      const int fi = static_cast<int>(m.finding);
      seen[fi] = true;
      switch (classify_mention(tokens, m, lexicon)) {
        case CertaintyStatus::Present: present[fi] = true; break;
        case CertaintyStatus::Uncertain: uncertain[fi] = true; break;
        default: break;  // Absent is the fallback below
      }
    }
  }
  for (Finding f : all_findings()) {
    const int fi = static_cast<int>(f);
    if (!seen[fi]) {
      labels.set(f, CertaintyStatus::NotMentioned);
    } else if (present[fi]) {
      labels.set(f, CertaintyStatus::Present);
    } else if (uncertain[fi]) {
      labels.set(f, CertaintyStatus::Uncertain);
    } else {
      labels.set(f, CertaintyStatus::Absent);
    }
  }
  return labels;
}

}  // namespace radlab
