#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "radlab/corpus.hpp"

namespace radlab {

// Phrase lists plus negation/uncertainty cues with a token scope window.
struct Lexicon {
  std::map<Finding, std::vector<std::string>> phrases;  // lowercase
  std::vector<std::string> negation_cues;
  std::vector<std::string> uncertainty_cues;
  int scope_window = 6;

  void validate() const;
  bool operator==(const Lexicon&) const = default;
};

const Lexicon& default_lexicon();
Lexicon load_lexicon(const std::filesystem::path& path);
void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path);

struct Mention {
  Finding finding;
  int sentence_index = 0;
  int begin = 0;  // token offsets within the sentence, [begin, end)
  int end = 0;
  std::string matched_phrase;
};

// Splits on '.', ';' and newline, never inside a decimal number. Sentences
// keep their delimiter; surrounding whitespace is dropped.
std::vector<std::string> segment_sentences(std::string_view text);

// Case-insensitive leftmost-longest phrase matching on token boundaries;
// overlapping matches of the same finding collapse to the longest.
std::vector<Mention> detect_mentions(std::string_view sentence, const Lexicon& lexicon,
                                     int sentence_index = 0);

// Uncertainty cue in the scope window before the mention (or "cannot
// exclude"/"cannot rule out" anywhere before it) -> Uncertain; else negation
// cue in window -> Absent; else Present.
CertaintyStatus classify_mention(const std::vector<std::string>& tokens, const Mention& mention,
                                 const Lexicon& lexicon);

// Per finding: NotMentioned without any mention, else aggregated across the
// report with precedence Present > Uncertain > Absent.
LabelSet label_report(const Report& report, const Lexicon& lexicon);

}  // namespace radlab
