#include "radlab/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "radlab/rng.hpp"

namespace radlab {

namespace {

std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string present_sentence(Rng& rng, const std::string& phrase) {
  switch (rng.below(4)) {
    case 0: return "there is " + phrase;
    case 1: return phrase + " is seen";
    case 2: return phrase + " is present";
    default: return "persistent " + phrase;
  }
}

std::string cue_sentence(Rng& rng, const std::string& cue, const std::string& phrase) {
  // "may"/"might" need an auxiliary construction to stay grammatical
  if (cue == "may" || cue == "might") return "there " + cue + " be " + phrase;
  if (rng.below(2) == 0) return cue + " " + phrase;
  return "the study shows " + cue + " " + phrase;
}

}  // namespace

const std::vector<std::string>& distractor_sentences() {
  static const std::vector<std::string> sentences = {
      "the endotracheal tube terminates above the carina",
      "midline sternotomy wires are intact",
      "a right internal jugular catheter is in place",
      "comparison is made to the prior examination",
      "the costophrenic angles are sharp",
      "surgical clips project over the upper abdomen",
      "patient rotation limits assessment",
      "the trachea is midline",
  };
  return sentences;
}

SynthCorpus generate_synthetic_corpus(const SynthConfig& config) {
  return generate_synthetic_corpus(config, default_lexicon());
}

SynthCorpus generate_synthetic_corpus(const SynthConfig& config, const Lexicon& lexicon) {
  config.validate();
  lexicon.validate();
  Rng rng(config.seed);
  SynthCorpus corpus;
  const std::vector<double> prior(config.status_prior.begin(), config.status_prior.end());

  for (size_t r = 0; r < config.n_reports; ++r) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth-%06zu", r + 1);
    LabelSet gold;
    std::vector<std::string> sentences;

    for (Finding f : all_findings()) {
      if (!rng.bernoulli(config.mention_prob)) continue;
      const auto status = static_cast<CertaintyStatus>(rng.categorical(prior));
      gold.set(f, status);
      const auto& phrases = lexicon.phrases.at(f);
      const std::string& phrase = phrases[rng.below(phrases.size())];
      std::string sentence;
      switch (status) {
        case CertaintyStatus::Present:
          sentence = present_sentence(rng, phrase);
          break;
        case CertaintyStatus::Absent:
          sentence = cue_sentence(rng, lexicon.negation_cues[rng.below(lexicon.negation_cues.size())],
                                  phrase);
          break;
        case CertaintyStatus::Uncertain:
          sentence = cue_sentence(
              rng, lexicon.uncertainty_cues[rng.below(lexicon.uncertainty_cues.size())], phrase);
          break;
        default:
          break;
      }
      sentences.push_back(std::move(sentence));
    }

    const size_t slots = sentences.size() + 1;
    for (size_t s = 0; s < slots; ++s) {
      if (rng.bernoulli(config.distractor_sentence_rate)) {
        sentences.push_back(distractor_sentences()[rng.below(distractor_sentences().size())]);
      }
    }
    if (sentences.empty()) {
      sentences.push_back(distractor_sentences()[rng.below(distractor_sentences().size())]);
    }
    rng.shuffle(sentences);

    std::string text;
    for (const auto& s : sentences) {
      if (!text.empty()) text += " ";
      text += capitalized(s) + ".";
    }
    corpus.reports.add(Report{idbuf, std::move(text)});
    corpus.gold.add(idbuf, gold);
  }
  return corpus;
}

}  // namespace radlab
