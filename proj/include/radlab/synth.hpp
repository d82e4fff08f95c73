#pragma once

#include "radlab/corpus.hpp"
#include "radlab/rulelab.hpp"

namespace radlab {

struct SynthCorpus {
  ReportSet reports;
  AnnotationSet gold{AnnotationSource::Gold};
};

// Deterministic templated corpus with gold labels. Mention sentences realize
// the sampled status with phrases and cues from the lexicon, so the rule
// labeler can recover the gold labels on noise-free output.
SynthCorpus generate_synthetic_corpus(const SynthConfig& config);
SynthCorpus generate_synthetic_corpus(const SynthConfig& config, const Lexicon& lexicon);

// Fixed sentences free of finding phrases, used as filler.
const std::vector<std::string>& distractor_sentences();

}  // namespace radlab
