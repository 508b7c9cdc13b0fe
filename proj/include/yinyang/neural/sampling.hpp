#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "yinyang/neural/checkpoint.hpp"
#include "yinyang/score.hpp"
#include "yinyang/tokenizer.hpp"

namespace yinyang::neural {

struct SamplingParams {
  double temperature = 1.0;
  int max_new_tokens = 256;
  std::uint64_t seed = 0;
  int max_attempts = 3;
  // Restrict each step to tokens that keep the stream a well-formed phrase.
  bool grammar = true;

  void validate() const;  // throws DataError unless temperature > 0 and counts >= 1
};

// Next-token distribution after `decoder_prefix` (which starts with BeginSeq).
Eigen::VectorXd next_token_distribution(const Seq2Seq& model, std::span<const int> encoder_ids,
                                        std::span<const int> decoder_prefix);

struct SampleResult {
  TokenSequence tokens;  // without BeginSeq/EndSeq
  Phrase phrase;
  int attempts = 0;
};

// Autoregressive temperature sampling until EndSeq or max_new_tokens. Retries
// with derived seeds when the output does not decode; throws ModelError after
// max_attempts failures.
SampleResult sample_phrase(const Seq2Seq& model, std::span<const int> encoder_ids, const KeySignature& key,
                           const TimeSignature& time, const SamplingParams& params);

// Argmax decoding under the same stopping and grammar rules.
SampleResult greedy_phrase(const Seq2Seq& model, std::span<const int> encoder_ids, const KeySignature& key,
                           const TimeSignature& time, int max_new_tokens = 256, bool grammar = true);

// Probability that B follows (selector) or derives from (SD) A.
double score_pair(const Classifier& model, const Phrase& a, const Phrase& b);
// Mean-pooled final-layer states for the pair, length = hidden size.
Eigen::VectorXd embed_phrase_pair(const Classifier& model, const Phrase& a, const Phrase& b);

}  // namespace yinyang::neural
