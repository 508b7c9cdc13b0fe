#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "yinyang/neural/transformer.hpp"
#include "yinyang/score.hpp"
#include "yinyang/tokenizer.hpp"

namespace yinyang::neural {

struct EncoderInput {
  std::vector<int> ids;
  std::size_t dropped_phrases = 0;  // whole context phrases removed
  std::size_t dropped_tokens = 0;   // every removed context token, including the above
};

// Joins context phrases (oldest first) with SeparatorPhrase, then a separator
// and the tail. Context is dropped from the left until `limit` fits, oldest
// phrases first; the tail is never cut and must fit on its own.
EncoderInput assemble_encoder_input(std::span<const TokenSequence> context, const TokenSequence& tail, std::size_t limit);

// [BeginSeq, A, SeparatorPhrase, B, EndSeq], A trimmed from the left to fit.
std::vector<int> pair_input(const Phrase& a, const Phrase& b, std::size_t limit);

ConditionalSpec conditional_for(const Phrase& target, std::vector<CorruptionTag> corruptions = {});

// Decoder side of a target phrase: input = BeginSeq + tokens, target = tokens + EndSeq.
void set_decoder_target(SequenceExample& ex, const TokenSequence& target);

struct ExampleOptions {
  std::size_t max_context_phrases = 4;  // generator look-back
  int max_shift = 0;                    // uniform pitch shift in [-max_shift, max_shift] per song
  std::uint64_t seed = 0;
};

enum class RefinerTask {
  corruption,  // targets reconstructed from sample_training_corruption output
  copy,        // corrupted phrase replaced by the clean one, no tags
};

enum class PairPolicy {
  consecutive,  // (P_i, P_{i+1}) positives
  same_song,    // any (P_i, P_j), i < j
};

struct BuildStats {
  std::size_t built = 0;
  std::size_t skipped = 0;  // did not fit the model contexts or failed to encode
};

std::vector<SequenceExample> build_generator_examples(std::span<const Song> songs, const ModelConfig& config,
                                                      const ExampleOptions& options, BuildStats* stats = nullptr);
std::vector<SequenceExample> build_refiner_examples(std::span<const Song> songs, const ModelConfig& config,
                                                    RefinerTask task, const ExampleOptions& options,
                                                    BuildStats* stats = nullptr);
// One positive per eligible phrase (pair) and one cross-song negative for each.
std::vector<PairExample> build_pair_examples(std::span<const Song> songs, const ModelConfig& config, PairPolicy policy,
                                             const ExampleOptions& options, BuildStats* stats = nullptr);

}  // namespace yinyang::neural
