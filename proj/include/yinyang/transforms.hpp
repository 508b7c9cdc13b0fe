#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "yinyang/operators.hpp"
#include "yinyang/score.hpp"

namespace yinyang {

// Transformation kind -> the corruption tokens it is shown with at generation time.
using PairingTable = std::map<TransformationKind, std::vector<CorruptionTag>>;

const PairingTable& pairing_table();
Similarity similarity_of(TransformationKind kind);
std::vector<TransformationKind> kinds_with_similarity(Similarity similarity);
bool is_masking(CorruptionTag tag);

// Training-time corruption. Stochastic choices come from `seed` only.
Phrase corrupt(const Phrase& phrase, CorruptionTag tag, std::uint64_t seed);
// Applies the tags in order, each with its own derived seed.
Phrase corrupt(const Phrase& phrase, std::span<const CorruptionTag> tags, std::uint64_t seed);

// Generation-time transformation. Throws DataError on masked input.
Phrase transform(const Phrase& phrase, TransformationKind kind, std::uint64_t seed, const KeySignature& key);

// Uniform choice among the corruptions paired with `kind`.
CorruptionTag pick_corruption_tag(TransformationKind kind, std::uint64_t seed);

// 20%: one masking corruption alone. Otherwise one non-masking corruption,
// preceded by fragmentation with probability 20%.
std::vector<CorruptionTag> sample_training_corruption(std::uint64_t seed);

// Individual operators, exposed for tests and the CLI.
Phrase fragment(const Phrase& phrase, std::uint64_t seed);
Phrase chromatic_inversion(const Phrase& phrase);
Phrase tonal_inversion(const Phrase& phrase, const KeySignature& key);
Phrase retrograde_pitch(const Phrase& phrase);
Phrase retrograde_pitch_duration(const Phrase& phrase);
Phrase scale_durations(const Phrase& phrase, const Rational& factor);
Phrase reduction(const Phrase& phrase);

}  // namespace yinyang
