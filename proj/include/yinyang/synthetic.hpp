#pragma once

#include <cstdint>
#include <vector>

#include "yinyang/score.hpp"

namespace yinyang {

struct SyntheticOptions {
  std::size_t songs = 50;
  int min_phrases = 4;
  int max_phrases = 7;
  int min_notes = 6;
  int max_notes = 10;
  std::uint64_t seed = 0;
};

// Songs built from one random motif each: random key, 4/4 or 3/4, phrases
// that vary the motif (sequence, neighbour edits, rhythm swaps), last phrase
// ending on the tonic. Different songs are therefore easy to tell apart.
std::vector<Song> synthetic_corpus(const SyntheticOptions& options);

}  // namespace yinyang
