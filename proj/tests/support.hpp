#pragma once

#include <array>
#include <vector>

#include "yinyang/random.hpp"
#include "yinyang/score.hpp"
#include "yinyang/tokenizer.hpp"

namespace yinyang::testing {

struct PhraseShape {
  int min_notes = 1;
  int max_notes = 16;
  int pitch_spread = 24;      // pitches within first pitch +- spread
  int max_duration_slot = 47;  // slots of 1/12 quarter, zero-based
  bool rests = true;
};

inline TimeSignature random_time(Rng& rng) {
  static constexpr std::array<TimeSignature, 6> kTimes{
      TimeSignature{4, 4}, TimeSignature{3, 4}, TimeSignature{2, 4},
      TimeSignature{6, 8}, TimeSignature{5, 4}, TimeSignature{12, 8}};
  return kTimes[static_cast<std::size_t>(uniform_int(rng, 0, 5))];
}

// Concrete phrase on the 1/12-quarter grid; no overlaps, optional rests.
inline Phrase random_phrase(Rng& rng, const PhraseShape& shape = {}) {
  Phrase p;
  p.key = KeySignature{uniform_int(rng, 0, 11), bernoulli(rng, 0.5) ? Mode::major : Mode::minor};
  p.time = random_time(rng);
  const int n = uniform_int(rng, shape.min_notes, shape.max_notes);
  const int axis = uniform_int(rng, 48, 79);
  Rational onset(uniform_int(rng, 0, 3) * 3, 12);
  for (int i = 0; i < n; ++i) {
    Note note;
    note.pitch = i == 0 ? axis : uniform_int(rng, axis - shape.pitch_spread, axis + shape.pitch_spread);
    note.duration = Rational(uniform_int(rng, 0, shape.max_duration_slot) + 1, 12);
    note.onset = onset;
    onset += *note.duration;
    if (shape.rests && bernoulli(rng, 0.2)) onset += Rational(uniform_int(rng, 1, 12), 12);
    p.notes.push_back(note);
  }
  p.cadence = derive_cadence(p);
  return p;
}

// Masks pitches and durations at random; sometimes replaces a bar by one fully
// masked note at the bar start.
inline Phrase randomly_masked(Phrase p, Rng& rng) {
  for (auto& n : p.notes) {
    if (bernoulli(rng, 0.25)) n.pitch.reset();
    if (bernoulli(rng, 0.25)) n.duration.reset();
  }
  return p;
}

}  // namespace yinyang::testing
