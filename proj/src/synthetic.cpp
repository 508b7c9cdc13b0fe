#include "yinyang/synthetic.hpp"

#include <algorithm>
#include <cstdio>

#include "yinyang/errors.hpp"
#include "yinyang/random.hpp"

namespace yinyang {

namespace {

struct Motif {
  std::vector<int> degrees;  // diatonic steps above the tonic
  std::vector<Rational> durations;
};

int pitch_of(int degree, int base, const std::array<int, 7>& scale, int tonic) {
  const int octave = degree >= 0 ? degree / 7 : -((-degree + 6) / 7);
  const int step = degree - 7 * octave;
  return base + 12 * octave + ((scale[static_cast<std::size_t>(step)] - tonic + 12) % 12);
}

Phrase realize(const Motif& m, const KeySignature& key, const TimeSignature& time, int base) {
  const auto scale = scale_pitch_classes(key);
  Phrase p;
  p.key = key;
  p.time = time;
  Rational onset{0};
  for (std::size_t i = 0; i < m.degrees.size(); ++i) {
    Note n;
    n.pitch = std::clamp(pitch_of(m.degrees[i], base, scale, key.tonic), 0, 127);
    n.duration = m.durations[i];
    n.onset = onset;
    onset += m.durations[i];
    p.notes.push_back(n);
  }
  p.cadence = derive_cadence(p);
  return p;
}

Motif vary(const Motif& motif, Rng& rng) {
  Motif m = motif;
  switch (uniform_int(rng, 0, 3)) {
    case 0: {  // diatonic sequence
      static constexpr int kShifts[] = {-2, -1, 1, 2};
      const int shift = kShifts[uniform_int(rng, 0, 3)];
      for (int& d : m.degrees) d += shift;
      break;
    }
    case 1: {  // neighbour edits
      const int edits = uniform_int(rng, 1, 2);
      for (int e = 0; e < edits; ++e) {
        const auto i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(m.degrees.size()) - 1));
        m.degrees[i] += bernoulli(rng, 0.5) ? 1 : -1;
      }
      break;
    }
    case 2:
      shuffle_in_place(std::span<Rational>(m.durations), rng);
      break;
    default:
      break;
  }
  if (bernoulli(rng, 0.3) && m.degrees.size() > 3) {
    m.degrees.pop_back();
    m.durations.pop_back();
  }
  return m;
}

}  // namespace

std::vector<Song> synthetic_corpus(const SyntheticOptions& o) {
  if (o.min_phrases < 2 || o.max_phrases < o.min_phrases) throw DataError("synthetic corpus needs 2+ phrases per song");
  if (o.min_notes < 2 || o.max_notes < o.min_notes) throw DataError("synthetic corpus needs 2+ notes per phrase");
  Rng rng(mix_seed(o.seed));
  std::vector<Song> songs;
  songs.reserve(o.songs);
  for (std::size_t s = 0; s < o.songs; ++s) {
    const KeySignature key{uniform_int(rng, 0, 11), bernoulli(rng, 0.5) ? Mode::major : Mode::minor};
    const TimeSignature time = bernoulli(rng, 0.6) ? TimeSignature{4, 4} : TimeSignature{3, 4};
    const int base = key.tonic > 6 ? 48 + key.tonic : 60 + key.tonic;

    // Two durations per song give each song a recognisable rhythm.
    static const Rational kValues[] = {Rational(1, 2), Rational(1), Rational(3, 2), Rational(2)};
    const Rational short_value = kValues[uniform_int(rng, 0, 1)];
    const Rational long_value = kValues[uniform_int(rng, 1, 3)];

    Motif motif;
    const int n = uniform_int(rng, o.min_notes, o.max_notes);
    int degree = 2 * uniform_int(rng, 0, 2);
    for (int i = 0; i < n; ++i) {
      motif.degrees.push_back(degree);
      motif.durations.push_back(bernoulli(rng, 0.65) ? short_value : long_value);
      static constexpr int kSteps[] = {-2, -1, -1, 1, 1, 2, 3, -3};
      degree = std::clamp(degree + kSteps[uniform_int(rng, 0, 7)], -3, 10);
    }

    Song song;
    char id[32];
    std::snprintf(id, sizeof id, "synthetic-%04zu", s);
    song.id = id;
    song.source = SongSource::synthetic;
    const int count = uniform_int(rng, o.min_phrases, o.max_phrases);
    for (int k = 0; k < count; ++k) {
      Motif m = k == 0 ? motif : vary(motif, rng);
      if (k == count - 1) {
        m.degrees.back() = m.degrees.back() >= 4 ? 7 : 0;
        m.durations.back() = Rational(2);
      }
      Phrase p = realize(m, key, time, base);
      p.index_in_song = k;
      song.phrases.push_back(std::move(p));
    }
    songs.push_back(std::move(song));
  }
  return songs;
}

}  // namespace yinyang
