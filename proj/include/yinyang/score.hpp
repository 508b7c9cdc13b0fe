#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "yinyang/rational.hpp"

namespace yinyang {

// Finest note value supported by the encoding grid, in quarter notes.
inline const Rational kGridUnit{1, 12};

enum class Mode { major, minor };

struct KeySignature {
  int tonic = 0;  // pitch class 0-11
  Mode mode = Mode::major;

  bool operator==(const KeySignature&) const = default;
};

struct TimeSignature {
  int numerator = 4;
  int denominator = 4;

  Rational bar_length() const { return Rational(4 * numerator, denominator); }
  bool operator==(const TimeSignature&) const = default;
};

enum class CadenceClass { tonic_final, dominant_final, other };

enum class SongSource { mtc_fs, mtc_ann, essen, synthetic };

// A monophonic note. An empty pitch or duration means that field is masked.
struct Note {
  std::optional<int> pitch;
  std::optional<Rational> duration;
  Rational onset{0};  // quarter notes from phrase start

  bool is_concrete() const { return pitch.has_value() && duration.has_value(); }
  bool operator==(const Note&) const = default;
};

struct Phrase {
  std::vector<Note> notes;
  KeySignature key;
  TimeSignature time;
  CadenceClass cadence = CadenceClass::other;
  int index_in_song = 0;

  bool is_concrete() const;
  // Latest onset + duration over concrete durations (onset when masked).
  Rational end() const;
  std::vector<int> pitches() const;  // throws DataError if any pitch is masked
  std::vector<Rational> durations() const;

  bool operator==(const Phrase&) const = default;
};

struct Song {
  std::string id;
  std::vector<Phrase> phrases;
  SongSource source = SongSource::synthetic;

  std::size_t note_count() const;
  bool operator==(const Song&) const = default;
};

// Throws DataError if the phrase breaks the value invariants
// (empty, pitch range, nonpositive duration, negative or decreasing onsets).
void validate(const Phrase& phrase);

CadenceClass derive_cadence(const Phrase& phrase);

struct TransposeResult {
  Phrase phrase;
  int applied = 0;     // effective semitone shift
  bool clamped = false;  // applied != requested
  bool unchanged = false;  // no octave-equivalent shift fit; pitches left as-is
};

// Shifts every concrete pitch. When the requested shift would leave [0,127]
// the nearest octave-equivalent shift that fits is used instead; if none fits
// the pitches are left unchanged. The key tonic follows the applied shift.
TransposeResult transpose_checked(const Phrase& phrase, int semitones);
Phrase transpose(const Phrase& phrase, int semitones);
Song transpose(const Song& song, int semitones);

// Diatonic pitch classes of the key (natural minor for minor keys).
std::array<int, 7> scale_pitch_classes(const KeySignature& key);
bool in_key(int pitch, const KeySignature& key);

// Recomputes onsets so that each note keeps the gap (rest) that followed it.
// `gaps` has one entry per note; the first onset is preserved.
void relayout(std::vector<Note>& notes, const std::vector<Rational>& gaps, const Rational& first_onset);
std::vector<Rational> gaps_after(const std::vector<Note>& notes);

std::string_view to_string(Mode mode);
std::string_view to_string(CadenceClass cadence);
std::string_view to_string(SongSource source);
Mode parse_mode(std::string_view text);
CadenceClass parse_cadence(std::string_view text);
SongSource parse_song_source(std::string_view text);

// "C", "F#", "Bb" -> pitch class.
int parse_pitch_class(std::string_view name);
std::string key_name(const KeySignature& key);

}  // namespace yinyang
