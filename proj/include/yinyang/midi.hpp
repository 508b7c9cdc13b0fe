#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "yinyang/score.hpp"

namespace yinyang {

inline constexpr int kTicksPerQuarter = 480;
inline constexpr int kDefaultTempoBpm = 120;

struct TimedNote {
  int pitch = 60;
  Rational onset{0};  // quarter notes from song start
  Rational duration{1};
  bool operator==(const TimedNote&) const = default;
};

// Notes of the song laid end to end: each phrase starts where the previous
// phrase's last note ends.
std::vector<TimedNote> flatten(const Song& song);

// Standard MIDI Format 0, one track, 480 ticks per quarter, 120 BPM. Each phrase
// start carries a marker meta event so phrase boundaries survive a round trip.
// Throws DataError on masked values, an empty song, or off-tick timings.
std::vector<std::uint8_t> encode_midi(const Song& song);
void export_midi(const Song& song, const std::filesystem::path& path);

struct MidiPhraseHeader {
  Rational start{0};
  KeySignature key;
  TimeSignature time;
};

struct MidiContents {
  std::vector<TimedNote> notes;
  std::vector<MidiPhraseHeader> phrases;  // from marker/key/time meta events
};

MidiContents decode_midi(const std::vector<std::uint8_t>& bytes);
MidiContents read_midi(const std::filesystem::path& path);

// Rebuilds a song from exported MIDI using the per-phrase marker, key and time
// signature events. Cadences are re-derived from the notes.
Song import_midi_song(const std::filesystem::path& path);
Song song_from_midi(const MidiContents& contents);

}  // namespace yinyang
