#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "yinyang/score.hpp"

namespace yinyang {

// Field names of a phrase-annotated song record. Per-note fields may be either
// arrays (one value per note) or scalars; key and time fields may be either.
// Defaults follow the MTCFeatures JSON layout.
struct FormatDescriptor {
  std::string id_field = "id";
  std::string features_field = "features";  // empty: fields live on the record itself
  std::string pitch_field = "midipitch";
  std::string duration_field = "duration";
  std::string phrase_field = "phrase_ix";
  std::string onset_field;                   // empty: onsets accumulate from durations
  std::string tonic_field = "tonic";
  std::string mode_field = "mode";
  std::string time_field = "timesignature";
  SongSource source = SongSource::mtc_ann;

  static FormatDescriptor from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct CorpusParseResult {
  std::vector<Song> songs;
  std::vector<std::string> warnings;
  std::size_t single_phrase_dropped = 0;
};

// Reads a .json (array or single record), .jsonl file, or a directory of them
// (sorted by filename). Records lacking key or time data are skipped with a
// warning; other malformed records throw DataError naming the song and field.
CorpusParseResult parse_corpus(const std::filesystem::path& path, const FormatDescriptor& format = {});
Song parse_song_record(const nlohmann::json& record, const FormatDescriptor& format);

struct CorpusSplit {
  std::vector<Song> train;
  std::vector<Song> validation;
  std::vector<Song> test;
  std::vector<std::string> warnings;
};

struct SplitOptions {
  std::size_t test_size = 100;
  double validation_fraction = 0.1;  // of the songs left after the test set
};

// Whole songs are assigned to one split, so no phrase crosses splits.
CorpusSplit split_corpus(const std::vector<Song>& songs, std::uint64_t seed, const SplitOptions& options = {});

struct CorpusStatistics {
  std::size_t songs = 0;
  double phrases_per_song = 0;
  double notes_per_song = 0;
};

CorpusStatistics corpus_statistics(const std::vector<Song>& songs);

// Canonical serialization shared by the CLI stages.
nlohmann::json to_json(const Note& note);
nlohmann::json to_json(const Phrase& phrase);
nlohmann::json to_json(const Song& song);
Note note_from_json(const nlohmann::json& j);
Phrase phrase_from_json(const nlohmann::json& j);
Song song_from_json(const nlohmann::json& j);

nlohmann::json corpus_to_json(const std::vector<Song>& songs);
std::vector<Song> corpus_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

KeySignature parse_key(const std::string& text);  // "G major", "F# minor"
TimeSignature parse_time(const std::string& text);  // "3/4"

}  // namespace yinyang
