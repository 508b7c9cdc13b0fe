#include "yinyang/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "yinyang/errors.hpp"
#include "yinyang/random.hpp"

namespace yinyang {

using nlohmann::json;
namespace fs = std::filesystem;

FormatDescriptor FormatDescriptor::from_json(const json& j) {
  FormatDescriptor f;
  f.id_field = j.value("id_field", f.id_field);
  f.features_field = j.value("features_field", f.features_field);
  f.pitch_field = j.value("pitch_field", f.pitch_field);
  f.duration_field = j.value("duration_field", f.duration_field);
  f.phrase_field = j.value("phrase_field", f.phrase_field);
  f.onset_field = j.value("onset_field", f.onset_field);
  f.tonic_field = j.value("tonic_field", f.tonic_field);
  f.mode_field = j.value("mode_field", f.mode_field);
  f.time_field = j.value("time_field", f.time_field);
  if (j.contains("source")) f.source = parse_song_source(j.at("source").get<std::string>());
  return f;
}

json FormatDescriptor::to_json() const {
  return json{{"id_field", id_field},       {"features_field", features_field},
              {"pitch_field", pitch_field}, {"duration_field", duration_field},
              {"phrase_field", phrase_field}, {"onset_field", onset_field},
              {"tonic_field", tonic_field}, {"mode_field", mode_field},
              {"time_field", time_field},   {"source", std::string(yinyang::to_string(source))}};
}

namespace {

struct MissingMetadata {
  std::string field;
};

// Per-note view of a field that may be an array or a scalar.
const json& element(const json& field, std::size_t i) {
  return field.is_array() ? field.at(i) : field;
}

Rational rational_value(const json& v) {
  if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
  if (v.is_number()) return rational_from_double(v.get<double>());
  if (v.is_string()) return parse_rational(v.get<std::string>());
  throw DataError("expected a number or rational string");
}

int tonic_value(const json& v) {
  if (v.is_number_integer()) {
    const int pc = v.get<int>();
    if (pc < 0 || pc > 11) throw DataError("tonic outside 0-11");
    return pc;
  }
  if (v.is_string()) return parse_pitch_class(v.get<std::string>());
  throw DataError("expected a tonic name or pitch class");
}

TimeSignature time_value(const json& v) {
  TimeSignature t;
  if (v.is_array() && v.size() == 2) {
    t.numerator = v[0].get<int>();
    t.denominator = v[1].get<int>();
  } else if (v.is_string()) {
    t = parse_time(v.get<std::string>());
  } else {
    throw DataError("expected a time signature");
  }
  if (t.numerator <= 0 || t.denominator <= 0 || (t.denominator & (t.denominator - 1)) != 0) {
    throw DataError("invalid time signature");
  }
  return t;
}

const json& require(const json& obj, const std::string& field) {
  if (!obj.contains(field)) throw DataError("missing field '" + field + "'");
  return obj.at(field);
}

// Key/time fields may be absent or null per note; that is a skip, not an error.
bool has_value_at(const json& obj, const std::string& field, std::size_t i) {
  if (!obj.contains(field)) return false;
  const json& f = obj.at(field);
  if (f.is_null()) return false;
  if (f.is_array()) return i < f.size() && !f.at(i).is_null();
  return true;
}

}  // namespace

Song parse_song_record(const json& record, const FormatDescriptor& format) {
  std::string id = "<unnamed>";
  if (record.contains(format.id_field)) {
    const auto& v = record.at(format.id_field);
    id = v.is_string() ? v.get<std::string>() : v.dump();
  }
  std::string current_field;
  try {
    const json& fields = format.features_field.empty() ? record : require(record, format.features_field);
    current_field = format.pitch_field;
    const json& pitch = require(fields, format.pitch_field);
    if (!pitch.is_array()) throw DataError("expected an array");
    const std::size_t n = pitch.size();
    current_field = format.duration_field;
    const json& duration = require(fields, format.duration_field);
    if (duration.is_array() && duration.size() != n) throw DataError("length differs from pitch array");
    current_field = format.phrase_field;
    const json& phrase_ix = require(fields, format.phrase_field);
    if (phrase_ix.is_array() && phrase_ix.size() != n) throw DataError("length differs from pitch array");
    const json* onset = nullptr;
    if (!format.onset_field.empty()) {
      current_field = format.onset_field;
      onset = &require(fields, format.onset_field);
    }

    Song song;
    song.id = id;
    song.source = format.source;
    Rational phrase_start_abs{0};
    Rational cursor{0};
    std::optional<json> current_ix;
    for (std::size_t i = 0; i < n; ++i) {
      current_field = format.phrase_field;
      const json ix = element(phrase_ix, i);
      if (!current_ix || ix != *current_ix) {
        current_field = format.tonic_field;
        if (!has_value_at(fields, format.tonic_field, i)) throw MissingMetadata{format.tonic_field};
        if (!has_value_at(fields, format.mode_field, i)) throw MissingMetadata{format.mode_field};
        if (!has_value_at(fields, format.time_field, i)) throw MissingMetadata{format.time_field};
        Phrase p;
        p.key.tonic = tonic_value(element(fields.at(format.tonic_field), i));
        current_field = format.mode_field;
        p.key.mode = parse_mode(element(fields.at(format.mode_field), i).get<std::string>());
        current_field = format.time_field;
        p.time = time_value(element(fields.at(format.time_field), i));
        p.index_in_song = static_cast<int>(song.phrases.size());
        song.phrases.push_back(std::move(p));
        current_ix = ix;
        phrase_start_abs = onset ? rational_value(element(*onset, i)) : cursor;
      }
      Note note;
      current_field = format.pitch_field;
      const json& pv = pitch.at(i);
      if (!pv.is_number_integer()) throw DataError("expected an integer MIDI pitch");
      note.pitch = pv.get<int>();
      if (*note.pitch < 0 || *note.pitch > 127) throw DataError("pitch outside 0-127");
      current_field = format.duration_field;
      note.duration = rational_value(element(duration, i));
      if (*note.duration <= 0) throw DataError("nonpositive duration");
      if (onset) {
        current_field = format.onset_field;
        note.onset = rational_value(element(*onset, i)) - phrase_start_abs;
      } else {
        note.onset = cursor - phrase_start_abs;
      }
      cursor += *note.duration;
      song.phrases.back().notes.push_back(note);
    }
    current_field = "notes";
    for (auto& p : song.phrases) {
      validate(p);
      p.cadence = derive_cadence(p);
    }
    return song;
  } catch (const MissingMetadata&) {
    throw;
  } catch (const DataError& e) {
    throw DataError("song '" + id + "', field '" + current_field + "': " + e.what());
  } catch (const json::exception& e) {
    throw DataError("song '" + id + "', field '" + current_field + "': " + e.what());
  }
}

namespace {

std::vector<json> read_records(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read " + file.string());
  std::vector<json> records;
  if (file.extension() == ".jsonl") {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        records.push_back(json::parse(line));
      } catch (const json::parse_error& e) {
        throw DataError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    return records;
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(file.string() + ": " + e.what());
  }
  if (doc.is_array()) {
    for (auto& r : doc) records.push_back(std::move(r));
  } else if (doc.is_object() && doc.value("format", "") == "yinyang-corpus") {
    for (auto& r : doc.at("songs")) records.push_back(std::move(r));
  } else {
    records.push_back(std::move(doc));
  }
  return records;
}

}  // namespace

CorpusParseResult parse_corpus(const fs::path& path, const FormatDescriptor& format) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      const auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".json" || ext == ".jsonl")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::exists(path)) {
    files.push_back(path);
  } else {
    throw DataError("corpus path does not exist: " + path.string());
  }

  CorpusParseResult result;
  for (const auto& file : files) {
    for (const auto& record : read_records(file)) {
      Song song;
      if (record.is_object() && record.value("format", "") == "yinyang-song") {
        song = song_from_json(record);
      } else {
        try {
          song = parse_song_record(record, format);
        } catch (const MissingMetadata& m) {
          const std::string id = record.contains(format.id_field) ? record.at(format.id_field).dump() : "<unnamed>";
          result.warnings.push_back("skipped song " + id + ": missing '" + m.field + "'");
          continue;
        }
      }
      if (song.phrases.size() < 2) {
        ++result.single_phrase_dropped;
        continue;
      }
      result.songs.push_back(std::move(song));
    }
  }
  return result;
}

CorpusSplit split_corpus(const std::vector<Song>& songs, std::uint64_t seed, const SplitOptions& options) {
  if (songs.size() < 3) throw DataError("splitting needs at least 3 songs");
  CorpusSplit split;
  std::vector<std::size_t> order(songs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x5b117));
  shuffle_in_place(std::span<std::size_t>(order), rng);

  std::size_t test = options.test_size;
  if (test > songs.size() - 2) {
    test = songs.size() - 2;
    split.warnings.push_back("test size " + std::to_string(options.test_size) + " clamped to " +
                             std::to_string(test));
  }
  const std::size_t rest = songs.size() - test;
  auto validation = static_cast<std::size_t>(std::llround(options.validation_fraction * static_cast<double>(rest)));
  validation = std::clamp<std::size_t>(validation, 1, rest - 1);

  for (std::size_t i = 0; i < order.size(); ++i) {
    const Song& s = songs[order[i]];
    if (i < test) split.test.push_back(s);
    else if (i < test + validation) split.validation.push_back(s);
    else split.train.push_back(s);
  }
  return split;
}

CorpusStatistics corpus_statistics(const std::vector<Song>& songs) {
  CorpusStatistics stats;
  stats.songs = songs.size();
  if (songs.empty()) return stats;
  double phrases = 0, notes = 0;
  for (const auto& s : songs) {
    phrases += static_cast<double>(s.phrases.size());
    notes += static_cast<double>(s.note_count());
  }
  stats.phrases_per_song = phrases / static_cast<double>(songs.size());
  stats.notes_per_song = notes / static_cast<double>(songs.size());
  return stats;
}

json to_json(const Note& note) {
  json j;
  j["pitch"] = note.pitch ? json(*note.pitch) : json(nullptr);
  j["duration"] = note.duration ? json(to_string(*note.duration)) : json(nullptr);
  j["onset"] = to_string(note.onset);
  return j;
}

json to_json(const Phrase& phrase) {
  json notes = json::array();
  for (const auto& n : phrase.notes) notes.push_back(to_json(n));
  return json{{"format", "yinyang-phrase"},
              {"version", 1},
              {"key", {{"tonic", phrase.key.tonic}, {"mode", std::string(to_string(phrase.key.mode))}}},
              {"time", {phrase.time.numerator, phrase.time.denominator}},
              {"cadence", std::string(to_string(phrase.cadence))},
              {"index", phrase.index_in_song},
              {"notes", std::move(notes)}};
}

json to_json(const Song& song) {
  json phrases = json::array();
  for (const auto& p : song.phrases) phrases.push_back(to_json(p));
  return json{{"format", "yinyang-song"},
              {"version", 1},
              {"id", song.id},
              {"source", std::string(to_string(song.source))},
              {"phrases", std::move(phrases)}};
}

Note note_from_json(const json& j) {
  Note n;
  if (!j.at("pitch").is_null()) n.pitch = j.at("pitch").get<int>();
  if (!j.at("duration").is_null()) n.duration = parse_rational(j.at("duration").get<std::string>());
  n.onset = parse_rational(j.at("onset").get<std::string>());
  return n;
}

Phrase phrase_from_json(const json& j) {
  try {
    Phrase p;
    p.key.tonic = j.at("key").at("tonic").get<int>();
    p.key.mode = parse_mode(j.at("key").at("mode").get<std::string>());
    p.time.numerator = j.at("time").at(0).get<int>();
    p.time.denominator = j.at("time").at(1).get<int>();
    p.index_in_song = j.value("index", 0);
    for (const auto& n : j.at("notes")) p.notes.push_back(note_from_json(n));
    validate(p);
    p.cadence = j.contains("cadence") ? parse_cadence(j.at("cadence").get<std::string>()) : derive_cadence(p);
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed phrase JSON: ") + e.what());
  }
}

Song song_from_json(const json& j) {
  try {
    Song s;
    s.id = j.at("id").get<std::string>();
    s.source = parse_song_source(j.value("source", "synthetic"));
    for (const auto& p : j.at("phrases")) s.phrases.push_back(phrase_from_json(p));
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed song JSON: ") + e.what());
  }
}

json corpus_to_json(const std::vector<Song>& songs) {
  json list = json::array();
  for (const auto& s : songs) list.push_back(to_json(s));
  return json{{"format", "yinyang-corpus"}, {"version", 1}, {"songs", std::move(list)}};
}

std::vector<Song> corpus_from_json(const json& j) {
  std::vector<Song> songs;
  for (const auto& s : j.at("songs")) songs.push_back(song_from_json(s));
  return songs;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

KeySignature parse_key(const std::string& text) {
  std::istringstream in(text);
  std::string tonic, mode = "major";
  in >> tonic >> mode;
  if (tonic.empty()) throw DataError("empty key");
  return KeySignature{parse_pitch_class(tonic), parse_mode(mode)};
}

TimeSignature parse_time(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) throw DataError("bad time signature '" + text + "'");
  try {
    return TimeSignature{std::stoi(text.substr(0, slash)), std::stoi(text.substr(slash + 1))};
  } catch (const std::logic_error&) {
    throw DataError("bad time signature '" + text + "'");
  }
}

}  // namespace yinyang
