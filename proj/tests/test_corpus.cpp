#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "support.hpp"
#include "yinyang/corpus.hpp"
#include "yinyang/errors.hpp"
#include "yinyang/synthetic.hpp"

using namespace yinyang;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json mtc_record(const std::string& id, std::vector<int> phrase_ix) {
  json pitch = json::array(), duration = json::array();
  for (std::size_t i = 0; i < phrase_ix.size(); ++i) {
    pitch.push_back(60 + static_cast<int>(i % 5));
    duration.push_back(i % 2 ? 0.5 : 1.0);
  }
  return json{{"id", id},
              {"features",
               {{"midipitch", pitch},
                {"duration", duration},
                {"phrase_ix", phrase_ix},
                {"tonic", "G"},
                {"mode", "major"},
                {"timesignature", "3/4"}}}};
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("yinyang_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("MTC-style record parses into phrases with accumulated onsets") {
  const Song s = parse_song_record(mtc_record("NLB1", {0, 0, 0, 1, 1}), FormatDescriptor{});
  REQUIRE(s.phrases.size() == 2);
  CHECK(s.id == "NLB1");
  CHECK(s.phrases[0].key == KeySignature{7, Mode::major});
  CHECK(s.phrases[0].time == TimeSignature{3, 4});
  CHECK(s.phrases[0].notes.size() == 3);
  CHECK(s.phrases[0].notes[1].onset == Rational(1));
  CHECK(s.phrases[0].notes[2].onset == Rational(3, 2));
  // Second phrase is rebased to its own start.
  CHECK(s.phrases[1].notes[0].onset == Rational(0));
  CHECK(s.phrases[1].notes[1].onset == Rational(1, 2));
  CHECK(s.phrases[1].index_in_song == 1);
}

TEST_CASE("parse_corpus drops single-phrase songs and skips records lacking key data") {
  const fs::path dir = temp_dir("corpus");
  {
    std::ofstream out(dir / "songs.jsonl");
    out << mtc_record("a", {0, 0, 1, 1}).dump() << '\n';
    out << mtc_record("b", {0, 0, 0}).dump() << '\n';
    json missing = mtc_record("c", {0, 1});
    missing["features"].erase("tonic");
    out << missing.dump() << '\n';
  }
  const auto result = parse_corpus(dir);
  CHECK(result.songs.size() == 1);
  CHECK(result.single_phrase_dropped == 1);
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].find("tonic") != std::string::npos);
}

TEST_CASE("malformed fields name the song and field") {
  json bad = mtc_record("broken", {0, 1});
  bad["features"]["midipitch"][1] = 200;
  try {
    parse_song_record(bad, FormatDescriptor{});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("broken") != std::string::npos);
    CHECK(what.find("midipitch") != std::string::npos);
  }
}

TEST_CASE("custom format descriptor with explicit onsets") {
  FormatDescriptor f;
  f.features_field = "";
  f.pitch_field = "pitch";
  f.duration_field = "dur";
  f.phrase_field = "phrase";
  f.onset_field = "onset";
  f.tonic_field = "key_tonic";
  f.mode_field = "key_mode";
  f.time_field = "meter";
  f.source = SongSource::essen;
  const json rec{{"id", "e1"},
                 {"pitch", {60, 62, 64, 65}},
                 {"dur", {1, 1, 1, 1}},
                 {"phrase", {0, 0, 1, 1}},
                 {"onset", {0, 1.5, 4, 5}},
                 {"key_tonic", 0},
                 {"key_mode", "minor"},
                 {"meter", "4/4"}};
  const Song s = parse_song_record(rec, f);
  CHECK(s.source == SongSource::essen);
  CHECK(s.phrases[0].notes[1].onset == Rational(3, 2));
  CHECK(s.phrases[1].notes[1].onset == Rational(1));
  CHECK(FormatDescriptor::from_json(f.to_json()).onset_field == "onset");
}

TEST_CASE("split keeps songs whole and uses the requested sizes") {
  SyntheticOptions o;
  o.songs = 300;
  const auto songs = synthetic_corpus(o);
  const auto split = split_corpus(songs, 11);
  CHECK(split.test.size() == 100);
  CHECK(split.validation.size() == 20);
  CHECK(split.train.size() == 180);
  std::set<std::string> ids;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& s : *part) CHECK(ids.insert(s.id).second);
  }
  CHECK(ids.size() == songs.size());
  // Deterministic under the same seed.
  CHECK(split_corpus(songs, 11).test == split.test);

  const auto small = split_corpus(std::vector<Song>(songs.begin(), songs.begin() + 10), 1);
  CHECK(small.test.size() == 8);
  CHECK(small.warnings.size() == 1);
  CHECK_THROWS_AS(split_corpus(std::vector<Song>(songs.begin(), songs.begin() + 2), 1), DataError);
}

TEST_CASE("canonical JSON round trip including masked notes") {
  Rng rng(5);
  std::vector<Song> songs;
  for (int s = 0; s < 20; ++s) {
    Song song;
    song.id = "s" + std::to_string(s);
    for (int p = 0; p < 3; ++p) song.phrases.push_back(testing::randomly_masked(testing::random_phrase(rng), rng));
    songs.push_back(song);
  }
  CHECK(corpus_from_json(corpus_to_json(songs)) == songs);
  const fs::path file = temp_dir("roundtrip") / "c.json";
  write_json_file(file, corpus_to_json(songs));
  CHECK(corpus_from_json(read_json_file(file)) == songs);
  CHECK(parse_corpus(file).songs == songs);
}

TEST_CASE("statistics average phrases and notes per song") {
  Song a, b;
  Phrase p;
  p.notes = {Note{60, Rational(1), Rational(0)}, Note{62, Rational(1), Rational(1)}};
  a.phrases = {p, p};
  b.phrases = {p, p, p, p};
  const auto stats = corpus_statistics({a, b});
  CHECK(stats.songs == 2);
  CHECK(stats.phrases_per_song == doctest::Approx(3.0));
  CHECK(stats.notes_per_song == doctest::Approx(6.0));
}

TEST_CASE("key and time parsing") {
  CHECK(parse_key("F# minor") == KeySignature{6, Mode::minor});
  CHECK(parse_key("Eb") == KeySignature{3, Mode::major});
  CHECK(parse_time("6/8") == TimeSignature{6, 8});
  CHECK_THROWS_AS(parse_time("6-8"), DataError);
}
