#include <doctest.h>

#include <filesystem>

#include "support.hpp"
#include "yinyang/errors.hpp"
#include "yinyang/tokenizer.hpp"

using namespace yinyang;

namespace {

void check_round_trip(const Phrase& p) {
  const auto encoded = encode_phrase_checked(p);
  CHECK(encoded.warnings.empty());
  const auto decoded = decode_phrase_checked(encoded.tokens, p.key, p.time);
  CHECK_FALSE(decoded.truncated);
  CHECK(decoded.consumed == encoded.tokens.size());
  CHECK(decoded.phrase.notes == p.notes);
  CHECK(decoded.phrase.key == p.key);
  CHECK(decoded.phrase.time == p.time);
}

Phrase single(Note n, TimeSignature t = {}) {
  Phrase p;
  p.time = t;
  p.notes = {n};
  return p;
}

}  // namespace

TEST_CASE("vocabulary layout") {
  const auto& v = Vocabulary::standard();
  // 8 specials, 144 positions, 128 pitches, 96 durations, 11 corruptions,
  // 24 keys, 16*5 time signatures, 17 length buckets, 3 cadences.
  CHECK(v.size() == 8 + 144 + 128 + 96 + 11 + 24 + 80 + 17 + 3);
  CHECK(v.version() == "remi-v1");
  CHECK(v.id(Token{TokenKind::pad}) == 0);
  for (int i = 0; i < v.size(); ++i) {
    CHECK(v.id(v.token(i)) == i);
    CHECK(parse_token(to_string(v.token(i))) == v.token(i));
  }
  CHECK_THROWS_AS(v.id(Token::pitch(128)), DataError);
  CHECK_THROWS_AS(parse_token("Pitch_200"), DataError);

  const auto path = std::filesystem::temp_directory_path() / "yinyang_test_vocab.json";
  v.save(path);
  const auto loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  CHECK(loaded.version() == v.version());
  CHECK(loaded.token(300) == v.token(300));
}

TEST_CASE("length buckets") {
  CHECK(length_bucket(1) == 0);
  CHECK(length_bucket(2) == 0);
  CHECK(length_bucket(3) == 1);
  CHECK(length_bucket(9) == 4);
  CHECK(length_bucket(16) == 7);
  CHECK(length_bucket(32) == 15);
  CHECK(length_bucket(33) == 16);
  CHECK(length_bucket(500) == 16);
  for (int b = 0; b < kLengthBuckets - 1; ++b) {
    const auto [lo, hi] = bucket_range(b);
    CHECK(length_bucket(static_cast<std::size_t>(lo)) == b);
    CHECK(length_bucket(static_cast<std::size_t>(hi)) == b);
  }
}

TEST_CASE("hand-checked encoding") {
  Phrase p;
  p.time = {3, 4};
  p.notes = {Note{60, Rational(1), Rational(0)}, Note{62, Rational(1, 2), Rational(2)},
             Note{std::nullopt, Rational(1, 12), Rational(7, 2)}, Note{std::nullopt, std::nullopt, Rational(6)}};
  const TokenSequence expected{Token::bar(),         Token::position(0),  Token::pitch(60),
                               Token::duration(11),  Token::position(24), Token::pitch(62),
                               Token::duration(5),   Token::bar(),        Token::position(6),
                               Token::mask_pitch(),  Token::duration(0),  Token::bar(),
                               Token::mask_bar()};
  CHECK(encode_phrase(p) == expected);
  check_round_trip(p);
}

TEST_CASE("random phrases round trip through tokens") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    Phrase p = testing::random_phrase(rng);
    if (trial % 3 == 0) p = testing::randomly_masked(p, rng);
    check_round_trip(p);
  }
}

TEST_CASE("boundary cases round trip") {
  check_round_trip(single(Note{0, Rational(1, 12), Rational(0)}));
  check_round_trip(single(Note{127, duration_of_slot(kDurationSlots - 1), Rational(11, 4)}));
  check_round_trip(single(Note{std::nullopt, std::nullopt, Rational(0)}));
  check_round_trip(single(Note{std::nullopt, std::nullopt, Rational(4)}));
  check_round_trip(single(Note{64, std::nullopt, Rational(1, 3)}, {12, 8}));
  // Whole empty bars in the middle of a phrase.
  Phrase gap;
  gap.notes = {Note{60, Rational(1), Rational(0)}, Note{67, Rational(1), Rational(9)}};
  check_round_trip(gap);
}

TEST_CASE("off-grid values snap with a warning") {
  const auto r = encode_phrase_checked(single(Note{60, Rational(1, 7), Rational(1, 5)}));
  CHECK(r.warnings.size() == 2);
  const auto long_note = encode_phrase_checked(single(Note{60, Rational(12), Rational(0)}));
  CHECK(long_note.tokens.back() == Token::duration(kDurationSlots - 1));
  CHECK(long_note.warnings.size() == 1);
  CHECK_THROWS_AS(encode_phrase(Phrase{}), DataError);
  Phrase wide = single(Note{60, Rational(1), Rational(0)}, {16, 4});
  CHECK_THROWS_AS(encode_phrase(wide), DataError);
}

TEST_CASE("decoding drops an ill-formed tail and reports it") {
  const TokenSequence tokens{Token::bar(), Token::position(0), Token::pitch(60), Token::duration(11),
                             Token::position(12), Token::pitch(62)};
  const auto r = decode_phrase_checked(tokens, {}, {});
  CHECK(r.truncated);
  CHECK(r.consumed == 4);
  CHECK(r.phrase.notes.size() == 1);
  CHECK_FALSE(r.report.empty());

  const TokenSequence backwards{Token::bar(), Token::position(12), Token::pitch(60), Token::duration(11),
                                Token::position(0), Token::pitch(62), Token::duration(11)};
  const auto b = decode_phrase_checked(backwards, {}, {});
  CHECK(b.truncated);
  CHECK(b.phrase.notes.size() == 1);

  const TokenSequence with_end{Token::bar(), Token::position(0), Token::pitch(60), Token::duration(11),
                               Token::end(), Token::position(3)};
  const auto e = decode_phrase_checked(with_end, {}, {});
  CHECK_FALSE(e.truncated);
  CHECK(e.consumed == 4);

  CHECK_THROWS_AS(decode_phrase(TokenSequence{Token::bar(), Token::pitch(60)}, {}, {}), DataError);
}

TEST_CASE("conditional prefix") {
  const auto prefix = build_conditional_prefix(CorruptionTag::melodic_stripping, {7, Mode::minor}, {6, 8}, 12,
                                               CadenceClass::dominant_final);
  const TokenSequence expected{Token::corruption(CorruptionTag::melodic_stripping), Token::key({7, Mode::minor}),
                               Token::time({6, 8}), Token::phrase_length(5),
                               Token::cadence(CadenceClass::dominant_final)};
  CHECK(prefix == expected);
  CHECK(build_conditional_prefix(std::nullopt, {}, {}, 3, CadenceClass::other).size() == 4);
  CHECK_THROWS_AS(build_conditional_prefix(std::nullopt, {}, {}, 0, CadenceClass::other), DataError);
}

TEST_CASE("grammar accepts every encoded concrete phrase") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    testing::PhraseShape shape;
    shape.rests = trial % 2 == 0;
    shape.max_duration_slot = 23;  // keeps empty-bar runs to one even in 2/4
    const Phrase p = testing::random_phrase(rng, shape);
    RemiGrammar g(p.time);
    for (const auto& t : encode_phrase(p)) {
      REQUIRE(g.allows(t));
      g.accept(t);
    }
    CHECK(g.allows(Token::end()));
    g.accept(Token::end());
    CHECK(g.finished());
    CHECK(g.notes() == p.notes.size());
  }
}

TEST_CASE("grammar rejects malformed continuations") {
  RemiGrammar g(TimeSignature{2, 4});
  CHECK_FALSE(g.allows(Token::position(0)));
  CHECK_FALSE(g.allows(Token::end()));
  g.accept(Token::bar());
  CHECK_FALSE(g.allows(Token::end()));
  CHECK_FALSE(g.allows(Token::position(24)));  // a 2/4 bar has 24 slots
  CHECK_FALSE(g.allows(Token::mask_bar()));
  g.accept(Token::position(6));
  CHECK_FALSE(g.allows(Token::mask_pitch()));
  CHECK_FALSE(g.allows(Token::duration(1)));
  g.accept(Token::pitch(60));
  CHECK_FALSE(g.allows(Token::mask_duration()));
  g.accept(Token::duration(5));
  CHECK_FALSE(g.allows(Token::position(6)));  // onsets strictly increase
  CHECK(g.allows(Token::position(7)));
  g.accept(Token::bar());
  g.accept(Token::bar());
  CHECK_FALSE(g.allows(Token::bar()));  // two empty bars in a row
  CHECK_THROWS_AS(g.accept(Token::bar()), DataError);
}
