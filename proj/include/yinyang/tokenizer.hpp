#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "yinyang/score.hpp"
#include "yinyang/operators.hpp"

namespace yinyang {

// Grid resolution: positions and durations are multiples of 1/12 quarter note.
inline constexpr int kSlotsPerQuarter = 12;
inline constexpr int kMaxPositionSlots = 144;  // bars up to 12 quarter notes
inline constexpr int kDurationSlots = 96;      // 1/12 .. 8 quarter notes
inline constexpr int kLengthBuckets = 17;      // 1-2, 3-4, ..., 31-32, 33+
inline constexpr int kMaxTimeNumerator = 16;
inline constexpr std::array<int, 5> kTimeDenominators{1, 2, 4, 8, 16};

enum class TokenKind {
  pad,
  begin_seq,
  end_seq,
  separator_phrase,
  bar,
  mask_pitch,
  mask_duration,
  mask_bar,
  position,
  pitch,
  duration,
  corruption,
  key,
  time,
  phrase_length,
  cadence,
};

struct Token {
  TokenKind kind = TokenKind::pad;
  int a = 0;  // slot / semitone / tag / tonic / numerator / bucket / cadence
  int b = 0;  // mode / denominator

  static Token bar() { return {TokenKind::bar}; }
  static Token position(int slot) { return {TokenKind::position, slot}; }
  static Token pitch(int semitone) { return {TokenKind::pitch, semitone}; }
  static Token duration(int slot) { return {TokenKind::duration, slot}; }
  static Token mask_pitch() { return {TokenKind::mask_pitch}; }
  static Token mask_duration() { return {TokenKind::mask_duration}; }
  static Token mask_bar() { return {TokenKind::mask_bar}; }
  static Token corruption(CorruptionTag tag) { return {TokenKind::corruption, static_cast<int>(tag)}; }
  static Token key(const KeySignature& k) { return {TokenKind::key, k.tonic, static_cast<int>(k.mode)}; }
  static Token time(const TimeSignature& t) { return {TokenKind::time, t.numerator, t.denominator}; }
  static Token phrase_length(int bucket) { return {TokenKind::phrase_length, bucket}; }
  static Token cadence(CadenceClass c) { return {TokenKind::cadence, static_cast<int>(c)}; }
  static Token separator() { return {TokenKind::separator_phrase}; }
  static Token begin() { return {TokenKind::begin_seq}; }
  static Token end() { return {TokenKind::end_seq}; }

  bool operator==(const Token&) const = default;
};

std::string to_string(const Token& token);
Token parse_token(const std::string& text);

using TokenSequence = std::vector<Token>;

// Quarter-note length of duration slot i is (i + 1) / 12.
Rational duration_of_slot(int slot);
int positions_per_bar(const TimeSignature& time);
int length_bucket(std::size_t note_count);
// Inclusive note-count range of a bucket; the open last bucket reports 33..INT_MAX.
std::pair<int, int> bucket_range(int bucket);

class Vocabulary {
 public:
  static constexpr const char* kVersion = "remi-v1";

  // The fixed vocabulary every model in this project uses.
  static const Vocabulary& standard();

  int id(const Token& token) const;
  const Token& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& version() const { return version_; }

  std::vector<int> ids(std::span<const Token> tokens) const;
  TokenSequence tokens(std::span<const int> ids) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  Vocabulary(std::string version, std::vector<Token> tokens);

  std::string version_;
  std::vector<Token> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct EncodeResult {
  TokenSequence tokens;
  std::vector<std::string> warnings;  // grid snapping
};

// REMI events per bar: Bar, then Position / Pitch|MaskPitch / Duration|MaskDuration
// per note. A bar holding only a fully masked note at slot 0 encodes as Bar MaskBar.
// Throws DataError for an empty phrase.
EncodeResult encode_phrase_checked(const Phrase& phrase);
TokenSequence encode_phrase(const Phrase& phrase);

struct DecodeResult {
  Phrase phrase;
  std::size_t consumed = 0;     // tokens accepted before stopping
  bool truncated = false;       // an ill-formed fragment was dropped
  std::string report;
};

// Inverse of encode_phrase on its image. Stops at EndSeq/Pad; an ill-formed
// tail is dropped and reported. Throws DataError if no note decodes.
DecodeResult decode_phrase_checked(std::span<const Token> tokens, const KeySignature& key, const TimeSignature& time);
Phrase decode_phrase(std::span<const Token> tokens, const KeySignature& key, const TimeSignature& time);

struct ConditionalSpec {
  std::vector<CorruptionTag> corruptions;  // empty for the generator
  KeySignature key;
  TimeSignature time;
  int target_length = 1;
  CadenceClass cadence = CadenceClass::other;
};

// [Corruption*, Key, Time, PhraseLength(bucket), Cadence]
TokenSequence build_conditional_prefix(const ConditionalSpec& spec);
TokenSequence build_conditional_prefix(std::optional<CorruptionTag> corruption, const KeySignature& key,
                                       const TimeSignature& time, int target_length, CadenceClass cadence);

// Incremental validity checker for sampled phrase streams. Only concrete
// events are accepted: Bar, Position (nondecreasing within a bar), Pitch,
// Duration, and EndSeq once a note is complete. At most one empty bar in a row.
class RemiGrammar {
 public:
  explicit RemiGrammar(const TimeSignature& time);

  bool allows(const Token& token) const;
  void accept(const Token& token);
  bool finished() const { return finished_; }
  std::size_t notes() const { return notes_; }

 private:
  enum class State { start, after_bar, after_position, after_pitch, after_note };
  int slots_per_bar_;
  State state_ = State::start;
  int last_slot_ = 0;
  bool bar_has_note_ = false;
  int empty_bars_ = 0;
  std::size_t notes_ = 0;
  bool finished_ = false;
};

}  // namespace yinyang
