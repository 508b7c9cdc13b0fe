#include "yinyang/tokenizer.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <fstream>

#include "yinyang/corpus.hpp"
#include "yinyang/errors.hpp"

namespace yinyang {

using nlohmann::json;

std::string to_string(const Token& t) {
  switch (t.kind) {
    case TokenKind::pad: return "Pad";
    case TokenKind::begin_seq: return "BeginSeq";
    case TokenKind::end_seq: return "EndSeq";
    case TokenKind::separator_phrase: return "SeparatorPhrase";
    case TokenKind::bar: return "Bar";
    case TokenKind::mask_pitch: return "MaskPitch";
    case TokenKind::mask_duration: return "MaskDuration";
    case TokenKind::mask_bar: return "MaskBar";
    case TokenKind::position: return "Position_" + std::to_string(t.a);
    case TokenKind::pitch: return "Pitch_" + std::to_string(t.a);
    case TokenKind::duration: return "Duration_" + std::to_string(t.a);
    case TokenKind::corruption: return "Corruption_" + std::string(to_string(static_cast<CorruptionTag>(t.a)));
    case TokenKind::key: return "Key_" + std::to_string(t.a) + "_" + std::string(to_string(static_cast<Mode>(t.b)));
    case TokenKind::time: return "Time_" + std::to_string(t.a) + "_" + std::to_string(t.b);
    case TokenKind::phrase_length: return "PhraseLength_" + std::to_string(t.a);
    case TokenKind::cadence: return "Cadence_" + std::string(to_string(static_cast<CadenceClass>(t.a)));
  }
  return "Pad";
}

Token parse_token(const std::string& text) {
  static const std::unordered_map<std::string, Token> kByName = [] {
    std::unordered_map<std::string, Token> m;
    for (int i = 0; i < Vocabulary::standard().size(); ++i) {
      const Token& t = Vocabulary::standard().token(i);
      m.emplace(to_string(t), t);
    }
    return m;
  }();
  const auto it = kByName.find(text);
  if (it == kByName.end()) throw DataError("unknown token '" + text + "'");
  return it->second;
}

Rational duration_of_slot(int slot) { return Rational(slot + 1, kSlotsPerQuarter); }

int positions_per_bar(const TimeSignature& time) {
  const Rational slots = time.bar_length() * Rational(kSlotsPerQuarter);
  if (slots.denominator() != 1 || slots.numerator() > kMaxPositionSlots || slots.numerator() <= 0) {
    throw DataError("time signature " + std::to_string(time.numerator) + "/" + std::to_string(time.denominator) +
                    " does not fit the position grid");
  }
  return static_cast<int>(slots.numerator());
}

int length_bucket(std::size_t note_count) {
  if (note_count == 0) return 0;
  return std::min<int>(static_cast<int>((note_count - 1) / 2), kLengthBuckets - 1);
}

std::pair<int, int> bucket_range(int bucket) {
  if (bucket >= kLengthBuckets - 1) return {2 * (kLengthBuckets - 1) + 1, INT_MAX};
  return {2 * bucket + 1, 2 * bucket + 2};
}

Vocabulary::Vocabulary(std::string version, std::vector<Token> tokens)
    : version_(std::move(version)), tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto [it, inserted] = index_.emplace(yinyang::to_string(tokens_[i]), static_cast<int>(i));
    if (!inserted) throw DataError("duplicate vocabulary entry " + it->first);
  }
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab = [] {
    std::vector<Token> t;
    for (auto kind : {TokenKind::pad, TokenKind::begin_seq, TokenKind::end_seq, TokenKind::separator_phrase,
                      TokenKind::bar, TokenKind::mask_pitch, TokenKind::mask_duration, TokenKind::mask_bar}) {
      t.push_back({kind});
    }
    for (int i = 0; i < kMaxPositionSlots; ++i) t.push_back(Token::position(i));
    for (int i = 0; i < 128; ++i) t.push_back(Token::pitch(i));
    for (int i = 0; i < kDurationSlots; ++i) t.push_back(Token::duration(i));
    for (auto tag : all_corruption_tags()) t.push_back(Token::corruption(tag));
    for (int tonic = 0; tonic < 12; ++tonic) {
      for (auto mode : {Mode::major, Mode::minor}) t.push_back(Token::key({tonic, mode}));
    }
    for (int num = 1; num <= kMaxTimeNumerator; ++num) {
      for (int den : kTimeDenominators) t.push_back(Token::time({num, den}));
    }
    for (int b = 0; b < kLengthBuckets; ++b) t.push_back(Token::phrase_length(b));
    for (auto c : {CadenceClass::tonic_final, CadenceClass::dominant_final, CadenceClass::other}) {
      t.push_back(Token::cadence(c));
    }
    return Vocabulary(kVersion, std::move(t));
  }();
  return vocab;
}

int Vocabulary::id(const Token& token) const {
  const auto it = index_.find(yinyang::to_string(token));
  if (it == index_.end()) throw DataError("token " + yinyang::to_string(token) + " is not in the vocabulary");
  return it->second;
}

std::vector<int> Vocabulary::ids(std::span<const Token> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

TokenSequence Vocabulary::tokens(std::span<const int> ids) const {
  TokenSequence out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

json Vocabulary::to_json() const {
  json names = json::array();
  for (const auto& t : tokens_) names.push_back(yinyang::to_string(t));
  return json{{"format", "yinyang-vocabulary"}, {"version", version_}, {"tokens", std::move(names)}};
}

Vocabulary Vocabulary::from_json(const json& j) {
  std::vector<Token> tokens;
  for (const auto& name : j.at("tokens")) tokens.push_back(parse_token(name.get<std::string>()));
  return Vocabulary(j.at("version").get<std::string>(), std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

EncodeResult encode_phrase_checked(const Phrase& phrase) {
  if (phrase.notes.empty()) throw DataError("cannot encode an empty phrase");
  const Rational bar_len = phrase.time.bar_length();
  const int slots_per_bar = positions_per_bar(phrase.time);
  EncodeResult result;

  struct Placed {
    std::int64_t bar;
    int slot;
    const Note* note;
  };
  std::vector<Placed> placed;
  placed.reserve(phrase.notes.size());
  for (std::size_t i = 0; i < phrase.notes.size(); ++i) {
    const Note& n = phrase.notes[i];
    std::int64_t bar = floor_div(n.onset, bar_len).numerator();
    const Rational exact = (n.onset - Rational(bar) * bar_len) * Rational(kSlotsPerQuarter);
    int slot = static_cast<int>(std::lround(to_double(exact)));
    if (exact.denominator() != 1) {
      result.warnings.push_back("note " + std::to_string(i) + ": onset " + to_string(n.onset) +
                                " snapped to the position grid");
    }
    if (slot >= slots_per_bar) {
      slot -= slots_per_bar;
      ++bar;
    }
    placed.push_back({bar, slot, &n});
  }

  const auto duration_token = [&](std::size_t i, const Rational& d) {
    const Rational exact = d * Rational(kSlotsPerQuarter) - Rational(1);
    int slot = static_cast<int>(std::lround(to_double(exact)));
    if (exact.denominator() != 1 || slot < 0 || slot >= kDurationSlots) {
      slot = std::clamp(slot, 0, kDurationSlots - 1);
      result.warnings.push_back("note " + std::to_string(i) + ": duration " + to_string(d) +
                                " snapped to " + to_string(duration_of_slot(slot)));
    }
    return Token::duration(slot);
  };

  std::size_t k = 0;
  const std::int64_t last_bar = placed.back().bar;
  for (std::int64_t bar = 0; bar <= last_bar; ++bar) {
    result.tokens.push_back(Token::bar());
    std::size_t end = k;
    while (end < placed.size() && placed[end].bar == bar) ++end;
    if (end == k + 1 && placed[k].slot == 0 && !placed[k].note->pitch && !placed[k].note->duration) {
      result.tokens.push_back(Token::mask_bar());
      k = end;
      continue;
    }
    for (; k < end; ++k) {
      const Note& n = *placed[k].note;
      result.tokens.push_back(Token::position(placed[k].slot));
      result.tokens.push_back(n.pitch ? Token::pitch(*n.pitch) : Token::mask_pitch());
      result.tokens.push_back(n.duration ? duration_token(k, *n.duration) : Token::mask_duration());
    }
  }
  return result;
}

TokenSequence encode_phrase(const Phrase& phrase) { return encode_phrase_checked(phrase).tokens; }

DecodeResult decode_phrase_checked(std::span<const Token> tokens, const KeySignature& key, const TimeSignature& time) {
  DecodeResult result;
  result.phrase.key = key;
  result.phrase.time = time;
  const Rational bar_len = time.bar_length();
  const int slots_per_bar = positions_per_bar(time);

  enum class State { start, in_bar, bar_closed, after_position, after_pitch };
  State state = State::start;
  std::int64_t bar = -1;
  int last_slot = 0;
  Note pending;
  std::size_t complete = 0;  // tokens consumed up to the last complete event

  const auto fail = [&](std::size_t at, const std::string& why) {
    result.truncated = true;
    result.report = "ill-formed token " + std::to_string(at) + " (" + why + "); " +
                    std::to_string(tokens.size() - complete) + " trailing tokens dropped";
  };

  std::size_t i = 0;
  for (; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind == TokenKind::end_seq || t.kind == TokenKind::pad) {
      if (state == State::after_position || state == State::after_pitch) {
        fail(i, "incomplete note");
      } else {
        complete = i;
      }
      break;
    }
    bool ok = true;
    switch (state) {
      case State::start:
      case State::in_bar:
      case State::bar_closed:
        if (t.kind == TokenKind::bar) {
          ++bar;
          last_slot = 0;
          state = State::in_bar;
          complete = i + 1;
        } else if (t.kind == TokenKind::mask_bar && state == State::in_bar && last_slot == 0 &&
                   (result.phrase.notes.empty() || result.phrase.notes.back().onset < Rational(bar) * bar_len)) {
          result.phrase.notes.push_back(Note{std::nullopt, std::nullopt, Rational(bar) * bar_len});
          state = State::bar_closed;
          complete = i + 1;
        } else if (t.kind == TokenKind::position && state == State::in_bar && t.a < slots_per_bar &&
                   t.a >= last_slot) {
          last_slot = t.a;
          pending = Note{};
          pending.onset = Rational(bar) * bar_len + Rational(t.a, kSlotsPerQuarter);
          state = State::after_position;
        } else {
          ok = false;
        }
        break;
      case State::after_position:
        if (t.kind == TokenKind::pitch) pending.pitch = t.a;
        else if (t.kind != TokenKind::mask_pitch) ok = false;
        if (ok) state = State::after_pitch;
        break;
      case State::after_pitch:
        if (t.kind == TokenKind::duration) pending.duration = duration_of_slot(t.a);
        else if (t.kind != TokenKind::mask_duration) ok = false;
        if (ok) {
          result.phrase.notes.push_back(pending);
          state = State::in_bar;
          complete = i + 1;
        }
        break;
    }
    if (!ok) {
      fail(i, "unexpected " + to_string(t));
      break;
    }
  }
  if (i == tokens.size()) {
    if (state == State::after_position || state == State::after_pitch) fail(i, "stream ends inside a note");
    else complete = tokens.size();
  }
  result.consumed = complete;
  if (result.phrase.notes.empty()) {
    throw DataError("token stream decodes to no notes" + (result.report.empty() ? "" : ": " + result.report));
  }
  result.phrase.cadence = derive_cadence(result.phrase);
  return result;
}

Phrase decode_phrase(std::span<const Token> tokens, const KeySignature& key, const TimeSignature& time) {
  return decode_phrase_checked(tokens, key, time).phrase;
}

TokenSequence build_conditional_prefix(const ConditionalSpec& spec) {
  if (spec.target_length < 1) throw DataError("target length must be at least 1");
  TokenSequence out;
  for (auto tag : spec.corruptions) out.push_back(Token::corruption(tag));
  out.push_back(Token::key(spec.key));
  out.push_back(Token::time(spec.time));
  out.push_back(Token::phrase_length(length_bucket(static_cast<std::size_t>(spec.target_length))));
  out.push_back(Token::cadence(spec.cadence));
  return out;
}

TokenSequence build_conditional_prefix(std::optional<CorruptionTag> corruption, const KeySignature& key,
                                       const TimeSignature& time, int target_length, CadenceClass cadence) {
  ConditionalSpec spec{{}, key, time, target_length, cadence};
  if (corruption) spec.corruptions.push_back(*corruption);
  return build_conditional_prefix(spec);
}

RemiGrammar::RemiGrammar(const TimeSignature& time) : slots_per_bar_(positions_per_bar(time)) {}

bool RemiGrammar::allows(const Token& t) const {
  if (finished_) return false;
  switch (state_) {
    case State::start:
      return t.kind == TokenKind::bar;
    case State::after_bar:
    case State::after_note: {
      if (t.kind == TokenKind::bar) return bar_has_note_ || empty_bars_ < 1;
      if (t.kind == TokenKind::end_seq) return state_ == State::after_note;
      if (t.kind == TokenKind::position) {
        const int min_slot = bar_has_note_ ? last_slot_ + 1 : 0;
        return t.a >= min_slot && t.a < slots_per_bar_;
      }
      return false;
    }
    case State::after_position:
      return t.kind == TokenKind::pitch;
    case State::after_pitch:
      return t.kind == TokenKind::duration;
  }
  return false;
}

void RemiGrammar::accept(const Token& t) {
  if (!allows(t)) throw DataError("grammar violation at " + to_string(t));
  switch (t.kind) {
    case TokenKind::bar:
      if (state_ != State::start && !bar_has_note_) ++empty_bars_;
      bar_has_note_ = false;
      last_slot_ = 0;
      state_ = State::after_bar;
      break;
    case TokenKind::end_seq:
      finished_ = true;
      break;
    case TokenKind::position:
      last_slot_ = t.a;
      state_ = State::after_position;
      break;
    case TokenKind::pitch:
      state_ = State::after_pitch;
      break;
    case TokenKind::duration:
      ++notes_;
      bar_has_note_ = true;
      empty_bars_ = 0;
      state_ = State::after_note;
      break;
    default:
      break;
  }
}

}  // namespace yinyang
