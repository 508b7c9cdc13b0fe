#include "yinyang/score.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "yinyang/errors.hpp"

namespace yinyang {

std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

Rational parse_rational(const std::string& text) {
  if (text.empty()) throw DataError("empty rational");
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      std::size_t used = 0;
      const std::int64_t num = std::stoll(text.substr(0, slash), &used);
      if (used != slash) throw DataError("bad rational '" + text + "'");
      const std::string den_text = text.substr(slash + 1);
      const std::int64_t den = std::stoll(den_text, &used);
      if (used != den_text.size() || den == 0) throw DataError("bad rational '" + text + "'");
      return Rational(num, den);
    }
    if (text.find_first_of(".eE") != std::string::npos) {
      std::size_t used = 0;
      const double value = std::stod(text, &used);
      if (used != text.size()) throw DataError("bad rational '" + text + "'");
      return rational_from_double(value);
    }
    std::size_t used = 0;
    const std::int64_t n = std::stoll(text, &used);
    if (used != text.size()) throw DataError("bad rational '" + text + "'");
    return Rational(n);
  } catch (const std::logic_error&) {
    throw DataError("bad rational '" + text + "'");
  }
}

Rational rational_from_double(double value, std::int64_t max_denominator) {
  if (!std::isfinite(value)) throw DataError("non-finite duration");
  const bool negative = value < 0;
  double x = std::abs(value);
  // Convergents h/k of the continued fraction expansion.
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  for (int iter = 0; iter < 64; ++iter) {
    const double a_real = std::floor(x);
    const auto a = static_cast<std::int64_t>(a_real);
    const std::int64_t h2 = a * h1 + h0;
    const std::int64_t k2 = a * k1 + k0;
    if (k2 > max_denominator) break;
    h0 = h1; h1 = h2; k0 = k1; k1 = k2;
    const double frac = x - a_real;
    if (frac < 1e-9) break;
    x = 1.0 / frac;
  }
  if (k1 == 0) return Rational(0);
  return Rational(negative ? -h1 : h1, k1);
}

bool Phrase::is_concrete() const {
  return std::all_of(notes.begin(), notes.end(), [](const Note& n) { return n.is_concrete(); });
}

Rational Phrase::end() const {
  Rational last{0};
  for (const auto& n : notes) last = std::max(last, n.onset + n.duration.value_or(Rational(0)));
  return last;
}

std::vector<int> Phrase::pitches() const {
  std::vector<int> out;
  out.reserve(notes.size());
  for (const auto& n : notes) {
    if (!n.pitch) throw DataError("phrase has masked pitches");
    out.push_back(*n.pitch);
  }
  return out;
}

std::vector<Rational> Phrase::durations() const {
  std::vector<Rational> out;
  out.reserve(notes.size());
  for (const auto& n : notes) {
    if (!n.duration) throw DataError("phrase has masked durations");
    out.push_back(*n.duration);
  }
  return out;
}

std::size_t Song::note_count() const {
  std::size_t total = 0;
  for (const auto& p : phrases) total += p.notes.size();
  return total;
}

void validate(const Phrase& phrase) {
  if (phrase.notes.empty()) throw DataError("phrase has no notes");
  if (phrase.key.tonic < 0 || phrase.key.tonic > 11) throw DataError("key tonic outside 0-11");
  if (phrase.time.numerator <= 0 || phrase.time.denominator <= 0 ||
      (phrase.time.denominator & (phrase.time.denominator - 1)) != 0) {
    throw DataError("invalid time signature");
  }
  Rational previous{0};
  for (std::size_t i = 0; i < phrase.notes.size(); ++i) {
    const auto& n = phrase.notes[i];
    if (n.pitch && (*n.pitch < 0 || *n.pitch > 127)) {
      throw DataError("note " + std::to_string(i) + ": pitch outside 0-127");
    }
    if (n.duration && *n.duration <= 0) {
      throw DataError("note " + std::to_string(i) + ": nonpositive duration");
    }
    if (n.onset < 0) throw DataError("note " + std::to_string(i) + ": negative onset");
    if (n.onset < previous) throw DataError("note " + std::to_string(i) + ": onsets decrease");
    previous = n.onset;
  }
}

CadenceClass derive_cadence(const Phrase& phrase) {
  if (phrase.notes.empty() || !phrase.notes.back().pitch) return CadenceClass::other;
  const int pc = *phrase.notes.back().pitch % 12;
  if (pc == phrase.key.tonic) return CadenceClass::tonic_final;
  if (pc == (phrase.key.tonic + 7) % 12) return CadenceClass::dominant_final;
  return CadenceClass::other;
}

TransposeResult transpose_checked(const Phrase& phrase, int semitones) {
  int lo = 127, hi = 0;
  bool any = false;
  for (const auto& n : phrase.notes) {
    if (!n.pitch) continue;
    lo = std::min(lo, *n.pitch);
    hi = std::max(hi, *n.pitch);
    any = true;
  }
  TransposeResult result{phrase, semitones, false, false};
  const auto fits = [&](int shift) { return !any || (lo + shift >= 0 && hi + shift <= 127); };
  if (!fits(semitones)) {
    result.clamped = true;
    // Candidate shifts semitones + 12k ordered by |k|, preferring the
    // direction back toward zero on ties.
    std::optional<int> best;
    for (int k = 1; k <= 11 && !best; ++k) {
      const int toward = semitones > 0 ? semitones - 12 * k : semitones + 12 * k;
      const int away = semitones > 0 ? semitones + 12 * k : semitones - 12 * k;
      if (fits(toward)) best = toward;
      else if (fits(away)) best = away;
    }
    if (!best) {
      result.applied = 0;
      result.unchanged = true;
      return result;
    }
    result.applied = *best;
  }
  for (auto& n : result.phrase.notes) {
    if (n.pitch) *n.pitch += result.applied;
  }
  result.phrase.key.tonic = ((phrase.key.tonic + result.applied) % 12 + 12) % 12;
  return result;
}

Phrase transpose(const Phrase& phrase, int semitones) { return transpose_checked(phrase, semitones).phrase; }

Song transpose(const Song& song, int semitones) {
  Song out = song;
  for (auto& p : out.phrases) p = transpose(p, semitones);
  return out;
}

std::array<int, 7> scale_pitch_classes(const KeySignature& key) {
  static constexpr std::array<int, 7> kMajor{0, 2, 4, 5, 7, 9, 11};
  static constexpr std::array<int, 7> kMinor{0, 2, 3, 5, 7, 8, 10};
  const auto& steps = key.mode == Mode::major ? kMajor : kMinor;
  std::array<int, 7> out{};
  for (std::size_t i = 0; i < 7; ++i) out[i] = (key.tonic + steps[i]) % 12;
  return out;
}

bool in_key(int pitch, const KeySignature& key) {
  const auto pcs = scale_pitch_classes(key);
  return std::find(pcs.begin(), pcs.end(), ((pitch % 12) + 12) % 12) != pcs.end();
}

std::vector<Rational> gaps_after(const std::vector<Note>& notes) {
  std::vector<Rational> gaps(notes.size(), Rational(0));
  for (std::size_t i = 0; i + 1 < notes.size(); ++i) {
    const Rational dur = notes[i].duration.value_or(Rational(0));
    gaps[i] = std::max(Rational(0), notes[i + 1].onset - notes[i].onset - dur);
  }
  return gaps;
}

void relayout(std::vector<Note>& notes, const std::vector<Rational>& gaps, const Rational& first_onset) {
  Rational t = first_onset;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    notes[i].onset = t;
    t += notes[i].duration.value_or(Rational(0)) + (i < gaps.size() ? gaps[i] : Rational(0));
  }
}

std::string_view to_string(Mode mode) { return mode == Mode::major ? "major" : "minor"; }

std::string_view to_string(CadenceClass cadence) {
  switch (cadence) {
    case CadenceClass::tonic_final: return "tonic_final";
    case CadenceClass::dominant_final: return "dominant_final";
    case CadenceClass::other: return "other";
  }
  return "other";
}

std::string_view to_string(SongSource source) {
  switch (source) {
    case SongSource::mtc_fs: return "MTC-FS";
    case SongSource::mtc_ann: return "MTC-ANN";
    case SongSource::essen: return "ESSEN";
    case SongSource::synthetic: return "synthetic";
  }
  return "synthetic";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

Mode parse_mode(std::string_view text) {
  const std::string m = lower(text);
  // Church modes map by the quality of their third degree.
  if (m == "major" || m == "ionian" || m == "lydian" || m == "mixolydian" || m == "maj") return Mode::major;
  if (m == "minor" || m == "aeolian" || m == "dorian" || m == "phrygian" || m == "locrian" || m == "min") {
    return Mode::minor;
  }
  throw DataError("unknown mode '" + std::string(text) + "'");
}

CadenceClass parse_cadence(std::string_view text) {
  if (text == "tonic_final") return CadenceClass::tonic_final;
  if (text == "dominant_final") return CadenceClass::dominant_final;
  if (text == "other") return CadenceClass::other;
  throw DataError("unknown cadence '" + std::string(text) + "'");
}

SongSource parse_song_source(std::string_view text) {
  const std::string s = lower(text);
  if (s == "mtc-fs") return SongSource::mtc_fs;
  if (s == "mtc-ann") return SongSource::mtc_ann;
  if (s == "essen") return SongSource::essen;
  if (s == "synthetic") return SongSource::synthetic;
  throw DataError("unknown song source '" + std::string(text) + "'");
}

int parse_pitch_class(std::string_view name) {
  if (name.empty()) throw DataError("empty pitch name");
  static constexpr std::array<int, 7> kLetters{9, 11, 0, 2, 4, 5, 7};  // A..G
  const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  if (letter < 'A' || letter > 'G') throw DataError("bad pitch name '" + std::string(name) + "'");
  int pc = kLetters[static_cast<std::size_t>(letter - 'A')];
  for (std::size_t i = 1; i < name.size(); ++i) {
    // '-' is the music21 flat spelling used in MTC feature files.
    if (name[i] == '#' || name[i] == 's') ++pc;
    else if (name[i] == 'b' || name[i] == '-') --pc;
    else throw DataError("bad pitch name '" + std::string(name) + "'");
  }
  return ((pc % 12) + 12) % 12;
}

std::string key_name(const KeySignature& key) {
  static constexpr std::array<const char*, 12> kNames{"C", "C#", "D", "Eb", "E", "F",
                                                      "F#", "G", "Ab", "A", "Bb", "B"};
  return std::string(kNames[static_cast<std::size_t>(key.tonic)]) + " " + std::string(to_string(key.mode));
}

}  // namespace yinyang
