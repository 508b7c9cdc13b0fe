#include "yinyang/transforms.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "yinyang/errors.hpp"
#include "yinyang/random.hpp"

namespace yinyang {

namespace {

constexpr std::array<std::string_view, kCorruptionTagCount> kCorruptionNames{
    "fragmentation",       "permute_pitch",     "permute_duration", "permute_pitch_duration",
    "incorrect_inversion", "melodic_stripping", "melodic_addition", "pitch_masking",
    "duration_masking",    "bar_masking",       "same_note_modification"};

constexpr std::array<std::string_view, kTransformationKindCount> kKindNames{
    "fragmentation",    "permute_pitch",   "permute_duration",          "permute_pitch_duration",
    "chromatic_inversion", "tonal_inversion", "retrograde_pitch",       "retrograde_pitch_duration",
    "augmentation",     "diminution",      "reduction",                 "pitch_masking",
    "duration_masking", "bar_masking"};

std::string snake(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

Rng rng_for(std::uint64_t seed) { return Rng(mix_seed(seed)); }

std::int64_t bar_of(const Note& n, const Rational& bar_len) { return floor_div(n.onset, bar_len).numerator(); }

int fold_into_range(int pitch) {
  while (pitch < 0) pitch += 12;
  while (pitch > 127) pitch -= 12;
  return pitch;
}

bool splittable(const Note& n) {
  if (!n.is_concrete()) return false;
  const Rational half = *n.duration / Rational(2);
  return (half / kGridUnit).denominator() == 1;
}

void require_concrete(const Phrase& phrase) {
  if (phrase.notes.empty()) throw DataError("cannot transform an empty phrase");
  if (!phrase.is_concrete()) throw DataError("cannot transform a phrase with masked values");
}

Phrase shift_to_first_bar(Phrase p) {
  if (p.notes.empty()) return p;
  const Rational bar_len = p.time.bar_length();
  const Rational shift = floor_div(p.notes.front().onset, bar_len) * bar_len;
  for (auto& n : p.notes) n.onset -= shift;
  return p;
}

Phrase permute_pitches(const Phrase& phrase, Rng& rng) {
  Phrase out = phrase;
  std::vector<std::optional<int>> pitches;
  for (const auto& n : phrase.notes) pitches.push_back(n.pitch);
  shuffle_in_place(std::span(pitches), rng);
  for (std::size_t i = 0; i < out.notes.size(); ++i) out.notes[i].pitch = pitches[i];
  return out;
}

Phrase permute_durations(const Phrase& phrase, Rng& rng) {
  Phrase out = phrase;
  const auto gaps = gaps_after(phrase.notes);
  std::vector<std::optional<Rational>> durations;
  for (const auto& n : phrase.notes) durations.push_back(n.duration);
  shuffle_in_place(std::span(durations), rng);
  for (std::size_t i = 0; i < out.notes.size(); ++i) out.notes[i].duration = durations[i];
  relayout(out.notes, gaps, phrase.notes.front().onset);
  return out;
}

Phrase permute_notes(const Phrase& phrase, Rng& rng) {
  Phrase out = phrase;
  const auto gaps = gaps_after(phrase.notes);
  shuffle_in_place(std::span(out.notes), rng);
  relayout(out.notes, gaps, phrase.notes.front().onset);
  return out;
}

Phrase incorrect_inversion(const Phrase& phrase, Rng& rng) {
  Phrase out = phrase;
  for (auto& n : out.notes) {
    const int offset = uniform_int(rng, -4, 4);
    if (n.pitch) n.pitch = std::clamp(*n.pitch + offset, 0, 127);
  }
  return out;
}

Phrase melodic_stripping(const Phrase& phrase, Rng& rng) {
  Phrase out = phrase;
  out.notes.clear();
  for (const auto& n : phrase.notes) {
    if (!bernoulli(rng, 0.5)) out.notes.push_back(n);
  }
  if (out.notes.empty()) {
    out.notes.push_back(phrase.notes[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(phrase.notes.size()) - 1))]);
  }
  return out;
}

int in_key_neighbor(int pitch, const KeySignature& key, Rng& rng) {
  std::vector<int> choices;
  for (int p = std::max(0, pitch - 7); p <= std::min(127, pitch + 7); ++p) {
    if (in_key(p, key)) choices.push_back(p);
  }
  return pick(std::span<const int>(choices), rng);
}

Note first_half(Note n) {
  n.duration = *n.duration / Rational(2);
  return n;
}

Phrase melodic_addition(const Phrase& phrase, Rng& rng) {
  Phrase out = phrase;
  out.notes.clear();
  for (const auto& n : phrase.notes) {
    const bool add = bernoulli(rng, 0.5);
    if (!add || !splittable(n)) {
      out.notes.push_back(n);
      continue;
    }
    const Note head = first_half(n);
    Note added = head;
    added.onset = n.onset + *head.duration;
    added.pitch = in_key_neighbor(*n.pitch, phrase.key, rng);
    out.notes.push_back(head);
    out.notes.push_back(added);
  }
  return out;
}

std::optional<Phrase> same_note_removal(const Phrase& phrase, Rng& rng) {
  std::vector<std::size_t> candidates;
  const auto& notes = phrase.notes;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    if (!notes[i].pitch || !notes[i].duration) continue;
    const bool prev = i > 0 && notes[i - 1].pitch == notes[i].pitch && notes[i - 1].duration;
    const bool next = i + 1 < notes.size() && notes[i + 1].pitch == notes[i].pitch && notes[i + 1].duration;
    if (prev || next) candidates.push_back(i);
  }
  if (candidates.empty()) return std::nullopt;
  const std::size_t i = pick(std::span<const std::size_t>(candidates), rng);
  Phrase out = phrase;
  const Rational end = notes[i].onset + *notes[i].duration;
  if (i > 0 && notes[i - 1].pitch == notes[i].pitch && notes[i - 1].duration) {
    auto& prev = out.notes[i - 1];
    prev.duration = std::max(*prev.duration, end - prev.onset);
  } else {
    auto& next = out.notes[i + 1];
    next.duration = next.onset + *next.duration - notes[i].onset;
    next.onset = notes[i].onset;
  }
  out.notes.erase(out.notes.begin() + static_cast<std::ptrdiff_t>(i));
  return out;
}

std::optional<Phrase> same_note_addition(const Phrase& phrase, Rng& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < phrase.notes.size(); ++i) {
    if (splittable(phrase.notes[i])) candidates.push_back(i);
  }
  if (candidates.empty()) return std::nullopt;
  const std::size_t i = pick(std::span<const std::size_t>(candidates), rng);
  Phrase out = phrase;
  const Note head = first_half(phrase.notes[i]);
  Note tail = head;
  tail.onset = head.onset + *head.duration;
  out.notes[i] = head;
  out.notes.insert(out.notes.begin() + static_cast<std::ptrdiff_t>(i) + 1, tail);
  return out;
}

Phrase same_note_modification(const Phrase& phrase, Rng& rng) {
  const bool remove = bernoulli(rng, 0.5);
  if (remove) {
    if (auto r = same_note_removal(phrase, rng)) return *r;
    if (auto a = same_note_addition(phrase, rng)) return *a;
  } else {
    if (auto a = same_note_addition(phrase, rng)) return *a;
    if (auto r = same_note_removal(phrase, rng)) return *r;
  }
  return phrase;
}

Phrase mask_pitches(const Phrase& phrase) {
  Phrase out = phrase;
  for (auto& n : out.notes) n.pitch.reset();
  return out;
}

Phrase mask_durations(const Phrase& phrase) {
  Phrase out = phrase;
  for (auto& n : out.notes) n.duration.reset();
  return out;
}

Phrase mask_bar(const Phrase& phrase, Rng& rng) {
  const Rational bar_len = phrase.time.bar_length();
  std::vector<std::int64_t> bars;
  for (const auto& n : phrase.notes) {
    const auto b = bar_of(n, bar_len);
    if (bars.empty() || bars.back() != b) bars.push_back(b);
  }
  const std::int64_t bar = pick(std::span<const std::int64_t>(bars), rng);
  Phrase out = phrase;
  out.notes.clear();
  bool inserted = false;
  for (const auto& n : phrase.notes) {
    if (bar_of(n, bar_len) != bar) {
      out.notes.push_back(n);
    } else if (!inserted) {
      out.notes.push_back(Note{std::nullopt, std::nullopt, Rational(bar) * bar_len});
      inserted = true;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(CorruptionTag tag) { return kCorruptionNames[static_cast<std::size_t>(tag)]; }
std::string_view to_string(TransformationKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }
std::string_view to_string(Similarity similarity) { return similarity == Similarity::high ? "high" : "low"; }

CorruptionTag parse_corruption_tag(std::string_view text) {
  const std::string s = snake(text);
  for (std::size_t i = 0; i < kCorruptionNames.size(); ++i) {
    if (kCorruptionNames[i] == s) return static_cast<CorruptionTag>(i);
  }
  throw DataError("unknown corruption '" + std::string(text) + "'");
}

TransformationKind parse_transformation_kind(std::string_view text) {
  std::string s = snake(text);
  if (s == "real_inversion") s = "chromatic_inversion";
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == s) return static_cast<TransformationKind>(i);
  }
  throw DataError("unknown transformation '" + std::string(text) + "'");
}

const PairingTable& pairing_table() {
  using C = CorruptionTag;
  using T = TransformationKind;
  static const PairingTable table{
      // high similarity
      {T::fragmentation, {C::fragmentation}},
      {T::permute_duration, {C::permute_duration}},
      {T::augmentation, {C::melodic_stripping}},
      {T::diminution, {C::melodic_addition, C::same_note_modification}},
      {T::reduction, {C::melodic_addition, C::same_note_modification}},
      {T::duration_masking, {C::duration_masking}},
      {T::bar_masking, {C::bar_masking}},
      // low similarity
      {T::permute_pitch, {C::permute_pitch}},
      {T::permute_pitch_duration, {C::permute_pitch_duration}},
      {T::chromatic_inversion, {C::incorrect_inversion}},
      {T::tonal_inversion, {C::incorrect_inversion}},
      {T::retrograde_pitch, {C::incorrect_inversion}},
      {T::retrograde_pitch_duration, {C::incorrect_inversion, C::permute_pitch_duration}},
      {T::pitch_masking, {C::pitch_masking}},
  };
  return table;
}

Similarity similarity_of(TransformationKind kind) {
  switch (kind) {
    case TransformationKind::fragmentation:
    case TransformationKind::permute_duration:
    case TransformationKind::augmentation:
    case TransformationKind::diminution:
    case TransformationKind::reduction:
    case TransformationKind::duration_masking:
    case TransformationKind::bar_masking:
      return Similarity::high;
    default:
      return Similarity::low;
  }
}

std::vector<TransformationKind> kinds_with_similarity(Similarity similarity) {
  std::vector<TransformationKind> out;
  for (auto k : all_transformation_kinds()) {
    if (similarity_of(k) == similarity) out.push_back(k);
  }
  return out;
}

bool is_masking(CorruptionTag tag) {
  return tag == CorruptionTag::pitch_masking || tag == CorruptionTag::duration_masking ||
         tag == CorruptionTag::bar_masking;
}

Phrase fragment(const Phrase& phrase, std::uint64_t seed) {
  if (phrase.notes.size() <= 1) return phrase;
  Rng rng = rng_for(seed);
  const Rational bar_len = phrase.time.bar_length();
  const std::size_t n = phrase.notes.size();
  const bool multi_bar = bar_of(phrase.notes.front(), bar_len) != bar_of(phrase.notes.back(), bar_len);
  const bool take_bar = bernoulli(rng, 0.5);
  Phrase out = phrase;
  if (multi_bar && take_bar) {
    std::vector<std::int64_t> bars;
    for (const auto& note : phrase.notes) {
      const auto b = bar_of(note, bar_len);
      if (bars.empty() || bars.back() != b) bars.push_back(b);
    }
    const std::int64_t bar = pick(std::span<const std::int64_t>(bars), rng);
    out.notes.clear();
    for (const auto& note : phrase.notes) {
      if (bar_of(note, bar_len) == bar) out.notes.push_back(note);
    }
  } else {
    const int max_len = static_cast<int>(n) - 1;
    const int length = uniform_int(rng, std::min(2, max_len), max_len);
    const int start = uniform_int(rng, 0, static_cast<int>(n) - length);
    out.notes.assign(phrase.notes.begin() + start, phrase.notes.begin() + start + length);
  }
  return shift_to_first_bar(std::move(out));
}

Phrase corrupt(const Phrase& phrase, CorruptionTag tag, std::uint64_t seed) {
  if (phrase.notes.empty()) throw DataError("cannot corrupt an empty phrase");
  Rng rng = rng_for(seed);
  Phrase out;
  switch (tag) {
    case CorruptionTag::fragmentation: out = fragment(phrase, seed); break;
    case CorruptionTag::permute_pitch: out = permute_pitches(phrase, rng); break;
    case CorruptionTag::permute_duration: out = permute_durations(phrase, rng); break;
    case CorruptionTag::permute_pitch_duration: out = permute_notes(phrase, rng); break;
    case CorruptionTag::incorrect_inversion: out = incorrect_inversion(phrase, rng); break;
    case CorruptionTag::melodic_stripping: out = melodic_stripping(phrase, rng); break;
    case CorruptionTag::melodic_addition: out = melodic_addition(phrase, rng); break;
    case CorruptionTag::pitch_masking: out = mask_pitches(phrase); break;
    case CorruptionTag::duration_masking: out = mask_durations(phrase); break;
    case CorruptionTag::bar_masking: out = mask_bar(phrase, rng); break;
    case CorruptionTag::same_note_modification: out = same_note_modification(phrase, rng); break;
  }
  out.cadence = derive_cadence(out);
  return out;
}

Phrase corrupt(const Phrase& phrase, std::span<const CorruptionTag> tags, std::uint64_t seed) {
  Phrase out = phrase;
  for (std::size_t i = 0; i < tags.size(); ++i) out = corrupt(out, tags[i], derive_seed(seed, i));
  return out;
}

Phrase chromatic_inversion(const Phrase& phrase) {
  require_concrete(phrase);
  Phrase out = phrase;
  const int axis = *phrase.notes.front().pitch;
  for (auto& n : out.notes) n.pitch = fold_into_range(2 * axis - *n.pitch);
  return out;
}

Phrase tonal_inversion(const Phrase& phrase, const KeySignature& key) {
  require_concrete(phrase);
  static constexpr std::array<int, 7> kMajor{0, 2, 4, 5, 7, 9, 11};
  static constexpr std::array<int, 7> kMinor{0, 2, 3, 5, 7, 8, 10};
  const auto& steps = key.mode == Mode::major ? kMajor : kMinor;

  const auto diatonic_index = [&](int pitch) {
    if (!in_key(pitch, key)) --pitch;  // off-scale tones sit a semitone from a scale tone; ties go down
    if (!in_key(pitch, key)) pitch += 2;
    const int rel = pitch - key.tonic;
    const int octave = rel >= 0 ? rel / 12 : -((-rel + 11) / 12);
    const int within = rel - 12 * octave;
    const auto deg = std::find(steps.begin(), steps.end(), within) - steps.begin();
    return octave * 7 + static_cast<int>(deg);
  };
  const auto pitch_of = [&](int index) {
    const int octave = index >= 0 ? index / 7 : -((-index + 6) / 7);
    const int deg = index - 7 * octave;
    return key.tonic + 12 * octave + steps[static_cast<std::size_t>(deg)];
  };

  Phrase out = phrase;
  const int axis = diatonic_index(*phrase.notes.front().pitch);
  for (auto& n : out.notes) n.pitch = fold_into_range(pitch_of(2 * axis - diatonic_index(*n.pitch)));
  return out;
}

Phrase retrograde_pitch(const Phrase& phrase) {
  require_concrete(phrase);
  Phrase out = phrase;
  const std::size_t n = phrase.notes.size();
  for (std::size_t i = 0; i < n; ++i) out.notes[i].pitch = phrase.notes[n - 1 - i].pitch;
  return out;
}

Phrase retrograde_pitch_duration(const Phrase& phrase) {
  require_concrete(phrase);
  Phrase out = phrase;
  std::reverse(out.notes.begin(), out.notes.end());
  auto gaps = gaps_after(phrase.notes);
  // Rests keep their place between the same two notes.
  if (gaps.size() > 1) std::reverse(gaps.begin(), gaps.end() - 1);
  relayout(out.notes, gaps, phrase.notes.front().onset);
  return out;
}

Phrase scale_durations(const Phrase& phrase, const Rational& factor) {
  require_concrete(phrase);
  Phrase out = phrase;
  for (auto& n : out.notes) {
    n.onset *= factor;
    *n.duration *= factor;
  }
  return out;
}

Phrase reduction(const Phrase& phrase) {
  require_concrete(phrase);
  Phrase out = phrase;
  out.notes.clear();
  for (std::size_t i = 0; i < phrase.notes.size();) {
    std::size_t j = i;
    while (j + 1 < phrase.notes.size() && phrase.notes[j + 1].pitch == phrase.notes[i].pitch) ++j;
    Note survivor = phrase.notes[j];
    const Rational end = survivor.onset + *survivor.duration;
    survivor.onset = phrase.notes[i].onset;
    survivor.duration = end - survivor.onset;
    out.notes.push_back(survivor);
    i = j + 1;
  }
  return out;
}

Phrase transform(const Phrase& phrase, TransformationKind kind, std::uint64_t seed, const KeySignature& key) {
  require_concrete(phrase);
  Phrase out;
  switch (kind) {
    case TransformationKind::fragmentation: out = corrupt(phrase, CorruptionTag::fragmentation, seed); break;
    case TransformationKind::permute_pitch: out = corrupt(phrase, CorruptionTag::permute_pitch, seed); break;
    case TransformationKind::permute_duration: out = corrupt(phrase, CorruptionTag::permute_duration, seed); break;
    case TransformationKind::permute_pitch_duration:
      out = corrupt(phrase, CorruptionTag::permute_pitch_duration, seed);
      break;
    case TransformationKind::chromatic_inversion: out = chromatic_inversion(phrase); break;
    case TransformationKind::tonal_inversion: out = tonal_inversion(phrase, key); break;
    case TransformationKind::retrograde_pitch: out = retrograde_pitch(phrase); break;
    case TransformationKind::retrograde_pitch_duration: out = retrograde_pitch_duration(phrase); break;
    case TransformationKind::augmentation: out = scale_durations(phrase, Rational(2)); break;
    case TransformationKind::diminution: out = scale_durations(phrase, Rational(1, 2)); break;
    case TransformationKind::reduction: out = reduction(phrase); break;
    case TransformationKind::pitch_masking: out = corrupt(phrase, CorruptionTag::pitch_masking, seed); break;
    case TransformationKind::duration_masking: out = corrupt(phrase, CorruptionTag::duration_masking, seed); break;
    case TransformationKind::bar_masking: out = corrupt(phrase, CorruptionTag::bar_masking, seed); break;
  }
  out.cadence = derive_cadence(out);
  return out;
}

CorruptionTag pick_corruption_tag(TransformationKind kind, std::uint64_t seed) {
  const auto& options = pairing_table().at(kind);
  Rng rng = rng_for(seed);
  return pick(std::span<const CorruptionTag>(options), rng);
}

std::vector<CorruptionTag> sample_training_corruption(std::uint64_t seed) {
  using C = CorruptionTag;
  static constexpr std::array<C, 3> kMasking{C::pitch_masking, C::duration_masking, C::bar_masking};
  static constexpr std::array<C, 7> kOther{C::permute_pitch,       C::permute_duration,  C::permute_pitch_duration,
                                           C::incorrect_inversion, C::melodic_stripping, C::melodic_addition,
                                           C::same_note_modification};
  Rng rng = rng_for(seed);
  if (bernoulli(rng, 0.2)) return {pick(std::span<const C>(kMasking), rng)};
  const bool with_fragment = bernoulli(rng, 0.2);
  const C other = pick(std::span<const C>(kOther), rng);
  if (with_fragment) return {C::fragmentation, other};
  return {other};
}

}  // namespace yinyang
