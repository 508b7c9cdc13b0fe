#include "yinyang/orchestrator.hpp"

#include <algorithm>
#include <cmath>

#include "yinyang/neural/data.hpp"
#include "yinyang/random.hpp"
#include "yinyang/transforms.hpp"

namespace yinyang {

char slot_letter(SlotLabel label) {
  switch (label) {
    case SlotLabel::motif: return 'M';
    case SlotLabel::generator: return 'G';
    case SlotLabel::refiner: return 'R';
    case SlotLabel::section_seed: return 'S';
  }
  return '?';
}

std::vector<SlotLabel> schedule_section(int phrase_count, GrRatio ratio, bool is_first_section) {
  if (phrase_count < 1) throw DataError("a section needs at least one phrase");
  if (ratio.generator < 0 || ratio.refiner < 0 || ratio.generator + ratio.refiner == 0) {
    throw DataError("G:R ratio components must be nonnegative and not both zero");
  }
  std::vector<SlotLabel> slots{is_first_section ? SlotLabel::motif : SlotLabel::section_seed};
  const int cycle = ratio.generator + ratio.refiner;
  for (int i = 0; static_cast<int>(slots.size()) < phrase_count; ++i) {
    slots.push_back(i % cycle < ratio.generator ? SlotLabel::generator : SlotLabel::refiner);
  }
  return slots;
}

Phrase last_bars(const Phrase& phrase, int bars) {
  if (phrase.notes.empty()) throw DataError("cannot take bars of an empty phrase");
  if (bars < 1) throw DataError("bar count must be positive");
  const Rational bar_len = phrase.time.bar_length();
  const Rational last = floor_div(phrase.notes.back().onset, bar_len);
  const Rational first = std::max(Rational(0), last - Rational(bars - 1));
  Phrase out = phrase;
  out.notes.clear();
  for (const auto& n : phrase.notes) {
    if (floor_div(n.onset, bar_len) >= first) {
      Note moved = n;
      moved.onset -= first * bar_len;
      out.notes.push_back(moved);
    }
  }
  out.cadence = derive_cadence(out);
  return out;
}

// ---- models ----------------------------------------------------------------

namespace {

Eigen::VectorXd pitch_class_profile(const Phrase& a, const Phrase& b) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(24);
  for (const auto& n : a.notes) {
    if (n.pitch) v(*n.pitch % 12) += 1.0;
  }
  for (const auto& n : b.notes) {
    if (n.pitch) v(12 + *n.pitch % 12) += 1.0;
  }
  return v;
}

// Masked fields get neutral values so a stub can pass masked sources on.
Phrase fill_masked(Phrase p) {
  int last_pitch = 60;
  for (const auto& n : p.notes) {
    if (n.pitch) {
      last_pitch = *n.pitch;
      break;
    }
  }
  for (std::size_t i = 0; i < p.notes.size(); ++i) {
    auto& n = p.notes[i];
    if (!n.pitch) n.pitch = last_pitch;
    last_pitch = *n.pitch;
    if (!n.duration) {
      const Rational next = i + 1 < p.notes.size() ? p.notes[i + 1].onset : n.onset + p.time.bar_length();
      n.duration = next > n.onset ? next - n.onset : Rational(1);
    }
  }
  return p;
}

}  // namespace

Phrase EchoGenerator::propose(const PhraseRequest& request, const neural::SamplingParams&) const {
  if (request.context.empty()) throw ModelError("echo generator needs a context phrase");
  Phrase out = request.context.back();
  out.key = request.conditional.key;
  return out;
}

Phrase IdentityRefiner::propose(const PhraseRequest& request, const neural::SamplingParams&) const {
  if (!request.source) throw ModelError("identity refiner needs a source phrase");
  Phrase out = fill_masked(*request.source);
  out.key = request.conditional.key;
  out.cadence = derive_cadence(out);
  return out;
}

Eigen::VectorXd ConstantScorer::embed(const Phrase& a, const Phrase& b) const { return pitch_class_profile(a, b); }

double PitchClassScorer::score(const Phrase& a, const Phrase& b) const {
  std::array<bool, 12> in_a{}, in_b{};
  for (const auto& n : a.notes) {
    if (n.pitch) in_a[static_cast<std::size_t>(*n.pitch % 12)] = true;
  }
  for (const auto& n : b.notes) {
    if (n.pitch) in_b[static_cast<std::size_t>(*n.pitch % 12)] = true;
  }
  int both = 0, either = 0;
  for (std::size_t i = 0; i < 12; ++i) {
    both += in_a[i] && in_b[i];
    either += in_a[i] || in_b[i];
  }
  return either ? static_cast<double>(both) / either : 0.0;
}

Eigen::VectorXd PitchClassScorer::embed(const Phrase& a, const Phrase& b) const { return pitch_class_profile(a, b); }

std::vector<int> NeuralGenerator::encoder_input(const PhraseRequest& request) const {
  std::vector<TokenSequence> context;
  for (const auto& p : request.context) context.push_back(encode_phrase(p));
  return neural::assemble_encoder_input(context, build_conditional_prefix(request.conditional),
                                        static_cast<std::size_t>(model_.config().encoder_context))
      .ids;
}

Phrase NeuralGenerator::propose(const PhraseRequest& request, const neural::SamplingParams& params) const {
  const auto ids = encoder_input(request);
  return neural::sample_phrase(model_, ids, request.conditional.key, request.conditional.time, params).phrase;
}

std::vector<int> NeuralRefiner::encoder_input(const PhraseRequest& request) const {
  if (!request.source) throw ModelError("refiner request lacks a source phrase");
  std::vector<TokenSequence> context;
  for (const auto& p : request.context) context.push_back(encode_phrase(p));
  TokenSequence tail = build_conditional_prefix(request.conditional);
  const TokenSequence source = encode_phrase(*request.source);
  tail.insert(tail.end(), source.begin(), source.end());
  return neural::assemble_encoder_input(context, tail, static_cast<std::size_t>(model_.config().encoder_context)).ids;
}

Phrase NeuralRefiner::propose(const PhraseRequest& request, const neural::SamplingParams& params) const {
  const auto ids = encoder_input(request);
  return neural::sample_phrase(model_, ids, request.conditional.key, request.conditional.time, params).phrase;
}

double NeuralPairModel::score(const Phrase& a, const Phrase& b) const { return neural::score_pair(model_, a, b); }

Eigen::VectorXd NeuralPairModel::embed(const Phrase& a, const Phrase& b) const {
  return neural::embed_phrase_pair(model_, a, b);
}

ConditioningStats ConditioningStats::from_corpus(std::span<const Song> songs) {
  ConditioningStats s;
  for (const auto& song : songs) {
    for (const auto& p : song.phrases) {
      s.phrase_lengths.push_back(static_cast<int>(p.notes.size()));
      s.cadences.push_back(p.cadence);
    }
  }
  return s;
}

nlohmann::json ConditioningStats::to_json() const {
  std::map<int, int> lengths;
  for (int n : phrase_lengths) ++lengths[n];
  std::map<std::string, int> cadence_counts;
  for (auto c : cadences) ++cadence_counts[std::string(yinyang::to_string(c))];
  nlohmann::json j{{"phrase_lengths", nlohmann::json::array()}, {"cadences", cadence_counts}};
  for (const auto& [n, count] : lengths) j["phrase_lengths"].push_back({n, count});
  return j;
}

ConditioningStats ConditioningStats::from_json(const nlohmann::json& j) {
  ConditioningStats s;
  for (const auto& entry : j.value("phrase_lengths", nlohmann::json::array())) {
    s.phrase_lengths.insert(s.phrase_lengths.end(), entry.at(1).get<std::size_t>(), entry.at(0).get<int>());
  }
  const nlohmann::json cadences = j.value("cadences", nlohmann::json::object());
  for (const auto& [name, count] : cadences.items()) {
    s.cadences.insert(s.cadences.end(), count.get<std::size_t>(), parse_cadence(name));
  }
  return s;
}

// ---- pool and selection ----------------------------------------------------

std::vector<Candidate> generate_phrase_pool(const PhraseModel& model, const PhraseRequest& request,
                                            std::span<const double> temperatures, std::uint64_t seed,
                                            int max_new_tokens, std::vector<std::string>* diagnostics) {
  if (temperatures.empty()) throw DataError("the candidate pool needs at least one temperature");
  std::vector<Candidate> pool;
  for (std::size_t k = 0; k < temperatures.size(); ++k) {
    neural::SamplingParams params;
    params.temperature = temperatures[k];
    params.max_new_tokens = max_new_tokens;
    params.seed = derive_seed(seed, k);
    try {
      pool.push_back(Candidate{model.propose(request, params), temperatures[k]});
    } catch (const ModelError& e) {
      if (diagnostics) diagnostics->push_back("pool slot at temperature " + std::to_string(temperatures[k]) + ": " + e.what());
    }
  }
  if (pool.empty()) throw ModelError("every candidate in the pool failed to decode");
  return pool;
}

Selection select_phrase(const PairModel* scorer, const Phrase& previous, std::span<const Candidate> candidates) {
  if (candidates.empty()) throw DataError("selection needs at least one candidate");
  if (scorer == nullptr || candidates.size() == 1) return Selection{0, std::nullopt};
  Selection best{0, std::nullopt};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = scorer->score(previous, candidates[i].phrase);
    const bool better = !best.score || s > *best.score ||
                        (s == *best.score && candidates[i].temperature < candidates[best.index].temperature);
    if (better) best = Selection{i, s};
  }
  return best;
}

// ---- generation loop -------------------------------------------------------

namespace {

enum Stream : std::uint64_t {
  kOctave = 1,
  kKind = 2,
  kTransform = 3,
  kTag = 4,
  kLength = 5,
  kCadence = 6,
  kSeedPhrase = 7,
  kPool = 8,
};

template <typename T>
T pick_from(std::span<const T> items, std::uint64_t seed) {
  Rng rng(mix_seed(seed));
  return pick(items, rng);
}

}  // namespace

GeneratedPiece generate_piece(const Phrase& motif, const GenerationPlan& plan, const ModelSet& models) {
  plan.validate();
  validate(motif);
  if (!motif.is_concrete()) throw DataError("the motif must not contain masked notes");
  if (!models.generator || !models.refiner) throw DataError("generation needs a generator and a refiner");

  GeneratedPiece piece;
  piece.plan = plan;
  piece.song.id = "generated";
  piece.song.source = SongSource::synthetic;
  auto& phrases = piece.song.phrases;

  const bool selecting = plan.use_selector && models.selector != nullptr;
  const std::vector<double> single_temperature{1.0};
  const std::span<const double> temperatures = selecting ? std::span<const double>(plan.temperatures)
                                                         : std::span<const double>(single_temperature);
  const auto high = kinds_with_similarity(Similarity::high);
  const auto low = kinds_with_similarity(Similarity::low);
  std::map<std::string, std::size_t> label_origin;

  for (std::size_t s = 0; s < plan.form.size(); ++s) {
    const auto& section = plan.form[s];
    const bool repeated = label_origin.count(section.label) > 0;
    const auto slots = schedule_section(section.phrases, plan.gr_ratio, s == 0 || repeated);
    const std::size_t section_start = phrases.size();
    auto key_it = plan.section_keys.find(section.label);
    const KeySignature key = key_it != plan.section_keys.end() ? key_it->second : motif.key;

    for (std::size_t i = 0; i < slots.size(); ++i) {
      const std::size_t idx = phrases.size();
      const auto slot_seed = [&](Stream stream) { return derive_seed(plan.seed, stream, idx); };
      ProvenanceRecord record;
      record.phrase_index = idx;
      record.section = section.label;
      record.source = slots[i];

      Phrase chosen;
      try {
        if (slots[i] == SlotLabel::motif) {
          if (!repeated) {
            chosen = motif;
          } else {
            const std::size_t origin = label_origin.at(section.label);
            std::vector<int> shifts;
            for (int shift : {-12, 0, 12}) {
              if (shift == 0 || !transpose_checked(phrases[origin], shift).clamped) shifts.push_back(shift);
            }
            const int shift = pick_from(std::span<const int>(shifts), slot_seed(kOctave));
            chosen = transpose(phrases[origin], shift);
            record.parent = origin;
            record.octave_shift = shift;
          }
        } else {
          PhraseRequest request;
          request.conditional.key = key;
          request.conditional.time = motif.time;
          const PhraseModel* model = models.refiner;
          const bool last_in_section = i + 1 == slots.size();

          if (slots[i] == SlotLabel::generator) {
            model = models.generator;
            request.context.assign(phrases.begin() + static_cast<std::ptrdiff_t>(section_start), phrases.end());
            const auto& lengths = models.stats.phrase_lengths;
            request.conditional.target_length = lengths.empty()
                                                    ? static_cast<int>(phrases.back().notes.size())
                                                    : pick_from(std::span<const int>(lengths), slot_seed(kLength));
          } else {
            const bool seeding = slots[i] == SlotLabel::section_seed;
            const auto override_it = plan.overrides.find({s, static_cast<int>(i)});
            TransformationKind kind{};
            if (override_it != plan.overrides.end()) {
              kind = override_it->second;
            } else {
              kind = pick_from(std::span<const TransformationKind>(seeding ? low : high), slot_seed(kKind));
            }
            std::size_t parent = section_start;
            if (seeding) {
              const auto seed_it = plan.seed_sources.find(s);
              if (seed_it != plan.seed_sources.end()) {
                parent = seed_it->second;
              } else {
                Rng rng(mix_seed(slot_seed(kSeedPhrase)));
                parent = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(idx) - 1));
              }
              request.context.push_back(last_bars(phrases.back(), plan.refiner_context_bars));
              Rng rng(mix_seed(slot_seed(kLength)));
              request.conditional.target_length =
                  uniform_int(rng, plan.new_section_motif_length.first, plan.new_section_motif_length.second);
            } else {
              request.context.push_back(phrases.back());
              request.conditional.target_length = static_cast<int>(phrases[parent].notes.size());
            }
            const CorruptionTag tag = pick_corruption_tag(kind, slot_seed(kTag));
            request.source = transform(phrases[parent], kind, slot_seed(kTransform), phrases[parent].key);
            request.conditional.corruptions = {tag};
            record.transformation = kind;
            record.corruption = tag;
            record.parent = parent;
          }

          if (last_in_section) {
            request.conditional.cadence = CadenceClass::tonic_final;
          } else if (!models.stats.cadences.empty()) {
            request.conditional.cadence =
                pick_from(std::span<const CadenceClass>(models.stats.cadences), slot_seed(kCadence));
          } else {
            request.conditional.cadence = CadenceClass::other;
          }

          const auto pool = generate_phrase_pool(*model, request, temperatures, slot_seed(kPool), plan.max_new_tokens,
                                                 &piece.diagnostics);
          const Selection pick_result = select_phrase(selecting ? models.selector : nullptr, phrases.back(), pool);
          chosen = pool[pick_result.index].phrase;
          record.temperature = pool[pick_result.index].temperature;
          record.selector_score = pick_result.score;
        }
      } catch (const Error& e) {
        piece.diagnostics.push_back("phrase " + std::to_string(idx) + " (section " + section.label + ", slot " +
                                    slot_letter(slots[i]) + "): " + e.what());
        throw GenerationAborted(piece.diagnostics.back(), piece);
      }

      chosen.index_in_song = static_cast<int>(idx);
      chosen.time = motif.time;
      phrases.push_back(std::move(chosen));
      piece.provenance.push_back(std::move(record));
      if (i == 0 && !repeated) label_origin[section.label] = idx;
    }
  }
  return piece;
}

}  // namespace yinyang
