#include <doctest.h>

#include <algorithm>

#include "support.hpp"
#include "yinyang/errors.hpp"
#include "yinyang/orchestrator.hpp"
#include "yinyang/transforms.hpp"

using namespace yinyang;

namespace {

std::string letters(const std::vector<SlotLabel>& slots) {
  std::string s;
  for (auto l : slots) s += slot_letter(l);
  return s;
}

Phrase motif() {
  Phrase p;
  p.key = {2, Mode::major};
  p.time = {4, 4};
  const int pitches[] = {62, 64, 66, 67, 69, 71, 69, 66, 64, 62};
  Rational t{0};
  for (int pitch : pitches) {
    p.notes.push_back(Note{pitch, Rational(1, 2), t});
    t += Rational(1, 2);
  }
  p.cadence = derive_cadence(p);
  return p;
}

// Wraps a stub and keeps every request it sees.
class Recording final : public PhraseModel {
 public:
  explicit Recording(const PhraseModel& inner) : inner_(inner) {}
  Phrase propose(const PhraseRequest& r, const neural::SamplingParams& p) const override {
    requests.push_back(r);
    return inner_.propose(r, p);
  }
  mutable std::vector<PhraseRequest> requests;

 private:
  const PhraseModel& inner_;
};

// Scores a candidate by its note count.
class LengthScorer final : public PairModel {
 public:
  double score(const Phrase&, const Phrase& b) const override { return static_cast<double>(b.notes.size()); }
  Eigen::VectorXd embed(const Phrase&, const Phrase&) const override { return Eigen::VectorXd::Ones(2); }
};

// Returns a phrase whose length encodes the temperature; fails above a threshold.
class TemperatureProbe final : public PhraseModel {
 public:
  explicit TemperatureProbe(double fail_above) : fail_above_(fail_above) {}
  Phrase propose(const PhraseRequest&, const neural::SamplingParams& params) const override {
    if (params.temperature > fail_above_) throw ModelError("probe failure");
    Phrase p;
    const int n = static_cast<int>(std::lround(params.temperature * 10));
    for (int i = 0; i < n; ++i) p.notes.push_back(Note{60 + i % 12, Rational(1, 4), Rational(i, 4)});
    return p;
  }

 private:
  double fail_above_;
};

struct Stubs {
  EchoGenerator echo;
  IdentityRefiner identity;
  ConstantScorer constant{0.5};
};

}  // namespace

TEST_CASE("section schedules") {
  CHECK(letters(schedule_section(5, {2, 1}, true)) == "MGGRG");
  CHECK(letters(schedule_section(4, {2, 1}, true)) == "MGGR");
  CHECK(letters(schedule_section(3, {1, 1}, true)) == "MGR");
  CHECK(letters(schedule_section(4, {1, 1}, false)) == "SGRG");
  CHECK(letters(schedule_section(4, {0, 1}, true)) == "MRRR");
  CHECK(letters(schedule_section(1, {2, 1}, false)) == "S");
  CHECK_THROWS_AS(schedule_section(3, {0, 0}, true), DataError);
  CHECK_THROWS_AS(schedule_section(0, {1, 1}, true), DataError);
}

TEST_CASE("form and ratio parsing") {
  const auto form = parse_form("A:3,B:4");
  REQUIRE(form.size() == 2);
  CHECK(form[1] == SectionSpec{"B", 4});
  CHECK(format_form(form) == "A:3,B:4");
  CHECK(parse_gr_ratio("2:1") == GrRatio{2, 1});
  CHECK_THROWS_AS(parse_form("A3"), DataError);
  CHECK_THROWS_AS(parse_form("A:x"), DataError);
  CHECK_THROWS_AS(parse_gr_ratio("21"), DataError);
}

TEST_CASE("A:3,B:4 at 1:1 yields seven phrases with a consistent provenance log") {
  Stubs s;
  GenerationPlan plan;
  plan.form = parse_form("A:3,B:4");
  plan.gr_ratio = {1, 1};
  plan.seed = 3;
  const auto piece = generate_piece(motif(), plan, {&s.echo, &s.identity, &s.constant, {}});
  REQUIRE(piece.song.phrases.size() == 7);
  std::string sources;
  for (const auto& r : piece.provenance) sources += slot_letter(r.source);
  CHECK(sources == "MGRSGRG");
  CHECK(piece.song.phrases[0].notes == motif().notes);
  for (std::size_t i = 0; i < 7; ++i) {
    const auto& r = piece.provenance[i];
    CHECK(r.phrase_index == i);
    CHECK(r.section == (i < 3 ? "A" : "B"));
    if (r.source == SlotLabel::refiner || r.source == SlotLabel::section_seed) {
      REQUIRE(r.transformation);
      REQUIRE(r.corruption);
      REQUIRE(r.parent);
      CHECK(*r.parent < i);
      const auto& allowed = pairing_table().at(*r.transformation);
      CHECK(std::find(allowed.begin(), allowed.end(), *r.corruption) != allowed.end());
      CHECK(similarity_of(*r.transformation) ==
            (r.source == SlotLabel::refiner ? Similarity::high : Similarity::low));
    } else {
      CHECK_FALSE(r.transformation);
      CHECK_FALSE(r.corruption);
    }
  }
  // R slots refine the first phrase of their own section.
  CHECK(*piece.provenance[2].parent == 0);
  CHECK(*piece.provenance[5].parent == 3);
  const std::string report = provenance_report(piece);
  CHECK(std::count(report.begin(), report.end(), '\n') == 8);
}

TEST_CASE("ABACA with four phrases per section makes twenty phrases and repeats the motif") {
  Stubs s;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GenerationPlan plan;
    plan.form = parse_form("A:4,B:4,A:4,C:4,A:4");
    plan.seed = seed;
    const auto piece = generate_piece(motif(), plan, {&s.echo, &s.identity, &s.constant, {}});
    REQUIRE(piece.song.phrases.size() == 20);
    for (std::size_t start : {8u, 16u}) {
      const auto& r = piece.provenance[start];
      CHECK(r.source == SlotLabel::motif);
      CHECK(r.parent == std::optional<std::size_t>(0));
      CHECK((r.octave_shift == -12 || r.octave_shift == 0 || r.octave_shift == 12));
      const Phrase expected = transpose(piece.song.phrases[0], r.octave_shift);
      CHECK(piece.song.phrases[start].notes == expected.notes);
    }
    CHECK(piece.provenance[4].source == SlotLabel::section_seed);
    CHECK(piece.provenance[12].source == SlotLabel::section_seed);
  }
}

TEST_CASE("models see only what the framework allows") {
  Stubs s;
  Recording gen(s.echo), ref(s.identity);
  GenerationPlan plan;
  plan.form = parse_form("A:5,B:5");
  plan.seed = 11;
  ModelSet models{&gen, &ref, &s.constant, {}};
  models.stats.phrase_lengths = {7, 8};
  models.stats.cadences = {CadenceClass::other};
  const auto piece = generate_piece(motif(), plan, models);
  const auto& phrases = piece.song.phrases;

  // Generator context is the current section so far.
  std::size_t g = 0;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (piece.provenance[i].source != SlotLabel::generator) continue;
    const std::size_t section_start = i < 5 ? 0 : 5;
    const auto& req = gen.requests[g * plan.temperatures.size()];
    REQUIRE(req.context.size() == i - section_start);
    for (std::size_t k = 0; k < req.context.size(); ++k) CHECK(req.context[k] == phrases[section_start + k]);
    CHECK((req.conditional.target_length == 7 || req.conditional.target_length == 8));
    CHECK(req.conditional.corruptions.empty());
    ++g;
  }
  CHECK(g * plan.temperatures.size() == gen.requests.size());

  // Refiner requests, in order: R (A), S (B), R (B).
  REQUIRE(ref.requests.size() == 3 * plan.temperatures.size());
  const auto& r_a = ref.requests[0];
  const auto& seed_b = ref.requests[plan.temperatures.size()];
  CHECK(r_a.context.size() == 1);
  CHECK(r_a.context[0] == phrases[2]);
  CHECK(r_a.conditional.target_length == static_cast<int>(phrases[0].notes.size()));
  CHECK(r_a.conditional.corruptions.size() == 1);

  REQUIRE(seed_b.context.size() == 1);
  const Phrase& context = seed_b.context[0];
  CHECK(context == last_bars(phrases[4], 1));
  for (const auto& n : context.notes) CHECK(n.onset < context.time.bar_length());
  CHECK(seed_b.conditional.target_length >= 9);
  CHECK(seed_b.conditional.target_length <= 16);
  REQUIRE(seed_b.source);
  CHECK(similarity_of(*piece.provenance[5].transformation) == Similarity::low);

  // Last slot of each section asks for a tonic ending.
  for (const auto& req : gen.requests) {
    const bool last = req.context.size() == 4;
    CHECK((req.conditional.cadence == CadenceClass::tonic_final) == last);
  }
}

TEST_CASE("new-section length conditioning spans the configured range") {
  Stubs s;
  Recording ref(s.identity);
  std::vector<int> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    ref.requests.clear();
    GenerationPlan plan;
    plan.form = parse_form("A:2,B:2");
    plan.gr_ratio = {1, 0};
    plan.seed = seed;
    generate_piece(motif(), plan, {&s.echo, &ref, nullptr, {}});
    REQUIRE(ref.requests.size() == 1);
    seen.push_back(ref.requests[0].conditional.target_length);
  }
  CHECK(*std::min_element(seen.begin(), seen.end()) == 9);
  CHECK(*std::max_element(seen.begin(), seen.end()) == 16);
}

TEST_CASE("overrides and seed sources are honoured") {
  Stubs s;
  GenerationPlan plan;
  plan.form = parse_form("A:4,B:4");
  plan.overrides[{0, 3}] = TransformationKind::augmentation;
  plan.overrides[{1, 0}] = TransformationKind::retrograde_pitch;
  plan.seed_sources[1] = 0;
  const auto piece = generate_piece(motif(), plan, {&s.echo, &s.identity, &s.constant, {}});
  CHECK(piece.provenance[3].transformation == TransformationKind::augmentation);
  CHECK(piece.provenance[3].corruption == CorruptionTag::melodic_stripping);
  CHECK(piece.provenance[4].transformation == TransformationKind::retrograde_pitch);
  CHECK(piece.provenance[4].parent == std::optional<std::size_t>(0));
  // The identity refiner passes the transformed phrase through.
  CHECK(piece.song.phrases[4].pitches() == retrograde_pitch(motif()).pitches());
  CHECK(piece.song.phrases[3].durations() == std::vector<Rational>(10, Rational(1)));

  GenerationPlan bad = plan;
  bad.overrides[{0, 3}] = TransformationKind::chromatic_inversion;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = plan;
  bad.overrides[{1, 0}] = TransformationKind::reduction;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = plan;
  bad.overrides[{0, 1}] = TransformationKind::reduction;  // a G slot
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = plan;
  bad.seed_sources[1] = 5;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("selection takes the argmax and breaks ties toward lower temperature") {
  LengthScorer scorer;
  const Phrase prev = motif();
  auto make = [](int n, double t) {
    Phrase p;
    for (int i = 0; i < n; ++i) p.notes.push_back(Note{60, Rational(1), Rational(i)});
    return Candidate{p, t};
  };
  const std::vector<Candidate> pool{make(3, 0.7), make(5, 0.85), make(2, 1.0), make(5, 0.8)};
  const auto sel = select_phrase(&scorer, prev, pool);
  CHECK(sel.index == 3);
  CHECK(sel.score == std::optional<double>(5.0));
  CHECK_FALSE(select_phrase(nullptr, prev, pool).score);
  CHECK(select_phrase(nullptr, prev, pool).index == 0);
  CHECK_FALSE(select_phrase(&scorer, prev, std::span(pool).first(1)).score);
  CHECK_THROWS_AS(select_phrase(&scorer, prev, std::vector<Candidate>{}), DataError);
}

TEST_CASE("candidate pools drop failing slots") {
  const std::vector<double> temps{0.7, 0.85, 1.0, 1.15, 1.3};
  PhraseRequest req;
  std::vector<std::string> diagnostics;
  const auto pool = generate_phrase_pool(TemperatureProbe(1.2), req, temps, 1, 256, &diagnostics);
  REQUIRE(pool.size() == 4);
  CHECK(diagnostics.size() == 1);
  CHECK(pool[3].temperature == 1.15);
  CHECK(pool[0].phrase.notes.size() == 7);
  CHECK_THROWS_AS(generate_phrase_pool(TemperatureProbe(0.1), req, temps, 1), ModelError);
  CHECK(generate_phrase_pool(TemperatureProbe(2.0), req, std::vector<double>{1.0}, 1).size() == 1);
}

TEST_CASE("without a selector each slot draws one candidate at temperature 1") {
  Stubs s;
  Recording gen(s.echo);
  GenerationPlan plan;
  plan.form = parse_form("A:4");
  const auto piece = generate_piece(motif(), plan, {&gen, &s.identity, nullptr, {}});
  CHECK(gen.requests.size() == 2);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK_FALSE(piece.provenance[i].selector_score);
    CHECK(piece.provenance[i].temperature == std::optional<double>(1.0));
  }
  plan.use_selector = false;
  const auto yya = generate_piece(motif(), plan, {&s.echo, &s.identity, &s.constant, {}});
  CHECK_FALSE(yya.provenance[1].selector_score);
  const auto with = generate_piece(motif(), GenerationPlan{}, {&s.echo, &s.identity, &s.constant, {}});
  CHECK(with.provenance[1].selector_score == std::optional<double>(0.5));
}

TEST_CASE("generation is deterministic in the plan seed and survives JSON") {
  Stubs s;
  GenerationPlan plan;
  plan.form = parse_form("A:4,B:4,A:4");
  plan.seed = 99;
  plan.section_keys["B"] = KeySignature{9, Mode::minor};
  const auto a = generate_piece(motif(), plan, {&s.echo, &s.identity, &s.constant, {}});
  const auto b = generate_piece(motif(), plan, {&s.echo, &s.identity, &s.constant, {}});
  CHECK(a.to_json() == b.to_json());
  CHECK(a.song.phrases[5].key == KeySignature{9, Mode::minor});
  const auto back = GeneratedPiece::from_json(a.to_json());
  CHECK(back.to_json() == a.to_json());
  CHECK(GenerationPlan::from_json(plan.to_json()).to_json() == plan.to_json());
}

TEST_CASE("plan JSON accepts shorthand fields and rejects bad values") {
  const auto p = GenerationPlan::from_json({{"form", "A:4,B:4"}, {"gr_ratio", {1, 1}}, {"pool_size", 3}});
  CHECK(p.gr_ratio == GrRatio{1, 1});
  REQUIRE(p.temperatures.size() == 3);
  CHECK(p.temperatures[0] == doctest::Approx(0.7));
  CHECK(p.temperatures[1] == doctest::Approx(1.0));
  CHECK(p.temperatures[2] == doctest::Approx(1.3));
  CHECK(p.phrase_count() == 8);
  CHECK_THROWS_AS(GenerationPlan::from_json({{"temperatures", nlohmann::json::array()}}), DataError);
  CHECK_THROWS_AS(GenerationPlan::from_json({{"gr_ratio", "0:0"}}), DataError);
  CHECK_THROWS_AS(GenerationPlan::from_json({{"new_section_motif_length", {0, 4}}}), DataError);
  CHECK_THROWS_AS(GenerationPlan::from_json({{"temperatures", {1.0, -1.0}}}), DataError);
}

TEST_CASE("generation failures abort with the partial piece") {
  Stubs s;
  TemperatureProbe broken(0.0);
  GenerationPlan plan;
  plan.form = parse_form("A:4");
  try {
    generate_piece(motif(), plan, {&broken, &s.identity, &s.constant, {}});
    FAIL("expected GenerationAborted");
  } catch (const GenerationAborted& e) {
    CHECK(e.partial().song.phrases.size() == 1);
    CHECK_FALSE(e.partial().diagnostics.empty());
  }
  Phrase masked = motif();
  masked.notes[0].pitch.reset();
  CHECK_THROWS_AS(generate_piece(masked, plan, {&s.echo, &s.identity, nullptr, {}}), DataError);
}

TEST_CASE("last_bars keeps whole trailing bars and rebases them") {
  Phrase p;
  p.time = {3, 4};
  p.notes = {Note{60, Rational(1), Rational(0)}, Note{62, Rational(2), Rational(2)}, Note{64, Rational(1), Rational(4)},
             Note{65, Rational(1), Rational(7)}};
  const Phrase one = last_bars(p, 1);
  REQUIRE(one.notes.size() == 1);
  CHECK(one.notes[0].onset == Rational(1));
  const Phrase two = last_bars(p, 2);
  REQUIRE(two.notes.size() == 2);
  CHECK(two.notes[0].onset == Rational(1));
  CHECK(two.notes[1].onset == Rational(4));
  CHECK(last_bars(p, 10).notes == p.notes);
}

TEST_CASE("conditioning statistics survive JSON") {
  ConditioningStats s;
  s.phrase_lengths = {5, 7, 7, 9};
  s.cadences = {CadenceClass::other, CadenceClass::tonic_final, CadenceClass::other};
  const auto back = ConditioningStats::from_json(s.to_json());
  auto sorted_lengths = back.phrase_lengths;
  std::sort(sorted_lengths.begin(), sorted_lengths.end());
  CHECK(sorted_lengths == s.phrase_lengths);
  CHECK(back.cadences.size() == 3);
}
