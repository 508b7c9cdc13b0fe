#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "yinyang/errors.hpp"
#include "yinyang/neural/checkpoint.hpp"
#include "yinyang/neural/sampling.hpp"
#include "yinyang/score.hpp"
#include "yinyang/tokenizer.hpp"

namespace yinyang {

enum class SlotLabel { motif, generator, refiner, section_seed };  // M, G, R, S

char slot_letter(SlotLabel label);

struct GrRatio {
  int generator = 2;
  int refiner = 1;
  bool operator==(const GrRatio&) const = default;
};

// First slot is M for a first (or repeated) section and S otherwise; the rest
// cycle through `generator` G slots followed by `refiner` R slots.
std::vector<SlotLabel> schedule_section(int phrase_count, GrRatio ratio, bool is_first_section);

struct SectionSpec {
  std::string label;
  int phrases = 4;
  bool operator==(const SectionSpec&) const = default;
};

struct GenerationPlan {
  std::vector<SectionSpec> form{{"A", 4}};
  GrRatio gr_ratio;
  std::vector<double> temperatures{0.7, 0.85, 1.0, 1.15, 1.3};  // pool size K = size()
  // (section index in form, slot index within section) -> transformation
  std::map<std::pair<std::size_t, int>, TransformationKind> overrides;
  // section index -> phrase index used as the seed of that new section
  std::map<std::size_t, std::size_t> seed_sources;
  std::pair<int, int> new_section_motif_length{9, 16};
  std::map<std::string, KeySignature> section_keys;  // by label
  int refiner_context_bars = 1;
  bool use_selector = true;
  int max_new_tokens = 256;
  std::uint64_t seed = 0;

  // Throws DataError when an invariant fails.
  void validate() const;
  std::size_t phrase_count() const;
  nlohmann::json to_json() const;
  static GenerationPlan from_json(const nlohmann::json& j);
};

// "A:4,B:4,A:4" -> sections.
std::vector<SectionSpec> parse_form(const std::string& text);
std::string format_form(std::span<const SectionSpec> form);
GrRatio parse_gr_ratio(const std::string& text);

struct ProvenanceRecord {
  std::size_t phrase_index = 0;
  std::string section;
  SlotLabel source = SlotLabel::motif;
  std::optional<TransformationKind> transformation;
  std::optional<CorruptionTag> corruption;
  std::optional<std::size_t> parent;
  std::optional<double> temperature;
  std::optional<double> selector_score;
  int octave_shift = 0;  // repeated-section motif copies

  nlohmann::json to_json() const;
  static ProvenanceRecord from_json(const nlohmann::json& j);
};

struct GeneratedPiece {
  Song song;
  std::vector<ProvenanceRecord> provenance;
  GenerationPlan plan;
  std::vector<std::string> diagnostics;

  nlohmann::json to_json() const;
  static GeneratedPiece from_json(const nlohmann::json& j);
};

// One line per phrase: index, section, source, transformation, corruption, parent.
std::string provenance_report(const GeneratedPiece& piece);

// Writes piece.json, piece.mid, and provenance.txt into `directory`.
void write_piece(const GeneratedPiece& piece, const std::filesystem::path& directory);

// Everything a model is asked for one phrase.
struct PhraseRequest {
  std::vector<Phrase> context;   // oldest first
  ConditionalSpec conditional;   // corruption tags non-empty for the refiner
  std::optional<Phrase> source;  // transformed phrase shown to the refiner
};

class PhraseModel {
 public:
  virtual ~PhraseModel() = default;
  // Throws ModelError when no decodable phrase was produced.
  virtual Phrase propose(const PhraseRequest& request, const neural::SamplingParams& params) const = 0;
};

class PairModel {
 public:
  virtual ~PairModel() = default;
  virtual double score(const Phrase& a, const Phrase& b) const = 0;
  virtual Eigen::VectorXd embed(const Phrase& a, const Phrase& b) const = 0;
};

// Stub: repeats the newest context phrase with the requested key.
class EchoGenerator final : public PhraseModel {
 public:
  Phrase propose(const PhraseRequest& request, const neural::SamplingParams& params) const override;
};

// Stub: returns the transformed source phrase unchanged.
class IdentityRefiner final : public PhraseModel {
 public:
  Phrase propose(const PhraseRequest& request, const neural::SamplingParams& params) const override;
};

// Stub scorer with a fixed probability; embeddings are pitch-class profiles of B.
class ConstantScorer final : public PairModel {
 public:
  explicit ConstantScorer(double value = 0.5) : value_(value) {}
  double score(const Phrase&, const Phrase&) const override { return value_; }
  Eigen::VectorXd embed(const Phrase& a, const Phrase& b) const override;

 private:
  double value_;
};

// Deterministic stand-in for an SD checkpoint: score is the overlap of the two
// pitch-class sets, embedding the 24-bin pitch-class profile of (A, B).
class PitchClassScorer final : public PairModel {
 public:
  double score(const Phrase& a, const Phrase& b) const override;
  Eigen::VectorXd embed(const Phrase& a, const Phrase& b) const override;
};

class NeuralGenerator final : public PhraseModel {
 public:
  explicit NeuralGenerator(const neural::Seq2Seq& model) : model_(model) {}
  Phrase propose(const PhraseRequest& request, const neural::SamplingParams& params) const override;
  std::vector<int> encoder_input(const PhraseRequest& request) const;

 private:
  const neural::Seq2Seq& model_;
};

class NeuralRefiner final : public PhraseModel {
 public:
  explicit NeuralRefiner(const neural::Seq2Seq& model) : model_(model) {}
  Phrase propose(const PhraseRequest& request, const neural::SamplingParams& params) const override;
  std::vector<int> encoder_input(const PhraseRequest& request) const;

 private:
  const neural::Seq2Seq& model_;
};

class NeuralPairModel final : public PairModel {
 public:
  explicit NeuralPairModel(const neural::Classifier& model) : model_(model) {}
  double score(const Phrase& a, const Phrase& b) const override;
  Eigen::VectorXd embed(const Phrase& a, const Phrase& b) const override;

 private:
  const neural::Classifier& model_;
};

// Corpus-level statistics used to fill generator conditioning tokens.
struct ConditioningStats {
  std::vector<int> phrase_lengths;
  std::vector<CadenceClass> cadences;

  static ConditioningStats from_corpus(std::span<const Song> songs);
  nlohmann::json to_json() const;
  static ConditioningStats from_json(const nlohmann::json& j);
};

struct ModelSet {
  const PhraseModel* generator = nullptr;
  const PhraseModel* refiner = nullptr;
  const PairModel* selector = nullptr;  // null: YYA mode
  ConditioningStats stats;
};

struct Candidate {
  Phrase phrase;
  double temperature = 1.0;
};

// One candidate per temperature; a failing slot is dropped. Throws ModelError
// if every slot fails.
std::vector<Candidate> generate_phrase_pool(const PhraseModel& model, const PhraseRequest& request,
                                            std::span<const double> temperatures, std::uint64_t seed,
                                            int max_new_tokens = 256, std::vector<std::string>* diagnostics = nullptr);

struct Selection {
  std::size_t index = 0;
  std::optional<double> score;  // empty when the selector was bypassed
};

// Argmax of scorer(previous, candidate); ties go to the lowest temperature.
// A null scorer or a single candidate bypasses scoring.
Selection select_phrase(const PairModel* scorer, const Phrase& previous, std::span<const Candidate> candidates);

// Last `bars` bars of a phrase, rebased so the first kept bar starts at 0.
Phrase last_bars(const Phrase& phrase, int bars);

// Thrown when a slot cannot be filled; carries the phrases generated so far.
class GenerationAborted : public ModelError {
 public:
  GenerationAborted(const std::string& what, GeneratedPiece partial) : ModelError(what), partial_(std::move(partial)) {}
  const GeneratedPiece& partial() const { return partial_; }

 private:
  GeneratedPiece partial_;
};

GeneratedPiece generate_piece(const Phrase& motif, const GenerationPlan& plan, const ModelSet& models);

}  // namespace yinyang
