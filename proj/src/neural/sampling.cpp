#include "yinyang/neural/sampling.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "yinyang/errors.hpp"
#include "yinyang/neural/data.hpp"
#include "yinyang/random.hpp"

namespace yinyang::neural {

void SamplingParams::validate() const {
  if (!(temperature > 0)) throw DataError("temperature must be positive");
  if (max_new_tokens < 1) throw DataError("max_new_tokens must be positive");
  if (max_attempts < 1) throw DataError("max_attempts must be positive");
}

Eigen::VectorXd next_token_distribution(const Seq2Seq& model, std::span<const int> encoder_ids,
                                        std::span<const int> decoder_prefix) {
  const Matrix<float> logits = model.logits(encoder_ids, decoder_prefix);
  Eigen::VectorXd z = logits.row(logits.rows() - 1).cast<double>().transpose();
  z = (z.array() - z.maxCoeff()).exp();
  return z / z.sum();
}

namespace {

// One decoding pass; temperature 0 means argmax.
std::optional<SampleResult> decode_once(const Seq2Seq& model, std::span<const int> encoder_ids, const KeySignature& key,
                                        const TimeSignature& time, int max_new_tokens, bool grammar,
                                        double temperature, Rng* rng) {
  const auto& vocab = Vocabulary::standard();
  const int end_id = vocab.id(Token::end());
  const int limit = std::min(max_new_tokens, model.config().decoder_context - 1);
  auto state = model.start_decoding(encoder_ids);
  RowVector<float> logits = model.step(state, vocab.id(Token::begin()));
  RemiGrammar checker(time);
  SampleResult result;
  const double minus_inf = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd z(vocab.size());

  for (int t = 0; t < limit; ++t) {
    for (int id = 0; id < vocab.size(); ++id) {
      const bool allowed = !grammar || checker.allows(vocab.token(id));
      z(id) = allowed ? static_cast<double>(logits(id)) : minus_inf;
    }
    Eigen::Index choice = 0;
    const double top = z.maxCoeff(&choice);
    if (!std::isfinite(top)) break;  // grammar dead end
    if (temperature > 0) {
      const Eigen::ArrayXd p = ((z.array() - top) / temperature).exp();
      double u = uniform_real(*rng) * p.sum();
      for (choice = 0; choice + 1 < p.size(); ++choice) {
        if (u < p(choice)) break;
        u -= p(choice);
      }
      while (p(choice) == 0.0) --choice;  // rounding at the tail
    }
    const int id = static_cast<int>(choice);
    if (id == end_id) break;
    const Token& token = vocab.token(id);
    if (grammar) checker.accept(token);
    result.tokens.push_back(token);
    if (t + 1 < limit) logits = model.step(state, id);
  }
  try {
    DecodeResult decoded = decode_phrase_checked(result.tokens, key, time);
    if (decoded.phrase.notes.empty()) return std::nullopt;
    result.phrase = std::move(decoded.phrase);
    result.phrase.cadence = derive_cadence(result.phrase);
    return result;
  } catch (const DataError&) {
    return std::nullopt;
  }
}

}  // namespace

SampleResult sample_phrase(const Seq2Seq& model, std::span<const int> encoder_ids, const KeySignature& key,
                           const TimeSignature& time, const SamplingParams& params) {
  params.validate();
  for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
    Rng rng(derive_seed(params.seed, 0, static_cast<std::uint64_t>(attempt)));
    auto result = decode_once(model, encoder_ids, key, time, params.max_new_tokens, params.grammar, params.temperature,
                              &rng);
    if (result) {
      result->attempts = attempt + 1;
      return std::move(*result);
    }
  }
  throw ModelError("sampled output did not decode to a phrase after " + std::to_string(params.max_attempts) +
                   " attempts");
}

SampleResult greedy_phrase(const Seq2Seq& model, std::span<const int> encoder_ids, const KeySignature& key,
                           const TimeSignature& time, int max_new_tokens, bool grammar) {
  auto result = decode_once(model, encoder_ids, key, time, max_new_tokens, grammar, 0.0, nullptr);
  if (!result) throw ModelError("greedy output did not decode to a phrase");
  result->attempts = 1;
  return std::move(*result);
}

double score_pair(const Classifier& model, const Phrase& a, const Phrase& b) {
  const auto ids = pair_input(a, b, static_cast<std::size_t>(model.config().encoder_context));
  return static_cast<double>(model.probability(ids));
}

Eigen::VectorXd embed_phrase_pair(const Classifier& model, const Phrase& a, const Phrase& b) {
  const auto ids = pair_input(a, b, static_cast<std::size_t>(model.config().encoder_context));
  return model.mean_pooled(ids).cast<double>().transpose();
}

}  // namespace yinyang::neural
