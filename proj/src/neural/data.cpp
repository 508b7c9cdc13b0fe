#include "yinyang/neural/data.hpp"

#include <algorithm>

#include "yinyang/errors.hpp"
#include "yinyang/random.hpp"
#include "yinyang/transforms.hpp"

namespace yinyang::neural {

namespace {

enum Stream : std::uint64_t { kShift = 1, kCorruption = 2, kPairs = 3 };

int vocab_id(const Token& t) { return Vocabulary::standard().id(t); }

void append_ids(std::vector<int>& out, const TokenSequence& tokens) {
  const auto& vocab = Vocabulary::standard();
  for (const auto& t : tokens) out.push_back(vocab.id(t));
}

std::vector<Song> shifted_songs(std::span<const Song> songs, const ExampleOptions& options) {
  std::vector<Song> out(songs.begin(), songs.end());
  if (options.max_shift <= 0) return out;
  Rng rng(derive_seed(options.seed, kShift));
  for (auto& song : out) {
    const int shift = uniform_int(rng, -options.max_shift, options.max_shift);
    if (shift != 0) song = transpose(song, shift);
  }
  return out;
}

}  // namespace

EncoderInput assemble_encoder_input(std::span<const TokenSequence> context, const TokenSequence& tail, std::size_t limit) {
  const std::size_t sep = context.empty() ? 0 : 1;
  if (tail.size() + sep > limit) throw DataError("conditional input alone exceeds the encoder context");
  EncoderInput result;
  std::size_t first = 0;
  std::size_t context_tokens = 0;
  for (const auto& c : context) context_tokens += c.size() + 1;  // phrase + following separator
  while (first < context.size() && context_tokens + tail.size() > limit) {
    context_tokens -= context[first].size() + 1;
    result.dropped_tokens += context[first].size() + 1;
    ++result.dropped_phrases;
    ++first;
  }
  // Keep at least the newest phrase if any of it fits, cutting its oldest tokens.
  std::size_t skip_in_first = 0;
  if (first == context.size() && !context.empty() && tail.size() + 2 <= limit) {
    first = context.size() - 1;
    --result.dropped_phrases;
    result.dropped_tokens -= context[first].size() + 1;
    const std::size_t room = limit - tail.size() - 1;
    skip_in_first = context[first].size() - room;
    result.dropped_tokens += skip_in_first;
  }
  const auto& vocab = Vocabulary::standard();
  const int separator = vocab.id(Token::separator());
  for (std::size_t i = first; i < context.size(); ++i) {
    const std::size_t from = i == first ? skip_in_first : 0;
    for (std::size_t t = from; t < context[i].size(); ++t) result.ids.push_back(vocab.id(context[i][t]));
    result.ids.push_back(separator);
  }
  append_ids(result.ids, tail);
  return result;
}

std::vector<int> pair_input(const Phrase& a, const Phrase& b, std::size_t limit) {
  const TokenSequence ta = encode_phrase(a);
  const TokenSequence tb = encode_phrase(b);
  if (tb.size() + 4 > limit) throw DataError("second phrase alone exceeds the classifier context");
  const std::size_t keep = std::min(ta.size(), limit - tb.size() - 3);
  std::vector<int> ids;
  ids.reserve(keep + tb.size() + 3);
  ids.push_back(vocab_id(Token::begin()));
  const auto& vocab = Vocabulary::standard();
  for (std::size_t t = ta.size() - keep; t < ta.size(); ++t) ids.push_back(vocab.id(ta[t]));
  ids.push_back(vocab_id(Token::separator()));
  append_ids(ids, tb);
  ids.push_back(vocab_id(Token::end()));
  return ids;
}

ConditionalSpec conditional_for(const Phrase& target, std::vector<CorruptionTag> corruptions) {
  return ConditionalSpec{std::move(corruptions), target.key, target.time, static_cast<int>(target.notes.size()),
                         target.cadence};
}

void set_decoder_target(SequenceExample& ex, const TokenSequence& target) {
  const auto& vocab = Vocabulary::standard();
  ex.decoder_input.clear();
  ex.target.clear();
  ex.decoder_input.push_back(vocab.id(Token::begin()));
  for (const auto& t : target) {
    const int id = vocab.id(t);
    ex.decoder_input.push_back(id);
    ex.target.push_back(id);
  }
  ex.target.push_back(vocab.id(Token::end()));
}

std::vector<SequenceExample> build_generator_examples(std::span<const Song> songs, const ModelConfig& config,
                                                      const ExampleOptions& options, BuildStats* stats) {
  BuildStats local;
  std::vector<SequenceExample> out;
  for (const auto& song : shifted_songs(songs, options)) {
    std::vector<TokenSequence> encoded;
    for (const auto& p : song.phrases) encoded.push_back(encode_phrase(p));
    for (std::size_t n = 1; n < song.phrases.size(); ++n) {
      try {
        const std::size_t from = n > options.max_context_phrases ? n - options.max_context_phrases : 0;
        std::span<const TokenSequence> context(encoded.data() + from, n - from);
        const auto prefix = build_conditional_prefix(conditional_for(song.phrases[n]));
        SequenceExample ex;
        ex.encoder = assemble_encoder_input(context, prefix, static_cast<std::size_t>(config.encoder_context)).ids;
        if (encoded[n].size() + 1 > static_cast<std::size_t>(config.decoder_context)) throw DataError("target too long");
        set_decoder_target(ex, encoded[n]);
        out.push_back(std::move(ex));
        ++local.built;
      } catch (const DataError&) {
        ++local.skipped;
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

std::vector<SequenceExample> build_refiner_examples(std::span<const Song> songs, const ModelConfig& config,
                                                    RefinerTask task, const ExampleOptions& options, BuildStats* stats) {
  BuildStats local;
  std::vector<SequenceExample> out;
  std::uint64_t counter = 0;
  for (const auto& song : shifted_songs(songs, options)) {
    for (std::size_t i = 0; i + 1 < song.phrases.size(); ++i) {
      const std::uint64_t seed = derive_seed(options.seed, kCorruption, counter++);
      try {
        const Phrase& clean = song.phrases[i + 1];
        std::vector<CorruptionTag> tags;
        Phrase shown = clean;
        if (task == RefinerTask::corruption) {
          tags = sample_training_corruption(seed);
          shown = corrupt(clean, tags, derive_seed(seed, 1));
        }
        TokenSequence tail = build_conditional_prefix(conditional_for(clean, tags));
        const TokenSequence shown_tokens = encode_phrase(shown);
        tail.insert(tail.end(), shown_tokens.begin(), shown_tokens.end());
        const TokenSequence context[] = {encode_phrase(song.phrases[i])};
        SequenceExample ex;
        ex.encoder = assemble_encoder_input(context, tail, static_cast<std::size_t>(config.encoder_context)).ids;
        const TokenSequence target = encode_phrase(clean);
        if (target.size() + 1 > static_cast<std::size_t>(config.decoder_context)) throw DataError("target too long");
        set_decoder_target(ex, target);
        out.push_back(std::move(ex));
        ++local.built;
      } catch (const DataError&) {
        ++local.skipped;
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

std::vector<PairExample> build_pair_examples(std::span<const Song> songs, const ModelConfig& config, PairPolicy policy,
                                             const ExampleOptions& options, BuildStats* stats) {
  BuildStats local;
  std::vector<PairExample> out;
  const std::vector<Song> shifted = shifted_songs(songs, options);
  if (shifted.size() < 2) throw DataError("pair examples need at least two songs");
  Rng rng(derive_seed(options.seed, kPairs));
  const auto limit = static_cast<std::size_t>(config.encoder_context);
  const int last_song = static_cast<int>(shifted.size()) - 1;
  for (std::size_t s = 0; s < shifted.size(); ++s) {
    const auto& phrases = shifted[s].phrases;
    for (std::size_t i = 0; i + 1 < phrases.size(); ++i) {
      const std::size_t j = policy == PairPolicy::consecutive
                                ? i + 1
                                : static_cast<std::size_t>(uniform_int(rng, static_cast<int>(i) + 1,
                                                                       static_cast<int>(phrases.size()) - 1));
      int other = uniform_int(rng, 0, last_song - 1);
      if (other >= static_cast<int>(s)) ++other;
      const auto& foreign = shifted[static_cast<std::size_t>(other)].phrases;
      const auto& b = foreign[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(foreign.size()) - 1))];
      try {
        out.push_back(PairExample{pair_input(phrases[i], phrases[j], limit), 1});
        ++local.built;
      } catch (const DataError&) {
        ++local.skipped;
      }
      try {
        out.push_back(PairExample{pair_input(phrases[i], b, limit), 0});
        ++local.built;
      } catch (const DataError&) {
        ++local.skipped;
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace yinyang::neural
