#include <doctest.h>

#include "yinyang/neural/training.hpp"
#include "yinyang/orchestrator.hpp"
#include "yinyang/synthetic.hpp"

using namespace yinyang;
using namespace yinyang::neural;

// Each phrase is cut to a random length so that neighbouring phrases say
// nothing about it and only the PhraseLength token does.
TEST_CASE("length conditioning steers decoded phrase length") {
  SyntheticOptions o;
  o.songs = 640;
  o.seed = 14;
  o.min_notes = 3;
  o.max_notes = 22;
  auto songs = synthetic_corpus(o);
  Rng cut(77);
  for (auto& song : songs) {
    for (auto& p : song.phrases) {
      p.notes.resize(static_cast<std::size_t>(uniform_int(cut, 3, static_cast<int>(p.notes.size()))));
      p.cadence = derive_cadence(p);
    }
  }
  const std::span<const Song> all(songs);

  ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.hidden = 64;
  c.intermediate = 128;
  c.encoder_context = 160;
  c.decoder_context = 96;
  c.dropout = 0.0;
  TrainConfig t;
  t.epochs = 40;
  t.learning_rate = 2e-3;
  t.seed = 5;
  t.max_context_phrases = 1;
  t.patience = 40;
  const auto trained = train_generator(all.first(600), all.subspan(600), c, t);
  NeuralGenerator gen(*trained.model);

  int same_bucket = 0, in_range = 0, total = 0;
  Rng rng(3);
  for (std::size_t s = 600; s < songs.size(); ++s) {
    for (int k = 0; k < 5; ++k) {
      PhraseRequest req;
      req.context = {songs[s].phrases[0]};
      req.conditional.key = songs[s].phrases[0].key;
      req.conditional.time = songs[s].phrases[0].time;
      req.conditional.target_length = uniform_int(rng, 9, 16);
      req.conditional.cadence = CadenceClass::other;
      SamplingParams p;
      p.seed = derive_seed(s, static_cast<std::uint64_t>(k));
      p.max_new_tokens = 95;
      const auto n = static_cast<int>(gen.propose(req, p).notes.size());
      same_bucket += length_bucket(static_cast<std::size_t>(n)) ==
                     length_bucket(static_cast<std::size_t>(req.conditional.target_length));
      in_range += n >= 9 && n <= 16;
      ++total;
    }
  }
  INFO("same bucket " << same_bucket << ", within 9-16 " << in_range << ", of " << total);
  CHECK(same_bucket >= 0.6 * total);
  CHECK(in_range >= 0.6 * total);
}
