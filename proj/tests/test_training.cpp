#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "support.hpp"
#include "yinyang/errors.hpp"
#include "yinyang/neural/sampling.hpp"
#include "yinyang/neural/training.hpp"
#include "yinyang/synthetic.hpp"

using namespace yinyang;
using namespace yinyang::neural;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.hidden = 32;
  c.intermediate = 64;
  c.encoder_context = 256;
  c.decoder_context = 96;
  c.dropout = 0.0;
  return c;
}

std::vector<Song> corpus(std::size_t n, std::uint64_t seed, int min_notes = 6, int max_notes = 10) {
  SyntheticOptions o;
  o.songs = n;
  o.seed = seed;
  o.min_notes = min_notes;
  o.max_notes = max_notes;
  return synthetic_corpus(o);
}

bool all_params_equal(Seq2Seq& a, Seq2Seq& b) {
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value != pb[i]->value) return false;
  }
  return true;
}

int id_of(const Token& t) { return Vocabulary::standard().id(t); }

// A generator trained once and shared by the sampling tests.
const Trained<Seq2Seq>& toy_generator() {
  static const Trained<Seq2Seq> trained = [] {
    const auto songs = corpus(40, 5);
    TrainConfig t;
    t.epochs = 3;
    t.learning_rate = 3e-3;
    t.seed = 1;
    const std::span<const Song> all(songs);
    return train_generator(all.first(32), all.subspan(32), small_config(), t);
  }();
  return trained;
}

}  // namespace

TEST_CASE("generator validation loss falls on a toy corpus and the log is written") {
  const auto& trained = toy_generator();
  const auto& r = trained.result;
  CHECK(r.best_validation_loss < r.initial_validation_loss);
  CHECK(r.best_epoch >= 1);
  CHECK(r.log.front().epoch == 0);
  CHECK(r.log.front().split == "validation");

  const auto songs = corpus(12, 6);
  const auto path = std::filesystem::temp_directory_path() / "yinyang_test_train.jsonl";
  TrainConfig t;
  t.epochs = 1;
  t.seed = 2;
  const std::span<const Song> all(songs);
  train_generator(all.first(10), all.subspan(10), small_config(), t, path);
  std::ifstream in(path);
  std::string line;
  std::vector<nlohmann::json> records;
  while (std::getline(in, line)) records.push_back(nlohmann::json::parse(line));
  REQUIRE(records.size() == 3);
  CHECK(records[1].at("split") == "train");
  CHECK(records[2].at("epoch") == 1);
  CHECK(records[2].contains("accuracy"));
}

TEST_CASE("zero epochs leave the initialization untouched") {
  const auto songs = corpus(6, 7);
  const auto val = build_generator_examples(songs, small_config(), {});
  Seq2Seq model(small_config(), Vocabulary::standard().size(), 4);
  Seq2Seq reference(small_config(), Vocabulary::standard().size(), 4);
  TrainConfig t;
  t.epochs = 0;
  const auto r = fit(model, [&](int) { return val; }, val, t);
  CHECK(r.epochs_run == 0);
  CHECK(r.best_epoch == 0);
  CHECK(all_params_equal(model, reference));
}

TEST_CASE("identical seeds and data give identical training runs") {
  const auto songs = corpus(10, 8);
  const std::span<const Song> all(songs);
  TrainConfig t;
  t.epochs = 2;
  t.learning_rate = 1e-3;
  t.seed = 42;
  t.batch_size = 4;
  auto a = train_generator(all.first(8), all.subspan(8), small_config(), t);
  auto b = train_generator(all.first(8), all.subspan(8), small_config(), t);
  REQUIRE(a.result.log.size() == b.result.log.size());
  for (std::size_t i = 0; i < a.result.log.size(); ++i) CHECK(a.result.log[i].loss == b.result.log[i].loss);
  CHECK(all_params_equal(*a.model, *b.model));
}

TEST_CASE("a non-finite loss aborts training") {
  const auto songs = corpus(4, 9);
  const auto val = build_generator_examples(songs, small_config(), {});
  Seq2Seq model(small_config(), Vocabulary::standard().size(), 1);
  model.parameters().back()->value(0, 0) = std::numeric_limits<float>::quiet_NaN();
  TrainConfig t;
  t.epochs = 1;
  CHECK_THROWS_AS(fit(model, [&](int) { return val; }, val, t), ModelError);
  TrainConfig bad;
  bad.learning_rate = 0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  CHECK(TrainConfig::from_json({{"epochs", 5}}).epochs == 5);
  CHECK(TrainConfig::from_json({{"epochs", 5}}).learning_rate == 1e-4);
}

TEST_CASE("generator examples look back at most four phrases") {
  const auto songs = corpus(5, 10, 6, 10);
  ExampleOptions o;
  const auto examples = build_generator_examples(songs, small_config(), o);
  const int sep = id_of(Token::separator());
  std::size_t k = 0;
  for (const auto& song : songs) {
    for (std::size_t n = 1; n < song.phrases.size(); ++n, ++k) {
      const auto& ex = examples.at(k);
      CHECK(static_cast<std::size_t>(std::count(ex.encoder.begin(), ex.encoder.end(), sep)) == std::min<std::size_t>(n, 4));
      const auto target = Vocabulary::standard().ids(encode_phrase(song.phrases[n]));
      CHECK(std::vector<int>(ex.target.begin(), ex.target.end() - 1) == target);
      CHECK(ex.target.back() == id_of(Token::end()));
      CHECK(ex.decoder_input.front() == id_of(Token::begin()));
      // The conditional prefix closes the encoder input.
      CHECK(ex.encoder.back() == id_of(Token::cadence(song.phrases[n].cadence)));
    }
  }
  CHECK(k == examples.size());
}

TEST_CASE("refiner examples carry tags and corrupted input but clean targets") {
  const auto songs = corpus(30, 11);
  BuildStats stats;
  ExampleOptions o;
  o.seed = 3;
  const auto examples = build_refiner_examples(songs, small_config(), RefinerTask::corruption, o, &stats);
  CHECK(stats.skipped == 0);
  const std::set<int> masks{id_of(Token::mask_pitch()), id_of(Token::mask_duration()), id_of(Token::mask_bar())};
  std::size_t with_mask_input = 0;
  for (const auto& ex : examples) {
    for (int id : ex.target) CHECK(masks.count(id) == 0);
    bool tagged = false;
    for (int id : ex.encoder) {
      tagged = tagged || Vocabulary::standard().token(id).kind == TokenKind::corruption;
      if (masks.count(id)) ++with_mask_input;
    }
    CHECK(tagged);
  }
  CHECK(with_mask_input > 0);

  // Copy task: the shown phrase is the target itself and no tag is present.
  const auto copies = build_refiner_examples(songs, small_config(), RefinerTask::copy, o);
  for (const auto& ex : copies) {
    const std::vector<int> body(ex.target.begin(), ex.target.end() - 1);
    CHECK(std::equal(body.rbegin(), body.rend(), ex.encoder.rbegin()));
    for (int id : ex.encoder) CHECK(Vocabulary::standard().token(id).kind != TokenKind::corruption);
  }
}

TEST_CASE("pair examples: same-song positives, cross-song negatives") {
  const auto songs = corpus(6, 12);
  const auto config = small_config();
  const auto limit = static_cast<std::size_t>(config.encoder_context);
  const int sep = id_of(Token::separator());
  const auto b_part = [&](const std::vector<int>& ids) {
    const auto it = std::find(ids.begin(), ids.end(), sep);
    return std::vector<int>(it + 1, ids.end() - 1);
  };
  const auto song_of = [&](const std::vector<int>& b_ids) {
    std::set<std::size_t> owners;
    for (std::size_t s = 0; s < songs.size(); ++s) {
      for (const auto& p : songs[s].phrases) {
        if (Vocabulary::standard().ids(encode_phrase(p)) == b_ids) owners.insert(s);
      }
    }
    return owners;
  };

  for (auto policy : {PairPolicy::consecutive, PairPolicy::same_song}) {
    const auto pairs = build_pair_examples(songs, config, policy, {});
    std::size_t k = 0, positives = 0;
    for (std::size_t s = 0; s < songs.size(); ++s) {
      const auto& phrases = songs[s].phrases;
      for (std::size_t i = 0; i + 1 < phrases.size(); ++i) {
        const auto& pos = pairs.at(k++);
        const auto& neg = pairs.at(k++);
        CHECK(pos.label == 1);
        CHECK(neg.label == 0);
        ++positives;
        if (policy == PairPolicy::consecutive) {
          CHECK(pos.ids == pair_input(phrases[i], phrases[i + 1], limit));
        } else {
          bool found = false;
          for (std::size_t j = i + 1; j < phrases.size(); ++j) found = found || pos.ids == pair_input(phrases[i], phrases[j], limit);
          CHECK(found);
        }
        CHECK(song_of(b_part(pos.ids)).count(s) == 1);
        const auto owners = song_of(b_part(neg.ids));
        CHECK_FALSE(owners.empty());
        CHECK(owners.count(s) == 0);
      }
    }
    CHECK(2 * positives == pairs.size());
  }
}

TEST_CASE("sampling: determinism and the greedy limit") {
  const auto& model = *toy_generator().model;
  const auto songs = corpus(3, 13);
  const auto examples = build_generator_examples(songs, model.config(), {});
  const Phrase& target = songs[0].phrases[1];
  SamplingParams p;
  p.seed = 77;
  const auto a = sample_phrase(model, examples[0].encoder, target.key, target.time, p);
  const auto b = sample_phrase(model, examples[0].encoder, target.key, target.time, p);
  CHECK(a.tokens == b.tokens);
  CHECK(a.phrase == b.phrase);

  const auto greedy = greedy_phrase(model, examples[0].encoder, target.key, target.time);
  for (const auto& ex : examples) {
    p.temperature = 1e-6;
    const auto cold = sample_phrase(model, ex.encoder, target.key, target.time, p);
    const auto g = greedy_phrase(model, ex.encoder, target.key, target.time);
    CHECK(cold.tokens == g.tokens);
  }
  CHECK_FALSE(greedy.tokens.empty());

  const auto dist = next_token_distribution(model, examples[0].encoder, std::vector<int>{id_of(Token::begin())});
  CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(dist.minCoeff() >= 0.0);
}
