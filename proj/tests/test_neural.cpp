#include <doctest.h>

#include <filesystem>

#include "support.hpp"
#include "yinyang/errors.hpp"
#include "yinyang/neural/checkpoint.hpp"
#include "yinyang/neural/data.hpp"
#include "yinyang/neural/optimizer.hpp"
#include "yinyang/neural/sampling.hpp"

using namespace yinyang;
using namespace yinyang::neural;

namespace {

ModelConfig tiny(int hidden = 16) {
  ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.hidden = hidden;
  c.intermediate = 2 * hidden;
  c.encoder_context = 24;
  c.decoder_context = 16;
  c.dropout = 0.0;
  return c;
}

std::vector<int> random_ids(Rng& rng, int n, int vocab) {
  std::vector<int> ids;
  for (int i = 0; i < n; ++i) ids.push_back(uniform_int(rng, 0, vocab - 1));
  return ids;
}

// Central differences on a handful of entries from every parameter tensor,
// compared against the accumulated analytic gradient.
template <typename Model, typename Example>
void check_gradients(Model& model, const Example& ex, double loss_of_model(const Model&, const Example&)) {
  auto params = model.parameters();
  for (auto* p : params) p->zero_grad();
  model.forward_backward(ex, 1.0, nullptr);
  Rng rng(5);
  const double h = 1e-5;
  for (auto* p : params) {
    double worst = 0;
    for (int k = 0; k < 6; ++k) {
      const auto idx = static_cast<Eigen::Index>(uniform_int(rng, 0, static_cast<int>(p->value.size()) - 1));
      double& w = p->value.data()[idx];
      const double saved = w;
      w = saved + h;
      const double up = loss_of_model(model, ex);
      w = saved - h;
      const double down = loss_of_model(model, ex);
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad.data()[idx];
      worst = std::max(worst, std::abs(numeric - analytic) / std::max(1.0, std::abs(numeric) + std::abs(analytic)));
    }
    INFO(p->name);
    CHECK(worst < 1e-3);
  }
}

double seq_loss(const Seq2SeqTransformer<double>& m, const SequenceExample& ex) { return m.evaluate(ex).loss_sum; }
double cls_loss(const EncoderClassifier<double>& m, const PairExample& ex) { return m.evaluate(ex).loss_sum; }

SequenceExample random_example(Rng& rng, int vocab) {
  SequenceExample ex;
  ex.encoder = random_ids(rng, 9, vocab);
  ex.decoder_input = random_ids(rng, 7, vocab);
  ex.target = random_ids(rng, 7, vocab);
  return ex;
}

}  // namespace

TEST_CASE("softmax rows sum to one and are shift invariant") {
  Rng rng(1);
  Matrix<double> m(4, 9);
  fill_normal(m, rng, 3.0);
  Matrix<double> shifted = m.array() + 100.0;
  softmax_rows(m);
  softmax_rows(shifted);
  for (Eigen::Index r = 0; r < m.rows(); ++r) CHECK(m.row(r).sum() == doctest::Approx(1.0));
  CHECK((m - shifted).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("seq2seq gradients match finite differences in double precision") {
  Rng rng(2);
  Seq2SeqTransformer<double> model(tiny(), 23, 7);
  check_gradients<Seq2SeqTransformer<double>, SequenceExample>(model, random_example(rng, 23), seq_loss);
}

TEST_CASE("classifier gradients match finite differences in double precision") {
  Rng rng(3);
  EncoderClassifier<double> model(tiny(), 23, 8);
  for (int label : {0, 1}) {
    check_gradients<EncoderClassifier<double>, PairExample>(model, PairExample{random_ids(rng, 11, 23), label},
                                                            cls_loss);
  }
}

TEST_CASE("construction is deterministic in the seed") {
  Rng rng(4);
  const auto ex = random_example(rng, 30);
  Seq2Seq a(tiny(), 30, 11), b(tiny(), 30, 11), c(tiny(), 30, 12);
  CHECK(a.logits(ex.encoder, ex.decoder_input) == b.logits(ex.encoder, ex.decoder_input));
  CHECK(a.logits(ex.encoder, ex.decoder_input) != c.logits(ex.encoder, ex.decoder_input));
}

TEST_CASE("incremental decoding matches teacher-forced logits") {
  Rng rng(6);
  Seq2Seq model(tiny(32), 40, 3);
  const auto ex = random_example(rng, 40);
  const Matrix<float> full = model.logits(ex.encoder, ex.decoder_input);
  auto state = model.start_decoding(ex.encoder);
  for (std::size_t t = 0; t < ex.decoder_input.size(); ++t) {
    const RowVector<float> row = model.step(state, ex.decoder_input[t]);
    CHECK((row - full.row(static_cast<Eigen::Index>(t))).cwiseAbs().maxCoeff() < 1e-4f);
  }
  // Past the context the model refuses rather than wrapping.
  auto long_state = model.start_decoding(ex.encoder);
  for (int t = 0; t < 16; ++t) model.step(long_state, 1);
  CHECK_THROWS_AS(model.step(long_state, 1), DataError);
}

TEST_CASE("inputs beyond the context or vocabulary are rejected") {
  Seq2Seq model(tiny(), 20, 1);
  const std::vector<int> too_long(25, 1);
  const std::vector<int> ok{1, 2, 3};
  CHECK_THROWS_AS(model.logits(too_long, ok), DataError);
  CHECK_THROWS_AS(model.logits(ok, std::vector<int>{1, 20}), DataError);
  CHECK_THROWS_AS(model.logits(std::vector<int>{}, ok), DataError);
  ModelConfig bad = tiny();
  bad.heads = 3;
  CHECK_THROWS_AS(Seq2Seq(bad, 20, 1), DataError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = std::filesystem::temp_directory_path() / "yinyang_test_ckpt";
  std::filesystem::remove_all(dir);
  const int vocab = Vocabulary::standard().size();
  Seq2Seq model(tiny(), vocab, 9);
  save_seq2seq(dir / "gen.bin", model, ModelKind::refiner, {{"note", "x"}});
  CheckpointInfo info;
  auto loaded = load_seq2seq(dir / "gen.bin", &info);
  CHECK(info.kind == ModelKind::refiner);
  CHECK(info.config == model.config());
  CHECK(info.vocabulary == "remi-v1");
  CHECK(info.training.at("note") == "x");
  auto a = model.parameters();
  auto b = loaded->parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value == b[i]->value);
  }
  CHECK_THROWS_AS(load_classifier(dir / "gen.bin"), DataError);

  Classifier cls(tiny(), vocab, 4);
  save_classifier(dir / "sd.bin", cls, ModelKind::sd);
  auto cls_loaded = load_classifier(dir / "sd.bin");
  const std::vector<int> ids{1, 5, 9, 3, 2};
  CHECK(cls_loaded->logit(ids) == cls.logit(ids));
  CHECK_THROWS(load_seq2seq(dir / "missing.bin"));
}

TEST_CASE("AdamW skips decay on biases and norms and clipping bounds the norm") {
  Param<float> w("w", 1, 2), b("b", 1, 2, false);
  w.value.setConstant(1.0f);
  b.value.setConstant(1.0f);
  AdamW<float> opt({&w, &b}, {0.1, 0.9, 0.999, 1e-8, 0.5});
  opt.step();  // zero gradients: only decay moves anything
  CHECK(w.value(0, 0) == doctest::Approx(0.95));
  CHECK(b.value(0, 0) == doctest::Approx(1.0));

  w.grad.setConstant(3.0f);
  b.grad.setConstant(4.0f);
  const double before = clip_grad_norm<float>({&w, &b}, 1.0);
  CHECK(before == doctest::Approx(std::sqrt(50.0)));
  CHECK(std::sqrt(w.grad.squaredNorm() + b.grad.squaredNorm()) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("a single example can be memorized") {
  Rng rng(10);
  Seq2Seq model(tiny(32), 30, 2);
  const auto ex = random_example(rng, 30);
  AdamW<float> opt(model.parameters(), {1e-2, 0.9, 0.999, 1e-8, 0.0});
  const double initial = model.evaluate(ex).mean_loss();
  for (int step = 0; step < 150; ++step) {
    opt.zero_grad();
    model.forward_backward(ex, 1.0f / 7, nullptr);
    opt.step();
  }
  const auto stats = model.evaluate(ex);
  CHECK(stats.mean_loss() < 0.05 * initial);
  CHECK(stats.accuracy() == 1.0);
}

TEST_CASE("encoder input drops the oldest context first and never cuts the tail") {
  const TokenSequence a(5, Token::bar()), b(4, Token::pitch(60)), c(3, Token::pitch(62));
  const TokenSequence tail(6, Token::position(0));
  const std::vector<TokenSequence> ctx{a, b, c};
  const auto& v = Vocabulary::standard();

  const auto all = assemble_encoder_input(ctx, tail, 100);
  CHECK(all.ids.size() == 5 + 4 + 3 + 3 + 6);
  CHECK(all.dropped_phrases == 0);

  const auto two = assemble_encoder_input(ctx, tail, 16);
  CHECK(two.ids.size() == 4 + 3 + 2 + 6);
  CHECK(two.dropped_phrases == 1);
  CHECK(two.ids.front() == v.id(Token::pitch(60)));

  // Only part of the newest phrase fits: its oldest tokens go.
  const auto partial = assemble_encoder_input(ctx, tail, 9);
  CHECK(partial.ids.size() == 9);
  CHECK(partial.dropped_phrases == 2);
  CHECK(partial.dropped_tokens == 6 + 5 + 1);
  CHECK(partial.ids[0] == v.id(Token::pitch(62)));
  CHECK(partial.ids[2] == v.id(Token::separator()));
  for (std::size_t i = 3; i < 9; ++i) CHECK(partial.ids[i] == v.id(Token::position(0)));

  CHECK_THROWS_AS(assemble_encoder_input(ctx, tail, 6), DataError);
  CHECK(assemble_encoder_input({}, tail, 6).ids.size() == 6);
}

TEST_CASE("pair input trims the first phrase from the left") {
  Rng rng(14);
  const Phrase a = testing::random_phrase(rng, {8, 8, 12, 11, false});
  const Phrase b = testing::random_phrase(rng, {3, 3, 12, 11, false});
  const auto ta = encode_phrase(a), tb = encode_phrase(b);
  const auto& v = Vocabulary::standard();
  const auto full = pair_input(a, b, 200);
  CHECK(full.size() == ta.size() + tb.size() + 3);
  CHECK(full.front() == v.id(Token::begin()));
  CHECK(full.back() == v.id(Token::end()));
  const std::size_t limit = tb.size() + 3 + 4;
  const auto cut = pair_input(a, b, limit);
  CHECK(cut.size() == limit);
  CHECK(cut[1] == v.id(ta[ta.size() - 4]));
  CHECK_THROWS_AS(pair_input(a, b, tb.size() + 3), DataError);
}

TEST_CASE("classifier outputs a probability and an embedding of model width") {
  Rng rng(15);
  Classifier model(tiny(), Vocabulary::standard().size(), 6);
  for (int i = 0; i < 20; ++i) {
    const Phrase a = testing::random_phrase(rng, {1, 3, 12, 11, false});
    const Phrase b = testing::random_phrase(rng, {1, 3, 12, 11, false});
    const double p = score_pair(model, a, b);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    const auto e = embed_phrase_pair(model, a, b);
    CHECK(e.size() == 16);
    CHECK(e.allFinite());
  }
}

TEST_CASE("sampling respects the grammar even for an untrained model") {
  const ModelConfig c = [] {
    ModelConfig m = tiny();
    m.decoder_context = 64;
    return m;
  }();
  Seq2Seq model(c, Vocabulary::standard().size(), 21);
  const auto& v = Vocabulary::standard();
  const std::vector<int> enc{v.id(Token::key({})), v.id(Token::time({})), v.id(Token::phrase_length(3)),
                             v.id(Token::cadence(CadenceClass::other))};
  SamplingParams params;
  params.max_new_tokens = 40;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    params.seed = seed;
    const auto r = sample_phrase(model, enc, {}, {}, params);
    RemiGrammar g(TimeSignature{});
    for (const auto& t : r.tokens) {
      REQUIRE(g.allows(t));
      g.accept(t);
    }
    CHECK(r.phrase.is_concrete());
    CHECK(r.phrase.notes.size() == g.notes());
  }
  params.temperature = 0;
  CHECK_THROWS_AS(sample_phrase(model, enc, {}, {}, params), DataError);
}
