#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "yinyang/errors.hpp"
#include "yinyang/neural/layers.hpp"

namespace yinyang::neural {

struct ModelConfig {
  int layers = 2;
  int heads = 2;
  int hidden = 128;
  int intermediate = 512;
  int encoder_context = 512;
  int decoder_context = 256;  // unused by encoder-only models
  double dropout = 0.1;

  // Throws DataError unless hidden % heads == 0 and both contexts >= 16.
  void validate() const;

  static ModelConfig desk();
  // Full-size settings: 4 layers, 4 heads, hidden 512, intermediate 2048.
  static ModelConfig full_generator();  // encoder 2048, decoder 512
  static ModelConfig full_refiner();    // encoder 512, decoder 512
  static ModelConfig full_classifier(); // encoder-only, 1024

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

struct LossStats {
  double loss_sum = 0;  // summed over scored positions
  std::size_t count = 0;
  std::size_t correct = 0;

  LossStats& operator+=(const LossStats& o) {
    loss_sum += o.loss_sum;
    count += o.count;
    correct += o.correct;
    return *this;
  }
  double mean_loss() const { return count ? loss_sum / static_cast<double>(count) : 0.0; }
  double accuracy() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

template <typename Scalar>
struct EncoderLayerCache {
  LayerNormCache<Scalar> norm1, norm2;
  AttentionCache<Scalar> attention;
  FeedForwardCache<Scalar> ffn;
  Matrix<Scalar> drop1, drop2;
};

template <typename Scalar>
struct EncoderLayer {
  LayerNorm<Scalar> norm1, norm2;
  MultiHeadAttention<Scalar> attention;
  FeedForward<Scalar> ffn;

  EncoderLayer() = default;
  EncoderLayer(const std::string& name, const ModelConfig& c, Rng& rng)
      : norm1(name + ".norm1", c.hidden),
        norm2(name + ".norm2", c.hidden),
        attention(name + ".attention", c.hidden, c.heads, rng),
        ffn(name + ".ffn", c.hidden, c.intermediate, rng) {}

  Matrix<Scalar> forward(const Matrix<Scalar>& x, double p, Rng* rng, EncoderLayerCache<Scalar>* c) const {
    const Matrix<Scalar> a = norm1.forward(x, c ? &c->norm1 : nullptr);
    const Matrix<Scalar> h = dropout(attention.forward(a, a, false, c ? &c->attention : nullptr), p, rng,
                                     c ? &c->drop1 : nullptr);
    const Matrix<Scalar> x1 = x + h;
    const Matrix<Scalar> b = norm2.forward(x1, c ? &c->norm2 : nullptr);
    const Matrix<Scalar> f = dropout(ffn.forward(b, c ? &c->ffn : nullptr), p, rng, c ? &c->drop2 : nullptr);
    return x1 + f;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const EncoderLayerCache<Scalar>& c) {
    Matrix<Scalar> dx1 = dy + norm2.backward(ffn.backward(dropout_backward(dy, c.drop2), c.ffn), c.norm2);
    auto [dq, dkv] = attention.backward(dropout_backward(dx1, c.drop1), c.attention);
    return dx1 + norm1.backward(dq + dkv, c.norm1);
  }

  void collect(ParamList<Scalar>& out) {
    norm1.collect(out);
    attention.collect(out);
    norm2.collect(out);
    ffn.collect(out);
  }
};

template <typename Scalar>
struct DecoderLayerCache {
  LayerNormCache<Scalar> norm1, norm2, norm3;
  AttentionCache<Scalar> self_attention, cross_attention;
  FeedForwardCache<Scalar> ffn;
  Matrix<Scalar> drop1, drop2, drop3;
};

template <typename Scalar>
struct DecoderLayer {
  LayerNorm<Scalar> norm1, norm2, norm3;
  MultiHeadAttention<Scalar> self_attention, cross_attention;
  FeedForward<Scalar> ffn;

  DecoderLayer() = default;
  DecoderLayer(const std::string& name, const ModelConfig& c, Rng& rng)
      : norm1(name + ".norm1", c.hidden),
        norm2(name + ".norm2", c.hidden),
        norm3(name + ".norm3", c.hidden),
        self_attention(name + ".self_attention", c.hidden, c.heads, rng),
        cross_attention(name + ".cross_attention", c.hidden, c.heads, rng),
        ffn(name + ".ffn", c.hidden, c.intermediate, rng) {}

  Matrix<Scalar> forward(const Matrix<Scalar>& x, const Matrix<Scalar>& memory, double p, Rng* rng,
                         DecoderLayerCache<Scalar>* c) const {
    const Matrix<Scalar> a = norm1.forward(x, c ? &c->norm1 : nullptr);
    const Matrix<Scalar> x1 =
        x + dropout(self_attention.forward(a, a, true, c ? &c->self_attention : nullptr), p, rng, c ? &c->drop1 : nullptr);
    const Matrix<Scalar> b = norm2.forward(x1, c ? &c->norm2 : nullptr);
    const Matrix<Scalar> x2 = x1 + dropout(cross_attention.forward(b, memory, false, c ? &c->cross_attention : nullptr),
                                           p, rng, c ? &c->drop2 : nullptr);
    const Matrix<Scalar> d = norm3.forward(x2, c ? &c->norm3 : nullptr);
    return x2 + dropout(ffn.forward(d, c ? &c->ffn : nullptr), p, rng, c ? &c->drop3 : nullptr);
  }

  // Accumulates into dmemory; returns d input.
  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const DecoderLayerCache<Scalar>& c, Matrix<Scalar>& dmemory) {
    Matrix<Scalar> dx2 = dy + norm3.backward(ffn.backward(dropout_backward(dy, c.drop3), c.ffn), c.norm3);
    auto [dq_cross, dmem] = cross_attention.backward(dropout_backward(dx2, c.drop2), c.cross_attention);
    dmemory += dmem;
    Matrix<Scalar> dx1 = dx2 + norm2.backward(dq_cross, c.norm2);
    auto [dq, dkv] = self_attention.backward(dropout_backward(dx1, c.drop1), c.self_attention);
    return dx1 + norm1.backward(dq + dkv, c.norm1);
  }

  RowVector<Scalar> step(const RowVector<Scalar>& x, KeyValueCache<Scalar>& self_kv,
                         const KeyValueCache<Scalar>& cross_kv) const {
    const RowVector<Scalar> a = norm1.forward(Matrix<Scalar>(x), nullptr);
    self_attention.append(self_kv, a);
    const RowVector<Scalar> x1 = x + self_attention.attend_row(a, self_kv);
    const RowVector<Scalar> b = norm2.forward(Matrix<Scalar>(x1), nullptr);
    const RowVector<Scalar> x2 = x1 + cross_attention.attend_row(b, cross_kv);
    const Matrix<Scalar> d = norm3.forward(Matrix<Scalar>(x2), nullptr);
    return x2 + RowVector<Scalar>(ffn.forward(d, nullptr));
  }

  void collect(ParamList<Scalar>& out) {
    norm1.collect(out);
    self_attention.collect(out);
    norm2.collect(out);
    cross_attention.collect(out);
    norm3.collect(out);
    ffn.collect(out);
  }
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> embed(const Param<Scalar>& tokens, const Param<Scalar>& positions, std::span<const int> ids) {
  Matrix<Scalar> x(static_cast<Eigen::Index>(ids.size()), tokens.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x.row(r) = tokens.value.row(ids[i]) + positions.value.row(r);
  }
  return x;
}

template <typename Scalar>
void embed_backward(Param<Scalar>& tokens, Param<Scalar>& positions, std::span<const int> ids, const Matrix<Scalar>& dx) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    tokens.grad.row(ids[i]) += dx.row(r);
    positions.grad.row(r) += dx.row(r);
  }
}

inline void check_ids(std::span<const int> ids, int vocab, std::size_t context, const char* what) {
  if (ids.empty()) throw DataError(std::string(what) + " sequence is empty");
  if (ids.size() > context) throw DataError(std::string(what) + " sequence exceeds the model context");
  for (int id : ids) {
    if (id < 0 || id >= vocab) throw DataError(std::string(what) + " token id outside the vocabulary");
  }
}

}  // namespace detail

struct SequenceExample {
  std::vector<int> encoder;
  std::vector<int> decoder_input;  // BeginSeq + target[:-1]
  std::vector<int> target;
};

// Pre-norm encoder-decoder transformer with learned positions and a token
// embedding shared by both stacks.
template <typename Scalar>
class Seq2SeqTransformer {
 public:
  struct DecodingState {
    std::vector<KeyValueCache<Scalar>> self;
    std::vector<KeyValueCache<Scalar>> cross;
    Eigen::Index position = 0;
  };

  Seq2SeqTransformer(const ModelConfig& config, int vocab_size, std::uint64_t seed) : config_(config), vocab_(vocab_size) {
    config.validate();
    Rng rng(mix_seed(seed));
    const double embed_std = 1.0 / std::sqrt(static_cast<double>(config.hidden));
    token_embedding_ = Param<Scalar>("token_embedding", vocab_size, config.hidden);
    fill_normal(token_embedding_.value, rng, embed_std);
    encoder_positions_ = Param<Scalar>("encoder_positions", config.encoder_context, config.hidden);
    fill_normal(encoder_positions_.value, rng, embed_std);
    decoder_positions_ = Param<Scalar>("decoder_positions", config.decoder_context, config.hidden);
    fill_normal(decoder_positions_.value, rng, embed_std);
    for (int l = 0; l < config.layers; ++l) encoder_.emplace_back("encoder." + std::to_string(l), config, rng);
    encoder_norm_ = LayerNorm<Scalar>("encoder.norm", config.hidden);
    for (int l = 0; l < config.layers; ++l) decoder_.emplace_back("decoder." + std::to_string(l), config, rng);
    decoder_norm_ = LayerNorm<Scalar>("decoder.norm", config.hidden);
    output_ = Linear<Scalar>("output", config.hidden, vocab_size, rng);
  }

  const ModelConfig& config() const { return config_; }
  int vocab_size() const { return vocab_; }

  ParamList<Scalar> parameters() {
    ParamList<Scalar> out{&token_embedding_, &encoder_positions_, &decoder_positions_};
    for (auto& l : encoder_) l.collect(out);
    encoder_norm_.collect(out);
    for (auto& l : decoder_) l.collect(out);
    decoder_norm_.collect(out);
    output_.collect(out);
    return out;
  }

  Matrix<Scalar> encode(std::span<const int> encoder_ids) const {
    detail::check_ids(encoder_ids, vocab_, static_cast<std::size_t>(config_.encoder_context), "encoder");
    Matrix<Scalar> x = detail::embed(token_embedding_, encoder_positions_, encoder_ids);
    for (const auto& layer : encoder_) x = layer.forward(x, 0.0, nullptr, nullptr);
    return encoder_norm_.forward(x, nullptr);
  }

  // Teacher-forced logits, one row per decoder input position.
  Matrix<Scalar> logits(std::span<const int> encoder_ids, std::span<const int> decoder_ids) const {
    detail::check_ids(decoder_ids, vocab_, static_cast<std::size_t>(config_.decoder_context), "decoder");
    const Matrix<Scalar> memory = encode(encoder_ids);
    Matrix<Scalar> y = detail::embed(token_embedding_, decoder_positions_, decoder_ids);
    for (const auto& layer : decoder_) y = layer.forward(y, memory, 0.0, nullptr, nullptr);
    return output_.forward(decoder_norm_.forward(y, nullptr));
  }

  LossStats evaluate(const SequenceExample& ex) const {
    const Matrix<Scalar> out = logits(ex.encoder, ex.decoder_input);
    return score_rows(out, ex.target, nullptr, Scalar(0));
  }

  // Cross-entropy summed over target positions; gradients of grad_scale * sum
  // are accumulated into the parameters.
  LossStats forward_backward(const SequenceExample& ex, Scalar grad_scale, Rng* dropout_rng) {
    detail::check_ids(ex.encoder, vocab_, static_cast<std::size_t>(config_.encoder_context), "encoder");
    detail::check_ids(ex.decoder_input, vocab_, static_cast<std::size_t>(config_.decoder_context), "decoder");
    if (ex.target.size() != ex.decoder_input.size()) throw DataError("target and decoder input lengths differ");
    const double p = dropout_rng ? config_.dropout : 0.0;

    std::vector<EncoderLayerCache<Scalar>> enc_cache(encoder_.size());
    Matrix<Scalar> x = detail::embed(token_embedding_, encoder_positions_, ex.encoder);
    for (std::size_t l = 0; l < encoder_.size(); ++l) x = encoder_[l].forward(x, p, dropout_rng, &enc_cache[l]);
    LayerNormCache<Scalar> enc_norm_cache;
    const Matrix<Scalar> memory = encoder_norm_.forward(x, &enc_norm_cache);

    std::vector<DecoderLayerCache<Scalar>> dec_cache(decoder_.size());
    Matrix<Scalar> y = detail::embed(token_embedding_, decoder_positions_, ex.decoder_input);
    for (std::size_t l = 0; l < decoder_.size(); ++l) y = decoder_[l].forward(y, memory, p, dropout_rng, &dec_cache[l]);
    LayerNormCache<Scalar> dec_norm_cache;
    const Matrix<Scalar> normed = decoder_norm_.forward(y, &dec_norm_cache);
    const Matrix<Scalar> out = output_.forward(normed);

    Matrix<Scalar> dlogits;
    const LossStats stats = score_rows(out, ex.target, &dlogits, grad_scale);

    Matrix<Scalar> dy = decoder_norm_.backward(output_.backward(normed, dlogits), dec_norm_cache);
    Matrix<Scalar> dmemory = Matrix<Scalar>::Zero(memory.rows(), memory.cols());
    for (std::size_t l = decoder_.size(); l-- > 0;) dy = decoder_[l].backward(dy, dec_cache[l], dmemory);
    detail::embed_backward(token_embedding_, decoder_positions_, ex.decoder_input, dy);

    Matrix<Scalar> dx = encoder_norm_.backward(dmemory, enc_norm_cache);
    for (std::size_t l = encoder_.size(); l-- > 0;) dx = encoder_[l].backward(dx, enc_cache[l]);
    detail::embed_backward(token_embedding_, encoder_positions_, ex.encoder, dx);
    return stats;
  }

  DecodingState start_decoding(std::span<const int> encoder_ids) const {
    const Matrix<Scalar> memory = encode(encoder_ids);
    DecodingState state;
    for (const auto& layer : decoder_) {
      state.cross.push_back(layer.cross_attention.project_memory(memory));
      KeyValueCache<Scalar> self;
      self.k.resize(std::min<Eigen::Index>(64, config_.decoder_context), config_.hidden);
      self.v.resize(self.k.rows(), config_.hidden);
      state.self.push_back(std::move(self));
    }
    return state;
  }

  // Feeds one decoder token and returns next-token logits.
  RowVector<Scalar> step(DecodingState& state, int token) const {
    if (state.position >= config_.decoder_context) throw DataError("decoder context exhausted");
    if (token < 0 || token >= vocab_) throw DataError("decoder token id outside the vocabulary");
    RowVector<Scalar> x = token_embedding_.value.row(token) + decoder_positions_.value.row(state.position);
    for (std::size_t l = 0; l < decoder_.size(); ++l) x = decoder_[l].step(x, state.self[l], state.cross[l]);
    ++state.position;
    const Matrix<Scalar> normed = decoder_norm_.forward(Matrix<Scalar>(x), nullptr);
    return output_.forward(normed);
  }

 private:
  static LossStats score_rows(const Matrix<Scalar>& out, const std::vector<int>& target, Matrix<Scalar>* grad,
                              Scalar grad_scale) {
    LossStats stats;
    if (grad) grad->resize(out.rows(), out.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const Scalar top = out.row(r).maxCoeff();
      RowVector<Scalar> e = (out.row(r).array() - top).exp();
      const Scalar z = e.sum();
      const int t = target[static_cast<std::size_t>(r)];
      stats.loss_sum += static_cast<double>(std::log(z) - (out(r, t) - top));
      ++stats.count;
      Eigen::Index arg = 0;
      out.row(r).maxCoeff(&arg);
      if (arg == t) ++stats.correct;
      if (grad) {
        grad->row(r) = e / z * grad_scale;
        (*grad)(r, t) -= grad_scale;
      }
    }
    return stats;
  }

  ModelConfig config_;
  int vocab_;
  Param<Scalar> token_embedding_, encoder_positions_, decoder_positions_;
  std::vector<EncoderLayer<Scalar>> encoder_;
  LayerNorm<Scalar> encoder_norm_;
  std::vector<DecoderLayer<Scalar>> decoder_;
  LayerNorm<Scalar> decoder_norm_;
  Linear<Scalar> output_;
};

struct PairExample {
  std::vector<int> ids;  // BeginSeq A SeparatorPhrase B EndSeq
  int label = 0;
};

// Encoder-only binary classifier; the logit is read from the first position.
template <typename Scalar>
class EncoderClassifier {
 public:
  EncoderClassifier(const ModelConfig& config, int vocab_size, std::uint64_t seed) : config_(config), vocab_(vocab_size) {
    config.validate();
    Rng rng(mix_seed(seed));
    const double embed_std = 1.0 / std::sqrt(static_cast<double>(config.hidden));
    token_embedding_ = Param<Scalar>("token_embedding", vocab_size, config.hidden);
    fill_normal(token_embedding_.value, rng, embed_std);
    positions_ = Param<Scalar>("positions", config.encoder_context, config.hidden);
    fill_normal(positions_.value, rng, embed_std);
    for (int l = 0; l < config.layers; ++l) layers_.emplace_back("encoder." + std::to_string(l), config, rng);
    norm_ = LayerNorm<Scalar>("encoder.norm", config.hidden);
    head_ = Linear<Scalar>("head", config.hidden, 1, rng);
  }

  const ModelConfig& config() const { return config_; }
  int vocab_size() const { return vocab_; }

  ParamList<Scalar> parameters() {
    ParamList<Scalar> out{&token_embedding_, &positions_};
    for (auto& l : layers_) l.collect(out);
    norm_.collect(out);
    head_.collect(out);
    return out;
  }

  // Final-layer (normalized) states, one row per position.
  Matrix<Scalar> hidden_states(std::span<const int> ids) const {
    detail::check_ids(ids, vocab_, static_cast<std::size_t>(config_.encoder_context), "classifier");
    Matrix<Scalar> x = detail::embed(token_embedding_, positions_, ids);
    for (const auto& layer : layers_) x = layer.forward(x, 0.0, nullptr, nullptr);
    return norm_.forward(x, nullptr);
  }

  Scalar logit(std::span<const int> ids) const {
    const Matrix<Scalar> h = hidden_states(ids);
    return head_.forward_row(h.row(0))(0);
  }

  Scalar probability(std::span<const int> ids) const { return sigmoid(logit(ids)); }

  RowVector<Scalar> mean_pooled(std::span<const int> ids) const { return hidden_states(ids).colwise().mean(); }

  LossStats evaluate(const PairExample& ex) const {
    return score(logit(ex.ids), ex.label);
  }

  // Binary cross-entropy; gradients of grad_scale * loss are accumulated.
  LossStats forward_backward(const PairExample& ex, Scalar grad_scale, Rng* dropout_rng) {
    detail::check_ids(ex.ids, vocab_, static_cast<std::size_t>(config_.encoder_context), "classifier");
    const double p = dropout_rng ? config_.dropout : 0.0;
    std::vector<EncoderLayerCache<Scalar>> caches(layers_.size());
    Matrix<Scalar> x = detail::embed(token_embedding_, positions_, ex.ids);
    for (std::size_t l = 0; l < layers_.size(); ++l) x = layers_[l].forward(x, p, dropout_rng, &caches[l]);
    LayerNormCache<Scalar> norm_cache;
    const Matrix<Scalar> h = norm_.forward(x, &norm_cache);
    const Matrix<Scalar> first = h.topRows(1);
    const Scalar z = head_.forward(first)(0, 0);
    const LossStats stats = score(z, ex.label);

    Matrix<Scalar> dz(1, 1);
    dz(0, 0) = (sigmoid(z) - static_cast<Scalar>(ex.label)) * grad_scale;
    Matrix<Scalar> dh = Matrix<Scalar>::Zero(h.rows(), h.cols());
    dh.topRows(1) = head_.backward(first, dz);
    Matrix<Scalar> dx = norm_.backward(dh, norm_cache);
    for (std::size_t l = layers_.size(); l-- > 0;) dx = layers_[l].backward(dx, caches[l]);
    detail::embed_backward(token_embedding_, positions_, ex.ids, dx);
    return stats;
  }

  static Scalar sigmoid(Scalar z) { return Scalar(1) / (Scalar(1) + std::exp(-z)); }

 private:
  static LossStats score(Scalar z, int label) {
    LossStats stats;
    // log(1 + exp(-z)) for label 1, log(1 + exp(z)) for label 0, computed stably.
    const double signed_z = label ? static_cast<double>(z) : -static_cast<double>(z);
    stats.loss_sum = std::max(-signed_z, 0.0) + std::log1p(std::exp(-std::abs(signed_z)));
    stats.count = 1;
    stats.correct = ((z > 0) == (label == 1)) ? 1 : 0;
    return stats;
  }

  ModelConfig config_;
  int vocab_;
  Param<Scalar> token_embedding_, positions_;
  std::vector<EncoderLayer<Scalar>> layers_;
  LayerNorm<Scalar> norm_;
  Linear<Scalar> head_;
};

}  // namespace yinyang::neural
