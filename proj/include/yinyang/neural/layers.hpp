#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "yinyang/neural/tensor.hpp"
#include "yinyang/random.hpp"

namespace yinyang::neural {

template <typename Scalar>
void fill_normal(Matrix<Scalar>& m, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
}

template <typename Scalar>
void fill_uniform(Matrix<Scalar>& m, Rng& rng, double bound) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<Scalar>((2.0 * uniform_real(rng) - 1.0) * bound);
  }
}

// Row-wise softmax in place. Entries equal to -inf get probability 0.
template <typename Scalar>
void softmax_rows(Matrix<Scalar>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const Scalar top = row.maxCoeff();
    row = (row.array() - top).exp();
    row /= row.sum();
  }
}

// Inverted dropout. With p == 0 or no rng the input is returned and mask left empty.
template <typename Scalar>
Matrix<Scalar> dropout(const Matrix<Scalar>& x, double p, Rng* rng, Matrix<Scalar>* mask) {
  if (p <= 0.0 || rng == nullptr) {
    if (mask) mask->resize(0, 0);
    return x;
  }
  Matrix<Scalar> m(x.rows(), x.cols());
  const auto keep = static_cast<Scalar>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform_real(*rng) < p ? Scalar(0) : keep;
  Matrix<Scalar> out = x.cwiseProduct(m);
  if (mask) *mask = std::move(m);
  return out;
}

template <typename Scalar>
Matrix<Scalar> dropout_backward(const Matrix<Scalar>& dy, const Matrix<Scalar>& mask) {
  if (mask.size() == 0) return dy;
  return dy.cwiseProduct(mask);
}

template <typename Scalar>
struct Linear {
  Param<Scalar> weight;  // in x out
  Param<Scalar> bias;    // 1 x out

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng)
      : weight(name + ".weight", in, out), bias(name + ".bias", 1, out, false) {
    fill_uniform(weight.value, rng, std::sqrt(6.0 / (in + out)));
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) const {
    Matrix<Scalar> y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }

  RowVector<Scalar> forward_row(const RowVector<Scalar>& x) const { return x * weight.value + bias.value.row(0); }

  Matrix<Scalar> backward(const Matrix<Scalar>& x, const Matrix<Scalar>& dy) {
    weight.grad.noalias() += x.transpose() * dy;
    bias.grad += dy.colwise().sum();
    return dy * weight.value.transpose();
  }

  void collect(ParamList<Scalar>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <typename Scalar>
struct LayerNormCache {
  Matrix<Scalar> normalized;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
};

template <typename Scalar>
struct LayerNorm {
  static constexpr double kEpsilon = 1e-5;
  Param<Scalar> gain;
  Param<Scalar> shift;

  LayerNorm() = default;
  LayerNorm(const std::string& name, int width) : gain(name + ".gain", 1, width, false), shift(name + ".shift", 1, width, false) {
    gain.value.setOnes();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, LayerNormCache<Scalar>* cache) const {
    const auto width = static_cast<Scalar>(x.cols());
    Matrix<Scalar> normalized(x.rows(), x.cols());
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Scalar mean = x.row(r).sum() / width;
      const auto centered = (x.row(r).array() - mean).eval();
      const Scalar var = centered.square().sum() / width;
      inv_std(r) = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kEpsilon));
      normalized.row(r) = centered * inv_std(r);
    }
    Matrix<Scalar> y = normalized.array().rowwise() * gain.value.row(0).array();
    y.rowwise() += shift.value.row(0);
    if (cache) {
      cache->normalized = std::move(normalized);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const LayerNormCache<Scalar>& c) {
    gain.grad += dy.cwiseProduct(c.normalized).colwise().sum();
    shift.grad += dy.colwise().sum();
    const auto width = static_cast<Scalar>(dy.cols());
    Matrix<Scalar> dnorm = dy.array().rowwise() * gain.value.row(0).array();
    Matrix<Scalar> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const Scalar sum = dnorm.row(r).sum();
      const Scalar dot = dnorm.row(r).dot(c.normalized.row(r));
      dx.row(r) = (c.inv_std(r) / width) *
                  (width * dnorm.row(r).array() - sum - c.normalized.row(r).array() * dot).matrix();
    }
    return dx;
  }

  void collect(ParamList<Scalar>& out) {
    out.push_back(&gain);
    out.push_back(&shift);
  }
};

template <typename Scalar>
struct AttentionCache {
  Matrix<Scalar> query_input;
  Matrix<Scalar> memory_input;
  Matrix<Scalar> q, k, v;
  std::vector<Matrix<Scalar>> probs;  // per head, Lq x Lk
  Matrix<Scalar> context;             // concatenated heads, Lq x H
};

// Keys/values already projected for incremental decoding.
template <typename Scalar>
struct KeyValueCache {
  Matrix<Scalar> k;
  Matrix<Scalar> v;
  Eigen::Index length = 0;
};

template <typename Scalar>
struct MultiHeadAttention {
  int heads = 1;
  Linear<Scalar> query, key, value, output;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, int width, int head_count, Rng& rng)
      : heads(head_count),
        query(name + ".query", width, width, rng),
        key(name + ".key", width, width, rng),
        value(name + ".value", width, width, rng),
        output(name + ".output", width, width, rng) {}

  Matrix<Scalar> forward(const Matrix<Scalar>& xq, const Matrix<Scalar>& xkv, bool causal,
                         AttentionCache<Scalar>* cache) const {
    Matrix<Scalar> q = query.forward(xq);
    Matrix<Scalar> k = key.forward(xkv);
    Matrix<Scalar> v = value.forward(xkv);
    const int width = static_cast<int>(q.cols());
    const int dh = width / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    Matrix<Scalar> context(q.rows(), width);
    std::vector<Matrix<Scalar>> probs;
    if (cache) probs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Matrix<Scalar> scores = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
      if (causal) {
        for (Eigen::Index i = 0; i < scores.rows(); ++i) {
          for (Eigen::Index j = i + 1; j < scores.cols(); ++j) scores(i, j) = -std::numeric_limits<Scalar>::infinity();
        }
      }
      softmax_rows(scores);
      context.middleCols(h * dh, dh).noalias() = scores * v.middleCols(h * dh, dh);
      if (cache) probs.push_back(std::move(scores));
    }
    Matrix<Scalar> y = output.forward(context);
    if (cache) {
      cache->query_input = xq;
      cache->memory_input = xkv;
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->probs = std::move(probs);
      cache->context = std::move(context);
    }
    return y;
  }

  // Returns (d query_input, d memory_input).
  std::pair<Matrix<Scalar>, Matrix<Scalar>> backward(const Matrix<Scalar>& dy, const AttentionCache<Scalar>& c) {
    const Matrix<Scalar> dcontext = output.backward(c.context, dy);
    const int width = static_cast<int>(c.q.cols());
    const int dh = width / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    Matrix<Scalar> dq(c.q.rows(), width), dk(c.k.rows(), width), dv(c.v.rows(), width);
    for (int h = 0; h < heads; ++h) {
      const auto& p = c.probs[static_cast<std::size_t>(h)];
      const auto dctx_h = dcontext.middleCols(h * dh, dh);
      Matrix<Scalar> dp = dctx_h * c.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh).noalias() = p.transpose() * dctx_h;
      Matrix<Scalar> ds = p.cwiseProduct(dp);
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_dot = ds.rowwise().sum();
      ds -= p.cwiseProduct(row_dot.replicate(1, p.cols()));
      ds *= scale;
      dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh);
    }
    Matrix<Scalar> dxq = query.backward(c.query_input, dq);
    Matrix<Scalar> dxkv = key.backward(c.memory_input, dk);
    dxkv += value.backward(c.memory_input, dv);
    return {std::move(dxq), std::move(dxkv)};
  }

  // Projects a memory once for repeated single-row queries.
  KeyValueCache<Scalar> project_memory(const Matrix<Scalar>& memory) const {
    KeyValueCache<Scalar> kv;
    kv.k = key.forward(memory);
    kv.v = value.forward(memory);
    kv.length = memory.rows();
    return kv;
  }

  void append(KeyValueCache<Scalar>& kv, const RowVector<Scalar>& x) const {
    if (kv.length == kv.k.rows()) {
      const Eigen::Index grow = std::max<Eigen::Index>(16, kv.k.rows());
      kv.k.conservativeResize(kv.k.rows() + grow, x.cols());
      kv.v.conservativeResize(kv.v.rows() + grow, x.cols());
    }
    kv.k.row(kv.length) = key.forward_row(x);
    kv.v.row(kv.length) = value.forward_row(x);
    ++kv.length;
  }

  RowVector<Scalar> attend_row(const RowVector<Scalar>& xq, const KeyValueCache<Scalar>& kv) const {
    const RowVector<Scalar> q = query.forward_row(xq);
    const int width = static_cast<int>(q.cols());
    const int dh = width / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    RowVector<Scalar> context(width);
    for (int h = 0; h < heads; ++h) {
      RowVector<Scalar> scores = (q.segment(h * dh, dh) * kv.k.topRows(kv.length).middleCols(h * dh, dh).transpose()) * scale;
      const Scalar top = scores.maxCoeff();
      scores = (scores.array() - top).exp();
      scores /= scores.sum();
      context.segment(h * dh, dh) = scores * kv.v.topRows(kv.length).middleCols(h * dh, dh);
    }
    return output.forward_row(context);
  }

  void collect(ParamList<Scalar>& out) {
    query.collect(out);
    key.collect(out);
    value.collect(out);
    output.collect(out);
  }
};

template <typename Scalar>
struct FeedForwardCache {
  Matrix<Scalar> input;
  Matrix<Scalar> pre;
  Matrix<Scalar> hidden;
};

// Two-layer MLP with tanh-approximated GELU.
template <typename Scalar>
struct FeedForward {
  Linear<Scalar> up, down;

  FeedForward() = default;
  FeedForward(const std::string& name, int width, int inner, Rng& rng)
      : up(name + ".up", width, inner, rng), down(name + ".down", inner, width, rng) {}

  static Scalar gelu(Scalar x) {
    const Scalar c = static_cast<Scalar>(0.7978845608028654);
    return Scalar(0.5) * x * (Scalar(1) + std::tanh(c * (x + static_cast<Scalar>(0.044715) * x * x * x)));
  }

  static Scalar gelu_grad(Scalar x) {
    const Scalar c = static_cast<Scalar>(0.7978845608028654);
    const Scalar a = static_cast<Scalar>(0.044715);
    const Scalar t = std::tanh(c * (x + a * x * x * x));
    return Scalar(0.5) * (Scalar(1) + t) + Scalar(0.5) * x * (Scalar(1) - t * t) * c * (Scalar(1) + Scalar(3) * a * x * x);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, FeedForwardCache<Scalar>* cache) const {
    Matrix<Scalar> pre = up.forward(x);
    Matrix<Scalar> hidden = pre.unaryExpr([](Scalar v) { return gelu(v); });
    Matrix<Scalar> y = down.forward(hidden);
    if (cache) {
      cache->input = x;
      cache->pre = std::move(pre);
      cache->hidden = std::move(hidden);
    }
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy, const FeedForwardCache<Scalar>& c) {
    Matrix<Scalar> dhidden = down.backward(c.hidden, dy);
    Matrix<Scalar> dpre = dhidden.cwiseProduct(c.pre.unaryExpr([](Scalar v) { return gelu_grad(v); }));
    return up.backward(c.input, dpre);
  }

  void collect(ParamList<Scalar>& out) {
    up.collect(out);
    down.collect(out);
  }
};

}  // namespace yinyang::neural
