#ifndef EMOPHON_MODEL_HPP
#define EMOPHON_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emophon/corpus.hpp"
#include "emophon/rng.hpp"

namespace emophon {

struct ModelConfig {
  int vocab_size = 0;  // including UNK at id 0
  int d_embed = 64;
  int d_hidden = 64;
  int d_key = 64;
  int n_mels = 40;
  int conv_width = 5;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  std::uint64_t seed = 42;
};

struct EpochLog {
  int epoch = 0;  // 0 = initial state, before any update
  double loss = 0.0;
  double train_acc = 0.0;
};

// A named dense tensor, row-major. rank 1 tensors have cols == 1.
template <class T>
struct Tensor {
  std::string name;
  int rows = 0, cols = 1;
  std::vector<T> a;

  void resize(int r, int c) {
    rows = r;
    cols = c;
    a.assign(static_cast<std::size_t>(r) * c, T(0));
  }
  T& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  T operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
  T& operator[](int i) { return a[static_cast<std::size_t>(i)]; }
  T operator[](int i) const { return a[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return a.size(); }
};

// All trainable tensors. Matrix layout is input-dim x output-dim, so a
// forward step is out[j] = sum_i in[i] * W(i, j) + b[j]. The conv
// kernel follows the same layout: rows index the flattened
// width x n_mels patch, columns the output channels.
template <class T>
struct ModelParams {
  ModelConfig config;

  Tensor<T> embed;                   // V x d_e
  Tensor<T> w_in, w_forget, w_cell, w_out;  // (d_e + d_h) x d_h
  Tensor<T> b_in, b_forget, b_cell, b_out;  // d_h
  Tensor<T> conv_w;                  // (width * M) x d_k
  Tensor<T> conv_b;                  // d_k
  Tensor<T> w_query;                 // d_h x d_k
  Tensor<T> b_query;                 // d_k
  Tensor<T> w_cls;                   // d_k x 4
  Tensor<T> b_cls;                   // 4

  std::vector<Tensor<T>*> all() {
    return {&embed,  &w_in,   &w_forget, &w_cell, &w_out, &b_in,
            &b_forget, &b_cell, &b_out,   &conv_w, &conv_b, &w_query,
            &b_query, &w_cls,  &b_cls};
  }
  std::vector<const Tensor<T>*> all() const {
    return {&embed,  &w_in,   &w_forget, &w_cell, &w_out, &b_in,
            &b_forget, &b_cell, &b_out,   &conv_w, &conv_b, &w_query,
            &b_query, &w_cls,  &b_cls};
  }

  static ModelParams shaped(const ModelConfig& c) {
    ModelParams p;
    p.config = c;
    const int cat = c.d_embed + c.d_hidden;
    p.embed.name = "embed";
    p.embed.resize(c.vocab_size, c.d_embed);
    const std::pair<Tensor<T>*, const char*> gates[] = {
        {&p.w_in, "lstm.w_in"},
        {&p.w_forget, "lstm.w_forget"},
        {&p.w_cell, "lstm.w_cell"},
        {&p.w_out, "lstm.w_out"}};
    for (auto [t, n] : gates) {
      t->name = n;
      t->resize(cat, c.d_hidden);
    }
    const std::pair<Tensor<T>*, const char*> biases[] = {
        {&p.b_in, "lstm.b_in"},
        {&p.b_forget, "lstm.b_forget"},
        {&p.b_cell, "lstm.b_cell"},
        {&p.b_out, "lstm.b_out"}};
    for (auto [t, n] : biases) {
      t->name = n;
      t->resize(c.d_hidden, 1);
    }
    p.conv_w.name = "conv.w";
    p.conv_w.resize(c.conv_width * c.n_mels, c.d_key);
    p.conv_b.name = "conv.b";
    p.conv_b.resize(c.d_key, 1);
    p.w_query.name = "query.w";
    p.w_query.resize(c.d_hidden, c.d_key);
    p.b_query.name = "query.b";
    p.b_query.resize(c.d_key, 1);
    p.w_cls.name = "cls.w";
    p.w_cls.resize(c.d_key, 4);
    p.b_cls.name = "cls.b";
    p.b_cls.resize(4, 1);
    return p;
  }

  // uniform +-1/sqrt(fan_in) for matrices, zero biases; draw order is
  // the declaration order of all()
  static ModelParams init(const ModelConfig& c, Rng& rng) {
    ModelParams p = shaped(c);
    for (Tensor<T>* t : p.all()) {
      if (t->cols == 1) continue;  // biases start at zero
      const double scale = 1.0 / std::sqrt(static_cast<double>(t->rows));
      for (auto& v : t->a) v = static_cast<T>(rng.uniform(-scale, scale));
    }
    return p;
  }

  bool all_finite() const {
    for (const Tensor<T>* t : all())
      for (T v : t->a)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

// Everything the backward pass needs, cached during forward.
template <class T>
struct ForwardTrace {
  std::vector<int> token_ids;               // n
  std::vector<std::vector<T>> xcat;         // n x (d_e + d_h)
  std::vector<std::vector<T>> gate_i, gate_f, gate_g, gate_o;  // n x d_h
  std::vector<std::vector<T>> cell, cell_tanh, hidden;         // n x d_h
  std::vector<T> query;                     // d_k
  std::vector<std::vector<T>> conv_pre;     // T x d_k (pre-ReLU)
  std::vector<std::vector<T>> keys;         // T x d_k
  std::vector<T> scores;                    // T
  std::vector<T> attention_weights;         // T, sums to 1
  std::vector<T> context;                   // d_k
  std::array<T, 4> logits{};
  std::array<T, 4> posterior{};
};

namespace detail {

template <class T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// out[j] += sum_i in[i] * W(i, j)
template <class T>
inline void matvec_add(const Tensor<T>& w, const T* in, T* out) {
  for (int i = 0; i < w.rows; ++i) {
    const T xi = in[i];
    if (xi == T(0)) continue;
    const T* wr = w.a.data() + static_cast<std::size_t>(i) * w.cols;
    for (int j = 0; j < w.cols; ++j) out[j] += xi * wr[j];
  }
}

// in_grad[i] += sum_j W(i, j) * out_grad[j]; w_grad(i, j) += in[i] * out_grad[j]
template <class T>
inline void matvec_backward(const Tensor<T>& w, const T* in, const T* out_grad,
                            Tensor<T>& w_grad, T* in_grad) {
  for (int i = 0; i < w.rows; ++i) {
    const T* wr = w.a.data() + static_cast<std::size_t>(i) * w.cols;
    T* gr = w_grad.a.data() + static_cast<std::size_t>(i) * w.cols;
    const T xi = in[i];
    T acc = T(0);
    for (int j = 0; j < w.cols; ++j) {
      acc += wr[j] * out_grad[j];
      gr[j] += xi * out_grad[j];
    }
    if (in_grad) in_grad[i] += acc;
  }
}

}  // namespace detail

// Maps tokens to ids; unseen tokens become UNK (id 0).
inline std::vector<int> tokens_to_ids(const std::vector<std::string>& tokens,
                                      const std::map<std::string, int>& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = vocab.find(t);
    ids.push_back(it == vocab.end() ? kUnkTokenId : it->second);
  }
  return ids;
}

// Standard LSTM recurrence with zero initial state; fills the trace's
// per-step caches and returns via trace.hidden.
template <class T>
void lstm_forward(const std::vector<int>& token_ids, const ModelParams<T>& p,
                  ForwardTrace<T>& tr) {
  const int n = static_cast<int>(token_ids.size());
  const int de = p.config.d_embed, dh = p.config.d_hidden;
  const int cat = de + dh;

  tr.token_ids = token_ids;
  tr.xcat.assign(n, std::vector<T>(cat, T(0)));
  tr.gate_i.assign(n, std::vector<T>(dh));
  tr.gate_f.assign(n, std::vector<T>(dh));
  tr.gate_g.assign(n, std::vector<T>(dh));
  tr.gate_o.assign(n, std::vector<T>(dh));
  tr.cell.assign(n, std::vector<T>(dh));
  tr.cell_tanh.assign(n, std::vector<T>(dh));
  tr.hidden.assign(n, std::vector<T>(dh));

  std::vector<T> pre_i(dh), pre_f(dh), pre_g(dh), pre_o(dh);
  for (int t = 0; t < n; ++t) {
    auto& x = tr.xcat[t];
    const int tok = token_ids[t];
    if (tok < 0 || tok >= p.config.vocab_size)
      throw std::runtime_error("lstm_forward: token id out of range");
    for (int i = 0; i < de; ++i) x[i] = p.embed(tok, i);
    if (t > 0)
      for (int i = 0; i < dh; ++i) x[de + i] = tr.hidden[t - 1][i];

    for (int j = 0; j < dh; ++j) {
      pre_i[j] = p.b_in[j];
      pre_f[j] = p.b_forget[j];
      pre_g[j] = p.b_cell[j];
      pre_o[j] = p.b_out[j];
    }
    detail::matvec_add(p.w_in, x.data(), pre_i.data());
    detail::matvec_add(p.w_forget, x.data(), pre_f.data());
    detail::matvec_add(p.w_cell, x.data(), pre_g.data());
    detail::matvec_add(p.w_out, x.data(), pre_o.data());

    for (int j = 0; j < dh; ++j) {
      const T i_g = detail::sigmoid(pre_i[j]);
      const T f_g = detail::sigmoid(pre_f[j]);
      const T g_g = std::tanh(pre_g[j]);
      const T o_g = detail::sigmoid(pre_o[j]);
      const T c_prev = t > 0 ? tr.cell[t - 1][j] : T(0);
      const T c = f_g * c_prev + i_g * g_g;
      const T ct = std::tanh(c);
      tr.gate_i[t][j] = i_g;
      tr.gate_f[t][j] = f_g;
      tr.gate_g[t][j] = g_g;
      tr.gate_o[t][j] = o_g;
      tr.cell[t][j] = c;
      tr.cell_tanh[t][j] = ct;
      tr.hidden[t][j] = o_g * ct;
    }
  }
}

// 1-D convolution along time, stride 1, zero same-padding, then ReLU;
// key t corresponds to frame t.
template <class T>
void conv_keys(const FeatureMatrix& features, const ModelParams<T>& p,
               ForwardTrace<T>& tr) {
  const int T_frames = static_cast<int>(features.frames);
  const int M = p.config.n_mels;
  const int W = p.config.conv_width;
  const int dk = p.config.d_key;
  const int half = W / 2;
  if (static_cast<int>(features.bins) != M)
    throw std::runtime_error("conv_keys: feature bin count mismatch");

  tr.conv_pre.assign(T_frames, std::vector<T>(dk));
  tr.keys.assign(T_frames, std::vector<T>(dk));

  std::vector<T> patch(static_cast<std::size_t>(W) * M);
#pragma omp parallel for schedule(static) firstprivate(patch)
  for (int t = 0; t < T_frames; ++t) {
    for (int w = 0; w < W; ++w) {
      const int src = t + w - half;
      if (src < 0 || src >= T_frames) {
        std::fill_n(patch.data() + static_cast<std::size_t>(w) * M, M, T(0));
      } else {
        const float* row = features.row(static_cast<std::uint32_t>(src));
        for (int m = 0; m < M; ++m)
          patch[static_cast<std::size_t>(w) * M + m] = static_cast<T>(row[m]);
      }
    }
    T* pre = tr.conv_pre[t].data();
    for (int k = 0; k < dk; ++k) pre[k] = p.conv_b[k];
    detail::matvec_add(p.conv_w, patch.data(), pre);
    for (int k = 0; k < dk; ++k)
      tr.keys[t][k] = pre[k] > T(0) ? pre[k] : T(0);
  }
}

namespace reference {

// Serial direct convolution, kept as the oracle for the OpenMP kernel.
template <class T>
std::vector<std::vector<T>> conv_keys_serial(const FeatureMatrix& features,
                                             const ModelParams<T>& p) {
  const int T_frames = static_cast<int>(features.frames);
  const int M = p.config.n_mels;
  const int W = p.config.conv_width;
  const int dk = p.config.d_key;
  const int half = W / 2;
  std::vector<std::vector<T>> keys(T_frames, std::vector<T>(dk));
  for (int t = 0; t < T_frames; ++t) {
    for (int k = 0; k < dk; ++k) {
      T acc = p.conv_b[k];
      for (int w = 0; w < W; ++w) {
        const int src = t + w - half;
        if (src < 0 || src >= T_frames) continue;
        for (int m = 0; m < M; ++m)
          acc += p.conv_w(w * M + m, k) *
                 static_cast<T>(features.at(static_cast<std::uint32_t>(src),
                                            static_cast<std::uint32_t>(m)));
      }
      keys[t][k] = acc > T(0) ? acc : T(0);
    }
  }
  return keys;
}

}  // namespace reference

// softmax over t of (query . key_t) / sqrt(d_k), max-stabilized
template <class T>
void attention(const ModelParams<T>& p, ForwardTrace<T>& tr) {
  const int T_frames = static_cast<int>(tr.keys.size());
  const int dk = p.config.d_key;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));

  tr.scores.resize(T_frames);
  for (int t = 0; t < T_frames; ++t) {
    T s = T(0);
    for (int k = 0; k < dk; ++k) s += tr.query[k] * tr.keys[t][k];
    tr.scores[t] = s * inv_sqrt;
  }
  T max_s = tr.scores[0];
  for (T s : tr.scores) max_s = std::max(max_s, s);
  tr.attention_weights.resize(T_frames);
  T denom = T(0);
  for (int t = 0; t < T_frames; ++t) {
    tr.attention_weights[t] = std::exp(tr.scores[t] - max_s);
    denom += tr.attention_weights[t];
  }
  for (int t = 0; t < T_frames; ++t) tr.attention_weights[t] /= denom;
}

template <class T>
ForwardTrace<T> forward(const std::vector<int>& token_ids,
                        const FeatureMatrix& features, const ModelParams<T>& p) {
  if (token_ids.empty()) throw std::runtime_error("forward: empty token list");
  if (features.frames == 0) throw std::runtime_error("forward: empty features");
  const int dk = p.config.d_key;

  ForwardTrace<T> tr;
  lstm_forward(token_ids, p, tr);

  // query = w_query^T h_n + b_query
  tr.query.assign(dk, T(0));
  for (int k = 0; k < dk; ++k) tr.query[k] = p.b_query[k];
  detail::matvec_add(p.w_query, tr.hidden.back().data(), tr.query.data());

  conv_keys(features, p, tr);
  attention(p, tr);

  tr.context.assign(dk, T(0));
  for (std::size_t t = 0; t < tr.keys.size(); ++t) {
    const T w = tr.attention_weights[t];
    for (int k = 0; k < dk; ++k) tr.context[k] += w * tr.keys[t][k];
  }

  for (int j = 0; j < 4; ++j) tr.logits[j] = p.b_cls[j];
  detail::matvec_add(p.w_cls, tr.context.data(), tr.logits.data());

  T max_l = tr.logits[0];
  for (T l : tr.logits) max_l = std::max(max_l, l);
  T denom = T(0);
  for (int j = 0; j < 4; ++j) {
    tr.posterior[j] = std::exp(tr.logits[j] - max_l);
    denom += tr.posterior[j];
  }
  for (int j = 0; j < 4; ++j) tr.posterior[j] /= denom;
  return tr;
}

// weight_label * (-log softmax(logits)[label])
template <class T>
double weighted_ce_loss(const ForwardTrace<T>& tr, EmotionLabel label,
                        const std::array<double, 4>& class_weights) {
  const int y = static_cast<int>(label);
  const double p = std::max(static_cast<double>(tr.posterior[y]), 1e-300);
  return -class_weights[y] * std::log(p);
}

// Accumulates exact gradients of (sample_weight * CE) into grads.
// sample_scale is typically class_weight / batch_size.
template <class T>
void backward(const std::vector<int>& token_ids, const FeatureMatrix& features,
              const ModelParams<T>& p, const ForwardTrace<T>& tr,
              EmotionLabel label, double sample_scale, ModelParams<T>& grads) {
  const int de = p.config.d_embed, dh = p.config.d_hidden, dk = p.config.d_key;
  const int M = p.config.n_mels, W = p.config.conv_width, half = W / 2;
  const int n = static_cast<int>(token_ids.size());
  const int T_frames = static_cast<int>(tr.keys.size());
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));

  // classifier
  std::array<T, 4> dlogits;
  for (int j = 0; j < 4; ++j) {
    const T onehot = j == static_cast<int>(label) ? T(1) : T(0);
    dlogits[j] = static_cast<T>(sample_scale) * (tr.posterior[j] - onehot);
  }
  std::vector<T> dcontext(dk, T(0));
  detail::matvec_backward(p.w_cls, tr.context.data(), dlogits.data(), grads.w_cls,
                          dcontext.data());
  for (int j = 0; j < 4; ++j) grads.b_cls[j] += dlogits[j];

  // context = sum_t w_t key_t
  std::vector<T> dweights(T_frames, T(0));
  std::vector<std::vector<T>> dkeys(T_frames, std::vector<T>(dk, T(0)));
  for (int t = 0; t < T_frames; ++t) {
    const T w = tr.attention_weights[t];
    T acc = T(0);
    for (int k = 0; k < dk; ++k) {
      acc += dcontext[k] * tr.keys[t][k];
      dkeys[t][k] += w * dcontext[k];
    }
    dweights[t] = acc;
  }

  // softmax backward
  T dot = T(0);
  for (int t = 0; t < T_frames; ++t) dot += tr.attention_weights[t] * dweights[t];
  std::vector<T> dscores(T_frames);
  for (int t = 0; t < T_frames; ++t)
    dscores[t] = tr.attention_weights[t] * (dweights[t] - dot);

  // scores = (q . k_t) / sqrt(dk)
  std::vector<T> dquery(dk, T(0));
  for (int t = 0; t < T_frames; ++t) {
    const T ds = dscores[t] * inv_sqrt;
    for (int k = 0; k < dk; ++k) {
      dquery[k] += ds * tr.keys[t][k];
      dkeys[t][k] += ds * tr.query[k];
    }
  }

  // conv backward (ReLU gate); input features receive no gradient
  std::vector<T> patch(static_cast<std::size_t>(W) * M);
  std::vector<T> dpre(dk);
  for (int t = 0; t < T_frames; ++t) {
    bool live = false;
    for (int k = 0; k < dk; ++k) {
      dpre[k] = tr.conv_pre[t][k] > T(0) ? dkeys[t][k] : T(0);
      if (dpre[k] != T(0)) live = true;
    }
    if (!live) continue;
    for (int w = 0; w < W; ++w) {
      const int src = t + w - half;
      if (src < 0 || src >= T_frames) {
        std::fill_n(patch.data() + static_cast<std::size_t>(w) * M, M, T(0));
      } else {
        const float* row = features.row(static_cast<std::uint32_t>(src));
        for (int m = 0; m < M; ++m)
          patch[static_cast<std::size_t>(w) * M + m] = static_cast<T>(row[m]);
      }
    }
    detail::matvec_backward(p.conv_w, patch.data(), dpre.data(), grads.conv_w,
                            static_cast<T*>(nullptr));
    for (int k = 0; k < dk; ++k) grads.conv_b[k] += dpre[k];
  }

  // query projection
  std::vector<T> dh_last(dh, T(0));
  detail::matvec_backward(p.w_query, tr.hidden.back().data(), dquery.data(),
                          grads.w_query, dh_last.data());
  for (int k = 0; k < dk; ++k) grads.b_query[k] += dquery[k];

  // LSTM BPTT; only h_n receives an external gradient
  std::vector<T> dhid(dh_last), dc(static_cast<std::size_t>(dh), T(0));
  std::vector<T> dpre_i(dh), dpre_f(dh), dpre_g(dh), dpre_o(dh), dx(de + dh);
  for (int t = n - 1; t >= 0; --t) {
    for (int j = 0; j < dh; ++j) {
      const T i_g = tr.gate_i[t][j], f_g = tr.gate_f[t][j];
      const T g_g = tr.gate_g[t][j], o_g = tr.gate_o[t][j];
      const T ct = tr.cell_tanh[t][j];
      const T c_prev = t > 0 ? tr.cell[t - 1][j] : T(0);

      const T dct = dhid[j] * o_g;
      const T dc_total = dc[j] + dct * (T(1) - ct * ct);
      dpre_o[j] = dhid[j] * ct * o_g * (T(1) - o_g);
      dpre_i[j] = dc_total * g_g * i_g * (T(1) - i_g);
      dpre_f[j] = dc_total * c_prev * f_g * (T(1) - f_g);
      dpre_g[j] = dc_total * i_g * (T(1) - g_g * g_g);
      dc[j] = dc_total * f_g;
    }
    std::fill(dx.begin(), dx.end(), T(0));
    detail::matvec_backward(p.w_in, tr.xcat[t].data(), dpre_i.data(), grads.w_in,
                            dx.data());
    detail::matvec_backward(p.w_forget, tr.xcat[t].data(), dpre_f.data(),
                            grads.w_forget, dx.data());
    detail::matvec_backward(p.w_cell, tr.xcat[t].data(), dpre_g.data(),
                            grads.w_cell, dx.data());
    detail::matvec_backward(p.w_out, tr.xcat[t].data(), dpre_o.data(), grads.w_out,
                            dx.data());
    for (int j = 0; j < dh; ++j) {
      grads.b_in[j] += dpre_i[j];
      grads.b_forget[j] += dpre_f[j];
      grads.b_cell[j] += dpre_g[j];
      grads.b_out[j] += dpre_o[j];
    }
    const int tok = token_ids[t];
    for (int i = 0; i < de; ++i) grads.embed(tok, i) += dx[i];
    for (int j = 0; j < dh; ++j) dhid[j] = dx[de + j];
  }
}

template <class T>
struct AdamState {
  ModelParams<T> m, v;
  std::int64_t step = 0;

  static AdamState init(const ModelConfig& c) {
    AdamState s;
    s.m = ModelParams<T>::shaped(c);
    s.v = ModelParams<T>::shaped(c);
    return s;
  }
};

// Global-norm clip at clip_norm, then standard Adam with bias correction.
template <class T>
void adam_step(ModelParams<T>& params, ModelParams<T>& grads, AdamState<T>& state,
               const TrainConfig& cfg) {
  double sq = 0.0;
  for (Tensor<T>* g : grads.all())
    for (T v : g->a) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (norm > cfg.clip_norm && norm > 0.0) {
    const T scale = static_cast<T>(cfg.clip_norm / norm);
    for (Tensor<T>* g : grads.all())
      for (T& v : g->a) v *= scale;
  }

  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  auto ps = params.all();
  auto gs = grads.all();
  auto ms = state.m.all();
  auto vs = state.v.all();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    T* p = ps[i]->a.data();
    const T* g = gs[i]->a.data();
    T* m = ms[i]->a.data();
    T* v = vs[i]->a.data();
    const std::size_t sz = ps[i]->size();
    for (std::size_t j = 0; j < sz; ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
      const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / bc1;
      const double v_hat = vj / bc2;
      p[j] = static_cast<T>(static_cast<double>(p[j]) -
                            cfg.learning_rate * m_hat /
                                (std::sqrt(v_hat) + cfg.adam_eps));
    }
  }
}

// One training sample: token ids plus a borrowed feature matrix.
struct TrainSample {
  std::vector<int> token_ids;
  const FeatureMatrix* features = nullptr;
  EmotionLabel label = EmotionLabel::Neutral;
};

inline std::vector<TrainSample> make_samples(
    const std::vector<const Utterance*>& utts,
    const std::map<std::string, int>& vocab) {
  std::vector<TrainSample> out;
  out.reserve(utts.size());
  for (const Utterance* u : utts)
    out.push_back({tokens_to_ids(u->tokens, vocab), &u->features, u->emotion});
  return out;
}

template <class T>
struct TrainOutcome {
  ModelParams<T> params;
  std::vector<EpochLog> log;
};

// argmax with deterministic tie-break at the lowest label index
template <class T>
inline int predict(const ForwardTrace<T>& tr) {
  int best = 0;
  for (int j = 1; j < 4; ++j)
    if (tr.logits[j] > tr.logits[best]) best = j;
  return best;
}

template <class T>
TrainOutcome<T> train(const std::vector<TrainSample>& train_set,
                      const ModelConfig& mc, const TrainConfig& tc,
                      const std::array<double, 4>& class_weights) {
  if (train_set.empty()) throw std::runtime_error("train: empty train set");
  Rng rng(tc.seed);
  TrainOutcome<T> out;
  out.params = ModelParams<T>::init(mc, rng);
  AdamState<T> state = AdamState<T>::init(mc);
  ModelParams<T> grads = ModelParams<T>::shaped(mc);

  const std::size_t n = train_set.size();

  // epoch 0: loss/accuracy at initialization
  {
    double loss = 0.0;
    int correct = 0;
    for (const auto& s : train_set) {
      auto tr = forward(s.token_ids, *s.features, out.params);
      loss += weighted_ce_loss(tr, s.label, class_weights);
      if (predict(tr) == static_cast<int>(s.label)) ++correct;
    }
    out.log.push_back({0, loss / static_cast<double>(n),
                       static_cast<double>(correct) / static_cast<double>(n)});
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int correct = 0;
    for (std::size_t start = 0; start < n; start += tc.batch_size) {
      const std::size_t end = std::min(n, start + tc.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - start);

      for (Tensor<T>* g : grads.all()) std::fill(g->a.begin(), g->a.end(), T(0));
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = train_set[order[i]];
        auto tr = forward(s.token_ids, *s.features, out.params);
        const double l = weighted_ce_loss(tr, s.label, class_weights);
        if (!std::isfinite(l))
          throw std::runtime_error("train: non-finite loss at epoch " +
                                   std::to_string(epoch) + " batch " +
                                   std::to_string(start / tc.batch_size));
        epoch_loss += l;
        if (predict(tr) == static_cast<int>(s.label)) ++correct;
        backward(s.token_ids, *s.features, out.params, tr, s.label,
                 class_weights[static_cast<int>(s.label)] * inv_b, grads);
      }
      adam_step(out.params, grads, state, tc);
    }
    out.log.push_back({epoch, epoch_loss / static_cast<double>(n),
                       static_cast<double>(correct) / static_cast<double>(n)});
  }
  return out;
}

struct EvalResult {
  double accuracy = 0.0;
  std::array<std::array<int, 4>, 4> confusion{};  // rows = true label
};

template <class T>
EvalResult evaluate(const std::vector<TrainSample>& test_set,
                    const ModelParams<T>& params) {
  if (test_set.empty()) throw std::runtime_error("evaluate: empty test set");
  EvalResult r;
  int correct = 0;
  for (const auto& s : test_set) {
    auto tr = forward(s.token_ids, *s.features, params);
    const int pred = predict(tr);
    ++r.confusion[static_cast<int>(s.label)][pred];
    if (pred == static_cast<int>(s.label)) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(test_set.size());
  return r;
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

inline void ckpt_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  if (std::fwrite(b, 1, 4, f) != 4)
    throw std::runtime_error("checkpoint: write failed");
}

inline std::uint32_t ckpt_read_u32(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4)
    throw std::runtime_error("checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

// Checkpoint: "APMD", u32 version, config block, tensor count, then
// each tensor as (u32 name length, name, u32 rank, u32 dims..., f32 data).
template <class T>
void save_checkpoint(const ModelParams<T>& params, const std::string& path) {
  std::FILE* raw = std::fopen(path.c_str(), "wb");
  if (!raw) throw std::runtime_error("checkpoint: cannot write " + path);
  std::unique_ptr<std::FILE, detail::FileCloser> guard(raw);

  if (std::fwrite("APMD", 1, 4, raw) != 4)
    throw std::runtime_error("checkpoint: write failed");
  detail::ckpt_u32(raw, 1);
  const ModelConfig& c = params.config;
  for (int v : {c.vocab_size, c.d_embed, c.d_hidden, c.d_key, c.n_mels,
                c.conv_width})
    detail::ckpt_u32(raw, static_cast<std::uint32_t>(v));

  const auto tensors = params.all();
  detail::ckpt_u32(raw, static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor<T>* t : tensors) {
    detail::ckpt_u32(raw, static_cast<std::uint32_t>(t->name.size()));
    if (std::fwrite(t->name.data(), 1, t->name.size(), raw) != t->name.size())
      throw std::runtime_error("checkpoint: write failed");
    const bool vec = t->cols == 1;
    detail::ckpt_u32(raw, vec ? 1u : 2u);
    detail::ckpt_u32(raw, static_cast<std::uint32_t>(t->rows));
    if (!vec) detail::ckpt_u32(raw, static_cast<std::uint32_t>(t->cols));
    for (T v : t->a) {
      const float fv = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &fv, 4);
      detail::ckpt_u32(raw, bits);
    }
  }
}

template <class T>
ModelParams<T> load_checkpoint(const std::string& path) {
  std::FILE* raw = std::fopen(path.c_str(), "rb");
  if (!raw) throw std::runtime_error("checkpoint: cannot open " + path);
  std::unique_ptr<std::FILE, detail::FileCloser> guard(raw);

  char magic[4];
  if (std::fread(magic, 1, 4, raw) != 4 || std::memcmp(magic, "APMD", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  if (detail::ckpt_read_u32(raw) != 1)
    throw std::runtime_error("checkpoint: unsupported version in " + path);

  ModelConfig c;
  c.vocab_size = static_cast<int>(detail::ckpt_read_u32(raw));
  c.d_embed = static_cast<int>(detail::ckpt_read_u32(raw));
  c.d_hidden = static_cast<int>(detail::ckpt_read_u32(raw));
  c.d_key = static_cast<int>(detail::ckpt_read_u32(raw));
  c.n_mels = static_cast<int>(detail::ckpt_read_u32(raw));
  c.conv_width = static_cast<int>(detail::ckpt_read_u32(raw));

  ModelParams<T> p = ModelParams<T>::shaped(c);
  const auto tensors = p.all();
  const std::uint32_t count = detail::ckpt_read_u32(raw);
  if (count != tensors.size())
    throw std::runtime_error("checkpoint: tensor count mismatch in " + path);
  for (Tensor<T>* t : tensors) {
    const std::uint32_t name_len = detail::ckpt_read_u32(raw);
    std::string name(name_len, '\0');
    if (name_len > 0 && std::fread(name.data(), 1, name_len, raw) != name_len)
      throw std::runtime_error("checkpoint: truncated file");
    if (name != t->name)
      throw std::runtime_error("checkpoint: unexpected tensor " + name);
    const std::uint32_t rank = detail::ckpt_read_u32(raw);
    const std::uint32_t rows = detail::ckpt_read_u32(raw);
    const std::uint32_t cols = rank >= 2 ? detail::ckpt_read_u32(raw) : 1u;
    if (static_cast<int>(rows) != t->rows || static_cast<int>(cols) != t->cols)
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    for (T& v : t->a) {
      const std::uint32_t bits = detail::ckpt_read_u32(raw);
      float fv;
      std::memcpy(&fv, &bits, 4);
      v = static_cast<T>(fv);
    }
  }
  return p;
}

// CSV: epoch,loss,train_acc
inline void write_epoch_log(const std::vector<EpochLog>& log,
                            const std::string& path) {
  std::FILE* raw = std::fopen(path.c_str(), "w");
  if (!raw) throw std::runtime_error("epoch log: cannot write " + path);
  std::unique_ptr<std::FILE, detail::FileCloser> guard(raw);
  std::fprintf(raw, "epoch,loss,train_acc\n");
  for (const auto& e : log)
    std::fprintf(raw, "%d,%.9g,%.9g\n", e.epoch, e.loss, e.train_acc);
}

}  // namespace emophon

#endif
