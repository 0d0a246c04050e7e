// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Visual knowledge-guided decoder: additive attention from the previous
// hidden state over visual tokens, a hidden-state-gated context vector, an
// LSTM step, and a deep output layer over the vocabulary.

#pragma once

#include "ivgn/encoder.hpp"

namespace ivgn {

enum class ContextPool { sum, mean };
enum class GateMode { learned, closed };

struct DecoderConfig {
  Index hidden = 512;
  Index embed = 256;
  Index ctx_dim = 512;  // C', must match encoder dim
  Index att_dim = 256;
  Index vocab = 0;
  ContextPool pool = ContextPool::sum;
  // `closed` forces g_c = 0 and a zero initial state: the decoder degenerates
  // to a pure language model with no visual path at all.
  GateMode gate = GateMode::learned;
};

template <class S>
struct DecoderState {
  Tensor<S> h, c;  // [1, hidden]
  Index step = 0;
};

template <class S>
struct VkgdDecoder {
  DecoderConfig cfg;
  Linear<S> att_visual;  // C' -> att_dim
  Linear<S> att_hidden;  // hidden -> att_dim
  Linear<S> att_score;   // att_dim -> 1 (F_a)
  Linear<S> gate_layer;  // hidden -> C' (F_g)
  Linear<S> init_h, init_c;  // C' -> hidden
  Embedding<S> embed;        // E, shared by input and deep output
  Tensor<S> lstm_wx;         // [embed + C', 4*hidden], gates i,f,g,o
  Tensor<S> lstm_wh;         // [hidden, 4*hidden]
  Tensor<S> lstm_b;          // [4*hidden]
  Linear<S> out_h;  // L_h: hidden -> embed
  Linear<S> out_c;  // L_c: C' -> embed
  Linear<S> out_o;  // L_o: embed -> vocab

  VkgdDecoder(DecoderConfig cfg_, Rng& rng)
      : cfg(cfg_),
        att_visual(cfg.ctx_dim, cfg.att_dim, rng),
        att_hidden(cfg.hidden, cfg.att_dim, rng),
        att_score(cfg.att_dim, 1, rng),
        gate_layer(cfg.hidden, cfg.ctx_dim, rng),
        init_h(cfg.ctx_dim, cfg.hidden, rng),
        init_c(cfg.ctx_dim, cfg.hidden, rng),
        embed(cfg.vocab, cfg.embed, rng),
        out_h(cfg.hidden, cfg.embed, rng),
        out_c(cfg.ctx_dim, cfg.embed, rng),
        out_o(cfg.embed, cfg.vocab, rng) {
    if (cfg.vocab <= 0) throw ConfigError("decoder: vocab size required");
    lstm_wx = Tensor<S>::zeros({cfg.embed + cfg.ctx_dim, 4 * cfg.hidden});
    fill_xavier(lstm_wx, rng, cfg.embed + cfg.ctx_dim, 4 * cfg.hidden);
    lstm_wh = Tensor<S>::zeros({cfg.hidden, 4 * cfg.hidden});
    fill_xavier(lstm_wh, rng, cfg.hidden, 4 * cfg.hidden);
    lstm_b = Tensor<S>::zeros({4 * cfg.hidden});
  }

  /// Attention over visual tokens driven by the previous hidden state.
  /// Returns the weights A [S] and the per-position context C = Y (.) A.
  std::pair<Tensor<S>, Tensor<S>> visual_attention(Graph<S>& g,
                                                   const Tensor<S>& y,
                                                   const Tensor<S>& h_prev) {
    if (y.rank() != 2 || y.dim(1) != cfg.ctx_dim)
      throw ShapeError("visual_attention: tokens " + shape_str(y.shape()));
    const Index Sn = y.dim(0);
    auto e = tanh_(g, add(g, att_visual.forward(g, y),
                          att_hidden.forward(g, h_prev)));
    auto scores = reshape(g, att_score.forward(g, e), {Sn});
    auto a = softmax(g, scores, 0);
    auto ctx = mul(g, y, reshape(g, a, {Sn, 1}));
    return {a, ctx};
  }

  /// Pools the per-position context and gates it with sigmoid(F_g(h_prev)).
  Tensor<S> guided_context(Graph<S>& g, const Tensor<S>& ctx,
                           const Tensor<S>& h_prev) {
    auto pooled = sum(g, ctx, {0}, true);  // [1, C']
    if (cfg.pool == ContextPool::mean)
      pooled = scale(g, pooled, S(1) / static_cast<S>(ctx.dim(0)));
    auto gate = sigmoid(g, gate_layer.forward(g, h_prev));
    return mul(g, gate, pooled);
  }

  /// Initial LSTM state from mean-pooled visual tokens (zeros in closed mode).
  DecoderState<S> init_state(Graph<S>& g, const Tensor<S>& y) {
    DecoderState<S> st;
    if (cfg.gate == GateMode::closed) {
      st.h = Tensor<S>::zeros({1, cfg.hidden});
      st.c = Tensor<S>::zeros({1, cfg.hidden});
      return st;
    }
    auto pooled = mean(g, y, {0}, true);
    st.h = tanh_(g, init_h.forward(g, pooled));
    st.c = tanh_(g, init_c.forward(g, pooled));
    return st;
  }

  /// One decode step. Logits use the deep output form
  /// L_o(E r_prev + L_h h_prev + L_c g_c); the LSTM input is [E r_prev ; g_c].
  std::pair<Tensor<S>, DecoderState<S>> step(Graph<S>& g, Index prev_token,
                                             const DecoderState<S>& state,
                                             const Tensor<S>& y) {
    if (prev_token < 0 || prev_token >= cfg.vocab)
      throw Error("decoder: token id " + std::to_string(prev_token) +
                  " out of vocabulary");
    auto emb = embed.forward(g, {prev_token});  // [1, embed]
    Tensor<S> g_c;
    if (cfg.gate == GateMode::closed) {
      g_c = Tensor<S>::zeros({1, cfg.ctx_dim});
    } else {
      auto [a, ctx] = visual_attention(g, y, state.h);
      g_c = guided_context(g, ctx, state.h);
    }
    auto pre = add(g, add(g, emb, out_h.forward(g, state.h)),
                   out_c.forward(g, g_c));
    auto logits = reshape(g, out_o.forward(g, pre), {cfg.vocab});

    auto x = concat(g, {emb, g_c}, 1);  // [1, embed + C']
    auto gates = add(g, add(g, matmul(g, x, lstm_wx), matmul(g, state.h, lstm_wh)),
                     lstm_b);
    const Index H = cfg.hidden;
    auto gi = sigmoid(g, slice(g, gates, 1, 0, H));
    auto gf = sigmoid(g, slice(g, gates, 1, H, H));
    auto gg = tanh_(g, slice(g, gates, 1, 2 * H, H));
    auto go = sigmoid(g, slice(g, gates, 1, 3 * H, H));
    DecoderState<S> next;
    next.c = add(g, mul(g, gf, state.c), mul(g, gi, gg));
    next.h = mul(g, go, tanh_(g, next.c));
    next.step = state.step + 1;
    return {logits, next};
  }

  void collect(ParamRegistry<S>& r, const std::string& prefix) {
    att_visual.collect(r, prefix + ".att_visual");
    att_hidden.collect(r, prefix + ".att_hidden");
    att_score.collect(r, prefix + ".att_score");
    gate_layer.collect(r, prefix + ".gate");
    init_h.collect(r, prefix + ".init_h");
    init_c.collect(r, prefix + ".init_c");
    embed.collect(r, prefix + ".embed");
    r.add(prefix + ".lstm.wx", lstm_wx);
    r.add(prefix + ".lstm.wh", lstm_wh);
    r.add(prefix + ".lstm.b", lstm_b);
    out_h.collect(r, prefix + ".out_h");
    out_c.collect(r, prefix + ".out_c");
    out_o.collect(r, prefix + ".out_o");
  }
};

}  // namespace ivgn
