// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Visual side of the model: a small convolutional backbone with GIA blocks
// inserted after designated stages, flattening of feature maps into visual
// tokens, and a pre-norm Transformer encoder over those tokens.

#pragma once

#include "ivgn/gia.hpp"

namespace ivgn {

struct BackboneConfig {
  Index input_side = 224;
  Index in_channels = 3;
  Index stem_width = 16;
  bool stem_pool = true;  // extra stride-2 after the stem
  std::vector<Index> widths = {32, 64, 128, 256};
  Index kernel = 3;
  // Insertion flags, one per stage; defaults mirror placement after the
  // third and fourth stages.
  std::vector<bool> gia_stages = {false, false, true, true};
  std::string gia_scheme = "dsp";
  double gia_delta = 1e-4;
  bool gia_fusion_sum = false;

  Index downsamples() const {
    return static_cast<Index>(widths.size()) + (stem_pool ? 1 : 0);
  }
  /// Spatial side after `stage` stages (0 = after stem).
  Index side_after(Index stage) const {
    Index side = input_side;
    if (stem_pool) side /= 2;
    for (Index i = 0; i < stage; ++i) side /= 2;
    return side;
  }
  Index final_side() const {
    return side_after(static_cast<Index>(widths.size()));
  }
};

/// Conv stages of (conv3x3 -> BN -> ReLU -> 2x2 average pool), with GIA
/// blocks after flagged stages.
template <class S>
struct Backbone {
  BackboneConfig cfg;
  Conv2d<S> stem;
  BatchNorm<S> stem_bn;
  std::vector<Conv2d<S>> convs;
  std::vector<BatchNorm<S>> bns;
  std::vector<std::unique_ptr<GiaModule<S>>> gias;  // nullptr where disabled

  Backbone(BackboneConfig cfg_, Rng& rng)
      : cfg(std::move(cfg_)),
        stem(cfg.in_channels, cfg.stem_width, cfg.kernel, 1,
             (cfg.kernel - 1) / 2, rng),
        stem_bn(cfg.stem_width) {
    if (cfg.widths.empty()) throw ConfigError("backbone: no stages");
    if (cfg.kernel % 2 != 1) throw ConfigError("backbone: kernel must be odd");
    if (cfg.gia_stages.size() != cfg.widths.size())
      throw ConfigError("backbone: gia flag count != stage count");
    Index side = cfg.input_side;
    for (Index i = 0; i < cfg.downsamples(); ++i) {
      if (side % 2 != 0)
        throw ConfigError(
            "backbone: input side " + std::to_string(cfg.input_side) +
            " incompatible with " + std::to_string(cfg.downsamples()) +
            " stride-2 downsamples");
      side /= 2;
    }
    if (cfg.final_side() * cfg.final_side() < 2)
      throw ConfigError("backbone: final maps smaller than 2 pixels");

    auto spec = parse_scheme(cfg.gia_scheme);
    const auto fusion =
        cfg.gia_fusion_sum ? ParallelFusion::sum : ParallelFusion::mean;
    Index in_ch = cfg.stem_width;
    for (size_t i = 0; i < cfg.widths.size(); ++i) {
      convs.emplace_back(in_ch, cfg.widths[i], cfg.kernel, 1,
                         (cfg.kernel - 1) / 2, rng);
      bns.emplace_back(cfg.widths[i]);
      in_ch = cfg.widths[i];
      if (cfg.gia_stages[i]) {
        const Index s = cfg.side_after(static_cast<Index>(i) + 1);
        gias.push_back(std::make_unique<GiaModule<S>>(
            spec, cfg.widths[i], s * s, static_cast<S>(cfg.gia_delta),
            fusion));
      } else {
        gias.push_back(nullptr);
      }
    }
  }

  Index out_channels() const { return cfg.widths.back(); }

  Tensor<S> forward(Graph<S>& g, const Tensor<S>& images, bool training) {
    if (images.rank() != 4 || images.dim(1) != cfg.in_channels ||
        images.dim(2) != cfg.input_side || images.dim(3) != cfg.input_side)
      throw ConfigError("backbone: input " + shape_str(images.shape()) +
                        " does not match configured side " +
                        std::to_string(cfg.input_side));
    auto x = relu(g, stem_bn.forward(g, stem.forward(g, images), 1, training));
    if (cfg.stem_pool) x = avg_pool2d(g, x, 2);
    for (size_t i = 0; i < convs.size(); ++i) {
      x = relu(g, bns[i].forward(g, convs[i].forward(g, x), 1, training));
      x = avg_pool2d(g, x, 2);
      if (gias[i]) x = gias[i]->forward(g, x, training);
    }
    return x;
  }

  void collect(ParamRegistry<S>& r, const std::string& prefix) {
    stem.collect(r, prefix + ".stem.conv");
    stem_bn.collect(r, prefix + ".stem.bn");
    for (size_t i = 0; i < convs.size(); ++i) {
      const std::string p = prefix + ".stage" + std::to_string(i + 1);
      convs[i].collect(r, p + ".conv");
      bns[i].collect(r, p + ".bn");
      if (gias[i]) gias[i]->collect(r, p + ".gia");
    }
  }
};

/// Token sequence produced from backbone maps: S = n*H*W rows of width C',
/// image-major then row-major.
template <class S>
struct VisualTokens {
  Tensor<S> tokens;  // [S, C']
  Index images = 0, h = 0, w = 0;

  Index count() const { return images * h * w; }
  struct Meta {
    Index image, row, col;
  };
  Meta meta(Index token) const {
    const Index per = h * w;
    return {token / per, (token % per) / w, token % w};
  }
};

/// Flattens per-image maps [C,H,W] into H*W channel vectors, concatenates
/// across images and projects C -> C'.
template <class S>
VisualTokens<S> flatten_project(Graph<S>& g,
                                const std::vector<Tensor<S>>& maps_per_image,
                                const Linear<S>& proj) {
  if (maps_per_image.empty()) throw ConfigError("flatten_project: no maps");
  const Shape& s0 = maps_per_image[0].shape();
  for (const auto& m : maps_per_image) {
    if (m.rank() != 3) throw ConfigError("flatten_project: maps must be CxHxW");
    if (m.shape() != s0)
      throw ConfigError("flatten_project: heterogeneous map shapes " +
                        shape_str(m.shape()) + " vs " + shape_str(s0));
  }
  const Index C = s0[0], H = s0[1], W = s0[2];
  std::vector<Tensor<S>> rows;
  rows.reserve(maps_per_image.size());
  for (const auto& m : maps_per_image) {
    // [C,H,W] -> [H*W, C]
    rows.push_back(reshape(g, permute(g, m, {1, 2, 0}), {H * W, C}));
  }
  auto cat = rows.size() == 1 ? rows[0] : concat(g, rows, 0);
  VisualTokens<S> out;
  out.tokens = proj.forward(g, cat);
  out.images = static_cast<Index>(maps_per_image.size());
  out.h = H;
  out.w = W;
  return out;
}

/// Stacked-variant: maps [n,C,H,W] from one study.
template <class S>
VisualTokens<S> flatten_project(Graph<S>& g, const Tensor<S>& maps,
                                const Linear<S>& proj) {
  if (maps.rank() != 4) throw ConfigError("flatten_project: expects nCHW");
  const Index n = maps.dim(0), C = maps.dim(1), H = maps.dim(2),
              W = maps.dim(3);
  auto cat = reshape(g, permute(g, maps, {0, 2, 3, 1}), {n * H * W, C});
  VisualTokens<S> out;
  out.tokens = proj.forward(g, cat);
  out.images = n;
  out.h = H;
  out.w = W;
  return out;
}

struct EncoderConfig {
  Index layers = 3;
  Index heads = 8;
  Index dim = 512;       // C'
  Index ffn_dim = 2048;  // feed-forward inner width
  double dropout = 0.1;
  bool pos_embed = true;
  Index max_tokens = 512;
};

/// Pre-norm Transformer encoder over the visual token sequence.
template <class S>
struct TransformerEncoder {
  struct Layer {
    LayerNorm<S> ln1, ln2;
    Linear<S> wq, wk, wv, wo, ff1, ff2;
  };

  EncoderConfig cfg;
  std::vector<Layer> layers;
  LayerNorm<S> final_ln;

  TransformerEncoder(EncoderConfig cfg_, Rng& rng) : cfg(cfg_) {
    if (cfg.dim % cfg.heads != 0)
      throw ConfigError("encoder: dim " + std::to_string(cfg.dim) +
                        " not divisible by heads " + std::to_string(cfg.heads));
    for (Index i = 0; i < cfg.layers; ++i) {
      Layer l;
      l.ln1 = LayerNorm<S>(cfg.dim);
      l.ln2 = LayerNorm<S>(cfg.dim);
      l.wq = Linear<S>(cfg.dim, cfg.dim, rng);
      l.wk = Linear<S>(cfg.dim, cfg.dim, rng);
      l.wv = Linear<S>(cfg.dim, cfg.dim, rng);
      l.wo = Linear<S>(cfg.dim, cfg.dim, rng);
      l.ff1 = Linear<S>(cfg.dim, cfg.ffn_dim, rng);
      l.ff2 = Linear<S>(cfg.ffn_dim, cfg.dim, rng);
      layers.push_back(std::move(l));
    }
    final_ln = LayerNorm<S>(cfg.dim);
  }

  /// `attentions`, when given, receives one [heads,S,S] tensor per layer.
  Tensor<S> forward(Graph<S>& g, const Tensor<S>& tokens, bool training,
                    Rng& rng, std::vector<Tensor<S>>* attentions = nullptr) {
    if (tokens.rank() != 2 || tokens.dim(1) != cfg.dim)
      throw ConfigError("encoder: tokens " + shape_str(tokens.shape()) +
                        " do not match dim " + std::to_string(cfg.dim));
    const Index Sn = tokens.dim(0), D = cfg.dim, Hh = cfg.heads, dh = D / Hh;
    const S rate = static_cast<S>(cfg.dropout);
    auto x = tokens;
    for (auto& l : layers) {
      auto h = l.ln1.forward(g, x);
      auto split = [&](const Tensor<S>& t) {
        // [S,D] -> [heads,S,dh]
        return permute(g, reshape(g, t, {Sn, Hh, dh}), {1, 0, 2});
      };
      auto q = split(l.wq.forward(g, h));
      auto k = split(l.wk.forward(g, h));
      auto v = split(l.wv.forward(g, h));
      auto scores = scale(g, bmm(g, q, permute(g, k, {0, 2, 1})),
                          S(1) / std::sqrt(static_cast<S>(dh)));
      auto att = softmax(g, scores, 2);
      if (attentions) attentions->push_back(att);
      auto ctx = reshape(g, permute(g, bmm(g, att, v), {1, 0, 2}), {Sn, D});
      auto att_out = dropout(g, l.wo.forward(g, ctx), rate, training, rng);
      x = add(g, x, att_out);
      auto h2 = l.ln2.forward(g, x);
      auto ff = l.ff2.forward(g, relu(g, l.ff1.forward(g, h2)));
      x = add(g, x, dropout(g, ff, rate, training, rng));
    }
    return final_ln.forward(g, x);
  }

  void collect(ParamRegistry<S>& r, const std::string& prefix) {
    for (size_t i = 0; i < layers.size(); ++i) {
      const std::string p = prefix + ".layer" + std::to_string(i + 1);
      layers[i].ln1.collect(r, p + ".ln1");
      layers[i].ln2.collect(r, p + ".ln2");
      layers[i].wq.collect(r, p + ".wq");
      layers[i].wk.collect(r, p + ".wk");
      layers[i].wv.collect(r, p + ".wv");
      layers[i].wo.collect(r, p + ".wo");
      layers[i].ff1.collect(r, p + ".ff1");
      layers[i].ff2.collect(r, p + ".ff2");
    }
    final_ln.collect(r, prefix + ".final_ln");
  }
};

/// Backbone + projection (+ learned positional embeddings) + Transformer.
template <class S>
struct VisualEncoder {
  BackboneConfig bcfg;
  EncoderConfig ecfg;
  Backbone<S> backbone;
  Linear<S> proj;
  Tensor<S> pos_table;  // [max_tokens, dim]
  TransformerEncoder<S> transformer;

  VisualEncoder(BackboneConfig bcfg_, EncoderConfig ecfg_, Rng& rng)
      : bcfg(std::move(bcfg_)),
        ecfg(ecfg_),
        backbone(bcfg, rng),
        proj(backbone.out_channels(), ecfg.dim, rng),
        transformer(ecfg, rng) {
    if (ecfg.pos_embed) {
      pos_table = Tensor<S>::zeros({ecfg.max_tokens, ecfg.dim});
      fill_uniform(pos_table, rng, S(-0.1), S(0.1));
    }
  }

  /// Encodes the images of one study: [n,3,side,side] -> Y [n*H*W, dim].
  Tensor<S> encode_study(Graph<S>& g, const Tensor<S>& images, bool training,
                         Rng& rng) {
    auto maps = backbone.forward(g, images, training);
    auto vt = flatten_project(g, maps, proj);
    auto x = vt.tokens;
    if (ecfg.pos_embed) {
      const Index Sn = x.dim(0);
      if (Sn > ecfg.max_tokens)
        throw ConfigError("encoder: " + std::to_string(Sn) +
                          " tokens exceed max_tokens " +
                          std::to_string(ecfg.max_tokens));
      x = add(g, x, slice(g, pos_table, 0, 0, Sn));
    }
    return transformer.forward(g, x, training, rng);
  }

  void collect(ParamRegistry<S>& r) {
    backbone.collect(r, "backbone");
    proj.collect(r, "encoder.proj");
    if (ecfg.pos_embed) r.add("encoder.pos_table", pos_table);
    transformer.collect(r, "encoder.transformer");
  }
};

}  // namespace ivgn
