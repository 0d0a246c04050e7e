// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Full image-to-report model: visual encoder + decoder, the teacher-forced
// loss and the parameter registry binding everything together.

#pragma once

#include "ivgn/decoder.hpp"
#include "ivgn/generate.hpp"

namespace ivgn {

struct ModelConfig {
  BackboneConfig backbone;
  EncoderConfig encoder;
  DecoderConfig decoder;
};

/// One training/eval sample: the study's images plus its framed report.
template <class S>
struct StudySample {
  Tensor<S> images;           // [n, 3, side, side]
  std::vector<Index> tokens;  // BOS ... EOS [PAD...]
};

template <class S>
struct IvgnModel {
  ModelConfig cfg;
  VisualEncoder<S> encoder;
  VkgdDecoder<S> decoder;
  ParamRegistry<S> params;

  IvgnModel(ModelConfig cfg_, Rng& rng)
      : cfg(std::move(cfg_)),
        encoder(cfg.backbone, cfg.encoder, rng),
        decoder([&] {
          if (cfg.decoder.ctx_dim != cfg.encoder.dim)
            throw ConfigError("model: decoder ctx_dim != encoder dim");
          return cfg.decoder;
        }(), rng) {
    encoder.collect(params);
    decoder.collect(params, "decoder");
    for (auto& e : params.entries)
      if (e.trainable) e.tensor.set_requires_grad(true);
  }

  /// Visual tokens Y for one study.
  Tensor<S> encode(Graph<S>& g, const Tensor<S>& images, bool training,
                   Rng& rng) {
    return encoder.encode_study(g, images, training, rng);
  }

  /// Teacher-forced negative log likelihood, averaged per real target token
  /// over the whole batch. PAD targets are skipped entirely, so padding a
  /// report changes nothing.
  Tensor<S> teacher_forced_loss(Graph<S>& g,
                                const std::vector<StudySample<S>>& batch,
                                bool training, Rng& rng) {
    if (batch.empty()) throw DataError("teacher_forced_loss: empty batch");
    // One backbone pass over all images of the batch (shared BN statistics),
    // then per-study token groups.
    std::vector<Tensor<S>> image_list;
    for (const auto& s : batch) {
      if (s.images.rank() != 4)
        throw DataError("teacher_forced_loss: images must be [n,3,side,side]");
      image_list.push_back(s.images);
    }
    auto all = image_list.size() == 1 ? image_list[0] : concat(g, image_list, 0);
    auto maps = encoder.backbone.forward(g, all, training);

    Tensor<S> total;
    Index tokens_total = 0;
    Index off = 0;
    for (const auto& s : batch) {
      const Index n = s.images.dim(0);
      auto study_maps = batch.size() == 1 ? maps : slice(g, maps, 0, off, n);
      off += n;
      auto vt = flatten_project(g, study_maps, encoder.proj);
      auto x = vt.tokens;
      if (encoder.ecfg.pos_embed) {
        const Index Sn = x.dim(0);
        if (Sn > encoder.ecfg.max_tokens)
          throw ConfigError("encoder: token count exceeds max_tokens");
        x = add(g, x, slice(g, encoder.pos_table, 0, 0, Sn));
      }
      auto y = encoder.transformer.forward(g, x, training, rng);

      if (s.tokens.size() < 3 || s.tokens[0] != kBos)
        throw DataError("teacher_forced_loss: report must be BOS..EOS with at "
                        "least one real token");
      auto state = decoder.init_state(g, y);
      Tensor<S> sample_loss;
      bool first = true;
      for (size_t t = 0; t + 1 < s.tokens.size(); ++t) {
        const Index target = s.tokens[t + 1];
        if (target == kPad) break;
        auto [logits, next] = decoder.step(g, s.tokens[t], state, y);
        auto ce = cross_entropy_logits(g, reshape(g, logits, {1, decoder.cfg.vocab}),
                                       {target});
        sample_loss = first ? ce : add(g, sample_loss, ce);
        first = false;
        ++tokens_total;
        state = next;
        if (target == kEos) break;
      }
      if (first)
        throw DataError("teacher_forced_loss: report with no target tokens");
      total = total.size() == 0 ? sample_loss : add(g, total, sample_loss);
    }
    return scale(g, total, S(1) / static_cast<S>(tokens_total));
  }
};

/// Beam/greedy stepper over one encoded study.
template <class S>
struct StudyStepper {
  IvgnModel<S>& model;
  Graph<S>& g;
  Tensor<S> y;

  DecoderState<S> init() { return model.decoder.init_state(g, y); }

  std::pair<std::vector<double>, DecoderState<S>> step(
      const DecoderState<S>& state, Index prev) {
    auto [logits, next] = model.decoder.step(g, prev, state, y);
    auto lp = log_softmax(g, logits, 0);
    return {std::vector<double>(lp.values().begin(), lp.values().end()),
            std::move(next)};
  }
};

/// Decodes one study with the model in eval mode. PAD and BOS are never
/// selectable, so the returned token list is free of reserved ids.
template <class S>
DecodedSequence decode_study(IvgnModel<S>& model, const Tensor<S>& images,
                             GenerateOptions opt, bool greedy = false) {
  Graph<S> g(false);
  Rng rng(0);  // eval mode: dropout inactive
  auto y = model.encode(g, images, false, rng);
  StudyStepper<S> stepper{model, g, y};
  opt.start_token = kBos;
  opt.eos_token = kEos;
  opt.banned = {kPad, kBos};
  return greedy ? greedy_decode(stepper, opt) : beam_search(stepper, opt);
}

}  // namespace ivgn
