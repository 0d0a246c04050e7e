// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Inference-time sequence generation: greedy rollout and beam search over
// any stepper exposing `init()` and `step(state, prev) -> (logprobs, state)`.
// Tie-breaking everywhere is (score desc, token id asc, creation order), so
// runs are bit-reproducible.

#pragma once

#include <algorithm>
#include <cmath>

#include "ivgn/common.hpp"

namespace ivgn {

struct GenerateOptions {
  Index beam_size = 3;
  Index max_len = 60;
  double length_norm_alpha = 0.0;
  Index start_token = 1;            // fed as "previous token" at step one
  Index eos_token = 2;
  std::vector<Index> banned;        // never selectable (PAD/BOS hygiene)
};

struct DecodedSequence {
  std::vector<Index> tokens;  // without start/EOS
  double logprob = 0.0;
};

/// Argmax rollout; ties go to the lowest token id.
template <class Stepper>
auto greedy_decode(Stepper& stepper, const GenerateOptions& opt)
    -> DecodedSequence {
  if (opt.max_len < 1) throw ConfigError("greedy: max_len must be >= 1");
  DecodedSequence out;
  auto state = stepper.init();
  Index prev = opt.start_token;
  for (Index t = 0; t < opt.max_len; ++t) {
    auto [logprobs, next] = stepper.step(state, prev);
    Index best = -1;
    for (Index v = 0; v < static_cast<Index>(logprobs.size()); ++v) {
      if (std::find(opt.banned.begin(), opt.banned.end(), v) !=
          opt.banned.end())
        continue;
      if (best < 0 || logprobs[static_cast<size_t>(v)] >
                          logprobs[static_cast<size_t>(best)])
        best = v;
    }
    out.logprob += logprobs[static_cast<size_t>(best)];
    if (best == opt.eos_token) break;
    out.tokens.push_back(best);
    prev = best;
    state = next;
  }
  return out;
}

/// Standard beam search. Hypotheses that emit EOS are frozen and carried
/// through; everything terminates within max_len steps. Final ranking uses
/// logprob / len^alpha (alpha = 0 keeps the raw logprob order).
template <class Stepper>
auto beam_search(Stepper& stepper, const GenerateOptions& opt)
    -> DecodedSequence {
  if (opt.beam_size < 1) throw ConfigError("beam_search: beam_size must be >= 1");
  if (opt.max_len < 1) throw ConfigError("beam_search: max_len must be >= 1");

  using State = std::decay_t<decltype(stepper.init())>;
  struct Hyp {
    std::vector<Index> tokens;
    double logp = 0.0;
    State state;
    bool done = false;
    Index last_token = -1;  // tie key
    Index created = 0;
  };

  std::vector<Hyp> beams(1);
  beams[0].state = stepper.init();
  Index counter = 1;

  auto better = [](const Hyp& a, const Hyp& b) {
    if (a.logp != b.logp) return a.logp > b.logp;
    if (a.last_token != b.last_token) return a.last_token < b.last_token;
    return a.created < b.created;
  };

  for (Index t = 0; t < opt.max_len; ++t) {
    bool any_live = false;
    for (const auto& h : beams)
      if (!h.done) any_live = true;
    if (!any_live) break;

    std::vector<Hyp> candidates;
    for (auto& h : beams) {
      if (h.done) {
        candidates.push_back(h);
        continue;
      }
      const Index prev = h.tokens.empty() ? opt.start_token : h.tokens.back();
      auto [logprobs, next] = stepper.step(h.state, prev);
      for (Index v = 0; v < static_cast<Index>(logprobs.size()); ++v) {
        if (std::find(opt.banned.begin(), opt.banned.end(), v) !=
            opt.banned.end())
          continue;
        Hyp c;
        c.tokens = h.tokens;
        c.logp = h.logp + logprobs[static_cast<size_t>(v)];
        c.state = next;
        c.last_token = v;
        c.created = counter++;
        if (v == opt.eos_token) {
          c.done = true;
        } else {
          c.tokens.push_back(v);
        }
        candidates.push_back(std::move(c));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), better);
    if (static_cast<Index>(candidates.size()) > opt.beam_size)
      candidates.resize(static_cast<size_t>(opt.beam_size));
    beams = std::move(candidates);
  }

  auto final_score = [&](const Hyp& h) {
    if (opt.length_norm_alpha == 0.0) return h.logp;
    const double len = std::max<double>(1.0, static_cast<double>(h.tokens.size()));
    return h.logp / std::pow(len, opt.length_norm_alpha);
  };
  const Hyp* best = &beams[0];
  for (const auto& h : beams) {
    const double sh = final_score(h), sb = final_score(*best);
    if (sh > sb ||
        (sh == sb && (h.last_token < best->last_token ||
                      (h.last_token == best->last_token &&
                       h.created < best->created))))
      best = &h;
  }
  return {best->tokens, best->logp};
}

}  // namespace ivgn
