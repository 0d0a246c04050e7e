// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ivgn/common.hpp"

namespace ivgn {

/// Lowercases, maps punctuation to spaces and splits on whitespace.
/// Deterministic; shared by the data pipeline and every metric.
std::vector<std::string> tokenize(const std::string& text);

/// token <-> id bijection with reserved ids PAD=0, BOS=1, EOS=2, UNK=3.
struct Vocabulary {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, Index> token_to_id;
  Index min_freq = 1;

  /// Corpus tokens with frequency >= min_freq, ordered by (frequency desc,
  /// token asc) for deterministic id assignment.
  static Vocabulary build(const std::vector<std::string>& reports,
                          Index min_freq);

  Index size() const { return static_cast<Index>(id_to_token.size()); }
  Index id(const std::string& token) const;
  const std::string& token(Index id) const;

  std::vector<Index> encode(const std::string& text) const;
  /// BOS + ids + EOS.
  std::vector<Index> frame(const std::vector<Index>& ids) const;
  /// Joins real tokens; reserved ids other than UNK are skipped.
  std::string decode(const std::vector<Index>& ids) const;

  std::string to_json() const;
  static Vocabulary from_json(const std::string& json_text);
};

}  // namespace ivgn
