// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Text-generation metrics: corpus BLEU-1..4, ROUGE-L, a simplified METEOR
// (exact + suffix-stem unigram matching, no lexical database; deliberately
// named meteor_simplified so it is never mistaken for the official score),
// and clinical-efficacy P/R/F1 over 14 fixed categories with a rule-based
// keyword/negation labeler.

#pragma once

#include <array>
#include <optional>

#include "ivgn/text.hpp"

namespace ivgn {

using Tokens = std::vector<std::string>;

struct MetricReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double rouge_l = 0;
  double meteor_simplified = 0;
  std::optional<double> ce_precision, ce_recall, ce_f1;

  std::string to_json() const;
};

// ---- BLEU -----------------------------------------------------------------

/// Sentence-level BLEU-N with clipped n-gram precision, geometric mean over
/// orders 1..N and brevity penalty. Unsmoothed by default: any zero
/// precision zeroes the score. Empty candidates score 0.
double bleu_n(const Tokens& candidate, const std::vector<Tokens>& references,
              int n, bool smooth = false);

/// Corpus-level BLEU-N: clipped counts pooled over all pairs.
double corpus_bleu_n(const std::vector<Tokens>& candidates,
                     const std::vector<std::vector<Tokens>>& references,
                     int n, bool smooth = false);

// ---- ROUGE-L ----------------------------------------------------------------

/// LCS-based F-score with beta = 1.2. Both-empty pairs score 0.
double rouge_l(const Tokens& candidate, const Tokens& reference,
               double beta = 1.2);

// ---- simplified METEOR -------------------------------------------------------

/// Unigram alignment (exact stage then suffix-stem stage, greedy left to
/// right), F_mean = 10PR/(R+9P), chunk penalty 0.5*(chunks/matches)^3.
double meteor_simplified(const Tokens& candidate, const Tokens& reference);

/// Suffix-stripping stem used by the simplified METEOR matcher.
std::string simple_stem(const std::string& word);

// ---- clinical efficacy ---------------------------------------------------------

inline constexpr int kCeCategories = 14;

enum class CeStatus { positive, negative, unmentioned };

using CeLabeling = std::array<CeStatus, kCeCategories>;

struct CeRules {
  struct Category {
    std::string name;
    std::vector<Tokens> keywords;  // each keyword may span several tokens
    std::vector<Tokens> negators;
  };
  std::vector<Category> categories;  // exactly kCeCategories entries

  /// Parses the tab-separated table: name \t keywords,... \t negators,...
  /// One line per category; requires exactly 14 categories.
  static CeRules parse(const std::string& table_text);
  static CeRules load_file(const std::string& path);
  /// Built-in table mirroring assets/ce_rules.tsv.
  static const CeRules& defaults();
};

/// positive: a keyword occurs outside any negation scope; negative: keywords
/// occur but every occurrence has a negator ending within the 3 tokens before
/// it; unmentioned otherwise.
CeLabeling ce_label(const Tokens& report, const CeRules& rules);

struct CeScores {
  double precision = 0, recall = 0, f1 = 0;
};

/// Category-level counts over the report set (positive vs rest), averaged
/// without weighting over the 14 categories. Zero denominators contribute 0.
CeScores ce_scores(const std::vector<CeLabeling>& ground_truth,
                   const std::vector<CeLabeling>& generated);

// ---- corpus entry point --------------------------------------------------------

/// Single-reference corpus scoring; CE metrics only when rules are given.
MetricReport evaluate_corpus(const std::vector<std::string>& candidates,
                             const std::vector<std::string>& references,
                             const CeRules* rules = nullptr,
                             bool bleu_smooth = false);

}  // namespace ivgn
