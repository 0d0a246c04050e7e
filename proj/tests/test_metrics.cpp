// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ivgn/metrics.hpp"

using namespace ivgn;

namespace {

Tokens tk(const std::string& s) { return tokenize(s); }

// Independent LCS oracle (full DP table, kept deliberately naive).
long lcs_oracle(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<long>> dp(a.size() + 1,
                                    std::vector<long>(b.size() + 1, 0));
  for (size_t i = 1; i <= a.size(); ++i)
    for (size_t j = 1; j <= b.size(); ++j)
      dp[i][j] = a[i - 1] == b[j - 1]
                     ? dp[i - 1][j - 1] + 1
                     : std::max(dp[i - 1][j], dp[i][j - 1]);
  return dp[a.size()][b.size()];
}

double rouge_from_lcs(long l, size_t clen, size_t rlen, double beta = 1.2) {
  if (l == 0 || clen == 0 || rlen == 0) return 0.0;
  const double p = double(l) / clen, r = double(l) / rlen, b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

}  // namespace

TEST_CASE("tokenizer: lowercase, punctuation stripped, deterministic") {
  CHECK(tk("The Lungs are CLEAR.") ==
        Tokens{"the", "lungs", "are", "clear"});
  CHECK(tk("  no-finding,  seen! ") == Tokens{"no", "finding", "seen"});
  CHECK(tk("") == Tokens{});
  CHECK(tk("...") == Tokens{});
}

TEST_CASE("vocabulary: thresholds, determinism, round trip") {
  auto v = Vocabulary::build({"a a b"}, 2);
  CHECK(v.size() == 5);  // 4 reserved + "a"
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == kUnk);

  auto v1 = Vocabulary::build({"c b a", "b c"}, 1);
  CHECK(v1.size() == 7);
  // frequency desc, then token asc: b(2), c(2), a(1)
  CHECK(v1.id("b") == 4);
  CHECK(v1.id("c") == 5);
  CHECK(v1.id("a") == 6);
  auto v2 = Vocabulary::build({"c b a", "b c"}, 1);
  CHECK(v1.id_to_token == v2.id_to_token);

  auto ids = v1.encode("a b z");
  CHECK(ids == std::vector<Index>{6, 4, kUnk});
  auto framed = v1.frame(ids);
  CHECK(framed.front() == kBos);
  CHECK(framed.back() == kEos);
  CHECK(v1.decode(framed) == "a b <unk>");

  auto v3 = Vocabulary::from_json(v1.to_json());
  CHECK(v3.id_to_token == v1.id_to_token);

  CHECK_THROWS_AS(Vocabulary::build({}, 1), DataError);
}

TEST_CASE("bleu: identity scores exactly 1.0 at every order") {
  auto c = tk("the heart size is normal and the lungs are clear");
  for (int n = 1; n <= 4; ++n) CHECK(bleu_n(c, {c}, n) == 1.0);
}

TEST_CASE("bleu: hand-counted clipping case") {
  // candidate "the the the the" vs reference "the cat sat":
  // clipped unigram count = 1, total = 4, c=4 > r=3 so BP = 1
  auto score = bleu_n(tk("the the the the"), {tk("the cat sat")}, 1);
  CHECK(score == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("bleu: zero overlap and empty candidate score 0") {
  CHECK(bleu_n(tk("alpha beta"), {tk("gamma delta")}, 1) == 0.0);
  CHECK(bleu_n({}, {tk("a b c")}, 2) == 0.0);
  CHECK(bleu_n(tk("a b"), {tk("a b")}, 4) == 0.0);  // no 4-grams, unsmoothed
  CHECK(bleu_n(tk("a b"), {tk("c d")}, 2, /*smooth=*/true) == 0.0);
}

TEST_CASE("bleu: brevity penalty on short candidates") {
  // candidate 2 tokens, reference 4: p1 = 1, BP = exp(1 - 4/2)
  auto s = bleu_n(tk("a b"), {tk("a b c d")}, 1);
  CHECK(s == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("bleu: order monotonicity on identical-prefix pairs") {
  std::mt19937_64 rng(555);
  std::uniform_int_distribution<int> len(4, 12), word(0, 9);
  auto rand_tokens = [&](int n) {
    Tokens t;
    for (int i = 0; i < n; ++i) t.push_back("w" + std::to_string(word(rng)));
    return t;
  };
  for (int i = 0; i < 100; ++i) {
    Tokens prefix = rand_tokens(len(rng));
    Tokens cand = prefix, ref = prefix;
    for (auto& t : rand_tokens(len(rng) / 2)) cand.push_back(t);
    for (auto& t : rand_tokens(len(rng) / 2)) ref.push_back(t);
    double prev = 2.0;
    for (int n = 1; n <= 4; ++n) {
      double s = bleu_n(cand, {ref}, n);
      CHECK(s <= prev + 1e-12);
      prev = s;
    }
  }
}

TEST_CASE("rouge_l: identity, dp oracle and formula") {
  auto c = tk("a c d");
  auto r = tk("a b c d");
  CHECK(rouge_l(c, c) == 1.0);

  const long l = lcs_oracle(c, r);
  CHECK(l == 3);
  CHECK(rouge_l(c, r) ==
        doctest::Approx(rouge_from_lcs(l, 3, 4)).epsilon(1e-12));
  // P = 1, R = 0.75 plugged into ((1+b^2) P R)/(R + b^2 P)
  CHECK(rouge_l(c, r) ==
        doctest::Approx(2.44 * 0.75 / (0.75 + 1.44)).epsilon(1e-12));

  // reversing a 2-token text leaves LCS 1
  CHECK(lcs_oracle(tk("a b"), tk("b a")) == 1);
  CHECK(rouge_l(tk("a b"), tk("b a")) ==
        doctest::Approx(rouge_from_lcs(1, 2, 2)).epsilon(1e-12));

  CHECK(rouge_l({}, {}) == 0.0);
  CHECK(rouge_l(tk("x"), {}) == 0.0);
}

TEST_CASE("rouge_l: swap changes F exactly as the formula says") {
  std::mt19937_64 rng(666);
  std::uniform_int_distribution<int> len(3, 10), word(0, 5);
  for (int i = 0; i < 30; ++i) {
    Tokens a, b;
    for (int k = 0; k < len(rng); ++k) a.push_back(std::to_string(word(rng)));
    for (int k = 0; k < len(rng); ++k) b.push_back(std::to_string(word(rng)));
    const long l = lcs_oracle(a, b);
    CHECK(rouge_l(a, b) ==
          doctest::Approx(rouge_from_lcs(l, a.size(), b.size())).epsilon(1e-12));
    CHECK(rouge_l(b, a) ==
          doctest::Approx(rouge_from_lcs(l, b.size(), a.size())).epsilon(1e-12));
  }
}

TEST_CASE("meteor_simplified: formula cases") {
  // identical single token: F = 1, penalty = 0.5 -> 0.5
  CHECK(meteor_simplified(tk("clear"), tk("clear")) ==
        doctest::Approx(0.5).epsilon(1e-12));

  // identical k-token text: one chunk, penalty 0.5/k^3
  for (size_t k : {2, 4, 8}) {
    Tokens t;
    for (size_t i = 0; i < k; ++i) t.push_back("w" + std::to_string(i));
    const double expect = 1.0 - 0.5 / (double(k) * k * k);
    CHECK(meteor_simplified(t, t) == doctest::Approx(expect).epsilon(1e-12));
  }

  CHECK(meteor_simplified(tk("a b"), tk("c d")) == 0.0);
  CHECK(meteor_simplified({}, tk("a")) == 0.0);

  // stem stage: inflected forms still align
  CHECK(meteor_simplified(tk("effusions seen"), tk("effusion seen")) > 0.5);
  CHECK(simple_stem("opacities") == "opacity");
  CHECK(simple_stem("walking") == "walk");
  CHECK(simple_stem("walked") == "walk");

  // two chunks: candidate "a b d c" vs reference "a b c d"
  // matches 4, chunks 3 (a-b, d, c) -> F=1, penalty 0.5*(3/4)^3
  const double s = meteor_simplified(tk("a b d c"), tk("a b c d"));
  CHECK(s == doctest::Approx(1.0 - 0.5 * std::pow(0.75, 3)).epsilon(1e-12));
}

TEST_CASE("ce_label: keyword, negation and unmentioned rules") {
  const auto& rules = CeRules::defaults();
  auto idx = [&](const std::string& name) {
    for (size_t i = 0; i < rules.categories.size(); ++i)
      if (rules.categories[i].name == name) return i;
    throw std::runtime_error("unknown category " + name);
  };

  auto neg = ce_label(tk("there is no pleural effusion"), rules);
  CHECK(neg[idx("pleural_effusion")] == CeStatus::negative);

  auto pos = ce_label(tk("mild cardiomegaly is present"), rules);
  CHECK(pos[idx("cardiomegaly")] == CeStatus::positive);

  auto none = ce_label(tk("lungs are clear"), rules);
  for (size_t c = 0; c < rules.categories.size(); ++c)
    CHECK(none[c] == CeStatus::unmentioned);

  // negator outside the 3-token window does not negate
  auto far = ce_label(tk("no evidence of anything except pneumothorax"), rules);
  CHECK(far[idx("pneumothorax")] == CeStatus::positive);

  // positive occurrence dominates a negated one
  auto mixed =
      ce_label(tk("no pneumothorax previously now small pneumothorax"), rules);
  CHECK(mixed[idx("pneumothorax")] == CeStatus::positive);

  // multiword negator
  auto multi = ce_label(tk("lungs free of consolidation"), rules);
  CHECK(multi[idx("consolidation")] == CeStatus::negative);
}

TEST_CASE("ce rules: file parse round-trips the defaults") {
  auto parsed = CeRules::parse(
      "no_finding\tno acute findings\t\n"
      "enlarged_cardiomediastinum\tenlarged cardiomediastinum\tno\n"
      "cardiomegaly\tcardiomegaly\tno\n"
      "lung_lesion\tnodule\tno\n"
      "lung_opacity\topacity\tno\n"
      "edema\tedema\tno\n"
      "consolidation\tconsolidation\tno\n"
      "pneumonia\tpneumonia\tno\n"
      "atelectasis\tatelectasis\tno\n"
      "pneumothorax\tpneumothorax\tno\n"
      "pleural_effusion\tpleural effusion\tno\n"
      "pleural_other\tpleural thickening\tno\n"
      "fracture\tfracture\tno\n"
      "support_devices\ttube\tno\n");
  CHECK(parsed.categories.size() == 14);
  CHECK(parsed.categories[10].keywords[0] == Tokens{"pleural", "effusion"});

  CHECK_THROWS_AS(CeRules::parse("one_line\tkeyword\t\n"), DataError);
}

TEST_CASE("ce_scores: perfect match, no predictions, hand-tallied fixture") {
  const auto& rules = CeRules::defaults();
  auto L = [&](const std::string& s) { return ce_label(tk(s), rules); };

  // perfect agreement with every category mentioned positively
  {
    CeLabeling all_pos;
    all_pos.fill(CeStatus::positive);
    auto s = ce_scores({all_pos}, {all_pos});
    CHECK(s.precision == doctest::Approx(1.0));
    CHECK(s.recall == doctest::Approx(1.0));
    CHECK(s.f1 == doctest::Approx(1.0));
  }
  // generated all-unmentioned vs positives in the ground truth -> recall 0
  {
    CeLabeling gt;
    gt.fill(CeStatus::positive);
    CeLabeling gen;
    gen.fill(CeStatus::unmentioned);
    auto s = ce_scores({gt}, {gen});
    CHECK(s.recall == 0.0);
    CHECK(s.precision == 0.0);
  }
  // 3-report fixture, confusion counts tallied by hand:
  //   cardiomegaly: gt + in r1,r2; gen + in r1 only -> tp=1 fp=0 fn=1
  //     P=1, R=0.5, F=2/3
  //   pleural_effusion: gt + in r2; gen + in r2,r3 -> tp=1 fp=1 fn=0
  //     P=0.5, R=1, F=2/3
  //   all other categories: no positives anywhere -> 0 contributions
  {
    std::vector<CeLabeling> gt = {L("cardiomegaly"),
                                  L("cardiomegaly with pleural effusion"),
                                  L("lungs are clear")};
    std::vector<CeLabeling> gen = {L("cardiomegaly"), L("pleural effusion"),
                                   L("pleural effusion")};
    auto s = ce_scores(gt, gen);
    const double p = (1.0 + 0.5) / 14.0;
    const double r = (0.5 + 1.0) / 14.0;
    const double f = (2.0 / 3.0 + 2.0 / 3.0) / 14.0;
    CHECK(s.precision == doctest::Approx(p).epsilon(1e-9));
    CHECK(s.recall == doctest::Approx(r).epsilon(1e-9));
    CHECK(s.f1 == doctest::Approx(f).epsilon(1e-9));
  }
  CHECK_THROWS_AS(ce_scores({CeLabeling{}}, {}), UsageError);
}

TEST_CASE("word order: swapping sentences moves ROUGE-L, never CE") {
  const auto& rules = CeRules::defaults();
  const std::string a = "there is a small pleural effusion . "
                        "support devices are in place .";
  const std::string b = "support devices are in place . "
                        "there is a small pleural effusion .";
  const std::string ref = a;
  CHECK(rouge_l(tk(a), tk(ref)) != rouge_l(tk(b), tk(ref)));
  auto la = ce_label(tk(a), rules);
  auto lb = ce_label(tk(b), rules);
  CHECK(la == lb);
}

TEST_CASE("evaluate_corpus: identity, degenerate rows, bounds") {
  std::vector<std::string> refs = {"the heart is normal",
                                   "small pleural effusion seen",
                                   "lungs are clear"};
  auto rep = evaluate_corpus(refs, refs, &CeRules::defaults());
  CHECK(rep.bleu1 == 1.0);
  CHECK(rep.bleu4 == 1.0);
  CHECK(rep.rouge_l == 1.0);
  CHECK(rep.meteor_simplified > 0.9);
  // identical reports agree on every category, but only pleural_effusion is
  // mentioned at all; the other 13 categories contribute 0 to the average
  CHECK(*rep.ce_f1 == doctest::Approx(1.0 / 14));
  CHECK(*rep.ce_precision == doctest::Approx(1.0 / 14));

  // an empty candidate line scores 0 but the corpus is still defined
  std::vector<std::string> cands = {"", "small pleural effusion seen",
                                    "lungs are clear"};
  auto rep2 = evaluate_corpus(cands, refs);
  CHECK(rep2.bleu1 > 0.0);
  CHECK(rep2.bleu1 < 1.0);
  CHECK_FALSE(rep2.ce_f1.has_value());

  for (double v : {rep2.bleu1, rep2.bleu2, rep2.bleu3, rep2.bleu4,
                   rep2.rouge_l, rep2.meteor_simplified}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(evaluate_corpus({"a"}, {"a", "b"}), UsageError);
}
