// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#include "ivgn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace ivgn {

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["bleu1"] = bleu1;
  j["bleu2"] = bleu2;
  j["bleu3"] = bleu3;
  j["bleu4"] = bleu4;
  j["rouge_l"] = rouge_l;
  j["meteor_simplified"] = meteor_simplified;
  if (ce_precision) {
    j["ce_precision"] = *ce_precision;
    j["ce_recall"] = *ce_recall;
    j["ce_f1"] = *ce_f1;
  }
  return j.dump(2);
}

// ---- BLEU -----------------------------------------------------------------

namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts ngrams(const Tokens& t, int n) {
  NgramCounts c;
  if (static_cast<int>(t.size()) < n) return c;
  for (size_t i = 0; i + n <= t.size(); ++i)
    ++c[std::vector<std::string>(t.begin() + i, t.begin() + i + n)];
  return c;
}

struct BleuTally {
  std::array<long, 4> clipped{0, 0, 0, 0};
  std::array<long, 4> total{0, 0, 0, 0};
  long cand_len = 0;
  long ref_len = 0;  // closest reference length

  void add(const Tokens& cand, const std::vector<Tokens>& refs, int n) {
    cand_len += static_cast<long>(cand.size());
    long best_ref = refs.empty() ? 0 : static_cast<long>(refs[0].size());
    for (const auto& r : refs) {
      const long rl = static_cast<long>(r.size());
      const long diff = std::abs(rl - static_cast<long>(cand.size()));
      const long best_diff = std::abs(best_ref - static_cast<long>(cand.size()));
      if (diff < best_diff || (diff == best_diff && rl < best_ref))
        best_ref = rl;
    }
    ref_len += best_ref;
    for (int k = 1; k <= n; ++k) {
      auto cc = ngrams(cand, k);
      NgramCounts max_ref;
      for (const auto& r : refs)
        for (const auto& [gram, cnt] : ngrams(r, k))
          max_ref[gram] = std::max(max_ref[gram], cnt);
      for (const auto& [gram, cnt] : cc) {
        total[k - 1] += cnt;
        auto it = max_ref.find(gram);
        if (it != max_ref.end()) clipped[k - 1] += std::min(cnt, it->second);
      }
    }
  }

  double score(int n, bool smooth) const {
    if (cand_len == 0) return 0.0;
    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
      long c = clipped[k - 1], t = total[k - 1];
      if (smooth && k > 1) {
        ++c;
        ++t;
      }
      if (c == 0 || t == 0) return 0.0;
      log_sum += std::log(static_cast<double>(c) / static_cast<double>(t));
    }
    double bp = 1.0;
    if (cand_len < ref_len)
      bp = std::exp(1.0 - static_cast<double>(ref_len) /
                              static_cast<double>(cand_len));
    // exact 1.0 for identical inputs: every ratio is 1 and bp is 1
    return bp * std::exp(log_sum / n);
  }
};

}  // namespace

double bleu_n(const Tokens& candidate, const std::vector<Tokens>& references,
              int n, bool smooth) {
  if (n < 1 || n > 4) throw UsageError("bleu: order must be 1..4");
  BleuTally tally;
  tally.add(candidate, references, n);
  return tally.score(n, smooth);
}

double corpus_bleu_n(const std::vector<Tokens>& candidates,
                     const std::vector<std::vector<Tokens>>& references,
                     int n, bool smooth) {
  if (n < 1 || n > 4) throw UsageError("bleu: order must be 1..4");
  if (candidates.size() != references.size())
    throw UsageError("bleu: candidate/reference count mismatch");
  BleuTally tally;
  for (size_t i = 0; i < candidates.size(); ++i)
    tally.add(candidates[i], references[i], n);
  return tally.score(n, smooth);
}

// ---- ROUGE-L ----------------------------------------------------------------

namespace {

long lcs_length(const Tokens& a, const Tokens& b) {
  const size_t m = a.size(), n = b.size();
  std::vector<long> prev(n + 1, 0), cur(n + 1, 0);
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

}  // namespace

double rouge_l(const Tokens& candidate, const Tokens& reference, double beta) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double l = static_cast<double>(lcs_length(candidate, reference));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(candidate.size());
  const double r = l / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return ((1.0 + b2) * p * r) / (r + b2 * p);
}

// ---- simplified METEOR -------------------------------------------------------

std::string simple_stem(const std::string& word) {
  if (word.size() > 5 && word.compare(word.size() - 3, 3, "ies") == 0)
    return word.substr(0, word.size() - 3) + "y";
  static const std::vector<std::string> suffixes = {"ing", "ed", "es", "ly",
                                                    "s"};
  for (const auto& suf : suffixes) {
    if (word.size() > suf.size() + 2 &&
        word.compare(word.size() - suf.size(), suf.size(), suf) == 0)
      return word.substr(0, word.size() - suf.size());
  }
  return word;
}

double meteor_simplified(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;

  std::vector<int> cand_to_ref(candidate.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);

  auto run_stage = [&](auto&& eq) {
    for (size_t ci = 0; ci < candidate.size(); ++ci) {
      if (cand_to_ref[ci] >= 0) continue;
      for (size_t ri = 0; ri < reference.size(); ++ri) {
        if (ref_used[ri]) continue;
        if (eq(candidate[ci], reference[ri])) {
          cand_to_ref[ci] = static_cast<int>(ri);
          ref_used[ri] = true;
          break;
        }
      }
    }
  };
  run_stage([](const std::string& a, const std::string& b) { return a == b; });
  run_stage([](const std::string& a, const std::string& b) {
    return simple_stem(a) == simple_stem(b);
  });

  long matches = 0;
  for (int m : cand_to_ref)
    if (m >= 0) ++matches;
  if (matches == 0) return 0.0;

  // chunks: maximal runs that are contiguous in both strings
  long chunks = 0;
  int prev_ci = -2, prev_ri = -2;
  for (size_t ci = 0; ci < candidate.size(); ++ci) {
    if (cand_to_ref[ci] < 0) continue;
    if (static_cast<int>(ci) != prev_ci + 1 || cand_to_ref[ci] != prev_ri + 1)
      ++chunks;
    prev_ci = static_cast<int>(ci);
    prev_ri = cand_to_ref[ci];
  }

  const double p = static_cast<double>(matches) / candidate.size();
  const double r = static_cast<double>(matches) / reference.size();
  const double f_mean = 10.0 * p * r / (r + 9.0 * p);
  const double ratio = static_cast<double>(chunks) / static_cast<double>(matches);
  const double penalty = 0.5 * ratio * ratio * ratio;
  return f_mean * (1.0 - penalty);
}

// ---- clinical efficacy ---------------------------------------------------------

namespace {

std::vector<Tokens> parse_phrase_list(const std::string& csv) {
  std::vector<Tokens> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto toks = tokenize(item);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

bool phrase_at(const Tokens& text, size_t pos, const Tokens& phrase) {
  if (pos + phrase.size() > text.size()) return false;
  for (size_t k = 0; k < phrase.size(); ++k)
    if (text[pos + k] != phrase[k]) return false;
  return true;
}

}  // namespace

CeRules CeRules::parse(const std::string& table_text) {
  CeRules rules;
  std::stringstream ss(table_text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ls(line);
    std::string name, keywords, negators;
    if (!std::getline(ls, name, '\t') || !std::getline(ls, keywords, '\t'))
      throw DataError("ce rules: malformed line: " + line);
    std::getline(ls, negators, '\t');
    Category c;
    c.name = name;
    c.keywords = parse_phrase_list(keywords);
    c.negators = parse_phrase_list(negators);
    if (c.keywords.empty())
      throw DataError("ce rules: category without keywords: " + name);
    rules.categories.push_back(std::move(c));
  }
  if (static_cast<int>(rules.categories.size()) != kCeCategories)
    throw DataError("ce rules: expected " + std::to_string(kCeCategories) +
                    " categories, got " +
                    std::to_string(rules.categories.size()));
  return rules;
}

CeRules CeRules::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("ce rules: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const CeRules& CeRules::defaults() {
  static const CeRules rules = parse(
      "no_finding\tno acute findings,no findings,unremarkable study\t\n"
      "enlarged_cardiomediastinum\tenlarged cardiomediastinum,mediastinal "
      "widening,widened mediastinum\tno,without,free of\n"
      "cardiomegaly\tcardiomegaly,enlarged heart,heart is enlarged\tno,"
      "without,free of\n"
      "lung_lesion\tlung lesion,nodule,mass,cavity,cavitary lesion\tno,"
      "without,free of\n"
      "lung_opacity\tlung opacity,opacity,opacities,round opacity\tno,"
      "without,free of\n"
      "edema\tedema,pulmonary edema,vascular congestion\tno,without,free of\n"
      "consolidation\tconsolidation,patchy consolidation,consolidations\tno,"
      "without,free of\n"
      "pneumonia\tpneumonia,infectious process\tno,without,free of\n"
      "atelectasis\tatelectasis,linear atelectasis,collapse\tno,without,"
      "free of\n"
      "pneumothorax\tpneumothorax,pneumothoraces\tno,without,free of\n"
      "pleural_effusion\tpleural effusion,effusion,effusions,pleural "
      "fluid\tno,without,free of\n"
      "pleural_other\tpleural thickening,pleural scarring,fibrothorax\tno,"
      "without,free of\n"
      "fracture\tfracture,fractures,rib fracture\tno,without,free of\n"
      "support_devices\tsupport devices,tube,catheter,pacemaker,line in "
      "place\tno,without,free of\n");
  return rules;
}

CeLabeling ce_label(const Tokens& report, const CeRules& rules) {
  CeLabeling out;
  out.fill(CeStatus::unmentioned);
  for (int c = 0; c < kCeCategories; ++c) {
    const auto& cat = rules.categories[static_cast<size_t>(c)];
    bool any = false, any_unnegated = false;
    for (const auto& kw : cat.keywords) {
      for (size_t i = 0; i + kw.size() <= report.size(); ++i) {
        if (!phrase_at(report, i, kw)) continue;
        any = true;
        bool negated = false;
        for (const auto& neg : cat.negators) {
          // negator ending within the 3 tokens before the keyword
          const size_t lo = i >= 3 + neg.size() - 1 ? i - 3 - (neg.size() - 1) : 0;
          for (size_t j = lo; j + neg.size() <= i; ++j) {
            if (i - (j + neg.size() - 1) <= 3 && phrase_at(report, j, neg)) {
              negated = true;
              break;
            }
          }
          if (negated) break;
        }
        if (!negated) any_unnegated = true;
      }
    }
    if (any_unnegated)
      out[static_cast<size_t>(c)] = CeStatus::positive;
    else if (any)
      out[static_cast<size_t>(c)] = CeStatus::negative;
  }
  return out;
}

CeScores ce_scores(const std::vector<CeLabeling>& ground_truth,
                   const std::vector<CeLabeling>& generated) {
  if (ground_truth.size() != generated.size())
    throw UsageError("ce_scores: misaligned labelings");
  CeScores total;
  for (int c = 0; c < kCeCategories; ++c) {
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < ground_truth.size(); ++i) {
      const bool gt = ground_truth[i][static_cast<size_t>(c)] == CeStatus::positive;
      const bool gen = generated[i][static_cast<size_t>(c)] == CeStatus::positive;
      if (gt && gen) ++tp;
      if (!gt && gen) ++fp;
      if (gt && !gen) ++fn;
    }
    const double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f = p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
    total.precision += p;
    total.recall += r;
    total.f1 += f;
  }
  total.precision /= kCeCategories;
  total.recall /= kCeCategories;
  total.f1 /= kCeCategories;
  return total;
}

// ---- corpus entry point --------------------------------------------------------

MetricReport evaluate_corpus(const std::vector<std::string>& candidates,
                             const std::vector<std::string>& references,
                             const CeRules* rules, bool bleu_smooth) {
  if (candidates.size() != references.size())
    throw UsageError("evaluate: candidate/reference count mismatch");
  if (candidates.empty()) throw UsageError("evaluate: empty corpus");

  std::vector<Tokens> cand, ref;
  std::vector<std::vector<Tokens>> refs;
  cand.reserve(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    cand.push_back(tokenize(candidates[i]));
    ref.push_back(tokenize(references[i]));
    refs.push_back({ref.back()});
  }

  MetricReport rep;
  rep.bleu1 = corpus_bleu_n(cand, refs, 1, bleu_smooth);
  rep.bleu2 = corpus_bleu_n(cand, refs, 2, bleu_smooth);
  rep.bleu3 = corpus_bleu_n(cand, refs, 3, bleu_smooth);
  rep.bleu4 = corpus_bleu_n(cand, refs, 4, bleu_smooth);
  double rl = 0, mt = 0;
  for (size_t i = 0; i < cand.size(); ++i) {
    rl += rouge_l(cand[i], ref[i]);
    mt += meteor_simplified(cand[i], ref[i]);
  }
  rep.rouge_l = rl / static_cast<double>(cand.size());
  rep.meteor_simplified = mt / static_cast<double>(cand.size());

  if (rules) {
    std::vector<CeLabeling> gt, gen;
    for (size_t i = 0; i < cand.size(); ++i) {
      gt.push_back(ce_label(ref[i], *rules));
      gen.push_back(ce_label(cand[i], *rules));
    }
    auto s = ce_scores(gt, gen);
    rep.ce_precision = s.precision;
    rep.ce_recall = s.recall;
    rep.ce_f1 = s.f1;
  }
  return rep;
}

}  // namespace ivgn
