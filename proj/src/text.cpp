// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#include "ivgn/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <json.hpp>

namespace ivgn {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& reports,
                             Index min_freq) {
  if (reports.empty()) throw DataError("vocabulary: empty corpus");
  std::map<std::string, Index> freq;
  for (const auto& r : reports)
    for (const auto& t : tokenize(r)) ++freq[t];

  std::vector<std::pair<std::string, Index>> items(freq.begin(), freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_freq = min_freq;
  v.id_to_token = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (const auto& [tok, n] : items)
    if (n >= min_freq) v.id_to_token.push_back(tok);
  for (size_t i = 0; i < v.id_to_token.size(); ++i)
    v.token_to_id[v.id_to_token[i]] = static_cast<Index>(i);
  return v;
}

Index Vocabulary::id(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(Index i) const {
  if (i < 0 || i >= size())
    throw DataError("vocabulary: id " + std::to_string(i) + " out of range");
  return id_to_token[static_cast<size_t>(i)];
}

std::vector<Index> Vocabulary::encode(const std::string& text) const {
  std::vector<Index> out;
  for (const auto& t : tokenize(text)) out.push_back(id(t));
  return out;
}

std::vector<Index> Vocabulary::frame(const std::vector<Index>& ids) const {
  std::vector<Index> out;
  out.reserve(ids.size() + 2);
  out.push_back(kBos);
  out.insert(out.end(), ids.begin(), ids.end());
  out.push_back(kEos);
  return out;
}

std::string Vocabulary::decode(const std::vector<Index>& ids) const {
  std::string out;
  for (Index i : ids) {
    if (i == kPad || i == kBos || i == kEos) continue;
    if (!out.empty()) out += ' ';
    out += token(i);
  }
  return out;
}

std::string Vocabulary::to_json() const {
  nlohmann::json j;
  j["min_freq"] = min_freq;
  j["tokens"] = id_to_token;
  return j.dump(2);
}

Vocabulary Vocabulary::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  Vocabulary v;
  v.min_freq = j.at("min_freq").get<Index>();
  v.id_to_token = j.at("tokens").get<std::vector<std::string>>();
  if (v.id_to_token.size() < 4 || v.id_to_token[0] != "<pad>" ||
      v.id_to_token[1] != "<bos>" || v.id_to_token[2] != "<eos>" ||
      v.id_to_token[3] != "<unk>")
    throw DataError("vocabulary: malformed reserved tokens");
  for (size_t i = 0; i < v.id_to_token.size(); ++i)
    v.token_to_id[v.id_to_token[i]] = static_cast<Index>(i);
  return v;
}

}  // namespace ivgn
