// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#include "ivgn/scheme.hpp"

#include <algorithm>

namespace ivgn {

char submodule_letter(Submodule m) {
  switch (m) {
    case Submodule::depth: return 'd';
    case Submodule::space: return 's';
    case Submodule::pixel: return 'p';
  }
  return '?';
}

bool GiaStackSpec::uses(Submodule m) const {
  for (const auto& st : stages)
    if (std::find(st.begin(), st.end(), m) != st.end()) return true;
  return false;
}

namespace {

Submodule letter_to_submodule(char c, size_t pos) {
  switch (c) {
    case 'd': return Submodule::depth;
    case 's': return Submodule::space;
    case 'p': return Submodule::pixel;
    default:
      throw ParseError("scheme: unknown letter '" + std::string(1, c) +
                       "' at position " + std::to_string(pos));
  }
}

void sort_stage(SchemeStage& st) {
  std::sort(st.begin(), st.end(),
            [](Submodule a, Submodule b) { return static_cast<int>(a) < static_cast<int>(b); });
}

}  // namespace

GiaStackSpec parse_scheme(const std::string& text) {
  GiaStackSpec spec;
  bool seen[3] = {false, false, false};
  size_t i = 0;
  auto take = [&](char c, size_t pos) {
    Submodule m = letter_to_submodule(c, pos);
    if (seen[static_cast<int>(m)])
      throw ParseError("scheme: duplicate submodule '" + std::string(1, c) +
                       "' at position " + std::to_string(pos));
    seen[static_cast<int>(m)] = true;
    return m;
  };
  while (i < text.size()) {
    if (text[i] == '[') {
      const size_t open = i++;
      SchemeStage st;
      while (i < text.size() && text[i] != ']') {
        if (text[i] == '[')
          throw ParseError("scheme: nested '[' at position " +
                           std::to_string(i));
        st.push_back(take(text[i], i));
        ++i;
      }
      if (i == text.size())
        throw ParseError("scheme: unclosed '[' at position " +
                         std::to_string(open));
      if (st.empty())
        throw ParseError("scheme: empty brackets at position " +
                         std::to_string(open));
      ++i;  // consume ']'
      sort_stage(st);
      spec.stages.push_back(std::move(st));
    } else {
      spec.stages.push_back({take(text[i], i)});
      ++i;
    }
  }
  if (spec.stages.empty()) throw ParseError("scheme: empty scheme string");
  return spec;
}

std::string render_scheme(const GiaStackSpec& spec) {
  std::string out;
  for (const auto& st : spec.stages) {
    if (st.size() > 1) {
      out += '[';
      for (Submodule m : st) out += submodule_letter(m);
      out += ']';
    } else if (st.size() == 1) {
      out += submodule_letter(st[0]);
    }
  }
  return out;
}

const std::vector<std::string>& all_schemes() {
  // Table-ordered inventory: singles, parallel pairs, serial pairs, full
  // parallel, mixed, full serial.
  static const std::vector<std::string> schemes = {
      "d",     "s",     "p",                              // one submodule
      "[ds]",  "[dp]",  "[sp]",                           // two, parallel
      "ds",    "sd",    "dp",    "pd",    "sp",    "ps",  // two, serial
      "[dsp]",                                            // three, parallel
      "[ds]p", "p[ds]", "[dp]s", "s[dp]", "[sp]d", "d[sp]",  // three, mixed
      "sdp",   "spd",   "pds",   "psd",   "dps",   "dsp",    // three, serial
  };
  return schemes;
}

}  // namespace ivgn
