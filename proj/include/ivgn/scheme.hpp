// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "ivgn/common.hpp"

namespace ivgn {

enum class Submodule { depth, space, pixel };

char submodule_letter(Submodule m);

/// One stage of the attention stack: a set of submodules run in parallel.
/// Kept in canonical depth/space/pixel order.
using SchemeStage = std::vector<Submodule>;

/// Parsed arrangement string, e.g. "dsp", "[ds]p", "[dsp]". Each submodule
/// kind appears at most once across all stages.
struct GiaStackSpec {
  std::vector<SchemeStage> stages;

  bool uses(Submodule m) const;
  bool operator==(const GiaStackSpec&) const = default;
};

/// Grammar: scheme := item+ ; item := letter | '[' letter letter+ ']' with
/// letter in {d,s,p}. Throws ParseError with the offending position.
GiaStackSpec parse_scheme(const std::string& text);

/// Canonical text form; parse_scheme(render_scheme(s)) == s.
std::string render_scheme(const GiaStackSpec& spec);

/// The full inventory of arrangement schemes (25 entries): all non-empty
/// combinations of the three submodules in serial, parallel and mixed form.
const std::vector<std::string>& all_schemes();

}  // namespace ivgn
