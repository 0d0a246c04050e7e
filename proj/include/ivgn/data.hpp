// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset ingestion (manifest + images) and the synthetic glyph corpus that
// makes end-to-end training verifiable at desk scale.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ivgn/common.hpp"

namespace ivgn {

struct Study {
  std::string id;
  std::vector<std::string> image_paths;
  std::string report;
  std::string split;  // train | val | test
};

/// Parses {"studies":[{"id","images":[...],"report","split"}]}; validates
/// image paths, split tags and id uniqueness. Order follows the manifest.
std::vector<Study> load_manifest(const std::string& path);

void save_manifest(const std::vector<Study>& studies, const std::string& path);

/// Deterministic 7:1:2 split tag by position.
std::string split_for_index(Index i, Index count);

// ---- images -----------------------------------------------------------------

struct ImageU8 {
  Index width = 0, height = 0, channels = 1;  // 1 = gray, 3 = rgb
  std::vector<std::uint8_t> pixels;           // row-major, interleaved
};

/// Reads binary PGM (P5) or PPM (P6).
ImageU8 load_image(const std::string& path);
void save_image(const std::string& path, const ImageU8& img);

// ---- synthetic corpus ----------------------------------------------------------

/// Canonical glyph order; each kind maps to one fixed report clause.
enum class GlyphKind { disk, ring, bar, cross, blob, wedge };
inline constexpr int kGlyphKinds = 6;

struct Glyph {
  GlyphKind kind;
  double cx, cy;      // center, pixel units
  double size;        // characteristic radius, pixel units
  double intensity;   // 0..1
};

struct SyntheticScene {
  Index canvas = 32;
  std::uint64_t noise_seed = 0;
  std::vector<Glyph> glyphs;
};

struct SynthGrammar {
  std::vector<std::string> clauses;  // one per glyph kind, canonical order
  std::string base_clause;           // zero-glyph report
  static const SynthGrammar& defaults();
};

/// Grayscale canvas with the glyphs drawn over a noisy background; a pure
/// function of the scene (including its noise seed).
ImageU8 render_scene(const SyntheticScene& scene);

/// Clauses of the glyph kinds present, concatenated in canonical order;
/// the base clause when the scene is empty.
std::string scene_report(const SyntheticScene& scene, const SynthGrammar& g);

struct SyntheticStudy {
  Study study;  // image_paths filled in by write_corpus
  SyntheticScene scene;
  ImageU8 image;
};

/// `count` studies with 1..4 distinct glyphs each, split 7:1:2, fully
/// determined by (count, seed, grammar, canvas_side).
std::vector<SyntheticStudy> generate_synthetic(Index count, std::uint64_t seed,
                                               const SynthGrammar& grammar,
                                               Index canvas_side = 32);

/// Writes images/<id>.pgm plus manifest.json under out_dir.
void write_corpus(std::vector<SyntheticStudy>& studies,
                  const std::string& out_dir);

}  // namespace ivgn
