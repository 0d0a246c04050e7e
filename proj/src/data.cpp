// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#include "ivgn/data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

namespace fs = std::filesystem;

namespace ivgn {

std::vector<Study> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest: parse failure in " + path + ": " + e.what());
  }
  if (!j.contains("studies") || !j["studies"].is_array())
    throw DataError("manifest: missing \"studies\" array in " + path);

  const fs::path base = fs::path(path).parent_path();
  std::vector<Study> out;
  std::set<std::string> ids;
  for (const auto& js : j["studies"]) {
    Study s;
    s.id = js.at("id").get<std::string>();
    if (!ids.insert(s.id).second)
      throw DataError("manifest: duplicate study id " + s.id);
    s.report = js.at("report").get<std::string>();
    s.split = js.at("split").get<std::string>();
    if (s.split != "train" && s.split != "val" && s.split != "test")
      throw DataError("manifest: unknown split \"" + s.split + "\" for " +
                      s.id);
    for (const auto& p : js.at("images")) {
      fs::path ip = p.get<std::string>();
      if (ip.is_relative()) ip = base / ip;
      if (!fs::exists(ip))
        throw DataError("manifest: missing image file " + ip.string());
      s.image_paths.push_back(ip.string());
    }
    if (s.image_paths.empty())
      throw DataError("manifest: study " + s.id + " has no images");
    if ((s.split == "train" || s.split == "val") && s.report.empty())
      throw DataError("manifest: empty report for " + s.split + " study " +
                      s.id);
    out.push_back(std::move(s));
  }
  return out;
}

void save_manifest(const std::vector<Study>& studies, const std::string& path) {
  nlohmann::json j;
  j["studies"] = nlohmann::json::array();
  const fs::path base = fs::path(path).parent_path();
  for (const auto& s : studies) {
    nlohmann::json js;
    js["id"] = s.id;
    js["report"] = s.report;
    js["split"] = s.split;
    js["images"] = nlohmann::json::array();
    for (const auto& p : s.image_paths) {
      fs::path ip = p;
      js["images"].push_back(
          ip.is_absolute() ? fs::relative(ip, base).string() : p);
    }
    j["studies"].push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) throw DataError("manifest: cannot write " + path);
  out << j.dump(2) << "\n";
}

std::string split_for_index(Index i, Index count) {
  const Index train = (count * 7) / 10;
  const Index val = count / 10;
  if (i < train) return "train";
  if (i < train + val) return "val";
  return "test";
}

// ---- images -----------------------------------------------------------------

ImageU8 load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("image: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6")
    throw DataError("image: " + path + " is not a binary PGM/PPM file");
  auto next_int = [&]() {
    // skips whitespace and '#' comment lines
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long v;
    in >> v;
    return v;
  };
  ImageU8 img;
  img.width = next_int();
  img.height = next_int();
  const long maxval = next_int();
  in.get();  // single whitespace before raster
  if (img.width <= 0 || img.height <= 0 || maxval != 255)
    throw DataError("image: unsupported header in " + path);
  img.channels = magic == "P5" ? 1 : 3;
  img.pixels.resize(
      static_cast<size_t>(img.width * img.height * img.channels));
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw DataError("image: truncated raster in " + path);
  return img;
}

void save_image(const std::string& path, const ImageU8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("image: cannot write " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

// ---- synthetic corpus ----------------------------------------------------------

const SynthGrammar& SynthGrammar::defaults() {
  static const SynthGrammar g = {
      {
          "there is a round opacity in the upper lung zone .",       // disk
          "a thin walled cavity is seen in the left lung .",         // ring
          "linear atelectasis is noted at the lung base .",          // bar
          "support devices are in place over the midline .",         // cross
          "patchy consolidation is present in the right lung .",     // blob
          "a small pleural effusion is seen at the costophrenic "
          "angle .",                                                 // wedge
      },
      "no acute findings . the lungs are clear .",
  };
  return g;
}

namespace {

// Painted coverage in [0,1] for a glyph at pixel (x,y).
double glyph_coverage(const Glyph& g, double x, double y) {
  const double dx = x - g.cx, dy = y - g.cy, r = g.size;
  const double d = std::sqrt(dx * dx + dy * dy);
  switch (g.kind) {
    case GlyphKind::disk:
      return d <= r ? 1.0 : 0.0;
    case GlyphKind::ring:
      return std::abs(d - r) <= std::max(1.0, r * 0.25) ? 1.0 : 0.0;
    case GlyphKind::bar:
      return (std::abs(dy) <= std::max(1.0, r * 0.3) && std::abs(dx) <= r)
                 ? 1.0
                 : 0.0;
    case GlyphKind::cross:
      return ((std::abs(dy) <= std::max(1.0, r * 0.25) && std::abs(dx) <= r) ||
              (std::abs(dx) <= std::max(1.0, r * 0.25) && std::abs(dy) <= r))
                 ? 1.0
                 : 0.0;
    case GlyphKind::blob:
      return std::exp(-(d * d) / (2.0 * (r * 0.5) * (r * 0.5)));
    case GlyphKind::wedge:
      // upward triangle: inside when below the apex lines and above the base
      if (dy < -r || dy > r) return 0.0;
      return std::abs(dx) <= (dy + r) * 0.5 ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace

ImageU8 render_scene(const SyntheticScene& scene) {
  ImageU8 img;
  img.width = img.height = scene.canvas;
  img.channels = 1;
  img.pixels.resize(static_cast<size_t>(scene.canvas * scene.canvas));
  std::mt19937_64 rng(scene.noise_seed);
  std::uniform_real_distribution<double> noise(0.0, 0.04);
  for (Index y = 0; y < scene.canvas; ++y)
    for (Index x = 0; x < scene.canvas; ++x) {
      double v = 0.08 + noise(rng);
      for (const auto& g : scene.glyphs) {
        const double c = glyph_coverage(g, x + 0.5, y + 0.5);
        v = std::max(v, c * g.intensity);
      }
      img.pixels[static_cast<size_t>(y * scene.canvas + x)] =
          static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255));
    }
  return img;
}

std::string scene_report(const SyntheticScene& scene, const SynthGrammar& g) {
  if (static_cast<int>(g.clauses.size()) != kGlyphKinds)
    throw ConfigError("grammar: expected " + std::to_string(kGlyphKinds) +
                      " clauses");
  bool present[kGlyphKinds] = {};
  for (const auto& gl : scene.glyphs)
    present[static_cast<int>(gl.kind)] = true;
  std::string out;
  for (int k = 0; k < kGlyphKinds; ++k) {
    if (!present[k]) continue;
    if (!out.empty()) out += ' ';
    out += g.clauses[static_cast<size_t>(k)];
  }
  return out.empty() ? g.base_clause : out;
}

std::vector<SyntheticStudy> generate_synthetic(Index count, std::uint64_t seed,
                                               const SynthGrammar& grammar,
                                               Index canvas_side) {
  if (count < 1) throw UsageError("synthetic: count must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_glyphs(1, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scl = static_cast<double>(canvas_side) / 32.0;

  std::vector<SyntheticStudy> out;
  out.reserve(static_cast<size_t>(count));
  for (Index i = 0; i < count; ++i) {
    SyntheticStudy s;
    s.scene.canvas = canvas_side;
    s.scene.noise_seed = rng();
    // distinct kinds via partial shuffle
    int kinds[kGlyphKinds] = {0, 1, 2, 3, 4, 5};
    for (int k = kGlyphKinds - 1; k > 0; --k) {
      const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(k + 1));
      std::swap(kinds[k], kinds[j]);
    }
    const int n = n_glyphs(rng);
    for (int k = 0; k < n; ++k) {
      Glyph g;
      g.kind = static_cast<GlyphKind>(kinds[k]);
      g.size = (4.0 + 4.0 * unit(rng)) * scl;
      const double margin = g.size + 1.0;
      g.cx = margin + unit(rng) * (canvas_side - 2.0 * margin);
      g.cy = margin + unit(rng) * (canvas_side - 2.0 * margin);
      g.intensity = 0.55 + 0.45 * unit(rng);
      s.scene.glyphs.push_back(g);
    }
    s.image = render_scene(s.scene);
    char buf[32];
    std::snprintf(buf, sizeof buf, "study_%04lld",
                  static_cast<long long>(i));
    s.study.id = buf;
    s.study.report = scene_report(s.scene, grammar);
    s.study.split = split_for_index(i, count);
    out.push_back(std::move(s));
  }
  return out;
}

void write_corpus(std::vector<SyntheticStudy>& studies,
                  const std::string& out_dir) {
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (ec) throw DataError("corpus: cannot create " + (dir / "images").string());
  std::vector<Study> metas;
  for (auto& s : studies) {
    const std::string rel = "images/" + s.study.id + ".pgm";
    save_image((dir / rel).string(), s.image);
    s.study.image_paths = {rel};
    metas.push_back(s.study);
  }
  save_manifest(metas, (dir / "manifest.json").string());
}

}  // namespace ivgn
