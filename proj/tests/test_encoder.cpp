// Copyright (c) 2026 the ivgn authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ivgn/encoder.hpp"

using namespace ivgn;
using T = Tensor<double>;
using G = Graph<double>;

namespace {

T randn(Shape shape, Rng& rng, double std_ = 1.0) {
  auto t = T::zeros(std::move(shape));
  fill_normal(t, rng, 0.0, std_);
  return t;
}

BackboneConfig tiny_backbone() {
  BackboneConfig b;
  b.input_side = 16;
  b.stem_width = 4;
  b.stem_pool = false;
  b.widths = {4, 6};
  b.gia_stages = {true, true};
  return b;
}

EncoderConfig tiny_encoder() {
  EncoderConfig e;
  e.layers = 1;
  e.heads = 2;
  e.dim = 8;
  e.ffn_dim = 16;
  e.dropout = 0.0;
  e.max_tokens = 64;
  return e;
}

}  // namespace

TEST_CASE("backbone: default config maps 224 to 7x7") {
  Rng rng(1);
  Backbone<double> bb(BackboneConfig{}, rng);
  CHECK(bb.cfg.final_side() == 7);
  auto maps = [&] {
    G g;
    return bb.forward(g, T::zeros({1, 3, 224, 224}), true);
  }();
  CHECK(maps.shape() == Shape{1, 256, 7, 7});
}

TEST_CASE("backbone: stride plan validation and toy shapes") {
  Rng rng(2);
  BackboneConfig b3;
  b3.input_side = 32;
  b3.stem_width = 4;
  b3.stem_pool = false;
  b3.widths = {4, 6, 8};
  b3.gia_stages = {false, false, true};
  Backbone<double> bb(b3, rng);
  CHECK(bb.cfg.final_side() == 4);
  G g;
  auto maps = bb.forward(g, T::zeros({2, 3, 32, 32}), true);
  CHECK(maps.shape() == Shape{2, 8, 4, 4});

  BackboneConfig bad = b3;
  bad.input_side = 30;  // 30 -> 15 is not divisible again
  CHECK_THROWS_AS(Backbone<double>(bad, rng), ConfigError);
}

TEST_CASE("backbone: disabling GIA leaves a plain conv net") {
  Rng rng(3);
  auto cfg = tiny_backbone();
  cfg.gia_stages = {false, false};
  Backbone<double> bb(cfg, rng);
  ParamRegistry<double> reg;
  bb.collect(reg, "backbone");
  for (const auto& e : reg.entries)
    CHECK(e.name.find(".gia") == std::string::npos);
  G g;
  auto maps = bb.forward(g, T::zeros({1, 3, 16, 16}), true);
  CHECK(maps.shape() == Shape{1, 6, 4, 4});
}

TEST_CASE("flatten_project: token counts and identity projection") {
  Rng rng(4);
  // n=2 images with 7x7 maps -> 98 tokens
  Linear<double> proj(5, 5, rng);
  {
    G g;
    std::vector<T> maps = {randn({5, 7, 7}, rng), randn({5, 7, 7}, rng)};
    auto vt = flatten_project(g, maps, proj);
    CHECK(vt.count() == 98);
    CHECK(vt.tokens.shape() == Shape{98, 5});
    auto m = vt.meta(49);
    CHECK(m.image == 1);
    CHECK(m.row == 0);
    CHECK(m.col == 0);
  }
  // identity projection keeps raw channel vectors
  {
    G g;
    Linear<double> ident(3, 3, rng);
    for (Index i = 0; i < 9; ++i)
      ident.weight.values_mut()[i] = (i % 4 == 0) ? 1.0 : 0.0;
    std::fill(ident.bias.values_mut().begin(), ident.bias.values_mut().end(),
              0.0);
    auto map = randn({3, 1, 1}, rng);
    auto vt = flatten_project(g, std::vector<T>{map}, ident);
    CHECK(vt.count() == 1);
    for (Index c = 0; c < 3; ++c)
      CHECK(vt.tokens.values()[c] == doctest::Approx(map.values()[c]));
  }
  // heterogeneous shapes are rejected
  {
    G g;
    std::vector<T> maps = {randn({5, 7, 7}, rng), randn({5, 6, 6}, rng)};
    CHECK_THROWS_AS(flatten_project(g, maps, proj), ConfigError);
  }
}

TEST_CASE("flatten_project: token order is image-major then row-major") {
  Rng rng(5);
  G g;
  Linear<double> ident(2, 2, rng);
  ident.weight = T::from({2, 2}, {1, 0, 0, 1});
  std::fill(ident.bias.values_mut().begin(), ident.bias.values_mut().end(),
            0.0);
  auto maps = randn({2, 2, 2, 2}, rng);  // n=2, C=2, 2x2
  auto vt = flatten_project(g, maps, ident);
  REQUIRE(vt.count() == 8);
  // token t of image n at (r,c) must equal maps[n, :, r, c]
  for (Index n = 0; n < 2; ++n)
    for (Index r = 0; r < 2; ++r)
      for (Index c = 0; c < 2; ++c) {
        const Index t = n * 4 + r * 2 + c;
        for (Index ch = 0; ch < 2; ++ch)
          CHECK(vt.tokens.values()[t * 2 + ch] ==
                doctest::Approx(maps.values()[((n * 2 + ch) * 2 + r) * 2 + c]));
      }
}

TEST_CASE("transformer: single token and attention normalization") {
  Rng rng(6);
  auto ecfg = tiny_encoder();
  TransformerEncoder<double> enc(ecfg, rng);
  G g;
  std::vector<T> atts;
  auto y1 = enc.forward(g, randn({1, 8}, rng), false, rng, &atts);
  CHECK(y1.shape() == Shape{1, 8});
  REQUIRE(atts.size() == 1);
  CHECK(atts[0].shape() == Shape{2, 1, 1});
  CHECK(atts[0].values()[0] == doctest::Approx(1.0));
  CHECK(atts[0].values()[1] == doctest::Approx(1.0));

  atts.clear();
  auto y2 = enc.forward(g, randn({6, 8}, rng), false, rng, &atts);
  CHECK(std::isfinite(y2.values()[0]));
  for (Index h = 0; h < 2; ++h)
    for (Index r = 0; r < 6; ++r) {
      double total = 0;
      for (Index c = 0; c < 6; ++c)
        total += atts[0].values()[(h * 6 + r) * 6 + c];
      CHECK(std::abs(total - 1.0) < 1e-9);
    }

  EncoderConfig bad = ecfg;
  bad.heads = 3;
  CHECK_THROWS_AS(TransformerEncoder<double>(bad, rng), ConfigError);
}

TEST_CASE("transformer: permutation equivariance without positions") {
  Rng rng(7);
  TransformerEncoder<double> enc(tiny_encoder(), rng);
  auto x = randn({5, 8}, rng);
  const std::vector<Index> perm = {3, 0, 4, 1, 2};
  auto px = T::zeros({5, 8});
  for (Index r = 0; r < 5; ++r)
    for (Index c = 0; c < 8; ++c)
      px.values_mut()[r * 8 + c] = x.values()[perm[static_cast<size_t>(r)] * 8 + c];

  G g;
  auto y = enc.forward(g, x, false, rng);
  auto py = enc.forward(g, px, false, rng);
  for (Index r = 0; r < 5; ++r)
    for (Index c = 0; c < 8; ++c)
      CHECK(std::abs(py.values()[r * 8 + c] -
                     y.values()[perm[static_cast<size_t>(r)] * 8 + c]) < 1e-8);

  // with positional embeddings added, equivariance must break
  auto pos = randn({5, 8}, rng);
  auto ppos = [&] {
    G g2;
    return enc.forward(g2, add(g2, px, pos), false, rng);
  }();
  auto ypos = [&] {
    G g2;
    return enc.forward(g2, add(g2, x, pos), false, rng);
  }();
  double max_diff = 0;
  for (Index r = 0; r < 5; ++r)
    for (Index c = 0; c < 8; ++c)
      max_diff = std::max(max_diff,
                          std::abs(ppos.values()[r * 8 + c] -
                                   ypos.values()[perm[static_cast<size_t>(r)] * 8 + c]));
  CHECK(max_diff > 1e-4);
}

TEST_CASE("token count law S = n*H*W") {
  Rng rng(8);
  Linear<double> proj(3, 4, rng);
  for (Index n : {1, 2, 3}) {
    for (Index side : {1, 2, 4}) {
      G g;
      auto vt = flatten_project(g, randn({n, 3, side, side}, rng), proj);
      CHECK(vt.count() == n * side * side);
      CHECK(vt.tokens.dim(0) == n * side * side);
    }
  }
}

TEST_CASE("end-to-end gradient flow reaches first conv and both GIA blocks") {
  Rng rng(9);
  VisualEncoder<double> enc(tiny_backbone(), tiny_encoder(), rng);
  ParamRegistry<double> reg;
  enc.collect(reg);
  for (auto& e : reg.entries)
    if (e.trainable) e.tensor.set_requires_grad(true);

  G g;
  auto y = enc.encode_study(g, randn({1, 3, 16, 16}, rng, 0.5), true, rng);
  CHECK(y.dim(1) == 8);
  g.backward(mean_all(g, mul(g, y, y)));

  auto grad_norm = [&](const std::string& name) {
    for (auto& e : reg.entries)
      if (e.name == name) {
        double s = 0;
        for (double v : e.tensor.grad()) s += v * v;
        return s;
      }
    throw std::runtime_error("missing param " + name);
  };
  CHECK(grad_norm("backbone.stem.conv.weight") > 0.0);
  CHECK(grad_norm("backbone.stage1.gia.depth_bn.gamma") > 0.0);
  CHECK(grad_norm("backbone.stage2.gia.depth_bn.gamma") > 0.0);
  CHECK(grad_norm("backbone.stage1.gia.space_bn.gamma") > 0.0);
  CHECK(grad_norm("backbone.stage2.gia.space_bn.gamma") > 0.0);
}
