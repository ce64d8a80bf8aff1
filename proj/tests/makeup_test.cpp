#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "facelayers/makeup.hpp"
#include "facelayers/scene.hpp"

using namespace facelayers;

namespace {

TextureMap random_map(int w, int h, int ch, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> U(lo, hi);
  TextureMap t(w, h, ch);
  for (auto& v : t.data()) v = U(rng);
  return t;
}

MakeupLayers random_layers(int n, std::mt19937_64& rng) {
  return {random_map(n, n, 3, rng), random_map(n, n, 3, rng), random_map(n, n, 1, rng)};
}

// Four horizontal bands: brows, eyes, lips, skin.
FaceRegions band_regions(int n) {
  FaceRegions r{UvMask(n, n, 0.0), UvMask(n, n, 0.0), UvMask(n, n, 0.0), UvMask(n, n, 0.0)};
  UvMask* bands[] = {&r.brows, &r.eyes, &r.lips, &r.skin};
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) bands[std::min(3, 4 * y / n)]->at(x, y) = 1.0;
  return r;
}

const SyntheticScene& scene() {
  static const SyntheticScene s = make_synthetic_scene();
  return s;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST(AlphaBlend, Endpoints) {
  std::mt19937_64 rng(1);
  MakeupLayers l = random_layers(9, rng);
  l.alpha = TextureMap(9, 9, 1, 1.0);
  EXPECT_EQ(alpha_blend(l).data(), l.bare.data());
  l.alpha = TextureMap(9, 9, 1, 0.0);
  EXPECT_EQ(alpha_blend(l).data(), l.makeup.data());
  const MakeupLayers mid{TextureMap(2, 2, 3, 1.0), TextureMap(2, 2, 3, 0.0), TextureMap(2, 2, 1, 0.5)};
  const TextureMap half = alpha_blend(mid);
  for (double v : half.data()) EXPECT_EQ(v, 0.5);
}

TEST(AlphaBlend, ConvexCombinationBounds) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const MakeupLayers l = random_layers(16, rng);
    const TextureMap out = alpha_blend(l);
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_GE(out.data()[i], std::min(l.bare.data()[i], l.makeup.data()[i]) - 1e-15);
      EXPECT_LE(out.data()[i], std::max(l.bare.data()[i], l.makeup.data()[i]) + 1e-15);
    }
  }
}

TEST(AlphaBlend, RejectsInvalidLayers) {
  std::mt19937_64 rng(3);
  MakeupLayers l = random_layers(8, rng);
  l.alpha = TextureMap(4, 4, 1, 1.0);
  EXPECT_THROW(alpha_blend(l), ShapeError);
  l = random_layers(8, rng);
  l.alpha.data()[3] = 1.5;
  EXPECT_THROW(alpha_blend(l), Error);
  l = random_layers(8, rng);
  l.alpha = TextureMap(8, 8, 3, 1.0);
  EXPECT_THROW(alpha_blend(l), ShapeError);
}

TEST(Transfer, OpaqueAlphaKeepsTargetExactly) {
  std::mt19937_64 rng(4);
  MakeupLayers src = random_layers(12, rng);
  for (std::size_t p = 0; p < src.alpha.pixels(); ++p)
    if (p % 3 == 0) src.alpha.data()[p] = 1.0;
  const TextureMap target = random_map(12, 12, 3, rng);
  const TextureMap out = transfer(target, src);
  for (std::size_t p = 0; p < src.alpha.pixels(); ++p)
    if (src.alpha.data()[p] == 1.0) {
      for (int c = 0; c < 3; ++c) EXPECT_EQ(out.data()[3 * p + c], target.data()[3 * p + c]);
    }
}

TEST(Transfer, OwnBareSkinReproducesBlend) {
  std::mt19937_64 rng(5);
  const MakeupLayers src = random_layers(10, rng);
  EXPECT_EQ(transfer(src.bare, src).data(), alpha_blend(src).data());
}

TEST(Transfer, ChangesOnlyTheMakeupRegion) {
  const auto& s = scene();
  const TextureMap target(s.resolution, s.resolution, 3, 0.3);
  const TextureMap out = transfer(target, s.makeup);
  for (std::size_t p = 0; p < target.pixels(); ++p) {
    const bool changed = out.data()[3 * p] != target.data()[3 * p] || out.data()[3 * p + 1] != target.data()[3 * p + 1] ||
                         out.data()[3 * p + 2] != target.data()[3 * p + 2];
    EXPECT_EQ(changed, s.regions.lips.valid(p)) << p;
  }
}

TEST(Transfer, ResamplesSourceLayers) {
  const MakeupLayers src{TextureMap(8, 8, 3, 0.2), TextureMap(8, 8, 3, 0.9), TextureMap(8, 8, 1, 0.25)};
  const TextureMap out = transfer(TextureMap(16, 16, 3, 0.4), src);
  ASSERT_EQ(out.width(), 16);
  for (double v : out.data()) EXPECT_NEAR(v, 0.25 * 0.4 + 0.75 * 0.9, 1e-12);
  EXPECT_THROW(transfer(TextureMap(16, 16, 1, 0.4), src), ShapeError);
}

TEST(Interpolate, ClampedShift) {
  TextureMap a(3, 1, 1);
  a.data() = {0.0, 0.4, 0.7};
  EXPECT_EQ(interpolate_alpha(a, 0.0).data(), a.data());
  const TextureMap half = interpolate_alpha(a, 0.5);
  EXPECT_EQ(half.data()[0], 0.5);
  EXPECT_EQ(half.data()[1], 0.9);
  EXPECT_EQ(half.data()[2], 1.0);
  const TextureMap full = interpolate_alpha(a, 1.0);
  for (double v : full.data()) EXPECT_EQ(v, 1.0);
}

TEST(Interpolate, MonotoneInSigma) {
  std::mt19937_64 rng(6);
  const TextureMap a = random_map(16, 16, 1, rng);
  TextureMap prev = interpolate_alpha(a, 0.0);
  for (int k = 1; k <= 20; ++k) {
    const TextureMap cur = interpolate_alpha(a, k / 20.0);
    for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_LE(prev.data()[i], cur.data()[i]);
    prev = cur;
  }
}

TEST(Interpolate, FullShiftRemovesMakeup) {
  std::mt19937_64 rng(7);
  MakeupLayers l = random_layers(16, rng);
  l.alpha = interpolate_alpha(l.alpha, 1.0);
  EXPECT_EQ(alpha_blend(l).data(), l.bare.data());
}

TEST(Interpolate, RejectsOutOfRangeSigma) {
  const TextureMap a(4, 4, 1, 0.5);
  EXPECT_THROW(interpolate_alpha(a, -0.01), ParameterError);
  EXPECT_THROW(interpolate_alpha(a, 1.01), ParameterError);
  EXPECT_THROW(interpolate_alpha(a, std::numeric_limits<double>::quiet_NaN()), ParameterError);
  EXPECT_THROW(interpolate_alpha(TextureMap(4, 4, 3, 0.5), 0.5), ShapeError);
}

TEST(MakeupRender, OpaqueUnitShadingGivesBare) {
  std::mt19937_64 rng(8);
  MakeupLayers l = random_layers(8, rng);
  l.alpha = TextureMap(8, 8, 1, 1.0);
  const TextureMap out = apply_makeup_render(l.bare, l, TextureMap(8, 8, 3, 1.0), TextureMap(8, 8, 1, 0.0));
  EXPECT_EQ(out.data(), l.bare.data());
}

TEST(MakeupRender, EqualsComposeOfTransfer) {
  std::mt19937_64 rng(9);
  const MakeupLayers l = random_layers(8, rng);
  const TextureMap bare = random_map(8, 8, 3, rng), shade = random_map(8, 8, 3, rng, 0.2, 1.5),
                   spec = random_map(8, 8, 1, rng, 0.0, 0.2);
  EXPECT_EQ(apply_makeup_render(bare, l, shade, spec).data(),
            compose_reconstruction(transfer(bare, l), shade, spec).data());
}

TEST(MakeupRender, RelightingRatioIndependentOfMatte) {
  const auto& s = scene();
  ShCoefficients other = s.materials.sh;
  for (int c = 0; c < 3; ++c) {
    other(c, 0) *= 1.3;
    other(c, 1) += 0.15;
  }
  const TextureMap sh1 = diffuse_shading(s.materials.normals, s.materials.sh);
  const TextureMap sh2 = diffuse_shading(s.materials.normals, other);
  const TextureMap zero(s.resolution, s.resolution, 1, 0.0);
  MakeupLayers half = s.makeup;
  half.alpha = interpolate_alpha(half.alpha, 0.5);
  const TextureMap a1 = apply_makeup_render(s.makeup.bare, s.makeup, sh1, zero);
  const TextureMap a2 = apply_makeup_render(s.makeup.bare, s.makeup, sh2, zero);
  const TextureMap b1 = apply_makeup_render(s.makeup.bare, half, sh1, zero);
  const TextureMap b2 = apply_makeup_render(s.makeup.bare, half, sh2, zero);
  int checked = 0;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    if (a1.data()[i] < 1e-3 || b1.data()[i] < 1e-3 || sh1.data()[i] < 1e-3) continue;
    EXPECT_NEAR(a2.data()[i] / a1.data()[i], b2.data()[i] / b1.data()[i], 1e-9);
    EXPECT_NEAR(a2.data()[i] / a1.data()[i], sh2.data()[i] / sh1.data()[i], 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 1000);
}

TEST(Extraction, LossTermsAndGradient) {
  std::mt19937_64 rng(10);
  const MakeupLayers l{random_map(8, 8, 3, rng, 0.2, 0.8), random_map(8, 8, 3, rng, 0.2, 0.8),
                       random_map(8, 8, 1, rng, 0.2, 0.8)};
  const TextureMap albedo = random_map(8, 8, 3, rng), prior = random_map(8, 8, 3, rng);
  const ExtractionWeights w;
  MakeupLayers g;
  const ExtractionTerms t = extraction_loss(l, albedo, prior, w, &g);
  EXPECT_NEAR(t.fit, mean_abs_diff(alpha_blend(l), albedo), 1e-12);
  EXPECT_NEAR(t.skin_prior, mean_abs_diff(l.bare, prior), 1e-12);
  EXPECT_NEAR(t.tv_alpha, total_variation(l.alpha), 1e-12);
  EXPECT_NEAR(t.tv_makeup, total_variation(l.makeup), 1e-12);
  EXPECT_NEAR(t.sparse, 1.0 - mean(l.alpha.data()), 1e-12);
  EXPECT_NEAR(t.total,
              w.fit * t.fit + w.skin_prior * t.skin_prior + w.tv_alpha * t.tv_alpha + w.tv_makeup * t.tv_makeup +
                  w.alpha_sparse * t.sparse,
              1e-10);
  auto probe = [&](TextureMap MakeupLayers::*field, const TextureMap& gf) {
    for (std::size_t i : {0u, 5u, 37u, 63u}) {
      MakeupLayers p = l, m = l;
      (p.*field).data()[i] += 1e-7;
      (m.*field).data()[i] -= 1e-7;
      const double num =
          (extraction_loss(p, albedo, prior, w).total - extraction_loss(m, albedo, prior, w).total) / 2e-7;
      EXPECT_NEAR(gf.data()[i], num, 1e-5) << i;
    }
  };
  probe(&MakeupLayers::bare, g.bare);
  probe(&MakeupLayers::makeup, g.makeup);
  probe(&MakeupLayers::alpha, g.alpha);
}

TEST(Extraction, IdenticalInputsDetectNoMakeup) {
  const auto& bare = scene().makeup.bare;
  const ExtractionResult r = extract_makeup(bare, bare);
  EXPECT_GE(mean(r.layers.alpha.data()), 0.95);
  EXPECT_LE(mean_abs_diff(r.layers.bare, bare), 0.02);
}

TEST(Extraction, RecoversSyntheticLipMatte) {
  const auto& s = scene();
  const TextureMap composite = alpha_blend(s.makeup);
  const ExtractionResult r = extract_makeup(composite, s.makeup.bare);
  double err = 0.0, n = 0.0;
  for (std::size_t p = 0; p < s.coverage.pixels(); ++p)
    if (s.regions.lips.valid(p)) {
      err += std::abs(r.layers.alpha.data()[p] - s.makeup.alpha.data()[p]);
      n += 1.0;
    }
  EXPECT_LE(err / n, 0.1);
  EXPECT_LE(mean_abs_diff(alpha_blend(r.layers), composite), 0.02);
  EXPECT_NO_THROW(r.layers.validate());
}

TEST(Extraction, FitOnlyReconstructsExactly) {
  std::mt19937_64 rng(11);
  const TextureMap albedo = random_map(24, 24, 3, rng), prior = random_map(24, 24, 3, rng);
  ExtractionConfig cfg;
  cfg.weights = {1.0, 0.0, 0.0, 0.0, 0.0};
  // The residual floor tracks the step size; alpha needs 1/lr steps to open.
  cfg.lr = 2.5e-3;
  const ExtractionResult r = extract_makeup(albedo, prior, cfg);
  EXPECT_LE(mean_abs_diff(alpha_blend(r.layers), albedo), 1e-3);
}

TEST(Extraction, RejectsBadInputs) {
  const TextureMap a(8, 8, 3, 0.5);
  EXPECT_THROW(extract_makeup(a, TextureMap(4, 4, 3, 0.5)), ShapeError);
  ExtractionConfig cfg;
  cfg.weights.fit = -1.0;
  EXPECT_THROW(extract_makeup(a, a, cfg), ParameterError);
  TextureMap nan = a;
  nan.data()[4] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(extract_makeup(nan, a), DivergenceError);
}

TEST(AlbedoPrior, TracksBareSkinUnderLipPaint) {
  const auto& s = scene();
  const TextureMap composite = alpha_blend(s.makeup);
  const TextureMap prior = albedo_prior(s.model, composite, s.coverage);
  ASSERT_TRUE(prior.same_resolution(composite));
  double lips_to_bare = 0.0, lips_to_paint = 0.0, n = 0.0;
  for (std::size_t p = 0; p < prior.pixels(); ++p)
    if (s.regions.lips.valid(p))
      for (int c = 0; c < 3; ++c) {
        lips_to_bare += std::abs(prior.data()[3 * p + c] - s.makeup.bare.data()[3 * p + c]);
        lips_to_paint += std::abs(prior.data()[3 * p + c] - composite.data()[3 * p + c]);
        n += 1.0;
      }
  EXPECT_LT(lips_to_bare / n, lips_to_paint / n);
  EXPECT_LT(lips_to_bare / n, 0.1);
  EXPECT_THROW(albedo_prior(s.model, composite, UvMask(s.resolution, s.resolution, 0.0)), ParameterError);
}

TEST(Histogram, IdenticalTexturesCostNothing) {
  std::mt19937_64 rng(12);
  const TextureMap x = random_map(32, 32, 3, rng);
  EXPECT_NEAR(makeup_histogram_loss(x, x, band_regions(32)), 0.0, 1e-20);
}

TEST(Histogram, InvariantToPermutationWithinRegions) {
  std::mt19937_64 rng(13);
  const int n = 32;
  const FaceRegions r = band_regions(n);
  const TextureMap x = random_map(n, n, 3, rng);
  // Shuffle pixels within each band of y.
  TextureMap y = x;
  for (int band = 0; band < 4; ++band) {
    std::vector<std::size_t> idx;
    for (std::size_t p = band * n * n / 4; p < static_cast<std::size_t>(band + 1) * n * n / 4; ++p) idx.push_back(p);
    std::vector<std::size_t> perm = idx;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (int c = 0; c < 3; ++c) y.data()[3 * idx[k] + c] = x.data()[3 * perm[k] + c];
  }
  EXPECT_NEAR(makeup_histogram_loss(x, y, r), 0.0, 1e-20);
  const TextureMap z = random_map(n, n, 3, rng, 0.0, 0.5);
  EXPECT_NEAR(makeup_histogram_loss(z, x, r), makeup_histogram_loss(z, y, r), 1e-12);
}

TEST(Histogram, ConstantLipsMapOntoTargetConstant) {
  const int n = 32;
  const FaceRegions r = band_regions(n);
  TextureMap x(n, n, 3, 0.5), y(n, n, 3, 0.5);
  for (std::size_t p = 0; p < x.pixels(); ++p)
    if (r.lips.valid(p))
      for (int c = 0; c < 3; ++c) {
        x.data()[3 * p + c] = 0.2;
        y.data()[3 * p + c] = 0.8;
      }
  EXPECT_NEAR(makeup_histogram_loss(x, y, r), 0.6 * 0.6, 1e-12);
}

TEST(Histogram, SkinIsIgnored) {
  const int n = 32;
  const FaceRegions r = band_regions(n);
  TextureMap x(n, n, 3, 0.5), y = x;
  for (std::size_t p = 0; p < x.pixels(); ++p)
    if (r.skin.valid(p)) y.data()[3 * p] = 0.9;
  EXPECT_EQ(makeup_histogram_loss(x, y, r), 0.0);
}

TEST(Histogram, MatchReproducesTargetQuantiles) {
  std::vector<double> x(1000), y(1000);
  for (int i = 0; i < 1000; ++i) {
    x[i] = (i + 0.5) / 1000.0;
    y[i] = 0.3 + 0.4 * x[i];
  }
  const auto m = histogram_match(x, y);
  for (int i = 0; i < 1000; i += 50) EXPECT_NEAR(m[i], y[i], 2e-3) << i;
  EXPECT_THROW(histogram_match({}, y), ParameterError);
}

TEST(Histogram, RejectsBadRegions) {
  const int n = 16;
  FaceRegions r = band_regions(n);
  const TextureMap x(n, n, 3, 0.5);
  r.lips = UvMask(n, n, 0.0);
  EXPECT_THROW(makeup_histogram_loss(x, x, r), ParameterError);
  r = band_regions(n);
  r.eyes.at(0, 0) = 1.0;  // overlaps brows
  EXPECT_THROW(makeup_histogram_loss(x, x, r), ParameterError);
  EXPECT_THROW(makeup_histogram_loss(x, TextureMap(n, n, 1, 0.5), band_regions(n)), ShapeError);
}
