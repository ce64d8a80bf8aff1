#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "facelayers/coarse_fit.hpp"
#include "facelayers/face_model.hpp"
#include "facelayers/filter.hpp"
#include "facelayers/makeup.hpp"
#include "facelayers/refine.hpp"
#include "facelayers/texture.hpp"

namespace facelayers {

// Elliptical UV-space regions of the synthetic face. Ellipses are given in
// uv units (u right, v up); skin is the remaining covered area.
inline FaceRegions synthetic_regions(const UvMask& coverage) {
  const int w = coverage.width(), h = coverage.height();
  struct Ellipse {
    double cu, cv, ru, rv;
  };
  auto paint = [&](std::initializer_list<Ellipse> es) {
    UvMask m(w, h, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double u = (x + 0.5) / w, v = 1.0 - (y + 0.5) / h;
        for (const auto& e : es) {
          const double du = (u - e.cu) / e.ru, dv = (v - e.cv) / e.rv;
          if (du * du + dv * dv <= 1.0) m.at(x, y) = 1.0;
        }
      }
    return m;
  };
  FaceRegions r;
  r.brows = paint({{0.34, 0.70, 0.10, 0.025}, {0.66, 0.70, 0.10, 0.025}});
  r.eyes = paint({{0.34, 0.61, 0.075, 0.035}, {0.66, 0.61, 0.075, 0.035}});
  r.lips = paint({{0.50, 0.27, 0.14, 0.055}});
  r.skin = UvMask(w, h, 0.0);
  for (std::size_t p = 0; p < coverage.pixels(); ++p)
    if (coverage.valid(p) && r.brows[p] == 0.0 && r.eyes[p] == 0.0 && r.lips[p] == 0.0) r.skin[p] = 1.0;
  return r;
}

// Lip paint with one channel at zero, so its matte is recoverable from colour alone.
inline constexpr std::array<double, 3> kSyntheticLipPaint{0.75, 0.0, 0.15};

inline MakeupLayers synthetic_lip_makeup(const TextureMap& bare, const UvMask& lips) {
  MakeupLayers l;
  l.bare = bare;
  l.makeup = TextureMap(bare.width(), bare.height(), 3);
  l.alpha = TextureMap(bare.width(), bare.height(), 1, 1.0);
  for (std::size_t p = 0; p < bare.pixels(); ++p) {
    for (int c = 0; c < 3; ++c) l.makeup.data()[3 * p + c] = kSyntheticLipPaint[static_cast<std::size_t>(c)];
    if (lips.valid(p)) l.alpha.data()[p] = 0.0;
  }
  return l;
}

// A complete synthetic capture with known ground truth at every stage.
struct SyntheticScene {
  LinearFaceModel model;       // coarse texture resolution
  CoarseParams truth;
  UvMask coarse_coverage;
  TextureMap coarse_target;    // unwrapped input at model resolution
  std::vector<Vec2> landmarks;

  int resolution = 0;          // refinement resolution
  UvMask coverage;             // visibility at refinement resolution
  TextureMap unwrapped;        // observed texture, zero outside coverage
  RefinedMaterials materials;  // ground-truth fine materials
  MakeupLayers makeup;         // ground-truth makeup split of materials.diffuse
  TextureMap reconstruction;   // compose of the fine ground truth
  FaceRegions regions;
};

namespace detail {

inline TextureMap fine_noise(std::mt19937_64& rng, int w, int h, int ch, double amplitude, int kernel) {
  std::normal_distribution<double> normal(0.0, 1.0);
  TextureMap t(w, h, ch);
  for (double& v : t.data()) v = normal(rng);
  t = gaussian_blur(t, kernel);
  double rms = 0.0;
  for (double v : t.data()) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(t.size()));
  for (double& v : t.data()) v *= amplitude / rms;
  return t;
}

}  // namespace detail

inline SyntheticScene make_synthetic_scene(std::uint64_t seed = 1, int resolution = 128, int coarse_resolution = 64,
                                           int min_vertices = 600) {
  if (resolution < 8 || coarse_resolution < 8) throw ParameterError("synthetic scene: resolution too small");
  SyntheticScene s;
  s.model = synthetic_model(seed, min_vertices, coarse_resolution);
  s.resolution = resolution;

  std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  CoarseParams& t = s.truth;
  for (int i = 0; i < 8; ++i) {
    t.alpha[i] = 0.6 * normal(rng);
    t.beta[i] = 0.4 * normal(rng);
    t.gamma[i] = 0.6 * normal(rng);
    t.delta[i] = 0.5 * normal(rng);
  }
  t.gain = {1.06, 0.97, 0.93};
  t.bias = {0.02, 0.0, -0.01};
  t.rotation = Vec3(0.06, -0.12, 0.03);
  t.translation = Vec3(0.02, -0.03, 0.0);
  t.sh = ShCoefficients::ambient(0.85);
  for (int c = 0; c < 3; ++c) {
    t.sh(c, 1) = 0.10;
    t.sh(c, 2) = 0.25;
    t.sh(c, 3) = -0.12;
    t.sh(c, 6) = 0.05;
  }
  t.stage = default_light_stage(0.06, 120.0);

  const CoarseEvaluator eval(s.model);
  const CoarseRender coarse = eval.render(t);
  s.coarse_coverage = eval.coverage();
  s.landmarks = project_landmarks(eval_geometry(s.model, t.alpha, t.beta), s.model.landmark_indices, t.rotation,
                                  t.translation);

  // Fine ground truth: upsampled coarse maps plus high-frequency detail.
  const int R = resolution;
  s.coverage = rasterize_uv(s.model.uv_coords, s.model.topology, R, R).coverage();
  auto lift = [&](const TextureMap& m) { return resize_bilinear(diffuse_fill(m, s.coarse_coverage), R, R); };

  TextureMap bare = lift(coarse.diffuse_albedo);
  const TextureMap pores = detail::fine_noise(rng, R, R, 1, 0.02, 3);
  for (std::size_t p = 0; p < bare.pixels(); ++p)
    for (int c = 0; c < 3; ++c) bare.data()[3 * p + c] += pores.data()[p];
  bare.clamp(0.0, 1.0);

  TextureMap normals = lift(coarse.normals);
  const TextureMap bumps = detail::fine_noise(rng, R, R, 3, 0.04, 3);
  for (std::size_t i = 0; i < normals.size(); ++i) normals.data()[i] += i % 3 == 2 ? 0.0 : bumps.data()[i];
  renormalize_normals(normals);

  TextureMap specular = gray(lift(coarse.specular_recon));
  specular.clamp(0.0, std::numeric_limits<double>::infinity());

  s.regions = synthetic_regions(s.coverage);
  s.makeup = synthetic_lip_makeup(bare, s.regions.lips);
  s.materials = {alpha_blend(s.makeup), normals, specular, t.sh};
  s.reconstruction = compose_refined(s.materials);

  s.unwrapped = s.reconstruction;
  for (std::size_t p = 0; p < s.coverage.pixels(); ++p)
    if (!s.coverage.valid(p))
      for (int c = 0; c < 3; ++c) s.unwrapped.data()[3 * p + c] = 0.0;
  s.coarse_target = resize_bilinear(s.reconstruction, coarse_resolution, coarse_resolution);
  return s;
}

}  // namespace facelayers
