#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "facelayers/adam.hpp"
#include "facelayers/error.hpp"
#include "facelayers/filter.hpp"
#include "facelayers/parallel.hpp"
#include "facelayers/shading.hpp"
#include "facelayers/texture.hpp"

namespace facelayers {

// Per-pixel materials refined at full texture resolution.
struct RefinedMaterials {
  TextureMap diffuse;   // 3ch, [0,1]
  TextureMap normals;   // 3ch, unit per pixel
  TextureMap specular;  // 1ch, >= 0 (specular reconstruction, not albedo)
  ShCoefficients sh;

  void validate() const {
    if (diffuse.channels() != 3 || normals.channels() != 3 || specular.channels() != 1)
      throw ShapeError("refined materials: expected 3ch diffuse, 3ch normals, 1ch specular");
    require_same_resolution(diffuse, normals, "refined materials");
    require_same_resolution(diffuse, specular, "refined materials");
  }
};

// Coarse maps resampled to the refinement resolution.
struct RefinePriors {
  TextureMap diffuse;   // 3ch
  TextureMap normals;   // 3ch
  TextureMap specular;  // 1ch luminance of the coarse specular reconstruction
  ShCoefficients sh;
};

inline RefinePriors make_refine_priors(const TextureMap& diffuse, const TextureMap& normals,
                                       const TextureMap& specular_recon, const ShCoefficients& sh, int width,
                                       int height) {
  RefinePriors p;
  p.diffuse = resize_bilinear(diffuse, width, height);
  p.normals = resize_bilinear(normals, width, height);
  const TextureMap spec = specular_recon.channels() == 3 ? gray(specular_recon) : specular_recon;
  p.specular = resize_bilinear(spec, width, height);
  p.sh = sh;
  return p;
}

struct RefineLossWeights {
  double recons = 40.0;
  double perceptual = 5.0;
  double tv = 10.0;
  double prior = 1.0;
  double prior_diffuse = 4.0;
  double prior_normals = 1.0;
  double prior_specular = 1.0;
  double prior_sh = 1.0;

  void validate() const {
    for (double w : {recons, perceptual, tv, prior, prior_diffuse, prior_normals, prior_specular, prior_sh})
      if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("refine loss weights must be finite and >= 0");
  }
};

struct RefineLossTerms {
  double total = 0.0;
  double recons = 0.0;
  double perc = 0.0;
  double tv = 0.0;
  double prior = 0.0;
};

namespace detail {

// 2x2 box downsampling; odd trailing rows/columns are dropped.
inline TextureMap avg_pool2(const TextureMap& t) {
  const int w = t.width() / 2, h = t.height() / 2, ch = t.channels();
  TextureMap out(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c)
        out.at(x, y, c) = 0.25 * (t.at(2 * x, 2 * y, c) + t.at(2 * x + 1, 2 * y, c) + t.at(2 * x, 2 * y + 1, c) +
                                  t.at(2 * x + 1, 2 * y + 1, c));
  return out;
}

inline void avg_pool2_adjoint(const TextureMap& g_small, TextureMap& g_big) {
  for (int y = 0; y < g_small.height(); ++y)
    for (int x = 0; x < g_small.width(); ++x)
      for (int c = 0; c < g_small.channels(); ++c) {
        const double v = 0.25 * g_small.at(x, y, c);
        g_big.at(2 * x, 2 * y, c) += v;
        g_big.at(2 * x + 1, 2 * y, c) += v;
        g_big.at(2 * x, 2 * y + 1, c) += v;
        g_big.at(2 * x + 1, 2 * y + 1, c) += v;
      }
}

// Mean |d(a) - d(b)| over x- and y-difference entries; adds the gradient
// w.r.t. `a` (times `scale`) into g_a when given.
inline double gradient_l1(const TextureMap& a, const TextureMap& b, double scale, TextureMap* g_a) {
  const int w = a.width(), h = a.height(), ch = a.channels();
  double loss = 0.0;
  if (w > 1) {
    const double n = static_cast<double>(w - 1) * h * ch;
    double s = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < w; ++x)
        for (int c = 0; c < ch; ++c) {
          const double d = (a.at(x + 1, y, c) - a.at(x, y, c)) - (b.at(x + 1, y, c) - b.at(x, y, c));
          s += std::abs(d);
          if (g_a) {
            const double g = scale * sign(d) / n;
            g_a->at(x + 1, y, c) += g;
            g_a->at(x, y, c) -= g;
          }
        }
    loss += s / n;
  }
  if (h > 1) {
    const double n = static_cast<double>(h - 1) * w * ch;
    double s = 0.0;
    for (int y = 0; y + 1 < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c) {
          const double d = (a.at(x, y + 1, c) - a.at(x, y, c)) - (b.at(x, y + 1, c) - b.at(x, y, c));
          s += std::abs(d);
          if (g_a) {
            const double g = scale * sign(d) / n;
            g_a->at(x, y + 1, c) += g;
            g_a->at(x, y, c) -= g;
          }
        }
    loss += s / n;
  }
  return loss;
}

}  // namespace detail

inline constexpr int kPerceptualScales = 3;

// Structure term standing in for a pretrained-feature loss: gradient-domain
// L1 summed over dyadic scales. Blind to per-scale constant offsets.
// When `grad_a` is given, scale * d/da is added into it.
inline double perceptual_substitute(const TextureMap& a, const TextureMap& b, double scale = 1.0,
                                    TextureMap* grad_a = nullptr) {
  require_same_shape(a, b, "perceptual_substitute");
  std::vector<TextureMap> pa{a}, pb{b};
  for (int s = 1; s < kPerceptualScales; ++s) {
    if (pa.back().width() < 2 || pa.back().height() < 2) break;
    pa.push_back(detail::avg_pool2(pa.back()));
    pb.push_back(detail::avg_pool2(pb.back()));
  }
  std::vector<TextureMap> g;
  if (grad_a)
    for (const auto& t : pa) g.emplace_back(t.width(), t.height(), t.channels());
  double loss = 0.0;
  for (std::size_t s = 0; s < pa.size(); ++s) loss += detail::gradient_l1(pa[s], pb[s], scale, grad_a ? &g[s] : nullptr);
  if (grad_a) {
    for (std::size_t s = pa.size() - 1; s > 0; --s) detail::avg_pool2_adjoint(g[s], g[s - 1]);
    for (std::size_t i = 0; i < grad_a->size(); ++i) grad_a->data()[i] += g[0].data()[i];
  }
  return loss;
}

// Reconstruction from refined materials; the 1ch specular is broadcast.
inline TextureMap compose_refined(const RefinedMaterials& m) {
  return compose_reconstruction(m.diffuse, diffuse_shading(m.normals, m.sh), m.specular);
}

// Unit-length normals; zero vectors become +z. Idempotent.
inline void renormalize_normals(TextureMap& normals) {
  if (normals.channels() != 3) throw ShapeError("renormalize_normals: expected 3 channels");
  auto& d = normals.data();
  for (std::size_t p = 0; p < normals.pixels(); ++p) {
    Vec3 n(d[3 * p], d[3 * p + 1], d[3 * p + 2]);
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3(0, 0, 1);
    for (int c = 0; c < 3; ++c) d[3 * p + c] = n[c];
  }
}

inline RefinedMaterials zero_like(const RefinedMaterials& m) {
  return {TextureMap(m.diffuse.width(), m.diffuse.height(), 3), TextureMap(m.normals.width(), m.normals.height(), 3),
          TextureMap(m.specular.width(), m.specular.height(), 1), ShCoefficients{}};
}

// Loss terms of the refinement objective; `grad` (same layout as the
// materials) receives the gradient when given.
inline RefineLossTerms refine_loss(const RefinedMaterials& mat, const TextureMap& target,
                                   const RefinePriors& priors, const RefineLossWeights& w, int blur_kernel,
                                   RefinedMaterials* grad = nullptr) {
  w.validate();
  mat.validate();
  require_same_shape(mat.diffuse, target, "refine_loss target");
  require_same_shape(mat.diffuse, priors.diffuse, "refine_loss diffuse prior");
  require_same_shape(mat.normals, priors.normals, "refine_loss normal prior");
  require_same_shape(mat.specular, priors.specular, "refine_loss specular prior");

  const int W = target.width(), H = target.height();
  const std::size_t P = target.pixels();
  if (grad) *grad = zero_like(mat);

  // Forward render, keeping pre-clamp values for the backward pass.
  TextureMap recon(W, H, 3);
  TextureMap shade(W, H, 3);
  std::vector<unsigned char> shade_live(3 * P), recon_live(3 * P);
  parallel_rows(H, [&](int y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const auto Y = sh_basis_raw(normal_at(mat.normals, p));
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = 0; k < 9; ++k) s += mat.sh(c, k) * Y[static_cast<std::size_t>(k)];
        shade_live[3 * p + c] = s > 0.0;
        shade.data()[3 * p + c] = std::max(0.0, s);
        const double r = mat.diffuse.data()[3 * p + c] * shade.data()[3 * p + c] + mat.specular.data()[p];
        recon_live[3 * p + c] = r > 0.0;
        recon.data()[3 * p + c] = std::max(0.0, r);
      }
    }
  });

  RefineLossTerms t;
  t.recons = mean_abs_diff(recon, target);
  TextureMap g_recon(W, H, 3);
  t.perc = perceptual_substitute(recon, target, w.perceptual, grad ? &g_recon : nullptr);
  t.tv = total_variation(mat.diffuse) + total_variation(mat.normals) + total_variation(mat.specular);

  const TextureMap blur_d = gaussian_blur(mat.diffuse, blur_kernel);
  const TextureMap blur_n = gaussian_blur(mat.normals, blur_kernel);
  const TextureMap blur_s = gaussian_blur(mat.specular, blur_kernel);
  double sh_sq = 0.0;
  for (int i = 0; i < ShCoefficients::kSize; ++i) {
    const double d = mat.sh.values[i] - priors.sh.values[i];
    sh_sq += d * d;
  }
  t.prior = w.prior_diffuse * mean_abs_diff(blur_d, priors.diffuse) +
            w.prior_normals * mean_abs_diff(blur_n, priors.normals) +
            w.prior_specular * mean_abs_diff(blur_s, priors.specular) + w.prior_sh * sh_sq;
  t.total = w.recons * t.recons + w.perceptual * t.perc + w.tv * t.tv + w.prior * t.prior;
  if (!grad) return t;

  // Reconstruction residual.
  const double kr = w.recons / static_cast<double>(3 * P);
  for (std::size_t i = 0; i < 3 * P; ++i) g_recon.data()[i] += kr * detail::sign(recon.data()[i] - target.data()[i]);

  parallel_rows(H, [&](int y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const Vec3 n = normal_at(mat.normals, p);
      const auto dY = sh_basis_jacobian(n);
      Vec3 g_n = Vec3::Zero();
      double g_spec = 0.0;
      for (int c = 0; c < 3; ++c) {
        if (!recon_live[3 * p + c]) continue;
        const double gr = g_recon.data()[3 * p + c];
        grad->diffuse.data()[3 * p + c] += gr * shade.data()[3 * p + c];
        g_spec += gr;
        if (shade_live[3 * p + c]) {
          const double gs = gr * mat.diffuse.data()[3 * p + c];
          for (int k = 0; k < 9; ++k) g_n += gs * mat.sh(c, k) * dY[static_cast<std::size_t>(k)];
        }
      }
      grad->specular.data()[p] += g_spec;
      for (int c = 0; c < 3; ++c) grad->normals.data()[3 * p + c] += g_n[c];
    }
  });
  // SH gradient reduced row by row for a thread-count independent sum.
  std::vector<std::array<double, 27>> sh_rows(static_cast<std::size_t>(H));
  parallel_rows(H, [&](int y) {
    auto& acc = sh_rows[static_cast<std::size_t>(y)];
    acc.fill(0.0);
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const auto Y = sh_basis_raw(normal_at(mat.normals, p));
      for (int c = 0; c < 3; ++c) {
        if (!recon_live[3 * p + c] || !shade_live[3 * p + c]) continue;
        const double gs = g_recon.data()[3 * p + c] * mat.diffuse.data()[3 * p + c];
        for (int k = 0; k < 9; ++k) acc[static_cast<std::size_t>(c * 9 + k)] += gs * Y[static_cast<std::size_t>(k)];
      }
    }
  });
  for (const auto& r : sh_rows)
    for (int i = 0; i < 27; ++i) grad->sh.values[i] += r[static_cast<std::size_t>(i)];

  total_variation_grad(mat.diffuse, w.tv, grad->diffuse);
  total_variation_grad(mat.normals, w.tv, grad->normals);
  total_variation_grad(mat.specular, w.tv, grad->specular);

  auto prior_grad = [&](const TextureMap& blurred, const TextureMap& prior, double weight, TextureMap& out) {
    TextureMap g(blurred.width(), blurred.height(), blurred.channels());
    const double k = w.prior * weight / static_cast<double>(blurred.size());
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = k * detail::sign(blurred.data()[i] - prior.data()[i]);
    const TextureMap back = gaussian_blur_adjoint(g, blur_kernel);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += back.data()[i];
  };
  prior_grad(blur_d, priors.diffuse, w.prior_diffuse, grad->diffuse);
  prior_grad(blur_n, priors.normals, w.prior_normals, grad->normals);
  prior_grad(blur_s, priors.specular, w.prior_specular, grad->specular);
  for (int i = 0; i < ShCoefficients::kSize; ++i)
    grad->sh.values[i] += 2.0 * w.prior * w.prior_sh * (mat.sh.values[i] - priors.sh.values[i]);
  return t;
}

struct RefineConfig {
  int iterations = 500;
  double lr = 1e-2;
  double lr_decay = 0.1;
  int decay_at = 250;  // the decay is applied once, from this iteration on
  int blur_kernel = 11;
  RefineLossWeights weights;
};

struct RefineTraceRow {
  int iter = 0;
  RefineLossTerms terms;
  double best = 0.0;
};

struct RefineResult {
  RefinedMaterials materials;
  std::vector<RefineTraceRow> trace;
};

// Projection applied after every step: D in [0,1], specular >= 0, unit normals.
inline void project_materials(RefinedMaterials& m) {
  m.diffuse.clamp(0.0, 1.0);
  m.specular.clamp(0.0, std::numeric_limits<double>::infinity());
  renormalize_normals(m.normals);
}

inline RefineResult refine(const RefinedMaterials& init, const TextureMap& target, const RefinePriors& priors,
                           const RefineConfig& cfg) {
  if (cfg.iterations < 0) throw ParameterError("refine: negative iteration count");
  if (!(cfg.lr > 0.0) || !(cfg.lr_decay > 0.0)) throw ParameterError("refine: learning rate and decay must be positive");
  if (cfg.blur_kernel < 1 || cfg.blur_kernel % 2 == 0) throw ParameterError("refine: blur kernel must be odd and >= 1");

  RefineResult res;
  res.materials = init;
  RefinedMaterials& m = res.materials;
  AdamState sd(m.diffuse.size()), sn(m.normals.size()), ss(m.specular.size()), sl(ShCoefficients::kSize);
  RefinedMaterials g;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= cfg.iterations; ++it) {
    const bool last = it == cfg.iterations;
    const RefineLossTerms terms = refine_loss(m, target, priors, cfg.weights, cfg.blur_kernel, last ? nullptr : &g);
    if (!std::isfinite(terms.total))
      throw DivergenceError("refine: loss is not finite at step " + std::to_string(it), it);
    best = std::min(best, terms.total);
    res.trace.push_back({it, terms, best});
    if (last) break;
    const double lr = it >= cfg.decay_at ? cfg.lr * cfg.lr_decay : cfg.lr;
    adam_step(sd, m.diffuse.data(), g.diffuse.data(), lr);
    adam_step(sn, m.normals.data(), g.normals.data(), lr);
    adam_step(ss, m.specular.data(), g.specular.data(), lr);
    adam_step(sl, m.sh.values, g.sh.values, lr);
    project_materials(m);
  }
  return res;
}

inline void write_refine_trace(const std::vector<RefineTraceRow>& trace, std::ostream& out) {
  out << "iter,total,recons,perc,tv,prior\n";
  out.precision(17);
  for (const auto& r : trace)
    out << r.iter << ',' << r.terms.total << ',' << r.terms.recons << ',' << r.terms.perc << ',' << r.terms.tv << ','
        << r.terms.prior << '\n';
}

}  // namespace facelayers
