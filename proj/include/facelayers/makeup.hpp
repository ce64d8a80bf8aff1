#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "facelayers/adam.hpp"
#include "facelayers/error.hpp"
#include "facelayers/face_model.hpp"
#include "facelayers/filter.hpp"
#include "facelayers/shading.hpp"
#include "facelayers/texture.hpp"

namespace facelayers {

// Albedo as an alpha blend of bare skin and a makeup colour layer.
// alpha == 1 means bare skin, alpha == 0 means pure makeup.
struct MakeupLayers {
  TextureMap bare;    // 3ch, [0,1]
  TextureMap makeup;  // 3ch, [0,1]
  TextureMap alpha;   // 1ch, [0,1]

  void validate() const {
    if (bare.channels() != 3 || makeup.channels() != 3 || alpha.channels() != 1)
      throw ShapeError("makeup layers: expected 3ch bare, 3ch makeup, 1ch alpha");
    require_same_resolution(bare, makeup, "makeup layers");
    require_same_resolution(bare, alpha, "makeup layers");
    bare.validate(TextureKind::unit);
    makeup.validate(TextureKind::unit);
    alpha.validate(TextureKind::unit);
  }

  // (1 - A) * makeup, the form collected for the statistical model.
  TextureMap premultiplied() const {
    TextureMap out(makeup.width(), makeup.height(), 3);
    for (std::size_t p = 0; p < alpha.pixels(); ++p)
      for (int c = 0; c < 3; ++c) out.data()[3 * p + c] = (1.0 - alpha.data()[p]) * makeup.data()[3 * p + c];
    return out;
  }
};

namespace detail {

inline TextureMap blend(const TextureMap& bare, const TextureMap& makeup, const TextureMap& alpha) {
  TextureMap out(bare.width(), bare.height(), 3);
  for (std::size_t p = 0; p < alpha.pixels(); ++p) {
    const double a = alpha.data()[p];
    for (int c = 0; c < 3; ++c) {
      const std::size_t i = 3 * p + c;
      out.data()[i] = a * bare.data()[i] + (1.0 - a) * makeup.data()[i];
    }
  }
  return out;
}

}  // namespace detail

inline TextureMap alpha_blend(const MakeupLayers& layers) {
  layers.validate();
  return detail::blend(layers.bare, layers.makeup, layers.alpha);
}

// Source makeup re-composited over another identity's bare skin. Source
// layers are resampled bilinearly when resolutions differ.
inline TextureMap transfer(const TextureMap& target_bare, const MakeupLayers& source) {
  source.validate();
  if (target_bare.channels() != 3) throw ShapeError("transfer: bare skin must have 3 channels");
  target_bare.validate(TextureKind::unit);
  const int w = target_bare.width(), h = target_bare.height();
  if (source.bare.width() == w && source.bare.height() == h)
    return detail::blend(target_bare, source.makeup, source.alpha);
  TextureMap makeup = resize_bilinear(source.makeup, w, h);
  TextureMap alpha = resize_bilinear(source.alpha, w, h);
  makeup.clamp(0.0, 1.0);
  alpha.clamp(0.0, 1.0);
  return detail::blend(target_bare, makeup, alpha);
}

// clamp(A + sigma, 0, 1): sigma = 0 keeps the matte, sigma = 1 removes makeup.
inline TextureMap interpolate_alpha(const TextureMap& alpha, double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ParameterError("interpolate_alpha: sigma must lie in [0, 1]");
  if (alpha.channels() != 1) throw ShapeError("interpolate_alpha: alpha must have 1 channel");
  TextureMap out = alpha;
  for (double& v : out.data()) v = std::clamp(v + sigma, 0.0, 1.0);
  return out;
}

// Illumination-aware render of `layers` composited over `bare`.
inline TextureMap apply_makeup_render(const TextureMap& bare, const MakeupLayers& layers, const TextureMap& shading,
                                      const TextureMap& specular) {
  return compose_reconstruction(transfer(bare, layers), shading, specular);
}

// ---------------------------------------------------------------------------
// Extraction

struct ExtractionWeights {
  double fit = 20.0;
  double skin_prior = 20.0;
  double tv_alpha = 1.0;
  double tv_makeup = 8.0;
  double alpha_sparse = 1.0;

  void validate() const {
    for (double w : {fit, skin_prior, tv_alpha, tv_makeup, alpha_sparse})
      if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("extraction weights must be finite and >= 0");
  }
};

struct ExtractionConfig {
  int iterations = 800;
  double lr = 1e-2;
  ExtractionWeights weights;
};

struct ExtractionTerms {
  double total = 0.0;
  double fit = 0.0;
  double skin_prior = 0.0;
  double tv_alpha = 0.0;
  double tv_makeup = 0.0;
  double sparse = 0.0;
};

struct ExtractionResult {
  MakeupLayers layers;
  std::vector<ExtractionTerms> trace;
};

inline ExtractionTerms extraction_loss(const MakeupLayers& l, const TextureMap& albedo, const TextureMap& prior,
                                       const ExtractionWeights& w, MakeupLayers* grad = nullptr) {
  const std::size_t P = albedo.pixels();
  const double n3 = static_cast<double>(3 * P);
  ExtractionTerms t;
  if (grad) {
    grad->bare = TextureMap(albedo.width(), albedo.height(), 3);
    grad->makeup = TextureMap(albedo.width(), albedo.height(), 3);
    grad->alpha = TextureMap(albedo.width(), albedo.height(), 1);
  }
  double sparse = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    const double a = l.alpha.data()[p];
    sparse += 1.0 - a;
    double ga = 0.0;
    for (int c = 0; c < 3; ++c) {
      const std::size_t i = 3 * p + c;
      const double b = l.bare.data()[i], m = l.makeup.data()[i];
      const double r = a * b + (1.0 - a) * m - albedo.data()[i];
      const double s = b - prior.data()[i];
      t.fit += std::abs(r);
      t.skin_prior += std::abs(s);
      if (grad) {
        const double gr = w.fit * detail::sign(r) / n3;
        grad->bare.data()[i] += gr * a + w.skin_prior * detail::sign(s) / n3;
        grad->makeup.data()[i] += gr * (1.0 - a);
        ga += gr * (b - m);
      }
    }
    if (grad) grad->alpha.data()[p] += ga - w.alpha_sparse / static_cast<double>(P);
  }
  t.fit /= n3;
  t.skin_prior /= n3;
  t.sparse = sparse / static_cast<double>(P);
  t.tv_alpha = total_variation(l.alpha);
  t.tv_makeup = total_variation(l.makeup);
  if (grad) {
    total_variation_grad(l.alpha, w.tv_alpha, grad->alpha);
    total_variation_grad(l.makeup, w.tv_makeup, grad->makeup);
  }
  t.total = w.fit * t.fit + w.skin_prior * t.skin_prior + w.tv_alpha * t.tv_alpha + w.tv_makeup * t.tv_makeup +
            w.alpha_sparse * t.sparse;
  return t;
}

// Splits a diffuse albedo into bare skin, makeup colour and matte by
// projected first-order descent. Starts from "no makeup": bare = prior,
// alpha = 1, makeup = albedo.
inline ExtractionResult extract_makeup(const TextureMap& albedo, const TextureMap& prior,
                                       const ExtractionConfig& cfg = {}) {
  cfg.weights.validate();
  if (albedo.channels() != 3) throw ShapeError("extract_makeup: albedo must have 3 channels");
  require_same_shape(albedo, prior, "extract_makeup");
  if (cfg.iterations < 0) throw ParameterError("extract_makeup: negative iteration count");
  if (!(cfg.lr > 0.0)) throw ParameterError("extract_makeup: learning rate must be positive");

  ExtractionResult res;
  MakeupLayers& l = res.layers;
  l.bare = prior;
  l.bare.clamp(0.0, 1.0);
  l.makeup = albedo;
  l.makeup.clamp(0.0, 1.0);
  l.alpha = TextureMap(albedo.width(), albedo.height(), 1, 1.0);
  AdamState sb(l.bare.size()), sm(l.makeup.size()), sa(l.alpha.size());
  MakeupLayers g;
  for (int it = 0; it <= cfg.iterations; ++it) {
    const bool last = it == cfg.iterations;
    const ExtractionTerms t = extraction_loss(l, albedo, prior, cfg.weights, last ? nullptr : &g);
    if (!std::isfinite(t.total))
      throw DivergenceError("extract_makeup: loss is not finite at step " + std::to_string(it), it);
    res.trace.push_back(t);
    if (last) break;
    adam_step(sb, l.bare.data(), g.bare.data(), cfg.lr);
    adam_step(sm, l.makeup.data(), g.makeup.data(), cfg.lr);
    adam_step(sa, l.alpha.data(), g.alpha.data(), cfg.lr);
    l.bare.clamp(0.0, 1.0);
    l.makeup.clamp(0.0, 1.0);
    l.alpha.clamp(0.0, 1.0);
  }
  return res;
}

struct AlbedoPriorConfig {
  int iterations = 300;
  double lr = 1e-2;
  double gamma_weight = 1e-4;
};

// Bare-skin estimate: the face model's diffuse albedo subspace (gamma,
// gain, bias) fitted to `albedo` by masked L1, which is robust to the
// sparse makeup pixels. Returned at the albedo's resolution, holes outside
// `mask` filled.
inline TextureMap albedo_prior(const LinearFaceModel& model, const TextureMap& albedo, const UvMask& mask,
                               const AlbedoPriorConfig& cfg = {}) {
  model.validate();
  if (albedo.channels() != 3) throw ShapeError("albedo_prior: albedo must have 3 channels");
  if (!mask.matches(albedo)) throw ShapeError("albedo_prior: mask size mismatch");
  const int mw = model.texture_width(), mh = model.texture_height();
  const TextureMap target = albedo.same_resolution(model.mean_diffuse) ? albedo : resize_bilinear(albedo, mw, mh);
  std::vector<double> mw_weights(static_cast<std::size_t>(mw) * mh);
  {
    const UvMask coverage = rasterize_uv(model.uv_coords, model.topology, mw, mh).coverage();
    TextureMap m(mask.width(), mask.height(), 1, mask.weights());
    const TextureMap ms = m.same_resolution(model.mean_diffuse) ? m : resize_bilinear(m, mw, mh);
    for (std::size_t p = 0; p < mw_weights.size(); ++p) mw_weights[p] = ms.data()[p] * coverage[p];
  }
  double wsum = 0.0;
  for (double v : mw_weights) wsum += v;
  if (wsum <= 0.0) throw ParameterError("albedo_prior: empty mask");

  // Parameters: gamma (kDiffuseDims), gain (3), bias (3).
  const int n = kDiffuseDims + 6;
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  for (int c = 0; c < 3; ++c) x[static_cast<std::size_t>(kDiffuseDims + c)] = 1.0;
  AdamState st(static_cast<std::size_t>(n));
  std::vector<double> g(static_cast<std::size_t>(n));
  const std::size_t texels = target.size();
  Eigen::VectorXd g_base(static_cast<Eigen::Index>(texels));
  for (int it = 0; it < cfg.iterations; ++it) {
    const Eigen::Map<const Eigen::VectorXd> gamma(x.data(), kDiffuseDims);
    Eigen::VectorXd base = Eigen::Map<const Eigen::VectorXd>(model.mean_diffuse.data().data(),
                                                             static_cast<Eigen::Index>(texels)) +
                           model.basis_diffuse * gamma;
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t p = 0; p < mw_weights.size(); ++p)
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = 3 * p + c;
        const double gain = x[static_cast<std::size_t>(kDiffuseDims + c)];
        const double bias = x[static_cast<std::size_t>(kDiffuseDims + 3 + c)];
        const double r = base[static_cast<Eigen::Index>(i)] * gain + bias - target.data()[i];
        const double gr = mw_weights[p] * detail::sign(r) / (3.0 * wsum);
        g_base[static_cast<Eigen::Index>(i)] = gr * gain;
        g[static_cast<std::size_t>(kDiffuseDims + c)] += gr * base[static_cast<Eigen::Index>(i)];
        g[static_cast<std::size_t>(kDiffuseDims + 3 + c)] += gr;
      }
    const Eigen::VectorXd gg = model.basis_diffuse.transpose() * g_base;
    for (int k = 0; k < kDiffuseDims; ++k) g[static_cast<std::size_t>(k)] = gg[k] + 2.0 * cfg.gamma_weight * x[static_cast<std::size_t>(k)];
    adam_step(st, x, g, cfg.lr);
  }
  const Eigen::Map<const Eigen::VectorXd> gamma(x.data(), kDiffuseDims);
  const TextureMap fitted = eval_diffuse_albedo(
      model, gamma, {x[kDiffuseDims], x[kDiffuseDims + 1], x[kDiffuseDims + 2]},
      {x[kDiffuseDims + 3], x[kDiffuseDims + 4], x[kDiffuseDims + 5]});
  UvMask valid(mw, mh, mw_weights);
  TextureMap filled = diffuse_fill(fitted, valid);
  TextureMap out = filled.same_resolution(albedo) ? filled : resize_bilinear(filled, albedo.width(), albedo.height());
  out.clamp(0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Histogram matching metric

inline constexpr int kHistogramBins = 256;

namespace detail {

// Piecewise-linear CDF of a sample set: knots at the sample minimum (F=0),
// the mean of every non-empty bin (F at the bin's mid-mass) and the maximum
// (F=1). Knots with equal values are merged, so values strictly increase.
struct CdfKnots {
  std::vector<double> value;
  std::vector<double> mass;

  explicit CdfKnots(const std::vector<double>& samples) {
    const double n = static_cast<double>(samples.size());
    std::array<double, kHistogramBins> sum{};
    std::array<double, kHistogramBins> count{};
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : samples) {
      const int b = std::clamp(static_cast<int>(v * kHistogramBins), 0, kHistogramBins - 1);
      sum[static_cast<std::size_t>(b)] += v;
      count[static_cast<std::size_t>(b)] += 1.0;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    std::vector<std::pair<double, double>> raw{{lo, 0.0}};
    double before = 0.0;
    for (int b = 0; b < kHistogramBins; ++b) {
      const double c = count[static_cast<std::size_t>(b)];
      if (c == 0.0) continue;
      raw.emplace_back(sum[static_cast<std::size_t>(b)] / c, (before + 0.5 * c) / n);
      before += c;
    }
    raw.emplace_back(hi, 1.0);
    for (std::size_t i = 0; i < raw.size();) {
      std::size_t j = i;
      double m = 0.0;
      while (j < raw.size() && raw[j].first == raw[i].first) m += raw[j++].second;
      value.push_back(raw[i].first);
      mass.push_back(m / static_cast<double>(j - i));
      i = j;
    }
  }

  static double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (xs.size() == 1 || x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - xs.begin());
    const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return ys[k - 1] + t * (ys[k] - ys[k - 1]);
  }

  double cdf(double v) const { return interp(value, mass, v); }
  double quantile(double f) const { return interp(mass, value, f); }
};

inline std::vector<double> region_channel(const TextureMap& t, const UvMask& m, int c) {
  std::vector<double> out;
  for (std::size_t p = 0; p < t.pixels(); ++p)
    if (m.valid(p)) out.push_back(t.data()[p * static_cast<std::size_t>(t.channels()) + static_cast<std::size_t>(c)]);
  return out;
}

}  // namespace detail

// Per-channel histogram match of `x`'s region values onto `y`'s.
inline std::vector<double> histogram_match(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw ParameterError("histogram_match: empty sample set");
  const detail::CdfKnots fx(x), fy(y);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fy.quantile(fx.cdf(x[i]));
  return out;
}

// Colour-distribution distance over brows, eyes and lips (skin excluded):
// sum over regions of the mean squared gap between x and x matched to y.
inline double makeup_histogram_loss(const TextureMap& x, const TextureMap& y, const FaceRegions& regions) {
  require_same_shape(x, y, "makeup_histogram_loss");
  regions.validate();
  double loss = 0.0;
  for (const auto& [name, mask] : regions.makeup_regions()) {
    if (!mask->matches(x)) throw ShapeError(std::string("makeup_histogram_loss: region size mismatch: ") + name);
    if (mask->count_valid() == 0) throw ParameterError(std::string("makeup_histogram_loss: empty region: ") + name);
    double s = 0.0, n = 0.0;
    for (int c = 0; c < x.channels(); ++c) {
      const auto xs = detail::region_channel(x, *mask, c);
      const auto matched = histogram_match(xs, detail::region_channel(y, *mask, c));
      for (std::size_t i = 0; i < xs.size(); ++i) s += (xs[i] - matched[i]) * (xs[i] - matched[i]);
      n += static_cast<double>(xs.size());
    }
    loss += s / n;
  }
  return loss;
}

}  // namespace facelayers
