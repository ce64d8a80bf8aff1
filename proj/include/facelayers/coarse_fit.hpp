#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "facelayers/adam.hpp"
#include "facelayers/error.hpp"
#include "facelayers/face_model.hpp"
#include "facelayers/filter.hpp"
#include "facelayers/parallel.hpp"
#include "facelayers/shading.hpp"
#include "facelayers/texture.hpp"

namespace facelayers {

struct CoarseLossWeights {
  double photo = 19.2;
  double lan = 5.0;
  double skin = 3.0;
  double reg = 3e-4;
  double alpha = 1.0;
  double beta = 0.8;
  double gamma = 1.7e-2;
  double delta = 1.0;
  double light = 1.0;

  void validate() const {
    for (double w : {photo, lan, skin, reg, alpha, beta, gamma, delta, light})
      if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("coarse loss weights must be finite and >= 0");
  }
};

struct CoarseLossTerms {
  double total = 0.0;
  double photo = 0.0;
  double lan = 0.0;
  double skin = 0.0;
  double reg = 0.0;
};

// Flat layout of CoarseParams used by the optimizer and gradient checks.
namespace coarse_layout {
inline constexpr int alpha = 0;
inline constexpr int beta = alpha + kIdentityDims;
inline constexpr int gamma = beta + kExpressionDims;
inline constexpr int delta = gamma + kDiffuseDims;
inline constexpr int gain = delta + kSpecularDims;
inline constexpr int bias = gain + 3;
inline constexpr int rotation = bias + 3;
inline constexpr int translation = rotation + 3;
inline constexpr int sh = translation + 3;
inline constexpr int intensities = sh + ShCoefficients::kSize;
inline constexpr int directions = intensities + VirtualLightStage::kLights;
inline constexpr int shininess = directions + 3 * VirtualLightStage::kLights;
inline constexpr int size = shininess + VirtualLightStage::kLights;
}  // namespace coarse_layout

inline Eigen::VectorXd pack(const CoarseParams& p) {
  namespace L = coarse_layout;
  Eigen::VectorXd v(L::size);
  v.segment(L::alpha, kIdentityDims) = p.alpha;
  v.segment(L::beta, kExpressionDims) = p.beta;
  v.segment(L::gamma, kDiffuseDims) = p.gamma;
  v.segment(L::delta, kSpecularDims) = p.delta;
  for (int c = 0; c < 3; ++c) {
    v[L::gain + c] = p.gain[c];
    v[L::bias + c] = p.bias[c];
    v[L::rotation + c] = p.rotation[c];
    v[L::translation + c] = p.translation[c];
  }
  for (int i = 0; i < ShCoefficients::kSize; ++i) v[L::sh + i] = p.sh.values[i];
  for (int j = 0; j < VirtualLightStage::kLights; ++j) {
    v[L::intensities + j] = p.stage.intensities[j];
    v.segment<3>(L::directions + 3 * j) = p.stage.directions[j];
    v[L::shininess + j] = p.stage.shininess[j];
  }
  return v;
}

// Inverse of pack(); the view direction (not optimized) comes from `like`.
inline CoarseParams unpack(const Eigen::VectorXd& v, const CoarseParams& like = {}) {
  namespace L = coarse_layout;
  if (v.size() != L::size) throw ShapeError("unpack: wrong parameter vector length");
  CoarseParams p = like;
  p.alpha = v.segment(L::alpha, kIdentityDims);
  p.beta = v.segment(L::beta, kExpressionDims);
  p.gamma = v.segment(L::gamma, kDiffuseDims);
  p.delta = v.segment(L::delta, kSpecularDims);
  for (int c = 0; c < 3; ++c) {
    p.gain[c] = v[L::gain + c];
    p.bias[c] = v[L::bias + c];
    p.rotation[c] = v[L::rotation + c];
    p.translation[c] = v[L::translation + c];
  }
  for (int i = 0; i < ShCoefficients::kSize; ++i) p.sh.values[i] = v[L::sh + i];
  for (int j = 0; j < VirtualLightStage::kLights; ++j) {
    p.stage.intensities[j] = v[L::intensities + j];
    p.stage.directions[j] = v.segment<3>(L::directions + 3 * j);
    p.stage.shininess[j] = v[L::shininess + j];
  }
  return p;
}

// Coarse reconstruction in UV space and its intermediate maps.
struct CoarseRender {
  TextureMap diffuse_albedo;    // D_c
  TextureMap specular_albedo;   // S_c
  TextureMap normals;           // rotated (view-frame) per-pixel normals
  TextureMap diffuse_shading;   // 3ch
  TextureMap specular_shading;  // 1ch
  TextureMap specular_recon;    // S_c * specular shading, 3ch
  TextureMap reconstruction;    // R_c
  UvMask coverage;
};

// Evaluates the coarse objective on one model. The UV rasterization depends
// only on the unwrap, so it is computed once here and reused.
class CoarseEvaluator {
 public:
  explicit CoarseEvaluator(const LinearFaceModel& model)
      : model_(model),
        raster_(rasterize_uv(model.uv_coords, model.topology, model.texture_width(), model.texture_height())),
        coverage_(raster_.coverage()) {
    model.validate();
  }

  const LinearFaceModel& model() const { return model_; }
  const UvMask& coverage() const { return coverage_; }
  const UvRasterization& rasterization() const { return raster_; }

  // View-frame normal map for the given shape and pose.
  TextureMap normal_map(const CoarseParams& p) const {
    const auto geo = eval_geometry(model_, p.alpha, p.beta);
    TextureMap n = interpolate_normals(raster_, vertex_normals(geo, model_.topology), model_.topology);
    const Mat3 R = euler_rotation(p.rotation);
    for (std::size_t q = 0; q < n.pixels(); ++q) {
      const Vec3 r = R * normal_at(n, q);
      for (int c = 0; c < 3; ++c) n.data()[3 * q + c] = r[c];
    }
    return n;
  }

  CoarseRender render(const CoarseParams& p) const {
    CoarseRender out;
    out.diffuse_albedo = eval_diffuse_albedo(model_, p.gamma, p.gain, p.bias);
    out.specular_albedo = eval_specular_albedo(model_, p.delta);
    out.normals = normal_map(p);
    out.diffuse_shading = diffuse_shading(out.normals, p.sh);
    out.specular_shading = specular_shading(out.normals, p.stage, 1);
    out.specular_recon = TextureMap(out.normals.width(), out.normals.height(), 3);
    for (std::size_t q = 0; q < out.normals.pixels(); ++q)
      for (int c = 0; c < 3; ++c)
        out.specular_recon.data()[3 * q + c] = out.specular_albedo.data()[3 * q + c] * out.specular_shading.data()[q];
    out.reconstruction = compose_reconstruction(out.diffuse_albedo, out.diffuse_shading, out.specular_recon);
    out.coverage = coverage_;
    return out;
  }

  // Loss terms; when `grad` is non-null it receives d total / d params in
  // coarse_layout order. Landmark loss is active iff `landmarks` is given.
  CoarseLossTerms evaluate(const CoarseParams& p, const TextureMap& target, const UvMask& mask,
                           const std::vector<Vec2>* landmarks, const CoarseLossWeights& w,
                           Eigen::VectorXd* grad = nullptr) const;

 private:
  const LinearFaceModel& model_;
  UvRasterization raster_;
  UvMask coverage_;
};

namespace detail {

struct CoarseRowAccum {
  double photo = 0.0;
  std::array<double, 27> sh{};
  std::array<double, 20> intensity{};
  std::array<double, 20> shininess{};
  std::array<Vec3, 20> half{};
  Mat3 rot = Mat3::Zero();
  std::array<double, 3> gain{};
  std::array<double, 3> bias{};
};

}  // namespace detail

inline CoarseLossTerms CoarseEvaluator::evaluate(const CoarseParams& p, const TextureMap& target,
                                                 const UvMask& mask, const std::vector<Vec2>* landmarks,
                                                 const CoarseLossWeights& w, Eigen::VectorXd* grad) const {
  namespace L = coarse_layout;
  w.validate();
  // Directions are free vectors here; only the optimizer renormalizes them.
  p.validate_shapes();
  const int W = model_.texture_width(), H = model_.texture_height();
  if (target.width() != W || target.height() != H || target.channels() != 3)
    throw ShapeError("coarse_loss: target must be 3-channel at the model's texture resolution");
  if (mask.width() != W || mask.height() != H) throw ShapeError("coarse_loss: mask size mismatch");
  if (landmarks && landmarks->size() != model_.landmark_indices.size())
    throw ShapeError("coarse_loss: landmark count does not match the model");

  // Effective per-pixel weight: user mask gated by UV coverage.
  std::vector<double> m(mask.pixels());
  double msum = 0.0;
  for (std::size_t q = 0; q < m.size(); ++q) {
    m[q] = mask[q] * coverage_[q];
    msum += m[q];
  }
  if (msum <= 0.0) throw ParameterError("coarse_loss: empty mask");

  // Forward: geometry and normals.
  const Eigen::VectorXd geo = eval_geometry(model_, p.alpha, p.beta);
  const auto& topo = model_.topology;
  std::vector<Vec3> esum = vertex_normal_sums(geo, topo);
  std::vector<Vec3> vnorm(esum.size());
  std::vector<double> elen(esum.size());
  for (std::size_t k = 0; k < esum.size(); ++k) {
    elen[k] = esum[k].norm();
    vnorm[k] = elen[k] > 1e-300 ? Vec3(esum[k] / elen[k]) : Vec3(0, 0, 1);
  }
  const Mat3 R = euler_rotation(p.rotation);

  // Albedos. `base` is the pre-skin-tone diffuse albedo.
  TextureMap base = model_.mean_diffuse;
  Eigen::Map<Eigen::VectorXd>(base.data().data(), static_cast<Eigen::Index>(base.size())) +=
      model_.basis_diffuse * p.gamma;
  const TextureMap spec_albedo = eval_specular_albedo(model_, p.delta);

  // Skin tone: masked mean colours of target and D_c.
  std::array<double, 3> mean_t{0, 0, 0}, mean_d{0, 0, 0};
  for (std::size_t q = 0; q < m.size(); ++q)
    for (int c = 0; c < 3; ++c) {
      mean_t[c] += m[q] * target.data()[3 * q + c];
      mean_d[c] += m[q] * (base.data()[3 * q + c] * p.gain[c] + p.bias[c]);
    }
  CoarseLossTerms terms;
  std::array<double, 3> skin_sign{};
  for (int c = 0; c < 3; ++c) {
    mean_t[c] /= msum;
    mean_d[c] /= msum;
    terms.skin += std::abs(mean_d[c] - mean_t[c]) / 3.0;
    skin_sign[c] = detail::sign(mean_d[c] - mean_t[c]);
  }

  std::array<std::optional<Vec3>, 20> halves;
  std::array<double, 20> hlen{};
  for (int j = 0; j < 20; ++j) {
    halves[j] = half_vector(p.stage.directions[j], p.stage.view_direction);
    hlen[j] = (p.stage.directions[j] + p.stage.view_direction).norm();
  }

  const bool want_grad = grad != nullptr;
  const double photo_scale = w.photo / (3.0 * msum);
  std::vector<detail::CoarseRowAccum> rows(static_cast<std::size_t>(H));
  // Per-pixel gradient w.r.t. the unrotated interpolated normal m_p.
  std::vector<Vec3> g_m(want_grad ? m.size() : 0, Vec3::Zero());
  std::vector<double> g_base(want_grad ? base.size() : 0, 0.0);
  std::vector<double> g_spec(want_grad ? base.size() : 0, 0.0);

  parallel_rows(H, [&](int y) {
    auto& acc = rows[static_cast<std::size_t>(y)];
    for (int x = 0; x < W; ++x) {
      const std::size_t q = static_cast<std::size_t>(y) * W + x;
      if (!raster_.covered(q)) continue;
      const auto& tri = topo[static_cast<std::size_t>(raster_.triangle[q])];
      Vec3 u = Vec3::Zero();
      for (int k = 0; k < 3; ++k) u += raster_.bary[q][k] * vnorm[static_cast<std::size_t>(tri[k])];
      const double ulen = u.norm();
      const Vec3 mp = ulen > 1e-300 ? Vec3(u / ulen) : Vec3(0, 0, 1);
      const Vec3 n = R * mp;
      const auto Y = sh_basis_raw(n);

      std::array<double, 3> sd{}, sd_pre{};
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = 0; k < 9; ++k) s += p.sh(c, k) * Y[static_cast<std::size_t>(k)];
        sd_pre[c] = s;
        sd[c] = std::max(0.0, s);
      }
      std::array<double, 20> qpow{}, qdot{};
      double ss = 0.0;
      for (int j = 0; j < 20; ++j) {
        if (!halves[j]) continue;
        qdot[j] = n.dot(*halves[j]);
        if (qdot[j] > 0.0) {
          qpow[j] = std::pow(qdot[j], p.stage.shininess[j]);
          ss += p.stage.intensities[j] * qpow[j];
        }
      }

      std::array<double, 3> gR{};
      for (int c = 0; c < 3; ++c) {
        const double a = base.data()[3 * q + c] * p.gain[c] + p.bias[c];
        const double pre = a * sd[c] + spec_albedo.data()[3 * q + c] * ss;
        const double r = std::max(0.0, pre);
        const double diff = r - target.data()[3 * q + c];
        acc.photo += m[q] * std::abs(diff);
        if (want_grad && pre > 0.0) gR[c] = photo_scale * m[q] * detail::sign(diff);
      }
      if (!want_grad) continue;

      Vec3 g_n = Vec3::Zero();
      double g_ss = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double a = base.data()[3 * q + c] * p.gain[c] + p.bias[c];
        // D_c = base * gain + bias
        const double gD = gR[c] * sd[c] + w.skin * skin_sign[c] * m[q] / (3.0 * msum);
        g_base[3 * q + c] = gD * p.gain[c];
        acc.gain[c] += gD * base.data()[3 * q + c];
        acc.bias[c] += gD;
        g_spec[3 * q + c] = gR[c] * ss;
        g_ss += gR[c] * spec_albedo.data()[3 * q + c];
        if (sd_pre[c] > 0.0) {
          const double g_sd = gR[c] * a;
          if (g_sd != 0.0) {
            const auto dY = sh_basis_jacobian(n);
            for (int k = 0; k < 9; ++k) {
              acc.sh[static_cast<std::size_t>(c * 9 + k)] += g_sd * Y[static_cast<std::size_t>(k)];
              g_n += g_sd * p.sh(c, k) * dY[static_cast<std::size_t>(k)];
            }
          }
        }
      }
      if (g_ss != 0.0)
        for (int j = 0; j < 20; ++j) {
          if (!(qdot[j] > 0.0)) continue;
          const double I = p.stage.intensities[j], rho = p.stage.shininess[j];
          acc.intensity[j] += g_ss * qpow[j];
          acc.shininess[j] += g_ss * I * qpow[j] * std::log(qdot[j]);
          const double dq = g_ss * I * rho * std::pow(qdot[j], rho - 1.0);
          g_n += dq * *halves[j];
          acc.half[j] += dq * n;
        }
      // n = R m_p
      acc.rot += g_n * mp.transpose();
      const Vec3 gm = R.transpose() * g_n;
      // m_p = u / |u|
      g_m[q] = ulen > 1e-300 ? Vec3((gm - mp * mp.dot(gm)) / ulen) : Vec3::Zero();
    }
  });

  double photo_sum = 0.0;
  for (const auto& r : rows) photo_sum += r.photo;
  terms.photo = photo_sum / (3.0 * msum);

  // Landmarks.
  std::vector<Vec2> proj;
  if (landmarks) {
    proj = project_landmarks(geo, model_.landmark_indices, p.rotation, p.translation);
    for (std::size_t l = 0; l < proj.size(); ++l) terms.lan += (proj[l] - (*landmarks)[l]).squaredNorm();
    terms.lan /= static_cast<double>(proj.size());
  }

  terms.reg = w.alpha * p.alpha.squaredNorm() + w.beta * p.beta.squaredNorm() +
              w.gamma * p.gamma.squaredNorm() + w.delta * p.delta.squaredNorm();
  for (int j = 0; j < 20; ++j)
    terms.reg += w.light * (p.stage.intensities[j] * p.stage.intensities[j] + p.stage.directions[j].squaredNorm());

  terms.total = w.photo * terms.photo + w.lan * terms.lan + w.skin * terms.skin + w.reg * terms.reg;
  if (!want_grad) return terms;

  // Backward: reduce row accumulators in row order.
  Eigen::VectorXd& g = *grad;
  g = Eigen::VectorXd::Zero(L::size);
  Mat3 g_R = Mat3::Zero();
  std::array<Vec3, 20> g_half{};
  for (auto& h : g_half) h.setZero();
  for (const auto& r : rows) {
    for (int i = 0; i < 27; ++i) g[L::sh + i] += r.sh[static_cast<std::size_t>(i)];
    for (int j = 0; j < 20; ++j) {
      g[L::intensities + j] += r.intensity[j];
      g[L::shininess + j] += r.shininess[j];
      g_half[j] += r.half[j];
    }
    for (int c = 0; c < 3; ++c) {
      g[L::gain + c] += r.gain[c];
      g[L::bias + c] += r.bias[c];
    }
    g_R += r.rot;
  }
  // h = (d + v) / |d + v|
  for (int j = 0; j < 20; ++j) {
    if (!halves[j]) continue;
    const Vec3& h = *halves[j];
    g.segment<3>(L::directions + 3 * j) += (g_half[j] - h * h.dot(g_half[j])) / hlen[j];
  }

  // Albedo bases.
  g.segment(L::gamma, kDiffuseDims) =
      model_.basis_diffuse.transpose() *
      Eigen::Map<const Eigen::VectorXd>(g_base.data(), static_cast<Eigen::Index>(g_base.size()));
  g.segment(L::delta, kSpecularDims) =
      model_.basis_specular.transpose() *
      Eigen::Map<const Eigen::VectorXd>(g_spec.data(), static_cast<Eigen::Index>(g_spec.size()));

  // Normals -> vertex normal sums -> face cross products -> positions.
  const std::size_t nv = esum.size();
  std::vector<Vec3> g_nu(nv, Vec3::Zero());
  for (std::size_t q = 0; q < g_m.size(); ++q) {
    if (!raster_.covered(q)) continue;
    const auto& tri = topo[static_cast<std::size_t>(raster_.triangle[q])];
    for (int k = 0; k < 3; ++k) g_nu[static_cast<std::size_t>(tri[k])] += raster_.bary[q][k] * g_m[q];
  }
  std::vector<Vec3> g_e(nv, Vec3::Zero());
  for (std::size_t k = 0; k < nv; ++k)
    if (elen[k] > 1e-300) g_e[k] = (g_nu[k] - vnorm[k] * vnorm[k].dot(g_nu[k])) / elen[k];
  Eigen::VectorXd g_geo = Eigen::VectorXd::Zero(geo.size());
  for (const auto& tri : topo) {
    const Vec3 gc = g_e[static_cast<std::size_t>(tri[0])] + g_e[static_cast<std::size_t>(tri[1])] +
                    g_e[static_cast<std::size_t>(tri[2])];
    const Vec3 p0 = vertex(geo, tri[0]);
    const Vec3 a = vertex(geo, tri[1]) - p0, b = vertex(geo, tri[2]) - p0;
    const Vec3 ga = b.cross(gc), gb = gc.cross(a);
    g_geo.segment<3>(3 * tri[1]) += ga;
    g_geo.segment<3>(3 * tri[2]) += gb;
    g_geo.segment<3>(3 * tri[0]) -= ga + gb;
  }

  if (landmarks) {
    const double s = 2.0 * w.lan / static_cast<double>(proj.size());
    for (std::size_t l = 0; l < proj.size(); ++l) {
      const Vec2 gp = s * (proj[l] - (*landmarks)[l]);
      const Vec3 gp3(gp.x(), gp.y(), 0.0);
      const int vi = model_.landmark_indices[l];
      g[L::translation + 0] += gp.x();
      g[L::translation + 1] += gp.y();
      g_geo.segment<3>(3 * vi) += R.transpose() * gp3;
      g_R += gp3 * vertex(geo, vi).transpose();
    }
  }

  g.segment(L::alpha, kIdentityDims) = model_.basis_id.transpose() * g_geo;
  g.segment(L::beta, kExpressionDims) = model_.basis_ex.transpose() * g_geo;
  const auto dR = euler_rotation_derivatives(p.rotation);
  for (int i = 0; i < 3; ++i) g[L::rotation + i] += g_R.cwiseProduct(dR[static_cast<std::size_t>(i)]).sum();

  // Regularizer.
  const double wr = 2.0 * w.reg;
  g.segment(L::alpha, kIdentityDims) += wr * w.alpha * p.alpha;
  g.segment(L::beta, kExpressionDims) += wr * w.beta * p.beta;
  g.segment(L::gamma, kDiffuseDims) += wr * w.gamma * p.gamma;
  g.segment(L::delta, kSpecularDims) += wr * w.delta * p.delta;
  for (int j = 0; j < 20; ++j) {
    g[L::intensities + j] += wr * w.light * p.stage.intensities[j];
    g.segment<3>(L::directions + 3 * j) += wr * w.light * p.stage.directions[j];
  }
  return terms;
}

// ---------------------------------------------------------------------------
// Fitting

struct CoarseFitConfig {
  int max_iterations = 1000;
  double lr = 1e-2;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  // Std-dev of seeded Gaussian jitter added to alpha..delta at init.
  double init_noise = 0.0;
  bool skin_tone = true;
  CoarseLossWeights weights;
};

struct CoarseTraceRow {
  int iter = 0;
  CoarseLossTerms current;
  CoarseLossTerms best;  // terms of the best iterate so far; monotone in total
};

struct CoarseFitResult {
  CoarseParams params;
  std::vector<CoarseTraceRow> trace;
  int lr_halvings = 0;
};

// Skin-tone toggle: when off, gain/bias stay at identity and the skin loss is dropped.
inline CoarseFitConfig with_skin_tone(CoarseFitConfig cfg, bool enabled) {
  cfg.skin_tone = enabled;
  return cfg;
}

inline CoarseParams initial_coarse_params(const CoarseFitConfig& cfg) {
  CoarseParams p;
  if (cfg.init_noise > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, cfg.init_noise);
    for (Eigen::VectorXd* v : {&p.alpha, &p.beta, &p.gamma, &p.delta})
      for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = normal(rng);
  }
  return p;
}

// Keeps the light stage valid after an unconstrained step.
inline void project_coarse(Eigen::VectorXd& v) {
  namespace L = coarse_layout;
  for (int j = 0; j < 20; ++j) {
    v[L::intensities + j] = std::max(0.0, v[L::intensities + j]);
    v[L::shininess + j] = std::max(1.0, v[L::shininess + j]);
    auto d = v.segment<3>(L::directions + 3 * j);
    const double len = d.norm();
    if (len > 1e-12) d /= len;
  }
}

// Direct first-order minimization of the coarse objective from a neutral
// start. Returns the best parameters seen and the per-iteration trace.
inline CoarseFitResult fit_coarse(const CoarseEvaluator& eval, const TextureMap& target, const UvMask& mask,
                                  const std::vector<Vec2>* landmarks, const CoarseFitConfig& cfg,
                                  std::optional<CoarseParams> init = std::nullopt) {
  namespace L = coarse_layout;
  if (cfg.max_iterations < 0) throw ParameterError("fit_coarse: negative iteration count");
  if (!(cfg.lr > 0.0)) throw ParameterError("fit_coarse: learning rate must be positive");
  CoarseLossWeights weights = cfg.weights;
  weights.validate();
  if (!cfg.skin_tone) weights.skin = 0.0;
  if (!landmarks) weights.lan = 0.0;

  const CoarseParams start = init ? *init : initial_coarse_params(cfg);
  if (!cfg.skin_tone && init) {
    // Frozen skin tone means identity gain and zero bias.
    for (int c = 0; c < 3; ++c)
      if (start.gain[c] != 1.0 || start.bias[c] != 0.0)
        throw ParameterError("fit_coarse: skin tone disabled but init has non-identity gain/bias");
  }
  std::vector<unsigned char> frozen(L::size, 0);
  if (!cfg.skin_tone)
    for (int c = 0; c < 3; ++c) frozen[L::gain + c] = frozen[L::bias + c] = 1;
  // Without landmarks the translation has no effect on the UV-space loss.
  if (!landmarks)
    for (int c = 0; c < 3; ++c) frozen[L::translation + c] = 1;

  Eigen::VectorXd x = pack(start);
  Eigen::VectorXd best_x = x;
  CoarseLossTerms best;
  best.total = std::numeric_limits<double>::infinity();
  double lr = cfg.lr;
  AdamState adam(static_cast<std::size_t>(L::size));
  adam.epsilon = cfg.adam_epsilon;
  CoarseFitResult result;
  Eigen::VectorXd g;

  for (int it = 0; it <= cfg.max_iterations; ++it) {
    const CoarseParams cur = unpack(x, start);
    const bool last = it == cfg.max_iterations;
    const CoarseLossTerms terms = eval.evaluate(cur, target, mask, landmarks, weights, last ? nullptr : &g);
    if (!std::isfinite(terms.total) || (!last && !g.allFinite())) {
      if (result.lr_halvings > 0)
        throw DivergenceError("fit_coarse: loss diverged at iteration " + std::to_string(it), it);
      ++result.lr_halvings;
      lr *= 0.5;
      x = best_x;
      adam = AdamState(static_cast<std::size_t>(L::size));
      adam.epsilon = cfg.adam_epsilon;
      continue;
    }
    if (terms.total < best.total) {
      best = terms;
      best_x = x;
    }
    result.trace.push_back({it, terms, best});
    if (last) break;
    adam_step(adam, std::span<double>(x.data(), static_cast<std::size_t>(x.size())),
              std::span<const double>(g.data(), static_cast<std::size_t>(g.size())), lr, frozen);
    project_coarse(x);
  }
  result.params = unpack(best_x, start);
  return result;
}

// CSV "iter,total,photo,lan,skin,reg" of the best-so-far terms.
inline void write_coarse_trace(const std::vector<CoarseTraceRow>& trace, std::ostream& out) {
  out << "iter,total,photo,lan,skin,reg\n";
  out.precision(17);
  for (const auto& r : trace)
    out << r.iter << ',' << r.best.total << ',' << r.best.photo << ',' << r.best.lan << ',' << r.best.skin << ','
        << r.best.reg << '\n';
}

}  // namespace facelayers
