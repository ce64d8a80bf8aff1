#pragma once

#include <optional>
#include <vector>

#include "facelayers/coarse_fit.hpp"
#include "facelayers/config.hpp"
#include "facelayers/face_model.hpp"
#include "facelayers/filter.hpp"
#include "facelayers/makeup.hpp"
#include "facelayers/refine.hpp"
#include "facelayers/texture.hpp"

namespace facelayers {

struct PipelineInputs {
  const LinearFaceModel* model = nullptr;
  TextureMap texture;  // unwrapped observation at the refinement resolution
  UvMask mask;         // its visibility
  std::optional<std::vector<Vec2>> landmarks;
};

struct PipelineOutputs {
  CoarseParams coarse_params;
  std::vector<CoarseTraceRow> coarse_trace;
  CoarseRender coarse;
  TextureMap completed;
  RefinePriors priors;
  RefinedMaterials refined;
  std::vector<RefineTraceRow> refine_trace;
  TextureMap bare_prior;
  MakeupLayers layers;
};

// Resamples a coarse map to (w, h) after filling it outside `coverage`.
inline TextureMap lift_coarse(const TextureMap& map, const UvMask& coverage, int w, int h, const FillOptions& fill) {
  return resize_bilinear(diffuse_fill(map, coverage, fill), w, h);
}

inline UvMask resize_mask(const UvMask& m, int w, int h) {
  if (m.width() == w && m.height() == h) return m;
  TextureMap t = resize_bilinear(TextureMap(m.width(), m.height(), 1, m.weights()), w, h);
  t.clamp(0.0, 1.0);
  return UvMask(w, h, t.data());
}

// Initial refined materials taken from the priors.
inline RefinedMaterials materials_from_priors(const RefinePriors& p) {
  RefinedMaterials m{p.diffuse, p.normals, p.specular, p.sh};
  project_materials(m);
  return m;
}

// Coarse fit, hole completion, refinement and makeup extraction in sequence.
// Disabled stages pass their input through: no coarse fit keeps the initial
// parameters, no refinement keeps the priors, no extraction leaves
// alpha = 1 over the refined albedo.
inline PipelineOutputs run_pipeline(const PipelineInputs& in, const PipelineConfig& cfg) {
  cfg.validate();
  if (!in.model) throw ParameterError("run_pipeline: no model");
  const LinearFaceModel& model = *in.model;
  if (in.texture.channels() != 3) throw ShapeError("run_pipeline: texture must have 3 channels");
  if (!in.mask.matches(in.texture)) throw ShapeError("run_pipeline: mask size mismatch");
  const int W = in.texture.width(), H = in.texture.height();
  const int mw = model.texture_width(), mh = model.texture_height();
  PipelineOutputs out;

  out.completed = cfg.stages.complete ? diffuse_fill(in.texture, in.mask, cfg.complete) : in.texture;

  const CoarseEvaluator eval(model);
  if (cfg.stages.coarse) {
    const TextureMap target = resize_bilinear(out.completed, mw, mh);
    const UvMask mask = resize_mask(in.mask, mw, mh);
    const std::vector<Vec2>* lm = in.landmarks ? &*in.landmarks : nullptr;
    CoarseFitResult fit = fit_coarse(eval, target, mask, lm, cfg.coarse);
    out.coarse_params = std::move(fit.params);
    out.coarse_trace = std::move(fit.trace);
  } else {
    out.coarse_params = initial_coarse_params(cfg.coarse);
  }
  out.coarse = eval.render(out.coarse_params);

  const UvMask& cov = eval.coverage();
  out.priors.diffuse = lift_coarse(out.coarse.diffuse_albedo, cov, W, H, cfg.complete);
  out.priors.normals = lift_coarse(out.coarse.normals, cov, W, H, cfg.complete);
  renormalize_normals(out.priors.normals);
  out.priors.specular = lift_coarse(gray(out.coarse.specular_recon), cov, W, H, cfg.complete);
  out.priors.sh = out.coarse_params.sh;

  const RefinedMaterials init = materials_from_priors(out.priors);
  if (cfg.stages.refine) {
    RefineResult r = refine(init, out.completed, out.priors, cfg.refine);
    out.refined = std::move(r.materials);
    out.refine_trace = std::move(r.trace);
  } else {
    out.refined = init;
  }

  if (cfg.stages.extract) {
    out.bare_prior = albedo_prior(model, out.refined.diffuse, in.mask, cfg.albedo_prior);
    out.layers = extract_makeup(out.refined.diffuse, out.bare_prior, cfg.extract).layers;
  } else {
    out.bare_prior = out.refined.diffuse;
    out.layers = {out.refined.diffuse, out.refined.diffuse, TextureMap(W, H, 1, 1.0)};
  }
  return out;
}

}  // namespace facelayers
