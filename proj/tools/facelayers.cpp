// facelayers: command-line driver for coarse fitting, texture completion,
// material refinement and makeup layer editing.
//
// Exit codes: 0 ok, 1 I/O, 2 invalid configuration or arguments,
// 3 optimization diverged.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "facelayers/facelayers.hpp"

namespace fs = std::filesystem;
using namespace facelayers;

namespace {

enum ExitCode { kOk = 0, kIo = 1, kConfig = 2, kDiverged = 3, kInternal = 4 };

// Options shared by every subcommand.
struct Common {
  std::string config_path;
  bool dump = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config; missing keys keep their defaults");
    cmd->add_flag("--dump-config", dump, "print the effective config as JSON and exit");
  }

  PipelineConfig load() const {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    cfg.validate();
    return cfg;
  }
};

// A flag value, or the config's path entry when the flag was not given.
std::string pick(const std::string& flag, const std::string& fallback, const char* name) {
  const std::string& v = flag.empty() ? fallback : flag;
  if (v.empty()) throw ConfigError(std::string("missing required path: --") + name);
  return v;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

UvMask load_mask_for(const std::string& path, const TextureMap& tex) {
  UvMask m = read_mask(path);
  if (!m.matches(tex)) throw ShapeError("mask resolution does not match the texture: " + path);
  return m;
}

void save_coarse_outputs(const CoarseParams& params, const std::vector<CoarseTraceRow>& trace, const fs::path& out) {
  ensure_parent(out);
  write_json(coarse_params_to_json(params), out);
  std::ofstream t(fs::path(out).replace_extension(".trace.csv"));
  if (!t) throw IoError("cannot write trace next to " + out.string());
  write_coarse_trace(trace, t);
}

void save_refine_outputs(const RefinedMaterials& m, const std::vector<RefineTraceRow>& trace, const fs::path& dir) {
  save_materials(m, dir);
  std::ofstream t(dir / "trace.csv");
  if (!t) throw IoError("cannot write trace in " + dir.string());
  write_refine_trace(trace, t);
}

// Panel set: bare, bare + makeup, times diffuse shading, plus specular.
void render_panels(const RefinedMaterials& mat, const MakeupLayers& layers, const TextureMap& bare,
                   const fs::path& dir) {
  fs::create_directories(dir);
  const TextureMap albedo = transfer(bare, layers);
  const TextureMap shading = diffuse_shading(mat.normals, mat.sh);
  const TextureMap no_spec(mat.specular.width(), mat.specular.height(), 1);
  write_png(bare, dir / "bare.png");
  write_png(albedo, dir / "bare_makeup.png");
  write_png(compose_reconstruction(albedo, shading, no_spec), dir / "shaded.png");
  write_png(compose_reconstruction(albedo, shading, mat.specular), dir / "final.png");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facelayers: layered face texture decomposition and makeup editing"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // fit-coarse
  Common c_fit;
  std::string fit_model, fit_target, fit_mask, fit_landmarks, fit_out;
  bool fit_no_skin = false;
  auto* fit = app.add_subcommand("fit-coarse", "fit shape, albedo, pose and lighting to an unwrapped texture");
  c_fit.attach(fit);
  fit->add_option("--model", fit_model, "FLM1 face model");
  fit->add_option("--target", fit_target, "unwrapped texture (.pfm/.png) at the model's texture resolution");
  fit->add_option("--mask", fit_mask, "visibility mask PNG");
  fit->add_option("--landmarks", fit_landmarks, "detected landmarks CSV (index,x,y)");
  fit->add_option("--out", fit_out, "output params JSON; the trace goes to <out>.trace.csv");
  fit->add_flag("--no-skin-tone", fit_no_skin, "freeze skin-tone gain/bias and drop the skin loss");

  // complete
  Common c_cmp;
  std::string cmp_texture, cmp_mask, cmp_out;
  auto* cmp = app.add_subcommand("complete", "fill texture regions outside the mask");
  c_cmp.attach(cmp);
  cmp->add_option("--texture", cmp_texture, "unwrapped texture");
  cmp->add_option("--mask", cmp_mask, "visibility mask PNG");
  cmp->add_option("--out", cmp_out, "completed texture");

  // refine
  Common c_ref;
  std::string ref_model, ref_params, ref_target, ref_out;
  auto* ref = app.add_subcommand("refine", "refine per-pixel materials against a completed texture");
  c_ref.attach(ref);
  ref->add_option("--model", ref_model, "FLM1 face model");
  ref->add_option("--params", ref_params, "coarse params JSON from fit-coarse");
  ref->add_option("--target", ref_target, "completed texture");
  ref->add_option("--out-dir", ref_out, "directory for diffuse/normals/specular PFMs, sh.json and trace.csv");

  // extract
  Common c_ext;
  std::string ext_albedo, ext_prior, ext_model, ext_mask, ext_out;
  auto* ext = app.add_subcommand("extract", "split a diffuse albedo into bare skin, makeup and alpha");
  c_ext.attach(ext);
  ext->add_option("--albedo", ext_albedo, "refined diffuse albedo");
  ext->add_option("--prior", ext_prior, "bare-skin prior texture (else fitted from --model)");
  ext->add_option("--model", ext_model, "FLM1 model used to fit the bare-skin prior");
  ext->add_option("--mask", ext_mask, "mask for the prior fit (default: all valid)");
  ext->add_option("--out-dir", ext_out, "directory for bare.pfm, makeup.pfm, alpha.png, preview.png");

  // transfer
  Common c_tr;
  std::string tr_bare, tr_layers, tr_out;
  auto* tr = app.add_subcommand("transfer", "put source makeup layers on another bare skin");
  c_tr.attach(tr);
  tr->add_option("--bare", tr_bare, "target bare skin texture");
  tr->add_option("--layers", tr_layers, "source layer directory");
  tr->add_option("--out", tr_out, "output albedo");

  // interpolate
  Common c_in;
  std::string in_layers, in_out, in_alpha_out;
  std::optional<double> in_sigma;
  auto* in = app.add_subcommand("interpolate", "fade makeup: sigma 0 keeps it, 1 removes it");
  c_in.attach(in);
  in->add_option("--layers", in_layers, "layer directory");
  in->add_option("--sigma", in_sigma, "shift in [0,1] (default from config)");
  in->add_option("--out", in_out, "output albedo");
  in->add_option("--alpha-out", in_alpha_out, "optional shifted alpha PNG");

  // build-pca
  Common c_bp;
  std::vector<std::string> bp_layers;
  std::optional<int> bp_k;
  std::string bp_out;
  auto* bp = app.add_subcommand("build-pca", "build a statistical makeup model from layer directories");
  c_bp.attach(bp);
  bp->add_option("--layers", bp_layers, "layer directories (two or more)");
  bp->add_option("--components", bp_k, "number of components (default from config)");
  bp->add_option("--out", bp_out, "MKP1 output");

  // sample-pca
  Common c_sp;
  std::string sp_model, sp_out, sp_albedo;
  std::optional<std::uint64_t> sp_seed;
  std::optional<double> sp_scale;
  auto* sp = app.add_subcommand("sample-pca", "draw a makeup texture from a statistical model");
  c_sp.attach(sp);
  sp->add_option("--model", sp_model, "MKP1 model");
  sp->add_option("--seed", sp_seed, "sampling seed (default from config)");
  sp->add_option("--scale", sp_scale, "standard-deviation scale (default from config)");
  sp->add_option("--albedo", sp_albedo, "optional albedo to extend additively");
  sp->add_option("--out", sp_out, "output texture");

  // render
  Common c_rn;
  std::string rn_materials, rn_layers, rn_bare, rn_out;
  std::optional<double> rn_sigma;
  auto* rn = app.add_subcommand("render", "render the panel set from materials and makeup layers");
  c_rn.attach(rn);
  rn->add_option("--materials", rn_materials, "material directory from refine");
  rn->add_option("--layers", rn_layers, "layer directory");
  rn->add_option("--bare", rn_bare, "bare skin to composite over (default: the layers' own)");
  rn->add_option("--sigma", rn_sigma, "alpha shift applied before rendering");
  rn->add_option("--out-dir", rn_out, "output directory");

  // make-model
  Common c_mm;
  std::uint64_t mm_seed = 1;
  int mm_vertices = 600, mm_res = 64;
  std::string mm_out;
  auto* mm = app.add_subcommand("make-model", "write the synthetic face model");
  c_mm.attach(mm);
  mm->add_option("--seed", mm_seed, "generator seed");
  mm->add_option("--vertices", mm_vertices, "minimum icosphere vertex count");
  mm->add_option("--resolution", mm_res, "texture resolution");
  mm->add_option("--out", mm_out, "FLM1 output");

  // synth-scene
  Common c_ss;
  std::uint64_t ss_seed = 1;
  int ss_res = 128, ss_coarse = 64;
  std::string ss_out;
  auto* ss = app.add_subcommand("synth-scene", "write the bundled synthetic scene with ground truth");
  c_ss.attach(ss);
  ss->add_option("--seed", ss_seed, "scene seed");
  ss->add_option("--resolution", ss_res, "refinement resolution");
  ss->add_option("--coarse-resolution", ss_coarse, "model texture resolution");
  ss->add_option("--out-dir", ss_out, "output directory");

  // pipeline
  Common c_pl;
  std::string pl_model, pl_texture, pl_mask, pl_landmarks, pl_out;
  auto* pl = app.add_subcommand("pipeline", "coarse fit, completion, refinement and extraction in one run");
  c_pl.attach(pl);
  pl->add_option("--model", pl_model, "FLM1 face model");
  pl->add_option("--texture", pl_texture, "unwrapped texture at the refinement resolution");
  pl->add_option("--mask", pl_mask, "visibility mask PNG");
  pl->add_option("--landmarks", pl_landmarks, "detected landmarks CSV");
  pl->add_option("--out-dir", pl_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  const std::vector<std::pair<CLI::App*, Common*>> commons = {
      {fit, &c_fit}, {cmp, &c_cmp}, {ref, &c_ref}, {ext, &c_ext}, {tr, &c_tr}, {in, &c_in},
      {bp, &c_bp},   {sp, &c_sp},   {rn, &c_rn},   {mm, &c_mm},   {ss, &c_ss}, {pl, &c_pl}};

  try {
    CLI::App* cmd = app.get_subcommands().front();
    Common* common = nullptr;
    for (const auto& [c, co] : commons)
      if (c == cmd) common = co;
    PipelineConfig cfg = common->load();
    if (common->dump) {
      std::cout << config_to_json(cfg).dump(2) << '\n';
      return kOk;
    }

    if (cmd == fit) {
      const LinearFaceModel model = load_model(pick(fit_model, cfg.paths.model, "model"));
      const TextureMap target = read_texture(pick(fit_target, cfg.paths.target, "target"));
      const UvMask mask = load_mask_for(pick(fit_mask, cfg.paths.mask, "mask"), target);
      const std::string lm_path = fit_landmarks.empty() ? cfg.paths.landmarks : fit_landmarks;
      std::optional<std::vector<Vec2>> lm;
      if (!lm_path.empty()) lm = read_landmarks_csv(lm_path);
      if (fit_no_skin) cfg.coarse.skin_tone = false;
      const CoarseEvaluator eval(model);
      const CoarseFitResult r = fit_coarse(eval, target, mask, lm ? &*lm : nullptr, cfg.coarse);
      save_coarse_outputs(r.params, r.trace, pick(fit_out, cfg.paths.out, "out"));
      const auto& last = r.trace.back().best;
      std::printf("fit-coarse: total %.6g photo %.6g lan %.6g skin %.6g reg %.6g\n", last.total, last.photo,
                  last.lan, last.skin, last.reg);
    } else if (cmd == cmp) {
      const fs::path tex_path = pick(cmp_texture, cfg.paths.target, "texture");
      const fs::path out = pick(cmp_out, cfg.paths.out, "out");
      const TextureMap tex = read_texture(tex_path);
      const UvMask mask = load_mask_for(pick(cmp_mask, cfg.paths.mask, "mask"), tex);
      ensure_parent(out);
      if (std::all_of(mask.weights().begin(), mask.weights().end(), [](double w) { return w >= 1.0; }) && lower_extension(tex_path) == lower_extension(out)) {
        fs::copy_file(tex_path, out, fs::copy_options::overwrite_existing);
      } else {
        write_texture(diffuse_fill(tex, mask, cfg.complete), out);
      }
    } else if (cmd == ref) {
      const LinearFaceModel model = load_model(pick(ref_model, cfg.paths.model, "model"));
      const CoarseParams params = coarse_params_from_json(read_json(ref_params));
      const TextureMap target = read_texture(pick(ref_target, cfg.paths.target, "target"));
      const CoarseEvaluator eval(model);
      const CoarseRender cr = eval.render(params);
      RefinePriors priors;
      priors.diffuse = lift_coarse(cr.diffuse_albedo, eval.coverage(), target.width(), target.height(), cfg.complete);
      priors.normals = lift_coarse(cr.normals, eval.coverage(), target.width(), target.height(), cfg.complete);
      renormalize_normals(priors.normals);
      priors.specular =
          lift_coarse(gray(cr.specular_recon), eval.coverage(), target.width(), target.height(), cfg.complete);
      priors.sh = params.sh;
      const RefineResult r = refine(materials_from_priors(priors), target, priors, cfg.refine);
      save_refine_outputs(r.materials, r.trace, pick(ref_out, cfg.paths.out, "out-dir"));
      if (!r.trace.empty()) std::printf("refine: total %.6g\n", r.trace.back().terms.total);
    } else if (cmd == ext) {
      const TextureMap albedo = read_texture(ext_albedo.empty() ? cfg.paths.target : ext_albedo);
      TextureMap prior;
      if (!ext_prior.empty()) {
        prior = read_texture(ext_prior);
      } else {
        const LinearFaceModel model = load_model(pick(ext_model, cfg.paths.model, "model"));
        const std::string mpath = ext_mask.empty() ? cfg.paths.mask : ext_mask;
        const UvMask mask = mpath.empty() ? UvMask(albedo.width(), albedo.height(), 1.0) : load_mask_for(mpath, albedo);
        prior = albedo_prior(model, albedo, mask, cfg.albedo_prior);
      }
      const ExtractionResult r = extract_makeup(albedo, prior, cfg.extract);
      const fs::path dir = pick(ext_out, cfg.paths.out, "out-dir");
      save_layers(r.layers, dir);
      write_png(alpha_blend(r.layers), dir / "preview.png");
      if (!r.trace.empty()) std::printf("extract: fit L1 %.6g\n", r.trace.back().fit);
    } else if (cmd == tr) {
      const TextureMap bare = read_texture(tr_bare);
      const MakeupLayers layers = load_layers(tr_layers);
      const fs::path out = pick(tr_out, cfg.paths.out, "out");
      ensure_parent(out);
      write_texture(transfer(bare, layers), out);
    } else if (cmd == in) {
      MakeupLayers layers = load_layers(in_layers);
      const double sigma = in_sigma ? *in_sigma : cfg.sigma;
      if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("--sigma must lie in [0, 1]");
      layers.alpha = interpolate_alpha(layers.alpha, sigma);
      const fs::path out = pick(in_out, cfg.paths.out, "out");
      ensure_parent(out);
      write_texture(alpha_blend(layers), out);
      if (!in_alpha_out.empty()) write_png(layers.alpha, in_alpha_out, PngEncoding::linear);
    } else if (cmd == bp) {
      if (bp_layers.size() < 2) throw ConfigError("build-pca needs at least two --layers directories");
      std::vector<TextureMap> samples;
      for (const auto& d : bp_layers) samples.push_back(load_layers(d).premultiplied());
      const int k = bp_k ? *bp_k : cfg.pca.components;
      if (k < 1 || k > static_cast<int>(samples.size()) - 1)
        throw ConfigError("--components must lie in [1, number of samples - 1]");
      const fs::path out = pick(bp_out, cfg.paths.out, "out");
      ensure_parent(out);
      save_makeup_model(build_pca(samples, k), out);
    } else if (cmd == sp) {
      const MakeupPcaModel model = load_makeup_model(sp_model);
      const double scale = sp_scale ? *sp_scale : cfg.pca.scale;
      if (!(scale >= 0.0)) throw ConfigError("--scale must be >= 0");
      TextureMap tex = sample_makeup(model, sp_seed ? *sp_seed : cfg.pca.seed, scale);
      if (!sp_albedo.empty()) tex = extended_albedo(read_texture(sp_albedo), tex);
      tex.clamp(0.0, 1.0);
      const fs::path out = pick(sp_out, cfg.paths.out, "out");
      ensure_parent(out);
      write_texture(tex, out);
    } else if (cmd == rn) {
      const RefinedMaterials mat = load_materials(rn_materials);
      MakeupLayers layers = load_layers(rn_layers);
      const double sigma = rn_sigma ? *rn_sigma : cfg.sigma;
      if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("--sigma must lie in [0, 1]");
      layers.alpha = interpolate_alpha(layers.alpha, sigma);
      const TextureMap bare = rn_bare.empty() ? layers.bare : read_texture(rn_bare);
      render_panels(mat, layers, bare, pick(rn_out, cfg.paths.out, "out-dir"));
    } else if (cmd == mm) {
      const fs::path out = pick(mm_out, cfg.paths.out, "out");
      ensure_parent(out);
      save_model(synthetic_model(mm_seed, mm_vertices, mm_res), out);
    } else if (cmd == ss) {
      const fs::path dir = pick(ss_out, cfg.paths.out, "out-dir");
      const SyntheticScene s = make_synthetic_scene(ss_seed, ss_res, ss_coarse);
      fs::create_directories(dir / "truth");
      save_model(s.model, dir / "model.flm");
      write_pfm(s.unwrapped, dir / "texture.pfm");
      write_mask(s.coverage, dir / "mask.png");
      write_pfm(s.coarse_target, dir / "coarse_texture.pfm");
      write_mask(s.coarse_coverage, dir / "coarse_mask.png");
      write_landmarks_csv(s.landmarks, dir / "landmarks.csv");
      save_regions(s.regions, dir / "regions");
      write_json(coarse_params_to_json(s.truth), dir / "truth" / "params.json");
      save_materials(s.materials, dir / "truth" / "materials");
      save_layers(s.makeup, dir / "truth" / "layers");
      write_pfm(s.reconstruction, dir / "truth" / "reconstruction.pfm");
    } else if (cmd == pl) {
      const LinearFaceModel model = load_model(pick(pl_model, cfg.paths.model, "model"));
      PipelineInputs inputs;
      inputs.model = &model;
      inputs.texture = read_texture(pick(pl_texture, cfg.paths.target, "texture"));
      inputs.mask = load_mask_for(pick(pl_mask, cfg.paths.mask, "mask"), inputs.texture);
      const std::string lm_path = pl_landmarks.empty() ? cfg.paths.landmarks : pl_landmarks;
      if (!lm_path.empty()) inputs.landmarks = read_landmarks_csv(lm_path);
      const PipelineOutputs o = run_pipeline(inputs, cfg);
      const fs::path dir = pick(pl_out, cfg.paths.out, "out-dir");
      fs::create_directories(dir);
      save_coarse_outputs(o.coarse_params, o.coarse_trace, dir / "coarse_params.json");
      write_pfm(o.completed, dir / "completed.pfm");
      save_refine_outputs(o.refined, o.refine_trace, dir / "materials");
      save_layers(o.layers, dir / "layers");
      render_panels(o.refined, o.layers, o.layers.bare, dir / "render");
      write_json(config_to_json(cfg), dir / "config.json");
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << " (step " << e.step() << ")\n";
    return kDiverged;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
