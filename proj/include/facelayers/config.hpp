#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "facelayers/coarse_fit.hpp"
#include "facelayers/error.hpp"
#include "facelayers/filter.hpp"
#include "facelayers/makeup.hpp"
#include "facelayers/refine.hpp"

namespace facelayers {

struct StageToggles {
  bool coarse = true;
  bool complete = true;
  bool refine = true;
  bool extract = true;
};

struct PcaConfig {
  int components = 4;
  std::uint64_t seed = 0;
  double scale = 1.0;
};

struct PathConfig {
  std::string model;
  std::string target;
  std::string mask;
  std::string landmarks;
  std::string out;
};

// Everything a pipeline run depends on besides its input files.
struct PipelineConfig {
  StageToggles stages;
  CoarseFitConfig coarse;
  FillOptions complete;
  RefineConfig refine;
  AlbedoPriorConfig albedo_prior;
  ExtractionConfig extract;
  PcaConfig pca;
  double sigma = 0.0;
  PathConfig paths;

  void validate() const;
};

namespace detail {

// Reads the members of one JSON object, remembering which keys were used so
// that leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void field(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!it->is_number()) throw ConfigError("");
        if constexpr (std::is_integral_v<T>)
          if (!it->is_number_integer() && !it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  template <typename F>
  void object(const char* key, F&& read) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    ObjectReader sub(*it, where_ + "." + key);
    read(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

// One definition of the field list, used for both directions.
template <typename Config, typename Visitor>
void visit_config(Config& c, Visitor&& v) {
  v.object("stages", [&](auto& s) {
    s.field("coarse", c.stages.coarse);
    s.field("complete", c.stages.complete);
    s.field("refine", c.stages.refine);
    s.field("extract", c.stages.extract);
  });
  v.object("coarse", [&](auto& s) {
    s.field("iterations", c.coarse.max_iterations);
    s.field("lr", c.coarse.lr);
    s.field("adam_epsilon", c.coarse.adam_epsilon);
    s.field("seed", c.coarse.seed);
    s.field("init_noise", c.coarse.init_noise);
    s.field("skin_tone", c.coarse.skin_tone);
    s.object("weights", [&](auto& w) {
      auto& cw = c.coarse.weights;
      w.field("photo", cw.photo);
      w.field("lan", cw.lan);
      w.field("skin", cw.skin);
      w.field("reg", cw.reg);
      w.field("alpha", cw.alpha);
      w.field("beta", cw.beta);
      w.field("gamma", cw.gamma);
      w.field("delta", cw.delta);
      w.field("light", cw.light);
    });
  });
  v.object("complete", [&](auto& s) {
    s.field("max_iterations", c.complete.max_iterations);
    s.field("tolerance", c.complete.tolerance);
  });
  v.object("refine", [&](auto& s) {
    s.field("iterations", c.refine.iterations);
    s.field("lr", c.refine.lr);
    s.field("lr_decay", c.refine.lr_decay);
    s.field("decay_at", c.refine.decay_at);
    s.field("blur_kernel", c.refine.blur_kernel);
    s.object("weights", [&](auto& w) {
      auto& rw = c.refine.weights;
      w.field("recons", rw.recons);
      w.field("perceptual", rw.perceptual);
      w.field("tv", rw.tv);
      w.field("prior", rw.prior);
      w.field("prior_diffuse", rw.prior_diffuse);
      w.field("prior_normals", rw.prior_normals);
      w.field("prior_specular", rw.prior_specular);
      w.field("prior_sh", rw.prior_sh);
    });
  });
  v.object("albedo_prior", [&](auto& s) {
    s.field("iterations", c.albedo_prior.iterations);
    s.field("lr", c.albedo_prior.lr);
    s.field("gamma_weight", c.albedo_prior.gamma_weight);
  });
  v.object("extract", [&](auto& s) {
    s.field("iterations", c.extract.iterations);
    s.field("lr", c.extract.lr);
    s.object("weights", [&](auto& w) {
      auto& ew = c.extract.weights;
      w.field("fit", ew.fit);
      w.field("skin_prior", ew.skin_prior);
      w.field("tv_alpha", ew.tv_alpha);
      w.field("tv_makeup", ew.tv_makeup);
      w.field("alpha_sparse", ew.alpha_sparse);
    });
  });
  v.object("pca", [&](auto& s) {
    s.field("components", c.pca.components);
    s.field("seed", c.pca.seed);
    s.field("scale", c.pca.scale);
  });
  v.field("sigma", c.sigma);
  v.object("paths", [&](auto& s) {
    s.field("model", c.paths.model);
    s.field("target", c.paths.target);
    s.field("mask", c.paths.mask);
    s.field("landmarks", c.paths.landmarks);
    s.field("out", c.paths.out);
  });
}

class ObjectWriter {
 public:
  explicit ObjectWriter(nlohmann::json& j) : j_(j) { j_ = nlohmann::json::object(); }

  template <typename T>
  void field(const char* key, const T& v) {
    j_[key] = v;
  }

  template <typename F>
  void object(const char* key, F&& write) {
    ObjectWriter sub(j_[key]);
    write(sub);
  }

 private:
  nlohmann::json& j_;
};

}  // namespace detail

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  detail::ObjectWriter w(j);
  detail::visit_config(cfg, w);
  return j;
}

// Missing keys keep their defaults; unknown keys and wrong types throw ConfigError.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  detail::ObjectReader r(j, "config");
  detail::visit_config(cfg, r);
  r.finish();
  return cfg;
}

inline void PipelineConfig::validate() const {
  try {
    coarse.weights.validate();
    refine.weights.validate();
    extract.weights.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (coarse.max_iterations < 0 || refine.iterations < 0 || extract.iterations < 0 || albedo_prior.iterations < 0 ||
      complete.max_iterations < 0)
    throw ConfigError("iteration counts must be >= 0");
  if (!(coarse.lr > 0.0) || !(refine.lr > 0.0) || !(extract.lr > 0.0) || !(albedo_prior.lr > 0.0))
    throw ConfigError("learning rates must be > 0");
  if (!(refine.lr_decay > 0.0)) throw ConfigError("refine.lr_decay must be > 0");
  if (!(coarse.adam_epsilon >= 0.0) || !(coarse.init_noise >= 0.0))
    throw ConfigError("coarse.adam_epsilon and coarse.init_noise must be >= 0");
  if (refine.blur_kernel < 1 || refine.blur_kernel % 2 == 0) throw ConfigError("refine.blur_kernel must be odd");
  if (!(complete.tolerance >= 0.0)) throw ConfigError("complete.tolerance must be >= 0");
  if (pca.components < 1) throw ConfigError("pca.components must be >= 1");
  if (!(pca.scale >= 0.0)) throw ConfigError("pca.scale must be >= 0");
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("sigma must lie in [0, 1]");
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  PipelineConfig cfg = config_from_json(j);
  cfg.validate();
  return cfg;
}

}  // namespace facelayers
