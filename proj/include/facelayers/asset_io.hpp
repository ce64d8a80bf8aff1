#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "facelayers/error.hpp"
#include "facelayers/face_model.hpp"
#include "facelayers/image_io.hpp"
#include "facelayers/makeup.hpp"
#include "facelayers/refine.hpp"

namespace facelayers {

namespace fs = std::filesystem;

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json sh_to_json(const ShCoefficients& sh) {
  nlohmann::json rows = nlohmann::json::array();
  for (int c = 0; c < 3; ++c) {
    nlohmann::json r = nlohmann::json::array();
    for (int k = 0; k < 9; ++k) r.push_back(sh(c, k));
    rows.push_back(r);
  }
  return rows;
}

inline ShCoefficients sh_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("sh: expected 3 rows of 9 coefficients");
  ShCoefficients sh;
  for (int c = 0; c < 3; ++c) {
    const auto& r = j[static_cast<std::size_t>(c)];
    if (!r.is_array() || r.size() != 9) throw IoError("sh: expected 3 rows of 9 coefficients");
    for (int k = 0; k < 9; ++k) sh(c, k) = r[static_cast<std::size_t>(k)].get<double>();
  }
  return sh;
}

namespace detail {

inline nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vec_from_json(const nlohmann::json& j, Eigen::Index n, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != n) throw IoError(std::string("params: wrong length for ") + what);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
}

}  // namespace detail

inline nlohmann::json coarse_params_to_json(const CoarseParams& p) {
  nlohmann::json dirs = nlohmann::json::array();
  for (const auto& d : p.stage.directions) dirs.push_back({d.x(), d.y(), d.z()});
  return {{"alpha", detail::vec_to_json(p.alpha)},
          {"beta", detail::vec_to_json(p.beta)},
          {"gamma", detail::vec_to_json(p.gamma)},
          {"delta", detail::vec_to_json(p.delta)},
          {"gain", p.gain},
          {"bias", p.bias},
          {"rotation", {p.rotation.x(), p.rotation.y(), p.rotation.z()}},
          {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
          {"sh", sh_to_json(p.sh)},
          {"light_stage",
           {{"intensities", p.stage.intensities},
            {"directions", dirs},
            {"shininess", p.stage.shininess},
            {"view_direction", {p.stage.view_direction.x(), p.stage.view_direction.y(), p.stage.view_direction.z()}}}}};
}

inline CoarseParams coarse_params_from_json(const nlohmann::json& j) {
  try {
    CoarseParams p;
    p.alpha = detail::vec_from_json(j.at("alpha"), kIdentityDims, "alpha");
    p.beta = detail::vec_from_json(j.at("beta"), kExpressionDims, "beta");
    p.gamma = detail::vec_from_json(j.at("gamma"), kDiffuseDims, "gamma");
    p.delta = detail::vec_from_json(j.at("delta"), kSpecularDims, "delta");
    p.gain = j.at("gain").get<std::array<double, 3>>();
    p.bias = j.at("bias").get<std::array<double, 3>>();
    p.rotation = detail::vec_from_json(j.at("rotation"), 3, "rotation");
    p.translation = detail::vec_from_json(j.at("translation"), 3, "translation");
    p.sh = sh_from_json(j.at("sh"));
    const auto& st = j.at("light_stage");
    p.stage.intensities = st.at("intensities").get<std::array<double, 20>>();
    p.stage.shininess = st.at("shininess").get<std::array<double, 20>>();
    const auto& dirs = st.at("directions");
    if (!dirs.is_array() || dirs.size() != 20) throw IoError("params: expected 20 light directions");
    for (std::size_t i = 0; i < 20; ++i) p.stage.directions[i] = detail::vec_from_json(dirs[i], 3, "direction");
    p.stage.view_direction = detail::vec_from_json(st.at("view_direction"), 3, "view_direction");
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("params: ") + e.what());
  }
}

// Refined materials as diffuse.pfm, normals.pfm, specular.pfm and sh.json in `dir`.
inline void save_materials(const RefinedMaterials& m, const fs::path& dir) {
  fs::create_directories(dir);
  write_pfm(m.diffuse, dir / "diffuse.pfm");
  write_pfm(m.normals, dir / "normals.pfm");
  write_pfm(m.specular, dir / "specular.pfm");
  write_json({{"sh", sh_to_json(m.sh)}}, dir / "sh.json");
}

inline RefinedMaterials load_materials(const fs::path& dir) {
  RefinedMaterials m{read_pfm(dir / "diffuse.pfm"), read_pfm(dir / "normals.pfm"), read_pfm(dir / "specular.pfm"),
                     sh_from_json(read_json(dir / "sh.json").at("sh"))};
  m.validate();
  return m;
}

// Makeup layers as bare.pfm, makeup.pfm and an 8-bit alpha.png in `dir`.
inline void save_layers(const MakeupLayers& l, const fs::path& dir) {
  fs::create_directories(dir);
  write_pfm(l.bare, dir / "bare.pfm");
  write_pfm(l.makeup, dir / "makeup.pfm");
  write_png(l.alpha, dir / "alpha.png", PngEncoding::linear);
}

inline MakeupLayers load_layers(const fs::path& dir) {
  MakeupLayers l{read_pfm(dir / "bare.pfm"), read_pfm(dir / "makeup.pfm"), read_png(dir / "alpha.png", PngEncoding::linear)};
  l.bare.clamp(0.0, 1.0);
  l.makeup.clamp(0.0, 1.0);
  l.validate();
  return l;
}

// Region masks as brows.png, eyes.png, lips.png and skin.png in `dir`.
inline void save_regions(const FaceRegions& r, const fs::path& dir) {
  fs::create_directories(dir);
  write_mask(r.brows, dir / "brows.png");
  write_mask(r.eyes, dir / "eyes.png");
  write_mask(r.lips, dir / "lips.png");
  write_mask(r.skin, dir / "skin.png");
}

inline FaceRegions load_regions(const fs::path& dir) {
  FaceRegions r{read_mask(dir / "brows.png"), read_mask(dir / "eyes.png"), read_mask(dir / "lips.png"),
                read_mask(dir / "skin.png")};
  r.validate();
  return r;
}

}  // namespace facelayers
