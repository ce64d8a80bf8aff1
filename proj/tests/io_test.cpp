#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "facelayers/asset_io.hpp"
#include "facelayers/config.hpp"
#include "facelayers/model_io.hpp"

using namespace facelayers;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("facelayers_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

// Values representable in float32 so PFM round-trips compare exactly.
TextureMap float_map(int w, int h, int ch, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(lo, hi);
  TextureMap t(w, h, ch);
  for (auto& v : t.data()) v = static_cast<float>(U(rng));
  return t;
}

}  // namespace

TEST(ModelFile, RoundTripIsExact) {
  TempDir dir;
  const LinearFaceModel m = synthetic_model(7, 150, 16);
  save_model(m, dir / "m.flm");
  const LinearFaceModel r = load_model(dir / "m.flm");
  EXPECT_EQ(r.mean_geometry, m.mean_geometry);
  EXPECT_EQ(r.basis_id, m.basis_id);
  EXPECT_EQ(r.basis_ex, m.basis_ex);
  EXPECT_EQ(r.mean_diffuse.data(), m.mean_diffuse.data());
  EXPECT_EQ(r.mean_specular.data(), m.mean_specular.data());
  EXPECT_EQ(r.basis_diffuse, m.basis_diffuse);
  EXPECT_EQ(r.basis_specular, m.basis_specular);
  EXPECT_EQ(r.topology, m.topology);
  EXPECT_EQ(r.landmark_indices, m.landmark_indices);
  ASSERT_EQ(r.uv_coords.size(), m.uv_coords.size());
  for (std::size_t i = 0; i < m.uv_coords.size(); ++i) EXPECT_EQ(r.uv_coords[i], m.uv_coords[i]);

  const auto manifest = read_json(dir / "m.flm.json");
  EXPECT_EQ(manifest.at("format"), "FLM1");
  EXPECT_EQ(manifest.at("vertices"), m.vertex_count());
  EXPECT_EQ(manifest.at("texture").at("width"), 16);
}

TEST(ModelFile, RejectsCorruptFiles) {
  TempDir dir;
  save_model(synthetic_model(7, 150, 16), dir / "m.flm");
  EXPECT_THROW(load_model(dir / "missing.flm"), IoError);
  const auto size = fs::file_size(dir / "m.flm");
  fs::copy_file(dir / "m.flm", dir / "short.flm");
  fs::resize_file(dir / "short.flm", size / 2);
  EXPECT_THROW(load_model(dir / "short.flm"), IoError);
  write_text(dir / "magic.flm", "MKP1\0\0\0\0");
  EXPECT_THROW(load_model(dir / "magic.flm"), IoError);
}

TEST(Landmarks, CsvRoundTripAndOrdering) {
  TempDir dir;
  const std::vector<Vec2> pts{{0.1, 0.2}, {-3.5, 1e-9}, {1.0 / 3.0, 2.0 / 3.0}};
  write_landmarks_csv(pts, dir / "l.csv");
  const auto r = read_landmarks_csv(dir / "l.csv");
  ASSERT_EQ(r.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r[i], pts[i]);

  write_text(dir / "shuffled.csv", "2,5,6\n0,1,2\n\n1,3,4\n");
  const auto s = read_landmarks_csv(dir / "shuffled.csv");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[1], Vec2(3, 4));
}

TEST(Landmarks, CsvErrors) {
  TempDir dir;
  write_text(dir / "gap.csv", "index,x,y\n0,1,2\n2,3,4\n");
  EXPECT_THROW(read_landmarks_csv(dir / "gap.csv"), IoError);
  write_text(dir / "bad.csv", "0,1\n");
  EXPECT_THROW(read_landmarks_csv(dir / "bad.csv"), IoError);
  EXPECT_THROW(read_landmarks_csv(dir / "none.csv"), IoError);
}

TEST(Landmarks, JsonPairs) {
  const auto j = landmarks_to_json({{1.5, -2.0}, {0.0, 3.0}});
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0][0], 1.5);
  EXPECT_EQ(j[1][1], 3.0);
}

TEST(CoarseParamsJson, RoundTripIsExact) {
  CoarseParams p;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0, 1);
  for (auto* v : {&p.alpha, &p.beta, &p.gamma, &p.delta})
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = N(rng);
  p.gain = {1.1, 0.9, 1.05};
  p.bias = {0.01, -0.02, 0.0};
  p.rotation = Vec3(0.1, -0.2, 0.05);
  p.translation = Vec3(0.3, 0.0, -1.0);
  for (auto& v : p.sh.values) v = N(rng);
  p.stage.intensities[4] = 0.3;
  p.stage.shininess[7] = 17.0;

  const CoarseParams r = coarse_params_from_json(coarse_params_to_json(p));
  EXPECT_EQ(r.alpha, p.alpha);
  EXPECT_EQ(r.beta, p.beta);
  EXPECT_EQ(r.gamma, p.gamma);
  EXPECT_EQ(r.delta, p.delta);
  EXPECT_EQ(r.gain, p.gain);
  EXPECT_EQ(r.bias, p.bias);
  EXPECT_EQ(r.rotation, p.rotation);
  EXPECT_EQ(r.translation, p.translation);
  EXPECT_EQ(r.sh.values, p.sh.values);
  EXPECT_EQ(r.stage.intensities, p.stage.intensities);
  EXPECT_EQ(r.stage.shininess, p.stage.shininess);
  EXPECT_EQ(r.stage.directions, p.stage.directions);
  EXPECT_EQ(r.stage.view_direction, p.stage.view_direction);
}

TEST(CoarseParamsJson, RejectsMalformedInput) {
  auto j = coarse_params_to_json(CoarseParams{});
  j["alpha"] = {1.0, 2.0};
  EXPECT_THROW(coarse_params_from_json(j), Error);
  j = coarse_params_to_json(CoarseParams{});
  j.erase("sh");
  EXPECT_THROW(coarse_params_from_json(j), Error);
  j = coarse_params_to_json(CoarseParams{});
  j["light_stage"]["intensities"][0] = -1.0;
  EXPECT_THROW(coarse_params_from_json(j), Error);
}

TEST(Materials, DirectoryRoundTrip) {
  TempDir dir;
  RefinedMaterials m{float_map(9, 7, 3, 1), float_map(9, 7, 3, 2, -1.0, 1.0), float_map(9, 7, 1, 3),
                     ShCoefficients::ambient(0.7)};
  m.sh(2, 5) = -0.125;
  save_materials(m, dir / "mat");
  for (const char* f : {"diffuse.pfm", "normals.pfm", "specular.pfm", "sh.json"})
    EXPECT_TRUE(fs::exists(dir / ("mat/" + std::string(f)))) << f;
  const RefinedMaterials r = load_materials(dir / "mat");
  EXPECT_EQ(r.diffuse.data(), m.diffuse.data());
  EXPECT_EQ(r.normals.data(), m.normals.data());
  EXPECT_EQ(r.specular.data(), m.specular.data());
  EXPECT_EQ(r.sh.values, m.sh.values);
  EXPECT_THROW(load_materials(dir / "nothing"), IoError);
}

TEST(Layers, DirectoryRoundTripQuantizesAlphaOnly) {
  TempDir dir;
  const MakeupLayers l{float_map(8, 8, 3, 4), float_map(8, 8, 3, 5), float_map(8, 8, 1, 6)};
  save_layers(l, dir / "layers");
  const MakeupLayers r = load_layers(dir / "layers");
  EXPECT_EQ(r.bare.data(), l.bare.data());
  EXPECT_EQ(r.makeup.data(), l.makeup.data());
  for (std::size_t i = 0; i < l.alpha.size(); ++i) EXPECT_NEAR(r.alpha.data()[i], l.alpha.data()[i], 0.5 / 255.0 + 1e-12);
}

TEST(Regions, DirectoryRoundTrip) {
  TempDir dir;
  const int n = 12;
  FaceRegions reg{UvMask(n, n, 0.0), UvMask(n, n, 0.0), UvMask(n, n, 0.0), UvMask(n, n, 0.0)};
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) (y < 3 ? reg.brows : y < 6 ? reg.eyes : y < 9 ? reg.lips : reg.skin).at(x, y) = 1.0;
  save_regions(reg, dir / "regions");
  const FaceRegions r = load_regions(dir / "regions");
  EXPECT_EQ(r.brows.weights(), reg.brows.weights());
  EXPECT_EQ(r.eyes.weights(), reg.eyes.weights());
  EXPECT_EQ(r.lips.weights(), reg.lips.weights());
  EXPECT_EQ(r.skin.weights(), reg.skin.weights());
}

TEST(Config, DefaultsRoundTrip) {
  const PipelineConfig def;
  const nlohmann::json j = config_to_json(def);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
  EXPECT_EQ(j.at("refine").at("iterations"), 500);
  EXPECT_EQ(j.at("refine").at("blur_kernel"), 11);
  EXPECT_EQ(j.at("refine").at("weights").at("recons"), 40.0);
  EXPECT_EQ(j.at("extract").at("iterations"), 800);
  EXPECT_NO_THROW(def.validate());
}

TEST(Config, PartialObjectsKeepDefaults) {
  const PipelineConfig c = config_from_json({{"refine", {{"lr", 0.5}}}, {"sigma", 0.25}});
  EXPECT_EQ(c.refine.lr, 0.5);
  EXPECT_EQ(c.refine.iterations, 500);
  EXPECT_EQ(c.sigma, 0.25);
  EXPECT_EQ(c.coarse.weights.photo, PipelineConfig{}.coarse.weights.photo);
}

TEST(Config, RejectsUnknownKeysAndWrongTypes) {
  EXPECT_THROW(config_from_json({{"refin", {}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"refine", {{"iters", 3}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"refine", {{"iterations", "many"}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"stages", {{"refine", 1}}}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), ConfigError);
}

TEST(Config, ValidationRejectsOutOfRangeValues) {
  auto bad = [](auto mutate) {
    PipelineConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](PipelineConfig& c) { c.coarse.weights.photo = -1.0; });
  bad([](PipelineConfig& c) { c.refine.weights.tv = -0.1; });
  bad([](PipelineConfig& c) { c.refine.blur_kernel = 10; });
  bad([](PipelineConfig& c) { c.refine.lr = 0.0; });
  bad([](PipelineConfig& c) { c.extract.iterations = -5; });
  bad([](PipelineConfig& c) { c.sigma = 1.5; });
  bad([](PipelineConfig& c) { c.pca.components = 0; });
}

TEST(Config, LoadFromFile) {
  TempDir dir;
  write_text(dir / "ok.json", R"({"coarse": {"iterations": 12}, "paths": {"out": "x"}})");
  const PipelineConfig c = load_config(dir / "ok.json");
  EXPECT_EQ(c.coarse.max_iterations, 12);
  EXPECT_EQ(c.paths.out, "x");
  write_text(dir / "broken.json", "{ not json");
  EXPECT_THROW(load_config(dir / "broken.json"), ConfigError);
  write_text(dir / "range.json", R"({"sigma": -1})");
  EXPECT_THROW(load_config(dir / "range.json"), ConfigError);
  EXPECT_THROW(load_config(dir / "absent.json"), IoError);
}

TEST(Json, ReadWriteErrors) {
  TempDir dir;
  write_json({{"a", 1}}, dir / "a.json");
  EXPECT_EQ(read_json(dir / "a.json").at("a"), 1);
  write_text(dir / "b.json", "[1,");
  EXPECT_THROW(read_json(dir / "b.json"), IoError);
  EXPECT_THROW(read_json(dir / "c.json"), IoError);
  EXPECT_THROW(sh_from_json(nlohmann::json::array({1, 2, 3})), Error);
}
