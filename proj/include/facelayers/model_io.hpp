#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "facelayers/binary_io.hpp"
#include "facelayers/face_model.hpp"

namespace facelayers {

// "FLM1" model container. Matrices are stored column-major with their
// logical (rows, cols); textures as (W*H) x 3 interleaved. A sidecar
// manifest <file>.json repeats the dimensions for tooling.
inline void save_model(const LinearFaceModel& model, const std::filesystem::path& path) {
  model.validate();
  using namespace binary;
  const auto nv = static_cast<std::uint64_t>(model.vertex_count());
  const auto px = static_cast<std::uint64_t>(model.mean_diffuse.pixels());
  std::vector<std::uint32_t> topo, lmk;
  for (const auto& t : model.topology)
    for (int i : t) topo.push_back(static_cast<std::uint32_t>(i));
  for (int i : model.landmark_indices) lmk.push_back(static_cast<std::uint32_t>(i));
  std::vector<double> uv;
  for (const auto& u : model.uv_coords) uv.insert(uv.end(), {u.x(), u.y()});

  std::vector<Chunk> chunks;
  chunks.push_back(u32_chunk("TDIM", 1, 2,
                             {static_cast<std::uint32_t>(model.texture_width()),
                              static_cast<std::uint32_t>(model.texture_height())}));
  chunks.push_back(f64_chunk("GMEA", nv, 3, model.mean_geometry.data()));
  chunks.push_back(f64_chunk("BID ", 3 * nv, kIdentityDims, model.basis_id.data()));
  chunks.push_back(f64_chunk("BEX ", 3 * nv, kExpressionDims, model.basis_ex.data()));
  chunks.push_back(f64_chunk("DMEA", px, 3, model.mean_diffuse.data().data()));
  chunks.push_back(f64_chunk("BDIF", 3 * px, kDiffuseDims, model.basis_diffuse.data()));
  chunks.push_back(f64_chunk("SMEA", px, 3, model.mean_specular.data().data()));
  chunks.push_back(f64_chunk("BSPE", 3 * px, kSpecularDims, model.basis_specular.data()));
  chunks.push_back(u32_chunk("TOPO", model.topology.size(), 3, std::move(topo)));
  chunks.push_back(f64_chunk("UVCO", nv, 2, uv.data()));
  chunks.push_back(u32_chunk("LMKS", model.landmark_indices.size(), 1, std::move(lmk)));
  write_container(path, "FLM1", chunks);

  nlohmann::json manifest = {
      {"format", "FLM1"},
      {"vertices", nv},
      {"triangles", model.topology.size()},
      {"landmarks", model.landmark_indices.size()},
      {"texture", {{"width", model.texture_width()}, {"height", model.texture_height()}, {"channels", 3}}},
      {"bases", {{"identity", kIdentityDims}, {"expression", kExpressionDims},
                 {"diffuse", kDiffuseDims}, {"specular", kSpecularDims}}}};
  std::ofstream(path.string() + ".json") << manifest.dump(2) << '\n';
}

inline LinearFaceModel load_model(const std::filesystem::path& path) {
  using namespace binary;
  const auto chunks = read_container(path, "FLM1");
  const auto& dims = find_chunk(chunks, "TDIM");
  if (dims.u32.size() != 2) throw IoError("bad TDIM chunk");
  const int w = static_cast<int>(dims.u32[0]), h = static_cast<int>(dims.u32[1]);

  auto matrix = [&](std::string_view tag) {
    const auto& c = find_chunk(chunks, tag);
    if (c.dtype != DType::f64) throw IoError("chunk has wrong dtype: " + std::string(tag));
    return Eigen::Map<const Eigen::MatrixXd>(c.f64.data(), static_cast<Eigen::Index>(c.rows),
                                             static_cast<Eigen::Index>(c.cols));
  };
  auto texture = [&](std::string_view tag) {
    const auto& c = find_chunk(chunks, tag);
    if (c.rows != static_cast<std::uint64_t>(w) * h || c.cols != 3)
      throw IoError("texture chunk has wrong dimensions: " + std::string(tag));
    return TextureMap(w, h, 3, c.f64);
  };

  LinearFaceModel m;
  const auto& gm = find_chunk(chunks, "GMEA");
  m.mean_geometry = Eigen::Map<const Eigen::VectorXd>(gm.f64.data(), static_cast<Eigen::Index>(gm.f64.size()));
  m.basis_id = matrix("BID ");
  m.basis_ex = matrix("BEX ");
  m.mean_diffuse = texture("DMEA");
  m.basis_diffuse = matrix("BDIF");
  m.mean_specular = texture("SMEA");
  m.basis_specular = matrix("BSPE");
  const auto& topo = find_chunk(chunks, "TOPO");
  for (std::size_t i = 0; i + 2 < topo.u32.size(); i += 3)
    m.topology.push_back({static_cast<int>(topo.u32[i]), static_cast<int>(topo.u32[i + 1]),
                          static_cast<int>(topo.u32[i + 2])});
  const auto& uv = find_chunk(chunks, "UVCO");
  for (std::size_t i = 0; i + 1 < uv.f64.size(); i += 2) m.uv_coords.emplace_back(uv.f64[i], uv.f64[i + 1]);
  for (auto v : find_chunk(chunks, "LMKS").u32) m.landmark_indices.push_back(static_cast<int>(v));
  m.validate();
  return m;
}

// Detected landmarks: CSV rows "index,x,y" (optional header line).
inline std::vector<Vec2> read_landmarks_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<std::pair<int, Vec2>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("index", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    int idx;
    double x, y;
    if (!(ss >> idx >> x >> y)) throw IoError("malformed landmark row in " + path.string());
    rows.emplace_back(idx, Vec2(x, y));
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<int>(i)) throw IoError("landmark indices must be 0..L-1: " + path.string());
    out.push_back(rows[i].second);
  }
  return out;
}

inline void write_landmarks_csv(const std::vector<Vec2>& pts, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "index,x,y\n";
  out.precision(17);
  for (std::size_t i = 0; i < pts.size(); ++i) out << i << ',' << pts[i].x() << ',' << pts[i].y() << '\n';
}

// Projected landmarks as a JSON array of [x, y] pairs.
inline nlohmann::json landmarks_to_json(const std::vector<Vec2>& pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : pts) arr.push_back({p.x(), p.y()});
  return arr;
}

}  // namespace facelayers
