#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "facelayers/error.hpp"
#include "facelayers/filter.hpp"
#include "facelayers/shading.hpp"
#include "facelayers/texture.hpp"

namespace facelayers {

using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Triangle = std::array<int, 3>;

// Basis widths of the linear face model.
inline constexpr int kIdentityDims = 200;
inline constexpr int kExpressionDims = 100;
inline constexpr int kDiffuseDims = 100;
inline constexpr int kSpecularDims = 100;

// Mean + PCA bases for geometry, diffuse albedo and specular albedo.
// Geometry vectors are vertex-major (x0, y0, z0, x1, ...); texture basis rows
// follow TextureMap's interleaved layout.
struct LinearFaceModel {
  Eigen::VectorXd mean_geometry;
  Eigen::MatrixXd basis_id;
  Eigen::MatrixXd basis_ex;
  TextureMap mean_diffuse;
  TextureMap mean_specular;
  Eigen::MatrixXd basis_diffuse;
  Eigen::MatrixXd basis_specular;
  std::vector<Triangle> topology;
  std::vector<Vec2> uv_coords;
  std::vector<int> landmark_indices;

  int vertex_count() const { return static_cast<int>(mean_geometry.size() / 3); }
  int texture_width() const { return mean_diffuse.width(); }
  int texture_height() const { return mean_diffuse.height(); }

  void validate() const {
    const auto v = static_cast<Eigen::Index>(mean_geometry.size());
    if (v == 0 || v % 3 != 0) throw ShapeError("mean geometry must be V x 3");
    if (basis_id.rows() != v || basis_id.cols() != kIdentityDims)
      throw ShapeError("identity basis must be 3V x 200");
    if (basis_ex.rows() != v || basis_ex.cols() != kExpressionDims)
      throw ShapeError("expression basis must be 3V x 100");
    if (mean_diffuse.channels() != 3 || !mean_specular.same_shape(mean_diffuse))
      throw ShapeError("mean albedo textures must be 3-channel and equally sized");
    const auto t = static_cast<Eigen::Index>(mean_diffuse.size());
    if (basis_diffuse.rows() != t || basis_diffuse.cols() != kDiffuseDims)
      throw ShapeError("diffuse basis must be (W*H*3) x 100");
    if (basis_specular.rows() != t || basis_specular.cols() != kSpecularDims)
      throw ShapeError("specular basis must be (W*H*3) x 100");
    if (uv_coords.size() != static_cast<std::size_t>(vertex_count()))
      throw ShapeError("uv coordinates must be per vertex");
    const int nv = vertex_count();
    for (const auto& tri : topology)
      for (int i : tri)
        if (i < 0 || i >= nv) throw ShapeError("triangle index out of range");
    for (int i : landmark_indices)
      if (i < 0 || i >= nv) throw ShapeError("landmark index out of range");
    if (!mean_geometry.allFinite() || !basis_id.allFinite() || !basis_ex.allFinite() ||
        !basis_diffuse.allFinite() || !basis_specular.allFinite() || !mean_diffuse.all_finite() ||
        !mean_specular.all_finite())
      throw ParameterError("face model contains non-finite values");
  }
};

// The full coarse parameter set: shape, albedo, skin tone, pose and lighting.
struct CoarseParams {
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(kIdentityDims);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(kExpressionDims);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(kDiffuseDims);
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(kSpecularDims);
  std::array<double, 3> gain{1.0, 1.0, 1.0};
  std::array<double, 3> bias{0.0, 0.0, 0.0};
  Vec3 rotation = Vec3::Zero();     // XYZ Euler angles, radians
  Vec3 translation = Vec3::Zero();  // model units
  ShCoefficients sh = ShCoefficients::ambient(0.8);
  VirtualLightStage stage = default_light_stage();

  void validate_shapes() const {
    if (alpha.size() != kIdentityDims || beta.size() != kExpressionDims ||
        gamma.size() != kDiffuseDims || delta.size() != kSpecularDims)
      throw ShapeError("coarse parameter block has the wrong length");
  }

  void validate() const {
    validate_shapes();
    auto finite = [](double v) { return std::isfinite(v); };
    if (!alpha.allFinite() || !beta.allFinite() || !gamma.allFinite() || !delta.allFinite() ||
        !std::all_of(gain.begin(), gain.end(), finite) ||
        !std::all_of(bias.begin(), bias.end(), finite) || !rotation.allFinite() ||
        !translation.allFinite() || !std::all_of(sh.values.begin(), sh.values.end(), finite))
      throw ParameterError("coarse parameters contain non-finite values");
    stage.validate();
  }
};

// ---------------------------------------------------------------------------
// Linear model evaluation

inline Eigen::VectorXd eval_geometry(const LinearFaceModel& model, const Eigen::VectorXd& alpha,
                                     const Eigen::VectorXd& beta) {
  if (alpha.size() != model.basis_id.cols() || beta.size() != model.basis_ex.cols())
    throw ShapeError("eval_geometry: coefficient length mismatch");
  return model.mean_geometry + model.basis_id * alpha + model.basis_ex * beta;
}

// Skin-tone adjusted diffuse albedo: (mean + B_d gamma) * gain + bias, per channel.
inline TextureMap eval_diffuse_albedo(const LinearFaceModel& model, const Eigen::VectorXd& gamma,
                                      const std::array<double, 3>& gain,
                                      const std::array<double, 3>& bias) {
  if (gamma.size() != model.basis_diffuse.cols())
    throw ShapeError("eval_diffuse_albedo: coefficient length mismatch");
  TextureMap out = model.mean_diffuse;
  Eigen::Map<Eigen::VectorXd> v(out.data().data(), static_cast<Eigen::Index>(out.size()));
  v += model.basis_diffuse * gamma;
  for (std::size_t p = 0; p < out.pixels(); ++p)
    for (int c = 0; c < 3; ++c) {
      double& d = out.data()[3 * p + c];
      d = d * gain[c] + bias[c];
    }
  return out;
}

inline TextureMap eval_specular_albedo(const LinearFaceModel& model, const Eigen::VectorXd& delta) {
  if (delta.size() != model.basis_specular.cols())
    throw ShapeError("eval_specular_albedo: coefficient length mismatch");
  TextureMap out = model.mean_specular;
  Eigen::Map<Eigen::VectorXd> v(out.data().data(), static_cast<Eigen::Index>(out.size()));
  v += model.basis_specular * delta;
  return out;
}

inline Vec3 vertex(const Eigen::VectorXd& positions, int i) {
  return positions.segment<3>(3 * static_cast<Eigen::Index>(i));
}

// ---------------------------------------------------------------------------
// Normals

inline void check_topology(const std::vector<Triangle>& topology, int vertex_count) {
  for (const auto& tri : topology)
    for (int i : tri)
      if (i < 0 || i >= vertex_count) throw ShapeError("triangle index out of range");
}

// Unnormalized area-weighted normal sums (sum of face cross products).
inline std::vector<Vec3> vertex_normal_sums(const Eigen::VectorXd& positions,
                                            const std::vector<Triangle>& topology) {
  const int nv = static_cast<int>(positions.size() / 3);
  check_topology(topology, nv);
  std::vector<Vec3> acc(static_cast<std::size_t>(nv), Vec3::Zero());
  for (const auto& tri : topology) {
    const Vec3 p0 = vertex(positions, tri[0]);
    const Vec3 e = (vertex(positions, tri[1]) - p0).cross(vertex(positions, tri[2]) - p0);
    for (int i : tri) acc[static_cast<std::size_t>(i)] += e;
  }
  return acc;
}

// Area-weighted vertex normals; vertices with no accumulated area get (0,0,1).
inline std::vector<Vec3> vertex_normals(const Eigen::VectorXd& positions,
                                        const std::vector<Triangle>& topology) {
  auto acc = vertex_normal_sums(positions, topology);
  for (auto& n : acc) {
    const double len = n.norm();
    n = len > 1e-300 ? Vec3(n / len) : Vec3(0, 0, 1);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// UV rasterization

// Pixel -> (triangle, barycentric weights) lookup for a fixed UV unwrap.
// Pixel (x, y) samples uv ((x + 0.5) / W, 1 - (y + 0.5) / H).
struct UvRasterization {
  int width = 0;
  int height = 0;
  std::vector<int> triangle;                 // -1 where uncovered
  std::vector<std::array<double, 3>> bary;

  bool covered(std::size_t p) const { return triangle[p] >= 0; }

  UvMask coverage() const {
    UvMask m(width, height, 0.0);
    for (std::size_t p = 0; p < triangle.size(); ++p) m[p] = covered(p) ? 1.0 : 0.0;
    return m;
  }
};

inline UvRasterization rasterize_uv(const std::vector<Vec2>& uv, const std::vector<Triangle>& topology,
                                    int width, int height) {
  check_topology(topology, static_cast<int>(uv.size()));
  UvRasterization r;
  r.width = width;
  r.height = height;
  r.triangle.assign(static_cast<std::size_t>(width) * height, -1);
  r.bary.assign(r.triangle.size(), {0, 0, 0});
  for (std::size_t t = 0; t < topology.size(); ++t) {
    const auto& tri = topology[t];
    // Triangle in pixel coordinates.
    Vec2 q[3];
    for (int k = 0; k < 3; ++k) {
      const Vec2& u = uv[static_cast<std::size_t>(tri[k])];
      q[k] = Vec2(u.x() * width - 0.5, (1.0 - u.y()) * height - 0.5);
    }
    const double area = (q[1] - q[0]).x() * (q[2] - q[0]).y() - (q[1] - q[0]).y() * (q[2] - q[0]).x();
    if (std::abs(area) < 1e-12) continue;  // degenerate in UV
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({q[0].x(), q[1].x(), q[2].x()}))));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({q[0].x(), q[1].x(), q[2].x()}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({q[0].y(), q[1].y(), q[2].y()}))));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({q[0].y(), q[1].y(), q[2].y()}))));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * width + x;
        if (r.triangle[p] >= 0) continue;
        const Vec2 s(x, y);
        auto edge = [](const Vec2& a, const Vec2& b, const Vec2& c) {
          return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        };
        const double w0 = edge(q[1], q[2], s) / area;
        const double w1 = edge(q[2], q[0], s) / area;
        const double w2 = 1.0 - w0 - w1;
        constexpr double eps = -1e-9;
        if (w0 < eps || w1 < eps || w2 < eps) continue;
        r.triangle[p] = static_cast<int>(t);
        r.bary[p] = {w0, w1, w2};
      }
  }
  return r;
}

// Barycentric interpolation of per-vertex normals, renormalized per pixel.
// Uncovered pixels hold (0, 0, 1).
inline TextureMap interpolate_normals(const UvRasterization& raster, const std::vector<Vec3>& normals,
                                      const std::vector<Triangle>& topology) {
  TextureMap out(raster.width, raster.height, 3);
  for (std::size_t p = 0; p < raster.triangle.size(); ++p) {
    Vec3 n(0, 0, 1);
    if (raster.covered(p)) {
      const auto& tri = topology[static_cast<std::size_t>(raster.triangle[p])];
      Vec3 u = Vec3::Zero();
      for (int k = 0; k < 3; ++k) u += raster.bary[p][k] * normals[static_cast<std::size_t>(tri[k])];
      const double len = u.norm();
      if (len > 1e-300) n = u / len;
    }
    for (int c = 0; c < 3; ++c) out.data()[3 * p + c] = n[c];
  }
  return out;
}

struct UvNormalMap {
  TextureMap normals;
  UvMask coverage;
};

inline UvNormalMap rasterize_normals_to_uv(const Eigen::VectorXd& positions,
                                           const std::vector<Triangle>& topology,
                                           const std::vector<Vec2>& uv_coords, int width, int height) {
  if (uv_coords.size() * 3 != static_cast<std::size_t>(positions.size()))
    throw ShapeError("rasterize_normals_to_uv: uv count does not match vertex count");
  const auto raster = rasterize_uv(uv_coords, topology, width, height);
  return {interpolate_normals(raster, vertex_normals(positions, topology), topology), raster.coverage()};
}

// ---------------------------------------------------------------------------
// Pose and landmarks

// R = Rz(r.z) * Ry(r.y) * Rx(r.x).
inline Mat3 euler_rotation(const Vec3& r) {
  return (Eigen::AngleAxisd(r.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(r.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(r.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

// Partial derivatives dR/dr_x, dR/dr_y, dR/dr_z.
inline std::array<Mat3, 3> euler_rotation_derivatives(const Vec3& r) {
  auto rot = [](double a, const Vec3& axis) { return Eigen::AngleAxisd(a, axis).toRotationMatrix(); };
  auto drot = [](double a, int axis) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 d = Mat3::Zero();
    const int i = (axis + 1) % 3, j = (axis + 2) % 3;
    d(i, i) = -s;
    d(i, j) = -c;
    d(j, i) = c;
    d(j, j) = -s;
    return d;
  };
  const Mat3 rx = rot(r.x(), Vec3::UnitX()), ry = rot(r.y(), Vec3::UnitY()), rz = rot(r.z(), Vec3::UnitZ());
  return {rz * ry * drot(r.x(), 0), rz * drot(r.y(), 1) * rx, drot(r.z(), 2) * ry * rx};
}

// Orthographic projection (R g + t).xy at unit scale.
inline std::vector<Vec2> project_landmarks(const Eigen::VectorXd& positions,
                                           const std::vector<int>& landmark_indices, const Vec3& r,
                                           const Vec3& t) {
  const Mat3 R = euler_rotation(r);
  const int nv = static_cast<int>(positions.size() / 3);
  std::vector<Vec2> out;
  out.reserve(landmark_indices.size());
  for (int i : landmark_indices) {
    if (i < 0 || i >= nv) throw ShapeError("landmark index out of range");
    const Vec3 p = R * vertex(positions, i) + t;
    out.emplace_back(p.x(), p.y());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic model

struct Icosphere {
  std::vector<Vec3> vertices;
  std::vector<Triangle> faces;
};

// Subdivided icosahedron with outward winding; stops once it has at least
// `min_vertices` vertices.
inline Icosphere make_icosphere(int min_vertices) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  Icosphere s;
  s.vertices = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : s.vertices) v.normalize();
  s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  while (static_cast<int>(s.vertices.size()) < min_vertices) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      s.vertices.push_back((s.vertices[static_cast<std::size_t>(a)] + s.vertices[static_cast<std::size_t>(b)]).normalized());
      const int idx = static_cast<int>(s.vertices.size()) - 1;
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<Triangle> next;
    next.reserve(s.faces.size() * 4);
    for (const auto& f : s.faces) {
      const int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    s.faces = std::move(next);
  }
  for (auto& f : s.faces) {
    const Vec3& p0 = s.vertices[static_cast<std::size_t>(f[0])];
    const Vec3 n = (s.vertices[static_cast<std::size_t>(f[1])] - p0).cross(s.vertices[static_cast<std::size_t>(f[2])] - p0);
    if (n.dot(p0) < 0) std::swap(f[1], f[2]);
  }
  return s;
}

namespace detail {

// Orthogonalizes the columns of `raw`, rescaling column k to Euclidean norm
// scale[k]. Columns beyond the numerical rank come out as zero.
inline Eigen::MatrixXd orthogonal_columns(const Eigen::MatrixXd& raw, const std::vector<double>& scale) {
  const Eigen::Index rows = raw.rows(), cols = raw.cols();
  const Eigen::Index rank = std::min(rows, cols);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, rank);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index k = 0; k < rank; ++k) out.col(k) = q.col(k) * scale[static_cast<std::size_t>(k)];
  return out;
}

// Smooth random texture fields: blurred white noise.
inline Eigen::MatrixXd smooth_texture_fields(std::mt19937_64& rng, int width, int height, int count) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int k = 2 * std::max(1, std::min(width, height) / 8) + 1;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(width) * height * 3, count);
  for (int j = 0; j < count; ++j) {
    TextureMap noise(width, height, 3);
    for (double& v : noise.data()) v = normal(rng);
    const TextureMap smooth = gaussian_blur(gaussian_blur(noise, k), k);
    out.col(j) = Eigen::Map<const Eigen::VectorXd>(smooth.data().data(), static_cast<Eigen::Index>(smooth.size()));
  }
  return out;
}

// Removes the per-channel mean over covered pixels and zeroes uncovered ones.
inline void center_on_coverage(Eigen::MatrixXd& fields, const UvMask& coverage) {
  const double n = static_cast<double>(coverage.count_valid());
  for (Eigen::Index j = 0; j < fields.cols(); ++j)
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (std::size_t p = 0; p < coverage.pixels(); ++p)
        if (coverage.valid(p)) mean += fields(static_cast<Eigen::Index>(3 * p + c), j);
      mean /= n;
      for (std::size_t p = 0; p < coverage.pixels(); ++p) {
        double& v = fields(static_cast<Eigen::Index>(3 * p + c), j);
        v = coverage.valid(p) ? v - mean : 0.0;
      }
    }
}

// Smooth random vertex displacement fields (Laplacian-smoothed noise).
inline Eigen::MatrixXd smooth_vertex_fields(std::mt19937_64& rng, const std::vector<Triangle>& faces,
                                            int nv, int count) {
  std::vector<std::vector<int>> nbr(static_cast<std::size_t>(nv));
  for (const auto& f : faces)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        if (a != b) nbr[static_cast<std::size_t>(f[a])].push_back(f[b]);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(3 * nv, count);
  for (int j = 0; j < count; ++j) {
    Eigen::VectorXd v(3 * nv);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    for (int pass = 0; pass < 3; ++pass) {
      Eigen::VectorXd s = v;
      for (int i = 0; i < nv; ++i) {
        const auto& ns = nbr[static_cast<std::size_t>(i)];
        if (ns.empty()) continue;
        Vec3 acc = Vec3::Zero();
        for (int n : ns) acc += v.segment<3>(3 * n);
        s.segment<3>(3 * i) = 0.5 * v.segment<3>(3 * i) + 0.5 * acc / static_cast<double>(ns.size());
      }
      v = s;
    }
    out.col(j) = v;
  }
  return out;
}

inline std::vector<double> decaying_norms(int count, double rms_amplitude, double decay, Eigen::Index rows) {
  std::vector<double> s(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    s[static_cast<std::size_t>(k)] = rms_amplitude * std::exp(-k / decay) * std::sqrt(static_cast<double>(rows));
  return s;
}

}  // namespace detail

// Deterministic stand-in for a licensed morphable model: the front half of an
// icosphere (at least `min_vertices` vertices before cropping), planar UV
// unwrap u = (x+1)/2, v = (y+1)/2, smooth orthogonal random bases. The
// diffuse basis has zero per-channel mean over the UV coverage, so overall
// skin tone is controlled by gain/bias alone.
inline LinearFaceModel synthetic_model(std::uint64_t seed, int min_vertices, int resolution) {
  if (min_vertices < 12) throw ParameterError("synthetic_model: need at least 12 vertices");
  if (resolution < 4) throw ParameterError("synthetic_model: resolution too small");
  std::mt19937_64 rng(seed);

  const Icosphere sphere = make_icosphere(min_vertices);
  std::vector<int> remap(sphere.vertices.size(), -1);
  LinearFaceModel m;
  std::vector<Vec3> verts;
  for (const auto& f : sphere.faces) {
    bool front = true;
    for (int i : f) front = front && sphere.vertices[static_cast<std::size_t>(i)].z() > -1e-9;
    if (!front) continue;
    Triangle t;
    for (int k = 0; k < 3; ++k) {
      int& r = remap[static_cast<std::size_t>(f[k])];
      if (r < 0) {
        r = static_cast<int>(verts.size());
        verts.push_back(sphere.vertices[static_cast<std::size_t>(f[k])]);
      }
      t[k] = r;
    }
    m.topology.push_back(t);
  }
  const int nv = static_cast<int>(verts.size());
  m.mean_geometry.resize(3 * nv);
  for (int i = 0; i < nv; ++i) {
    const Vec3& d = verts[static_cast<std::size_t>(i)];
    m.mean_geometry.segment<3>(3 * i) = Vec3(d.x(), 1.15 * d.y(), 0.85 * d.z());
    m.uv_coords.emplace_back((d.x() + 1.0) / 2.0, (d.y() + 1.0) / 2.0);
  }

  m.basis_id = detail::orthogonal_columns(detail::smooth_vertex_fields(rng, m.topology, nv, kIdentityDims),
                                          detail::decaying_norms(kIdentityDims, 0.02, 40.0, 3 * nv));
  m.basis_ex = detail::orthogonal_columns(detail::smooth_vertex_fields(rng, m.topology, nv, kExpressionDims),
                                          detail::decaying_norms(kExpressionDims, 0.01, 20.0, 3 * nv));

  const int w = resolution, h = resolution;
  const UvMask coverage = rasterize_uv(m.uv_coords, m.topology, w, h).coverage();
  const Eigen::Index rows = static_cast<Eigen::Index>(w) * h * 3;

  Eigen::MatrixXd dfields = detail::smooth_texture_fields(rng, w, h, kDiffuseDims);
  detail::center_on_coverage(dfields, coverage);
  m.basis_diffuse = detail::orthogonal_columns(dfields, detail::decaying_norms(kDiffuseDims, 0.05, 20.0, rows));
  m.basis_specular = detail::orthogonal_columns(detail::smooth_texture_fields(rng, w, h, kSpecularDims),
                                                detail::decaying_norms(kSpecularDims, 0.03, 20.0, rows));

  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double ph_u = phase(rng), ph_v = phase(rng);
  const std::array<double, 3> skin{0.8, 0.6, 0.5};
  m.mean_diffuse = TextureMap(w, h, 3);
  m.mean_specular = TextureMap(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = (x + 0.5) / w, v = 1.0 - (y + 0.5) / h;
      const double wave = std::cos(std::numbers::pi * u + ph_u) * std::cos(std::numbers::pi * v + ph_v);
      for (int c = 0; c < 3; ++c) {
        m.mean_diffuse.at(x, y, c) = skin[static_cast<std::size_t>(c)] + 0.03 * wave;
        m.mean_specular.at(x, y, c) = 0.25 + 0.02 * wave;
      }
    }

  const int nl = std::min(nv, 16);
  for (int i = 0; i < nl; ++i) m.landmark_indices.push_back(static_cast<int>((static_cast<long>(i) * nv) / nl));
  m.validate();
  return m;
}

}  // namespace facelayers
