#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "facelayers/error.hpp"
#include "facelayers/parallel.hpp"
#include "facelayers/texture.hpp"

namespace facelayers {

using Vec3 = Eigen::Vector3d;

namespace sh_const {
inline const double c0 = 0.5 / std::sqrt(std::numbers::pi);               // 0.282095
inline const double c1 = std::sqrt(3.0 / (4.0 * std::numbers::pi));      // 0.488603
inline const double c2 = 0.5 * std::sqrt(15.0 / std::numbers::pi);        // 1.092548
inline const double c3 = 0.25 * std::sqrt(5.0 / std::numbers::pi);        // 0.315392
inline const double c4 = 0.25 * std::sqrt(15.0 / std::numbers::pi);       // 0.546274
}  // namespace sh_const

// Second-order SH lighting: 9 coefficients per colour channel, stored
// channel-major (index = channel * 9 + band_index). Coefficients are
// pre-multiplied with the Lambertian convolution factors, so shading is a
// plain dot product with the basis.
struct ShCoefficients {
  static constexpr int kBands = 9;
  static constexpr int kSize = 27;
  std::array<double, kSize> values{};

  double& operator()(int channel, int k) { return values[static_cast<std::size_t>(channel * 9 + k)]; }
  double operator()(int channel, int k) const { return values[static_cast<std::size_t>(channel * 9 + k)]; }

  // Band-0 only lighting that produces a constant shading of `level`.
  static ShCoefficients ambient(double level) {
    ShCoefficients sh;
    for (int c = 0; c < 3; ++c) sh(c, 0) = level / sh_const::c0;
    return sh;
  }

  friend bool operator==(const ShCoefficients&, const ShCoefficients&) = default;
};

enum class NormalPolicy { normalize, reject };

// Real SH basis at a direction, ordered 1, y, z, x, xy, yz, 3z^2-1, xz, x^2-y^2.
inline std::array<double, 9> sh_basis_raw(const Vec3& n) {
  using namespace sh_const;
  const double x = n.x(), y = n.y(), z = n.z();
  return {c0,         c1 * y,     c1 * z, c1 * x, c2 * x * y,
          c2 * y * z, c3 * (3 * z * z - 1), c2 * x * z, c4 * (x * x - y * y)};
}

inline std::array<double, 9> sh_basis(const Vec3& normal, NormalPolicy policy = NormalPolicy::normalize) {
  const double len = normal.norm();
  if (!std::isfinite(len) || len == 0.0) throw ParameterError("sh_basis: zero or non-finite normal");
  if (std::abs(len - 1.0) > 1e-6) {
    if (policy == NormalPolicy::reject) throw ParameterError("sh_basis: normal is not unit length");
    return sh_basis_raw(normal / len);
  }
  return sh_basis_raw(normal);
}

// d Y_k / d n for the raw polynomials.
inline std::array<Vec3, 9> sh_basis_jacobian(const Vec3& n) {
  using namespace sh_const;
  const double x = n.x(), y = n.y(), z = n.z();
  return {Vec3(0, 0, 0),           Vec3(0, c1, 0),          Vec3(0, 0, c1),
          Vec3(c1, 0, 0),          Vec3(c2 * y, c2 * x, 0), Vec3(0, c2 * z, c2 * y),
          Vec3(0, 0, 6 * c3 * z),  Vec3(c2 * z, 0, c2 * x), Vec3(2 * c4 * x, -2 * c4 * y, 0)};
}

inline Vec3 normal_at(const TextureMap& normals, std::size_t p) {
  const double* d = normals.data().data() + 3 * p;
  return {d[0], d[1], d[2]};
}

// Lambertian SH shading per pixel and channel, clamped below at 0. Normal
// maps are expected to hold unit vectors; the polynomials are evaluated on
// the stored values as-is.
inline TextureMap diffuse_shading(const TextureMap& normals, const ShCoefficients& sh) {
  if (normals.channels() != 3) throw ShapeError("diffuse_shading: normal map must have 3 channels");
  TextureMap out(normals.width(), normals.height(), 3);
  const int w = normals.width();
  parallel_rows(normals.height(), [&](int y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const auto basis = sh_basis_raw(normal_at(normals, p));
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = 0; k < 9; ++k) s += sh(c, k) * basis[static_cast<std::size_t>(k)];
        out.data()[3 * p + c] = std::max(0.0, s);
      }
    }
  });
  return out;
}

// Twenty parallel lights at icosahedral directions plus a shared viewer.
struct VirtualLightStage {
  static constexpr int kLights = 20;
  std::array<double, kLights> intensities{};
  std::array<Vec3, kLights> directions{};
  std::array<double, kLights> shininess{};
  Vec3 view_direction{0, 0, 1};

  void validate() const {
    for (int j = 0; j < kLights; ++j) {
      if (!(intensities[j] >= 0.0) || !std::isfinite(intensities[j]))
        throw ParameterError("light intensity must be finite and >= 0");
      if (!(shininess[j] > 0.0) || !std::isfinite(shininess[j]))
        throw ParameterError("shininess must be finite and > 0");
      if (std::abs(directions[j].norm() - 1.0) > 1e-6)
        throw ParameterError("light direction must be unit length");
    }
    if (std::abs(view_direction.norm() - 1.0) > 1e-6)
      throw ParameterError("view direction must be unit length");
  }

  void renormalize_directions() {
    for (auto& d : directions) {
      const double len = d.norm();
      if (len > 0.0) d /= len;
    }
  }
};

// Face normals of a regular icosahedron (the vertices of its dual
// dodecahedron), ordered by descending z, then by atan2(y, x).
inline std::array<Vec3, 20> icosahedral_directions() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double iphi = 1.0 / phi;
  std::vector<Vec3> v;
  for (double sx : {-1.0, 1.0})
    for (double sy : {-1.0, 1.0})
      for (double sz : {-1.0, 1.0}) v.emplace_back(sx, sy, sz);
  for (double a : {-1.0, 1.0})
    for (double b : {-1.0, 1.0}) {
      v.emplace_back(0.0, a * iphi, b * phi);
      v.emplace_back(a * iphi, b * phi, 0.0);
      v.emplace_back(a * phi, 0.0, b * iphi);
    }
  for (auto& d : v) d.normalize();
  std::sort(v.begin(), v.end(), [](const Vec3& a, const Vec3& b) {
    if (std::abs(a.z() - b.z()) > 1e-9) return a.z() > b.z();
    return std::atan2(a.y(), a.x()) < std::atan2(b.y(), b.x());
  });
  std::array<Vec3, 20> out;
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

inline VirtualLightStage default_light_stage(double intensity = 0.05, double shininess = 200.0) {
  VirtualLightStage stage;
  stage.directions = icosahedral_directions();
  stage.intensities.fill(intensity);
  stage.shininess.fill(shininess);
  return stage;
}

// Normalized half vector, or nothing when light and view cancel.
inline std::optional<Vec3> half_vector(const Vec3& light, const Vec3& view) {
  const Vec3 h = light + view;
  const double len = h.norm();
  if (len < 1e-12) return std::nullopt;
  return h / len;
}

// Blinn-Phong: sum_j I_j * max(0, n.h_j)^rho_j. Replicated to `channels`.
inline TextureMap specular_shading(const TextureMap& normals, const VirtualLightStage& stage,
                                   int channels = 1) {
  if (normals.channels() != 3) throw ShapeError("specular_shading: normal map must have 3 channels");
  std::array<std::optional<Vec3>, 20> halves;
  for (int j = 0; j < 20; ++j) halves[j] = half_vector(stage.directions[j], stage.view_direction);
  TextureMap out(normals.width(), normals.height(), channels);
  const int w = normals.width();
  parallel_rows(normals.height(), [&](int y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const Vec3 n = normal_at(normals, p);
      double s = 0.0;
      for (int j = 0; j < 20; ++j) {
        if (!halves[j] || stage.intensities[j] == 0.0) continue;
        const double d = n.dot(*halves[j]);
        if (d > 0.0) s += stage.intensities[j] * std::pow(d, stage.shininess[j]);
      }
      for (int c = 0; c < channels; ++c) out.data()[p * channels + c] = s;
    }
  });
  return out;
}

// albedo * shading + specular, clamped below at 0 (no upper clamp). The
// specular term may be single-channel, in which case it is broadcast.
inline TextureMap compose_reconstruction(const TextureMap& albedo, const TextureMap& shading,
                                         const TextureMap& specular) {
  if (albedo.channels() != 3) throw ShapeError("compose_reconstruction: albedo must have 3 channels");
  require_same_shape(albedo, shading, "compose_reconstruction");
  require_same_resolution(albedo, specular, "compose_reconstruction");
  if (specular.channels() != 1 && specular.channels() != 3)
    throw ShapeError("compose_reconstruction: specular must have 1 or 3 channels");
  TextureMap out(albedo.width(), albedo.height(), 3);
  const int sc = specular.channels();
  for (std::size_t p = 0; p < albedo.pixels(); ++p)
    for (int c = 0; c < 3; ++c) {
      const double s = specular.data()[p * sc + (sc == 3 ? c : 0)];
      out.data()[3 * p + c] = std::max(0.0, albedo.data()[3 * p + c] * shading.data()[3 * p + c] + s);
    }
  return out;
}

}  // namespace facelayers
