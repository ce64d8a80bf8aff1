#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "facelayers/binary_io.hpp"
#include "facelayers/error.hpp"
#include "facelayers/texture.hpp"

namespace facelayers {

// Linear statistical model over premultiplied makeup textures.
struct MakeupPcaModel {
  int width = 0;
  int height = 0;
  Eigen::VectorXd mean;         // W*H*3, interleaved like TextureMap
  Eigen::MatrixXd basis;        // (W*H*3) x K, orthonormal columns
  Eigen::VectorXd eigenvalues;  // K, descending, population variance
  double total_variance = 0.0;  // sum of all sample-space eigenvalues

  int components() const { return static_cast<int>(basis.cols()); }
  Eigen::Index dim() const { return mean.size(); }

  void validate() const {
    if (width <= 0 || height <= 0 || mean.size() != static_cast<Eigen::Index>(width) * height * 3)
      throw ShapeError("makeup model: mean does not match its resolution");
    if (basis.rows() != mean.size() || eigenvalues.size() != basis.cols())
      throw ShapeError("makeup model: basis / eigenvalue dimensions disagree");
    for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
      if (!(eigenvalues[k] >= 0.0)) throw ParameterError("makeup model: negative eigenvalue");
      if (k > 0 && eigenvalues[k] > eigenvalues[k - 1]) throw ParameterError("makeup model: eigenvalues not sorted");
    }
  }

  // Variance left unexplained by the first k components.
  double tail_variance(int k) const {
    double s = total_variance;
    for (int i = 0; i < std::min(k, components()); ++i) s -= eigenvalues[i];
    return std::max(0.0, s);
  }

  TextureMap to_texture(const Eigen::VectorXd& v) const {
    return TextureMap(width, height, 3, std::vector<double>(v.data(), v.data() + v.size()));
  }
};

namespace detail {

inline Eigen::Map<const Eigen::VectorXd> as_vector(const TextureMap& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.size())};
}

}  // namespace detail

// PCA through the N x N Gram matrix of the centered samples. Components
// with no variance are completed to an orthonormal set.
inline MakeupPcaModel build_pca(const std::vector<TextureMap>& samples, int components) {
  if (samples.size() < 2) throw ParameterError("build_pca: need at least two samples");
  const TextureMap& first = samples.front();
  if (first.channels() != 3) throw ShapeError("build_pca: samples must have 3 channels");
  for (const auto& s : samples) require_same_shape(first, s, "build_pca");
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto dim = static_cast<Eigen::Index>(first.size());
  if (components < 1 || components > std::min<Eigen::Index>(n - 1, dim))
    throw ParameterError("build_pca: component count must lie in [1, min(N-1, dim)]");

  MakeupPcaModel m;
  m.width = first.width();
  m.height = first.height();
  Eigen::MatrixXd x(dim, n);
  for (Eigen::Index j = 0; j < n; ++j) x.col(j) = detail::as_vector(samples[static_cast<std::size_t>(j)]);
  m.mean = x.rowwise().mean();
  x.colwise() -= m.mean;

  const Eigen::MatrixXd gram = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw Error("build_pca: eigendecomposition failed");
  const double trace = gram.trace();
  m.total_variance = trace / static_cast<double>(n);
  const double floor = 1e-12 * std::max(trace, 1e-300);

  m.basis = Eigen::MatrixXd::Zero(dim, components);
  m.eigenvalues = Eigen::VectorXd::Zero(components);
  int filled = 0;
  for (int k = 0; k < components; ++k) {
    const Eigen::Index idx = n - 1 - k;  // solver sorts ascending
    const double lambda = eig.eigenvalues()[idx];
    if (lambda <= floor) break;
    m.basis.col(k) = x * eig.eigenvectors().col(idx) / std::sqrt(lambda);
    m.eigenvalues[k] = lambda / static_cast<double>(n);
    ++filled;
  }
  // Zero-variance directions: Gram-Schmidt over unit vectors.
  for (Eigen::Index e = 0; filled < components && e < dim; ++e) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(dim, e);
    for (int r = 0; r < 2; ++r) v -= m.basis.leftCols(filled) * (m.basis.leftCols(filled).transpose() * v);
    const double len = v.norm();
    if (len < 1e-6) continue;
    m.basis.col(filled++) = v / len;
  }
  return m;
}

inline Eigen::VectorXd fit_coeffs(const MakeupPcaModel& m, const TextureMap& tex) {
  if (tex.width() != m.width || tex.height() != m.height || tex.channels() != 3)
    throw ShapeError("fit_coeffs: texture does not match the model");
  return m.basis.transpose() * (detail::as_vector(tex) - m.mean);
}

inline TextureMap reconstruct(const MakeupPcaModel& m, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() > m.components()) throw ShapeError("reconstruct: too many coefficients");
  return m.to_texture(m.mean + m.basis.leftCols(coeffs.size()) * coeffs);
}

// mean + basis * (z * sqrt(eigenvalues)) * scale with z ~ N(0, I) from `seed`.
// Values are not clamped.
inline TextureMap sample_makeup(const MakeupPcaModel& m, std::uint64_t seed, double scale = 1.0) {
  m.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd c(m.components());
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] = normal(rng) * std::sqrt(m.eigenvalues[k]) * scale;
  return reconstruct(m, c);
}

// Albedo extended by an additive makeup texture; clamping is left to export.
inline TextureMap extended_albedo(const TextureMap& albedo, const TextureMap& makeup) {
  require_same_shape(albedo, makeup, "extended_albedo");
  TextureMap out = albedo;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += makeup.data()[i];
  return out;
}

// "MKP1" container: DIMS (width, height, channels, K), MEAN, BASE, EIGV, TVAR.
inline void save_makeup_model(const MakeupPcaModel& m, const std::filesystem::path& path) {
  m.validate();
  using namespace binary;
  const auto dim = static_cast<std::uint64_t>(m.dim());
  const auto k = static_cast<std::uint64_t>(m.components());
  std::vector<Chunk> chunks;
  chunks.push_back(u32_chunk("DIMS", 1, 4,
                             {static_cast<std::uint32_t>(m.width), static_cast<std::uint32_t>(m.height), 3u,
                              static_cast<std::uint32_t>(k)}));
  chunks.push_back(f64_chunk("MEAN", dim, 1, m.mean.data()));
  chunks.push_back(f64_chunk("BASE", dim, k, m.basis.data()));
  chunks.push_back(f64_chunk("EIGV", k, 1, m.eigenvalues.data()));
  chunks.push_back(f64_chunk("TVAR", 1, 1, &m.total_variance));
  write_container(path, "MKP1", chunks);

  nlohmann::json eig = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) eig.push_back(m.eigenvalues[i]);
  const nlohmann::json manifest = {{"format", "MKP1"},
                                   {"texture", {{"width", m.width}, {"height", m.height}, {"channels", 3}}},
                                   {"components", k},
                                   {"eigenvalues", eig},
                                   {"total_variance", m.total_variance}};
  std::ofstream out(path.string() + ".json");
  if (!out) throw IoError("cannot write manifest for " + path.string());
  out << manifest.dump(2) << '\n';
}

inline MakeupPcaModel load_makeup_model(const std::filesystem::path& path) {
  using namespace binary;
  const auto chunks = read_container(path, "MKP1");
  const auto& dims = find_chunk(chunks, "DIMS");
  if (dims.u32.size() != 4 || dims.u32[2] != 3) throw IoError("bad DIMS chunk in " + path.string());
  MakeupPcaModel m;
  m.width = static_cast<int>(dims.u32[0]);
  m.height = static_cast<int>(dims.u32[1]);
  const auto k = static_cast<Eigen::Index>(dims.u32[3]);
  const auto& mean = find_chunk(chunks, "MEAN");
  const auto& base = find_chunk(chunks, "BASE");
  const auto& eigv = find_chunk(chunks, "EIGV");
  const auto& tvar = find_chunk(chunks, "TVAR");
  const auto dim = static_cast<Eigen::Index>(m.width) * m.height * 3;
  if (mean.f64.size() != static_cast<std::size_t>(dim) || base.f64.size() != static_cast<std::size_t>(dim * k) ||
      eigv.f64.size() != static_cast<std::size_t>(k) || tvar.f64.size() != 1)
    throw IoError("makeup model chunks have inconsistent sizes: " + path.string());
  m.mean = Eigen::Map<const Eigen::VectorXd>(mean.f64.data(), dim);
  m.basis = Eigen::Map<const Eigen::MatrixXd>(base.f64.data(), dim, k);
  m.eigenvalues = Eigen::Map<const Eigen::VectorXd>(eigv.f64.data(), k);
  m.total_variance = tvar.f64[0];
  m.validate();
  return m;
}

}  // namespace facelayers
