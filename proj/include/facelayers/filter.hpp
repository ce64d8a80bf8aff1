#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "facelayers/error.hpp"
#include "facelayers/parallel.hpp"
#include "facelayers/texture.hpp"

namespace facelayers {

// Sigma used for a Gaussian kernel of the given odd size.
inline double gaussian_sigma(int kernel_size) {
  return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;
}

// Normalized 1-D Gaussian taps, centre at index kernel_size / 2.
inline std::vector<double> gaussian_kernel(int kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ParameterError("gaussian kernel size must be odd and >= 1");
  const int r = kernel_size / 2;
  const double sigma = gaussian_sigma(kernel_size);
  std::vector<double> k(static_cast<std::size_t>(kernel_size));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace detail {

using TapTable = std::vector<std::vector<std::pair<int, double>>>;

// For each output index, the (source index, weight) pairs of an edge-clamped
// 1-D convolution. The adjoint table is the transpose of the forward one.
inline TapTable blur_taps(const std::vector<double>& k, int n, bool adjoint) {
  const int r = static_cast<int>(k.size()) / 2;
  TapTable taps(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x)
    for (int i = -r; i <= r; ++i) {
      const int s = std::clamp(x + i, 0, n - 1);
      const double wk = k[static_cast<std::size_t>(i + r)];
      if (adjoint)
        taps[static_cast<std::size_t>(s)].emplace_back(x, wk);
      else
        taps[static_cast<std::size_t>(x)].emplace_back(s, wk);
    }
  return taps;
}

inline TextureMap blur_pass(const TextureMap& in, const std::vector<double>& k, bool horizontal,
                            bool adjoint) {
  const int w = in.width(), h = in.height(), ch = in.channels();
  const TapTable taps = blur_taps(k, horizontal ? w : h, adjoint);
  TextureMap out(w, h, ch);
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const auto& list = taps[static_cast<std::size_t>(horizontal ? x : y)];
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (const auto& [src, wk] : list)
          s += wk * (horizontal ? in.at(src, y, c) : in.at(x, src, c));
        out.at(x, y, c) = s;
      }
    }
  });
  return out;
}

}  // namespace detail

// Separable Gaussian blur, edge-clamped borders.
inline TextureMap gaussian_blur(const TextureMap& tex, int kernel_size) {
  const auto k = gaussian_kernel(kernel_size);
  if (kernel_size == 1) return tex;
  return detail::blur_pass(detail::blur_pass(tex, k, true, false), k, false, false);
}

// Transpose of gaussian_blur; used to back-propagate losses on blurred maps.
inline TextureMap gaussian_blur_adjoint(const TextureMap& grad, int kernel_size) {
  const auto k = gaussian_kernel(kernel_size);
  if (kernel_size == 1) return grad;
  return detail::blur_pass(detail::blur_pass(grad, k, false, true), k, true, true);
}

struct FillOptions {
  int max_iterations = 2000;
  double tolerance = 1e-5;
};

// Fills pixels the mask marks invalid with the harmonic interpolant of the
// valid ones (Jacobi iteration on the 4-neighbour Laplacian). Valid pixels
// are copied through untouched.
inline TextureMap diffuse_fill(const TextureMap& tex, const UvMask& mask, FillOptions opts = {}) {
  if (!mask.matches(tex)) throw ShapeError("diffuse_fill: mask size mismatch");
  const std::size_t n_valid = mask.count_valid();
  if (n_valid == 0) throw ParameterError("nothing to anchor fill");
  if (n_valid == mask.pixels()) return tex;

  const int w = tex.width(), h = tex.height(), ch = tex.channels();
  std::vector<double> seed(static_cast<std::size_t>(ch), 0.0);
  for (std::size_t p = 0; p < tex.pixels(); ++p)
    if (mask.valid(p))
      for (int c = 0; c < ch; ++c) seed[c] += tex.data()[p * ch + c];
  for (double& s : seed) s /= static_cast<double>(n_valid);

  TextureMap cur = tex;
  for (std::size_t p = 0; p < tex.pixels(); ++p)
    if (!mask.valid(p))
      for (int c = 0; c < ch; ++c) cur.data()[p * ch + c] = seed[c];

  TextureMap next = cur;
  std::vector<double> row_delta(static_cast<std::size_t>(h));
  for (int it = 0; it < opts.max_iterations; ++it) {
    parallel_rows(h, [&](int y) {
      double delta = 0.0;
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        if (mask.valid(p)) continue;
        for (int c = 0; c < ch; ++c) {
          double s = 0.0;
          int n = 0;
          if (x > 0) s += cur.at(x - 1, y, c), ++n;
          if (x + 1 < w) s += cur.at(x + 1, y, c), ++n;
          if (y > 0) s += cur.at(x, y - 1, c), ++n;
          if (y + 1 < h) s += cur.at(x, y + 1, c), ++n;
          const double v = s / n;
          delta = std::max(delta, std::abs(v - cur.at(x, y, c)));
          next.at(x, y, c) = v;
        }
      }
      row_delta[static_cast<std::size_t>(y)] = delta;
    });
    std::swap(cur, next);
    if (*std::max_element(row_delta.begin(), row_delta.end()) < opts.tolerance) break;
  }
  return cur;
}

// Anisotropic total variation: mean over pixels of |dx| + |dy| (forward
// differences), summed over channels.
inline double total_variation(const TextureMap& tex) {
  const int w = tex.width(), h = tex.height(), ch = tex.channels();
  const double s = sum_rows(h, [&](int y) {
    double acc = 0.0;
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const double v = tex.at(x, y, c);
        if (x + 1 < w) acc += std::abs(tex.at(x + 1, y, c) - v);
        if (y + 1 < h) acc += std::abs(tex.at(x, y + 1, c) - v);
      }
    return acc;
  });
  return s / static_cast<double>(tex.pixels());
}

namespace detail {
inline double sign(double v) { return (v > 0.0) - (v < 0.0); }
}  // namespace detail

// Adds scale * d TV / d tex into grad (subgradient 0 at ties).
inline void total_variation_grad(const TextureMap& tex, double scale, TextureMap& grad) {
  require_same_shape(tex, grad, "total_variation_grad");
  const int w = tex.width(), h = tex.height(), ch = tex.channels();
  const double k = scale / static_cast<double>(tex.pixels());
  // Gather form: every pixel collects from the (up to) four differences it
  // participates in, so rows can be processed independently.
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const double v = tex.at(x, y, c);
        double g = 0.0;
        if (x + 1 < w) g -= detail::sign(tex.at(x + 1, y, c) - v);
        if (x > 0) g += detail::sign(v - tex.at(x - 1, y, c));
        if (y + 1 < h) g -= detail::sign(tex.at(x, y + 1, c) - v);
        if (y > 0) g += detail::sign(v - tex.at(x, y - 1, c));
        grad.at(x, y, c) += k * g;
      }
  });
}

}  // namespace facelayers
