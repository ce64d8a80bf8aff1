#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "facelayers/error.hpp"

namespace facelayers {

// Value range a texture is tagged with. Checked by TextureMap::tagged().
enum class TextureKind {
  generic,      // any finite value
  unit,         // albedo, shading exported, alpha: [0,1]
  signed_unit,  // normal maps: [-1,1]
  non_negative  // shading and specular reconstructions
};

// W x H x C image in UV space. Row-major, channel-interleaved, linear intensity.
class TextureMap {
 public:
  TextureMap() = default;

  TextureMap(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0) throw ShapeError("texture dimensions must be positive");
    if (channels != 1 && channels != 3) throw ShapeError("texture must have 1 or 3 channels");
    data_.assign(size(), fill);
  }

  TextureMap(int width, int height, int channels, std::vector<double> data)
      : TextureMap(width, height, channels) {
    if (data.size() != size()) throw ShapeError("texture data length does not match dimensions");
    data_ = std::move(data);
  }

  // Construction with range validation for the given kind.
  static TextureMap tagged(int width, int height, int channels, std::vector<double> data,
                           TextureKind kind) {
    TextureMap t(width, height, channels, std::move(data));
    t.validate(kind);
    return t;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixels() const { return static_cast<std::size_t>(width_) * height_; }
  std::size_t size() const { return pixels() * channels_; }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  std::span<double> row(int y) {
    return {data_.data() + static_cast<std::size_t>(y) * width_ * channels_,
            static_cast<std::size_t>(width_) * channels_};
  }
  std::span<const double> row(int y) const {
    return {data_.data() + static_cast<std::size_t>(y) * width_ * channels_,
            static_cast<std::size_t>(width_) * channels_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const TextureMap& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }
  bool same_resolution(const TextureMap& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  void validate(TextureKind kind) const {
    for (double v : data_) {
      if (!std::isfinite(v)) throw ParameterError("texture contains non-finite values");
      switch (kind) {
        case TextureKind::generic:
          break;
        case TextureKind::unit:
          if (v < 0.0 || v > 1.0) throw ParameterError("texture value outside [0,1]");
          break;
        case TextureKind::signed_unit:
          if (v < -1.0 || v > 1.0) throw ParameterError("texture value outside [-1,1]");
          break;
        case TextureKind::non_negative:
          if (v < 0.0) throw ParameterError("texture value is negative");
          break;
      }
    }
  }

  void clamp(double lo, double hi) {
    for (double& v : data_) v = std::clamp(v, lo, hi);
  }

  friend bool operator==(const TextureMap&, const TextureMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const TextureMap& a, const TextureMap& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": texture shape mismatch");
}

inline void require_same_resolution(const TextureMap& a, const TextureMap& b, const char* what) {
  if (!a.same_resolution(b)) throw ShapeError(std::string(what) + ": texture resolution mismatch");
}

// Per-pixel validity weights in [0,1]; 1 = observed.
class UvMask {
 public:
  UvMask() = default;
  UvMask(int width, int height, double fill = 1.0) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ShapeError("mask dimensions must be positive");
    if (fill < 0.0 || fill > 1.0) throw ParameterError("mask weight outside [0,1]");
    weights_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  UvMask(int width, int height, std::vector<double> weights) : UvMask(width, height) {
    if (weights.size() != weights_.size()) throw ShapeError("mask length does not match dimensions");
    for (double w : weights)
      if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("mask weight outside [0,1]");
    weights_ = std::move(weights);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixels() const { return weights_.size(); }

  double& at(int x, int y) { return weights_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int x, int y) const { return weights_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator[](std::size_t i) const { return weights_[i]; }
  double& operator[](std::size_t i) { return weights_[i]; }

  // Binary validity used by hole filling and region statistics.
  bool valid(std::size_t i) const { return weights_[i] >= 0.5; }

  double total() const {
    double s = 0.0;
    for (double w : weights_) s += w;
    return s;
  }
  std::size_t count_valid() const {
    return static_cast<std::size_t>(
        std::count_if(weights_.begin(), weights_.end(), [](double w) { return w >= 0.5; }));
  }

  bool matches(const TextureMap& t) const { return t.width() == width_ && t.height() == height_; }

  const std::vector<double>& weights() const { return weights_; }

  friend bool operator==(const UvMask&, const UvMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> weights_;
};

inline UvMask intersect(const UvMask& a, const UvMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw ShapeError("mask size mismatch");
  UvMask out(a.width(), a.height(), 0.0);
  for (std::size_t i = 0; i < a.pixels(); ++i) out[i] = a[i] * b[i];
  return out;
}

// Brows, eyes, lips and skin regions in UV space.
struct FaceRegions {
  UvMask brows;
  UvMask eyes;
  UvMask lips;
  UvMask skin;

  // Regions used by the makeup histogram loss (skin is excluded there).
  std::array<std::pair<const char*, const UvMask*>, 3> makeup_regions() const {
    return {{{"brows", &brows}, {"eyes", &eyes}, {"lips", &lips}}};
  }

  void validate() const {
    const std::array<const UvMask*, 4> all{&brows, &eyes, &lips, &skin};
    for (const UvMask* m : all) {
      if (m->width() != brows.width() || m->height() != brows.height())
        throw ShapeError("face regions differ in size");
      if (m->count_valid() == 0) throw ParameterError("face region is empty");
    }
    for (std::size_t a = 0; a < all.size(); ++a)
      for (std::size_t b = a + 1; b < all.size(); ++b)
        for (std::size_t i = 0; i < brows.pixels(); ++i)
          if ((*all[a])[i] > 0.0 && (*all[b])[i] > 0.0)
            throw ParameterError("face regions overlap");
  }
};

// Bilinear resampling with pixel-center alignment and edge clamp.
inline TextureMap resize_bilinear(const TextureMap& src, int width, int height) {
  if (src.width() == width && src.height() == height) return src;
  TextureMap out(width, height, src.channels());
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double tx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = src.at(x0, y0, c) * (1 - tx) + src.at(x1, y0, c) * tx;
        const double bot = src.at(x0, y1, c) * (1 - tx) + src.at(x1, y1, c) * tx;
        out.at(x, y, c) = top * (1 - ty) + bot * ty;
      }
    }
  }
  return out;
}

// Luminance (Rec. 709 weights) of a 3-channel texture.
inline TextureMap gray(const TextureMap& tex) {
  if (tex.channels() != 3) throw ShapeError("gray: expected 3 channels");
  TextureMap out(tex.width(), tex.height(), 1);
  const auto& in = tex.data();
  auto& o = out.data();
  for (std::size_t p = 0; p < tex.pixels(); ++p)
    o[p] = 0.2126 * in[3 * p] + 0.7152 * in[3 * p + 1] + 0.0722 * in[3 * p + 2];
  return out;
}

// Mean absolute difference over all pixels and channels.
inline double mean_abs_diff(const TextureMap& a, const TextureMap& b) {
  require_same_shape(a, b, "mean_abs_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return s / static_cast<double>(a.size());
}

inline double rmse(const TextureMap& a, const TextureMap& b) {
  require_same_shape(a, b, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

// Per-channel weighted mean color.
inline std::array<double, 3> mean_color(const TextureMap& tex, const UvMask* mask = nullptr) {
  if (tex.channels() != 3) throw ShapeError("mean_color: expected 3 channels");
  if (mask && !mask->matches(tex)) throw ShapeError("mean_color: mask size mismatch");
  std::array<double, 3> sum{0, 0, 0};
  double wsum = 0.0;
  for (std::size_t p = 0; p < tex.pixels(); ++p) {
    const double w = mask ? (*mask)[p] : 1.0;
    wsum += w;
    for (int c = 0; c < 3; ++c) sum[c] += w * tex.data()[3 * p + c];
  }
  if (wsum <= 0.0) throw ParameterError("mean_color: empty mask");
  for (double& s : sum) s /= wsum;
  return sum;
}

}  // namespace facelayers
