#pragma once

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "facelayers/error.hpp"
#include "facelayers/texture.hpp"

namespace facelayers {

inline double srgb_to_linear(double s) {
  return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
}

inline double linear_to_srgb(double l) {
  return l <= 0.0031308 ? 12.92 * l : 1.055 * std::pow(l, 1.0 / 2.4) - 0.055;
}

// How 8-bit PNG code values relate to stored values.
enum class PngEncoding {
  srgb,   // colour data: sRGB transfer on read/write
  linear  // masks and mattes: value = code / 255
};

inline std::uint8_t encode_png_value(double v, PngEncoding enc) {
  v = std::clamp(v, 0.0, 1.0);
  if (enc == PngEncoding::srgb) v = linear_to_srgb(v);
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline double decode_png_value(std::uint8_t code, PngEncoding enc) {
  const double s = code / 255.0;
  return enc == PngEncoding::srgb ? srgb_to_linear(s) : s;
}

namespace detail {
inline float swap_bytes(float f) {
  return std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
}
}  // namespace detail

// ---------------------------------------------------------------------------
// PFM: "PF" (3 channels) / "Pf" (1 channel), little-endian (scale -1.0),
// rows stored bottom-to-top.

inline void write_pfm(const TextureMap& tex, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << (tex.channels() == 3 ? "PF" : "Pf") << '\n'
      << tex.width() << ' ' << tex.height() << '\n'
      << "-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(tex.width()) * tex.channels());
  for (int y = tex.height() - 1; y >= 0; --y) {
    auto src = tex.row(y);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(src[i]);
    if constexpr (std::endian::native == std::endian::big)
      for (float& f : row) f = detail::swap_bytes(f);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline TextureMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();
  if (!in || (magic != "PF" && magic != "Pf") || width <= 0 || height <= 0 || scale == 0.0)
    throw IoError("malformed PFM header: " + path.string());
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  TextureMap tex(width, height, channels);
  std::vector<float> row(static_cast<std::size_t>(width) * channels);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw IoError("truncated PFM data: " + path.string());
    const bool swap = little != (std::endian::native == std::endian::little);
    auto dst = tex.row(y);
    for (std::size_t i = 0; i < row.size(); ++i) {
      float f = row[i];
      if (swap) f = detail::swap_bytes(f);
      dst[i] = static_cast<double>(f);
    }
  }
  if (!tex.all_finite()) throw IoError("PFM contains non-finite values: " + path.string());
  return tex;
}

// ---------------------------------------------------------------------------
// 8-bit PNG through libpng's simplified API.

inline void write_png(const TextureMap& tex, const std::filesystem::path& path,
                      PngEncoding enc = PngEncoding::srgb) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(tex.width());
  image.height = static_cast<png_uint_32>(tex.height());
  image.format = tex.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(tex.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = encode_png_value(tex.data()[i], enc);
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("PNG write failed (" + std::string(image.message) + "): " + path.string());
}

inline TextureMap read_png(const std::filesystem::path& path, PngEncoding enc = PngEncoding::srgb) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IoError("cannot read PNG (" + std::string(image.message) + "): " + path.string());
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const int channels = color ? 3 : 1;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("PNG decode failed (" + std::string(image.message) + "): " + path.string());
  }
  TextureMap tex(static_cast<int>(image.width), static_cast<int>(image.height), channels);
  for (std::size_t i = 0; i < tex.size(); ++i) tex.data()[i] = decode_png_value(buf[i], enc);
  return tex;
}

// ---------------------------------------------------------------------------

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Format chosen by extension: .pfm (raw linear float32) or .png (sRGB 8-bit).
inline TextureMap read_texture(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  const std::string ext = lower_extension(path);
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".png") return read_png(path, PngEncoding::srgb);
  throw IoError("unsupported texture format: " + path.string());
}

inline void write_texture(const TextureMap& tex, const std::filesystem::path& path) {
  if (tex.channels() != 1 && tex.channels() != 3)
    throw IoError("unsupported channel count for " + path.string());
  const std::string ext = lower_extension(path);
  if (ext == ".pfm") return write_pfm(tex, path);
  if (ext == ".png") return write_png(tex, path, PngEncoding::srgb);
  throw IoError("unsupported texture format: " + path.string());
}

// Masks are single-channel PNGs, 255 = valid.
inline UvMask read_mask(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  TextureMap t = read_png(path, PngEncoding::linear);
  if (t.channels() != 1) throw IoError("mask PNG must be single-channel: " + path.string());
  return UvMask(t.width(), t.height(), t.data());
}

inline void write_mask(const UvMask& mask, const std::filesystem::path& path) {
  write_png(TextureMap(mask.width(), mask.height(), 1, mask.weights()), path, PngEncoding::linear);
}

}  // namespace facelayers
