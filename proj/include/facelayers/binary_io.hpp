#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "facelayers/error.hpp"

namespace facelayers::binary {

// Little-endian chunked container. Each chunk is
//   tag[4] | dtype u32 (0 = f64, 1 = u32) | rows u64 | cols u64 | payload
// and the file starts with a 4-byte magic followed by a u32 chunk count.

enum class DType : std::uint32_t { f64 = 0, u32 = 1 };

struct Chunk {
  std::string tag;
  DType dtype = DType::f64;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> f64;
  std::vector<std::uint32_t> u32;
};

namespace detail {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated container");
  return to_little(v);
}

}  // namespace detail

inline void write_container(const std::filesystem::path& path, std::string_view magic,
                            const std::vector<Chunk>& chunks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(magic.data(), 4);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(chunks.size()));
  for (const auto& c : chunks) {
    std::string tag = c.tag;
    tag.resize(4, ' ');
    out.write(tag.data(), 4);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.dtype));
    detail::put<std::uint64_t>(out, c.rows);
    detail::put<std::uint64_t>(out, c.cols);
    if (c.dtype == DType::f64)
      for (double v : c.f64) detail::put<double>(out, v);
    else
      for (std::uint32_t v : c.u32) detail::put<std::uint32_t>(out, v);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<Chunk> read_container(const std::filesystem::path& path, std::string_view magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  char m[4];
  in.read(m, 4);
  if (!in || std::string_view(m, 4) != magic)
    throw IoError("bad magic (expected " + std::string(magic) + "): " + path.string());
  const auto count = detail::get<std::uint32_t>(in);
  std::vector<Chunk> chunks;
  for (std::uint32_t i = 0; i < count; ++i) {
    Chunk c;
    char tag[4];
    in.read(tag, 4);
    if (!in) throw IoError("truncated container: " + path.string());
    c.tag.assign(tag, 4);
    const auto dt = detail::get<std::uint32_t>(in);
    if (dt > 1) throw IoError("unknown chunk dtype in " + path.string());
    c.dtype = static_cast<DType>(dt);
    c.rows = detail::get<std::uint64_t>(in);
    c.cols = detail::get<std::uint64_t>(in);
    const std::uint64_t n = c.rows * c.cols;
    if (n > (std::uint64_t{1} << 34)) throw IoError("implausible chunk size in " + path.string());
    if (c.dtype == DType::f64) {
      c.f64.resize(n);
      for (auto& v : c.f64) v = detail::get<double>(in);
    } else {
      c.u32.resize(n);
      for (auto& v : c.u32) v = detail::get<std::uint32_t>(in);
    }
    chunks.push_back(std::move(c));
  }
  return chunks;
}

inline const Chunk& find_chunk(const std::vector<Chunk>& chunks, std::string_view tag) {
  for (const auto& c : chunks)
    if (c.tag == tag) return c;
  throw IoError("missing chunk '" + std::string(tag) + "'");
}

inline Chunk f64_chunk(std::string tag, std::uint64_t rows, std::uint64_t cols, const double* data) {
  Chunk c;
  c.tag = std::move(tag);
  c.dtype = DType::f64;
  c.rows = rows;
  c.cols = cols;
  c.f64.assign(data, data + rows * cols);
  return c;
}

inline Chunk u32_chunk(std::string tag, std::uint64_t rows, std::uint64_t cols, std::vector<std::uint32_t> data) {
  Chunk c;
  c.tag = std::move(tag);
  c.dtype = DType::u32;
  c.rows = rows;
  c.cols = cols;
  c.u32 = std::move(data);
  return c;
}

}  // namespace facelayers::binary
