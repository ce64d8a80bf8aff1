#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <random>

#include "facelayers/filter.hpp"
#include "facelayers/image_io.hpp"
#include "facelayers/parallel.hpp"
#include "facelayers/texture.hpp"

using namespace facelayers;
namespace fs = std::filesystem;

namespace {

TextureMap random_texture(int w, int h, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  TextureMap t(w, h, c);
  for (double& v : t.data()) v = u(rng);
  return t;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "facelayers_texture_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(TextureMap, DataLengthMatchesShape) {
  const TextureMap t(4, 3, 3);
  EXPECT_EQ(t.data().size(), 36u);
  EXPECT_THROW(TextureMap(4, 3, 3, std::vector<double>(35)), ShapeError);
  EXPECT_THROW(TextureMap(4, 3, 2), ShapeError);
  EXPECT_THROW(TextureMap(0, 3, 1), ShapeError);
}

TEST(TextureMap, InterleavedRowMajorIndexing) {
  TextureMap t(3, 2, 3);
  t.at(2, 1, 1) = 5.0;
  EXPECT_EQ(t.data()[(1 * 3 + 2) * 3 + 1], 5.0);
}

TEST(TextureMap, TaggedConstructionChecksRange) {
  EXPECT_NO_THROW(TextureMap::tagged(1, 2, 1, {0.0, 1.0}, TextureKind::unit));
  EXPECT_THROW(TextureMap::tagged(1, 2, 1, {0.0, 1.1}, TextureKind::unit), ParameterError);
  EXPECT_NO_THROW(TextureMap::tagged(1, 2, 1, {-1.0, 1.0}, TextureKind::signed_unit));
  EXPECT_THROW(TextureMap::tagged(1, 2, 1, {-1.5, 0.0}, TextureKind::signed_unit), ParameterError);
  EXPECT_THROW(TextureMap::tagged(1, 1, 1, {NAN}, TextureKind::generic), ParameterError);
  EXPECT_THROW(TextureMap::tagged(1, 1, 1, {-0.1}, TextureKind::non_negative), ParameterError);
}

TEST(UvMask, WeightsStayInUnitRange) {
  EXPECT_THROW(UvMask(2, 2, 1.5), ParameterError);
  EXPECT_THROW(UvMask(1, 2, std::vector<double>{0.0, -0.2}), ParameterError);
  UvMask m(2, 2, std::vector<double>{0.0, 0.4, 0.6, 1.0});
  EXPECT_EQ(m.count_valid(), 2u);
  EXPECT_TRUE(m.matches(TextureMap(2, 2, 3)));
  EXPECT_FALSE(m.matches(TextureMap(2, 3, 3)));
}

TEST(FaceRegions, RejectsOverlapAndEmpty) {
  UvMask a(2, 2, std::vector<double>{1, 0, 0, 0});
  UvMask b(2, 2, std::vector<double>{0, 1, 0, 0});
  UvMask c(2, 2, std::vector<double>{0, 0, 1, 0});
  UvMask d(2, 2, std::vector<double>{0, 0, 0, 1});
  EXPECT_NO_THROW((FaceRegions{a, b, c, d}.validate()));
  EXPECT_THROW((FaceRegions{a, a, c, d}.validate()), ParameterError);
  EXPECT_THROW((FaceRegions{a, b, c, UvMask(2, 2, 0.0)}.validate()), ParameterError);
}

// ---- gaussian blur

TEST(GaussianBlur, ConstantImageStaysConstant) {
  const TextureMap t(16, 12, 3, 0.5);
  const TextureMap b = gaussian_blur(t, 11);
  for (double v : b.data()) EXPECT_NEAR(v, 0.5, 1e-12);
}

TEST(GaussianBlur, UnitKernelIsIdentity) {
  const TextureMap t = random_texture(7, 5, 3, 1);
  EXPECT_EQ(gaussian_blur(t, 1), t);
}

TEST(GaussianBlur, ThreeTapImpulseCenterWeight) {
  // sigma(3) = 0.3 * (1 - 1) + 0.8 = 0.8; taps exp(-1/(2*0.64)), 1, exp(...)
  const double side = std::exp(-1.0 / (2.0 * 0.8 * 0.8));
  const double center = 1.0 / (1.0 + 2.0 * side);
  const TextureMap row(5, 1, 1, std::vector<double>{0, 0, 1, 0, 0});
  const TextureMap b = gaussian_blur(row, 3);
  EXPECT_NEAR(b.at(2, 0), center, 1e-12);
  EXPECT_NEAR(b.at(1, 0), side * center, 1e-12);
  EXPECT_NEAR(b.at(0, 0), 0.0, 1e-15);
}

TEST(GaussianBlur, RejectsEvenOrZeroKernel) {
  const TextureMap t(4, 4, 1);
  EXPECT_THROW(gaussian_blur(t, 0), ParameterError);
  EXPECT_THROW(gaussian_blur(t, 4), ParameterError);
  EXPECT_THROW(gaussian_blur(t, -3), ParameterError);
}

TEST(GaussianBlur, PreservesMeanOfInteriorSupportedImage) {
  TextureMap t(40, 40, 1);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int y = 10; y < 30; ++y)
    for (int x = 10; x < 30; ++x) t.at(x, y) = u(rng);
  const TextureMap b = gaussian_blur(t, 11);
  double s0 = 0, s1 = 0;
  for (std::size_t i = 0; i < t.size(); ++i) s0 += t.data()[i], s1 += b.data()[i];
  EXPECT_NEAR(s1 / t.size(), s0 / t.size(), 1e-6);
}

TEST(GaussianBlur, AdjointMatchesInnerProduct) {
  const TextureMap x = random_texture(9, 7, 3, 11, -1, 1);
  const TextureMap y = random_texture(9, 7, 3, 12, -1, 1);
  const TextureMap bx = gaussian_blur(x, 5);
  const TextureMap aty = gaussian_blur_adjoint(y, 5);
  double l = 0, r = 0;
  for (std::size_t i = 0; i < x.size(); ++i) l += bx.data()[i] * y.data()[i], r += x.data()[i] * aty.data()[i];
  EXPECT_NEAR(l, r, 1e-10);
}

// ---- diffuse fill

TEST(DiffuseFill, ConstantBoundaryFillsConstant) {
  const TextureMap t(20, 20, 3, 0.7);
  UvMask m(20, 20, 1.0);
  for (int y = 5; y < 14; ++y)
    for (int x = 3; x < 17; ++x) m.at(x, y) = 0.0;
  TextureMap holey = t;
  for (int y = 5; y < 14; ++y)
    for (int x = 3; x < 17; ++x)
      for (int c = 0; c < 3; ++c) holey.at(x, y, c) = 0.0;
  const TextureMap f = diffuse_fill(holey, m, {500, 1e-5});
  for (double v : f.data()) EXPECT_NEAR(v, 0.7, 1e-3);
}

TEST(DiffuseFill, MatchesDirectLaplaceSolveOnRamp) {
  const int n = 16;
  TextureMap t(n, n, 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) t.at(x, y) = static_cast<double>(x) / (n - 1);
  UvMask m(n, n, 1.0);
  for (int y = 5; y < 11; ++y)
    for (int x = 4; x < 12; ++x) m.at(x, y) = 0.0, t.at(x, y) = 0.0;

  // Direct sparse-free solve of the 4-neighbour Laplace system over the hole.
  std::vector<int> id(n * n, -1);
  int k = 0;
  for (int i = 0; i < n * n; ++i)
    if (!m.valid(i)) id[i] = k++;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const int r = id[y * n + x];
      if (r < 0) continue;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[0] >= n || q[1] < 0 || q[1] >= n) continue;
        a(r, r) += 1.0;
        const int j = id[q[1] * n + q[0]];
        if (j >= 0) a(r, j) -= 1.0;
        else b[r] += t.at(q[0], q[1]);
      }
    }
  const Eigen::VectorXd sol = a.lu().solve(b);

  const TextureMap f = diffuse_fill(t, m, {20000, 1e-12});
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (id[y * n + x] >= 0) {
        EXPECT_NEAR(f.at(x, y), sol[id[y * n + x]], 1e-6);
      }
      if (x > 0) {
        EXPECT_GE(f.at(x, y) + 1e-9, f.at(x - 1, y));
      }
    }
}

TEST(DiffuseFill, AllValidReturnsInput) {
  const TextureMap t = random_texture(8, 8, 3, 5);
  EXPECT_EQ(diffuse_fill(t, UvMask(8, 8, 1.0)), t);
}

TEST(DiffuseFill, AllInvalidThrows) {
  EXPECT_THROW(diffuse_fill(TextureMap(4, 4, 1), UvMask(4, 4, 0.0)), ParameterError);
}

TEST(DiffuseFill, ValidPixelsUntouchedAndMaximumPrinciple) {
  const TextureMap t = random_texture(24, 24, 3, 9, 0.2, 0.8);
  UvMask m(24, 24, 1.0);
  std::mt19937_64 rng(2);
  std::bernoulli_distribution hole(0.4);
  for (std::size_t i = 0; i < m.pixels(); ++i)
    if (hole(rng)) m[i] = 0.0;
  const TextureMap f = diffuse_fill(t, m);
  double lo = 1e9, hi = -1e9;
  for (std::size_t p = 0; p < m.pixels(); ++p)
    if (m.valid(p))
      for (int c = 0; c < 3; ++c) lo = std::min(lo, t.data()[3 * p + c]), hi = std::max(hi, t.data()[3 * p + c]);
  for (std::size_t p = 0; p < m.pixels(); ++p)
    for (int c = 0; c < 3; ++c) {
      const double v = f.data()[3 * p + c];
      if (m.valid(p)) {
        EXPECT_EQ(v, t.data()[3 * p + c]);
      }
      EXPECT_GE(v, lo - 1e-12);
      EXPECT_LE(v, hi + 1e-12);
    }
  EXPECT_TRUE(f.all_finite());
}

// ---- total variation

TEST(TotalVariation, ConstantIsZero) { EXPECT_EQ(total_variation(TextureMap(5, 5, 3, 0.3)), 0.0); }

TEST(TotalVariation, TwoPixelStep) {
  // |1 - 0| over 2 pixels.
  EXPECT_DOUBLE_EQ(total_variation(TextureMap(2, 1, 1, std::vector<double>{0.0, 1.0})), 0.5);
}

TEST(TotalVariation, SymmetricUnderComplement) {
  TextureMap a = random_texture(9, 6, 3, 21);
  TextureMap b = a;
  for (double& v : b.data()) v = 1.0 - v;
  EXPECT_NEAR(total_variation(a), total_variation(b), 1e-12);
}

TEST(TotalVariation, AbsolutelyHomogeneous) {
  const TextureMap a = random_texture(11, 7, 3, 22, -1, 1);
  for (double c : {0.0, 0.5, 3.0}) {
    TextureMap s = a;
    for (double& v : s.data()) v *= c;
    EXPECT_NEAR(total_variation(s), c * total_variation(a), 1e-6);
  }
}

TEST(TotalVariation, GradientMatchesFiniteDifferences) {
  const TextureMap a = random_texture(6, 5, 3, 23);
  TextureMap g(6, 5, 3);
  total_variation_grad(a, 2.0, g);
  const double h = 1e-7;
  for (std::size_t i = 0; i < a.size(); i += 7) {
    TextureMap p = a, m = a;
    p.data()[i] += h;
    m.data()[i] -= h;
    EXPECT_NEAR(g.data()[i], 2.0 * (total_variation(p) - total_variation(m)) / (2 * h), 1e-5);
  }
}

// ---- purity and threading

TEST(Determinism, FilteringIsBitIdenticalAcrossThreadCounts) {
  const TextureMap t = random_texture(33, 29, 3, 31);
  UvMask m(33, 29, 1.0);
  for (int y = 8; y < 20; ++y)
    for (int x = 5; x < 25; ++x) m.at(x, y) = 0.0;
  set_thread_count(1);
  const TextureMap b1 = gaussian_blur(t, 11);
  const TextureMap f1 = diffuse_fill(t, m);
  const double tv1 = total_variation(t);
  set_thread_count(4);
  EXPECT_EQ(gaussian_blur(t, 11), b1);
  EXPECT_EQ(diffuse_fill(t, m), f1);
  EXPECT_EQ(total_variation(t), tv1);
  set_thread_count(0);
}

// ---- file I/O

TEST(TextureIo, PfmRoundTripIsExactForFloats) {
  TextureMap t = random_texture(13, 7, 3, 41, -2, 2);
  for (double& v : t.data()) v = static_cast<float>(v);
  const fs::path p = temp_path("rt.pfm");
  write_texture(t, p);
  EXPECT_EQ(read_texture(p), t);

  TextureMap g = random_texture(5, 9, 1, 42);
  for (double& v : g.data()) v = static_cast<float>(v);
  write_pfm(g, temp_path("g.pfm"));
  EXPECT_EQ(read_pfm(temp_path("g.pfm")), g);
}

TEST(TextureIo, PngPreservesEndpoints) {
  const TextureMap t(2, 1, 3, std::vector<double>{0, 0, 0, 1, 1, 1});
  const fs::path p = temp_path("ends.png");
  write_texture(t, p);
  EXPECT_EQ(read_texture(p), t);
}

TEST(TextureIo, EveryPngCodeValueRoundTrips) {
  for (int code = 0; code < 256; ++code) {
    const auto c = static_cast<std::uint8_t>(code);
    EXPECT_EQ(encode_png_value(decode_png_value(c, PngEncoding::srgb), PngEncoding::srgb), c);
    EXPECT_EQ(encode_png_value(decode_png_value(c, PngEncoding::linear), PngEncoding::linear), c);
  }
}

TEST(TextureIo, PngQuantizationErrorWithinOneCode) {
  // Quantization happens on the sRGB-encoded value, so the bound holds there.
  // In linear terms the step near white is about 2.3 codes wide.
  for (int i = 0; i <= 10000; ++i) {
    const double lin = i / 10000.0;
    const double back = decode_png_value(encode_png_value(lin, PngEncoding::srgb), PngEncoding::srgb);
    EXPECT_LE(std::abs(linear_to_srgb(back) - linear_to_srgb(lin)), 0.5 / 255.0 + 1e-12);
    EXPECT_LE(std::abs(back - lin), 2.5 / 255.0);
  }
  TextureMap t = random_texture(16, 16, 3, 43);
  write_texture(t, temp_path("q.png"));
  const TextureMap r = read_texture(temp_path("q.png"));
  for (std::size_t i = 0; i < t.size(); ++i)
    EXPECT_LE(std::abs(linear_to_srgb(r.data()[i]) - linear_to_srgb(t.data()[i])), 0.5 / 255.0 + 1e-12);
}

TEST(TextureIo, MaskRoundTrip) {
  UvMask m(3, 2, std::vector<double>{0, 1, 1, 0, 1, 0});
  write_mask(m, temp_path("m.png"));
  EXPECT_EQ(read_mask(temp_path("m.png")), m);
}

TEST(TextureIo, ErrorsOnMissingOrUnsupported) {
  EXPECT_THROW(read_texture(temp_path("missing.pfm")), IoError);
  EXPECT_THROW(write_texture(TextureMap(2, 2, 3), temp_path("x.tga")), IoError);
  {
    std::ofstream junk(temp_path("junk.pfm"));
    junk << "P6\n1 1\n255\n";
  }
  EXPECT_THROW(read_texture(temp_path("junk.pfm")), IoError);
}
