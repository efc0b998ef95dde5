#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include <boost/multiprecision/cpp_int.hpp>

#include "support.hpp"

using namespace vitalcast;
using boost::multiprecision::cpp_rational;

namespace {

GrayImage ramp(int w, int h) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<std::uint8_t>(y * w + x);
  return img;
}

GrayImage random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> v(0, 255);
  GrayImage img(w, h);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(v(rng));
  return img;
}

// Exhaustive between-class variance w0*w1*(mu0-mu1)^2 in exact rationals; lowest t wins ties.
std::optional<int> otsu_oracle(const GrayImage& img) {
  std::optional<int> best;
  cpp_rational best_var = -1;
  for (int t = 0; t < 256; ++t) {
    cpp_rational n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (auto v : img.pixels()) {
      if (v <= t) {
        n0 += 1;
        s0 += v;
      } else {
        n1 += 1;
        s1 += v;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const cpp_rational d = s0 / n0 - s1 / n1;
    const cpp_rational var = n0 * n1 * d * d;
    if (var > best_var) {
      best_var = var;
      best = t;
    }
  }
  return best;
}

}  // namespace

TEST(Crop, CentreOfFourByFour) {
  const auto out = crop(ramp(4, 4), RoiSpec("c", 1, 1, 2, 2));
  ASSERT_EQ(out.width(), 2);
  ASSERT_EQ(out.height(), 2);
  EXPECT_EQ(std::vector<std::uint8_t>(out.pixels().begin(), out.pixels().end()),
            (std::vector<std::uint8_t>{5, 6, 9, 10}));
}

TEST(Crop, FullRoiIsIdentity) {
  const auto img = ramp(7, 5);
  EXPECT_EQ(crop(img, RoiSpec("all", 0, 0, 7, 5)), img);
}

TEST(Crop, RejectsBadRois) {
  EXPECT_THROW(RoiSpec("w0", 0, 0, 0, 3), Error);
  try {
    RoiSpec("w0", 0, 0, 0, 3);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidRoi);
  }
  try {
    crop(ramp(4, 4), RoiSpec("r", 3, 0, 2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RoiOutOfBounds);
  }
}

TEST(Resize, AlwaysConfiguredDimsAndDpi) {
  std::mt19937_64 rng(3);
  for (auto [w, h] : {std::pair{1, 1}, {13, 7}, {300, 120}, {90, 44}}) {
    const auto out = resize(random_image(rng, w, h));
    EXPECT_EQ(out.width(), 90);
    EXPECT_EQ(out.height(), 44);
    EXPECT_EQ(out.dpi(), 300);
  }
}

TEST(Resize, ConstantStaysConstant) {
  const auto out = resize(GrayImage(180, 88, 77));
  for (auto v : out.pixels()) ASSERT_EQ(v, 77);
}

TEST(Resize, EmptyInputFails) {
  try {
    resize(GrayImage());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyImage);
  }
}

TEST(Resize, ExactHalvingAveragesPairs) {
  // Pixel-centre alignment samples halfway between source pixels when halving.
  GrayImage img(4, 1, std::vector<std::uint8_t>{0, 100, 200, 50});
  const auto out = resize(img, 2, 1);
  EXPECT_EQ(out.at(0, 0), 50);
  EXPECT_EQ(out.at(1, 0), 125);
}

TEST(Sharpen, FactorOneIsIdentity) {
  std::mt19937_64 rng(5);
  const auto img = random_image(rng, 17, 11);
  EXPECT_EQ(sharpen(img, 1.0), img);
}

TEST(Sharpen, ConstantUnchanged) {
  const GrayImage img(9, 9, 130);
  for (double f : {0.0, 0.5, 4.0, 10.0}) EXPECT_EQ(sharpen(img, f), img);
}

TEST(Sharpen, ImpulseMatchesDirectConvolution) {
  GrayImage img(5, 5, 10);
  img.at(2, 2) = 200;
  const auto out = sharpen(img, 4.0);
  // Oracle in thirteenths: smooth*13 = 5*centre + sum of the 8 clamped neighbours.
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      long s13 = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int v = img.at(std::clamp(x + dx, 0, 4), std::clamp(y + dy, 0, 4));
          s13 += (dx == 0 && dy == 0) ? 5 * v : v;
        }
      const long num = s13 + 4 * (13L * img.at(x, y) - s13);  // (s + 4(v - s)) * 13
      const long rounded = (num >= 0 ? num + 6 : num - 6) / 13;
      const long expected = std::clamp(rounded, 0L, 255L);
      EXPECT_EQ(out.at(x, y), expected) << x << "," << y;
    }
  }
  EXPECT_EQ(out.at(2, 2), 255);
  EXPECT_EQ(out.at(1, 1), 0);
}

TEST(Binarize, OtsuTwoLevels) {
  GrayImage img(4, 1, std::vector<std::uint8_t>{10, 10, 200, 200});
  const auto b = binarize(img);
  EXPECT_EQ(std::vector<std::uint8_t>(b.pixels().begin(), b.pixels().end()),
            (std::vector<std::uint8_t>{0, 0, 255, 255}));
  EXPECT_EQ(otsu_threshold(img), otsu_oracle(img));
  EXPECT_EQ(*otsu_threshold(img), 10);
}

TEST(Binarize, ConstantImageUnderOtsuIsBlack) {
  const GrayImage img(6, 3, 180);
  EXPECT_FALSE(otsu_threshold(img).has_value());
  const auto b = binarize(img);
  for (auto v : b.pixels()) EXPECT_EQ(v, 0);
}

TEST(Binarize, FixedThreshold) {
  GrayImage img(2, 1, std::vector<std::uint8_t>{100, 200});
  const auto b = binarize(img, BinarizeParams::fixed(128));
  EXPECT_EQ(b.pixels()[0], 0);
  EXPECT_EQ(b.pixels()[1], 255);
  GrayImage edge(1, 1, std::vector<std::uint8_t>{128});
  EXPECT_EQ(binarize(edge, BinarizeParams::fixed(128)).pixels()[0], 0);
}

TEST(Binarize, OtsuMatchesExhaustiveSearch) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 40; ++i) {
    std::uniform_int_distribution<int> dim(1, 9);
    auto img = random_image(rng, dim(rng), dim(rng));
    if (i % 2) {
      for (auto& p : img.pixels()) p = static_cast<std::uint8_t>((p / 64) * 60 + 7);
    }
    const auto got = otsu_threshold(img);
    EXPECT_EQ(got ? std::optional<int>(*got) : std::nullopt, otsu_oracle(img)) << "image " << i;
  }
}

TEST(Binarize, OutputIsStrictlyBinary) {
  std::mt19937_64 rng(2);
  const auto b = binarize(random_image(rng, 20, 20));
  for (auto v : b.pixels()) EXPECT_TRUE(v == 0 || v == 255);
  EXPECT_THROW(BinaryImage(GrayImage(1, 1, 7)), Error);
}

TEST(GaussianBlur, SigmaZeroIdentityAndConstantPreserved) {
  std::mt19937_64 rng(9);
  const auto img = random_image(rng, 12, 8);
  EXPECT_EQ(gaussian_blur(img, 0.0), img);
  const GrayImage flat(10, 10, 91);
  EXPECT_EQ(gaussian_blur(flat, 0.8), flat);
  EXPECT_EQ(gaussian_blur(flat, 2.5), flat);
}

TEST(GaussianBlur, ImpulseMatchesDirectKernel) {
  GrayImage img(7, 7, 0);
  img.at(3, 3) = 255;
  const double sigma = 0.8;
  const auto out = gaussian_blur(img, sigma);
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  ASSERT_EQ(radius, 3);
  long double norm = 0;
  for (int k = -radius; k <= radius; ++k) norm += std::exp(-(long double)(k * k) / (2.0L * sigma * sigma));
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 7; ++x) {
      const long double gx = std::exp(-(long double)((x - 3) * (x - 3)) / (2.0L * sigma * sigma)) / norm;
      const long double gy = std::exp(-(long double)((y - 3) * (y - 3)) / (2.0L * sigma * sigma)) / norm;
      EXPECT_EQ(out.at(x, y), std::lround(255.0L * gx * gy)) << x << "," << y;
    }
  }
}

TEST(GaussianBlur, KernelSumsToOne) {
  for (double s : {0.3, 0.8, 1.7}) {
    const auto k = gaussian_kernel(s);
    EXPECT_EQ(k.size(), static_cast<std::size_t>(2 * std::ceil(3 * s) + 1));
    EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(GaussianBlur, PreservesMeanOnInteriorImage) {
  GrayImage img(40, 40, 0);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> v(0, 255);
  for (int y = 8; y < 32; ++y)
    for (int x = 8; x < 32; ++x) img.at(x, y) = static_cast<std::uint8_t>(v(rng));
  auto mean = [](const GrayImage& g) {
    return std::accumulate(g.pixels().begin(), g.pixels().end(), 0.0) / static_cast<double>(g.pixels().size());
  };
  EXPECT_NEAR(mean(gaussian_blur(img, 0.8)), mean(img), 1.0);
}

TEST(Preprocess, StagesMatchIndividualOps) {
  std::mt19937_64 rng(21);
  const auto frame = random_image(rng, 64, 48);
  const RoiSpec roi("hr", 5, 6, 40, 30);
  const auto s = preprocess_stages(frame, roi);
  const auto cropped = crop(frame, roi);
  const auto resized = resize(cropped);
  const auto sharpened = sharpen(resized, 4.0);
  const auto binary = binarize(sharpened);
  const auto blurred = gaussian_blur(binary.gray(), 0.8);
  EXPECT_EQ(s.cropped, cropped);
  EXPECT_EQ(s.resized, resized);
  EXPECT_EQ(s.sharpened, sharpened);
  EXPECT_EQ(s.binary, binary);
  EXPECT_EQ(s.blurred, blurred);
  EXPECT_EQ(preprocess_roi(frame, roi), blurred);
  EXPECT_EQ(preprocess_roi(frame, roi).dpi(), 300);
}

TEST(Preprocess, ConstantRoiGivesConstantOutput) {
  const auto out = preprocess_roi(GrayImage(50, 50, 140), RoiSpec("x", 10, 10, 20, 20));
  for (auto v : out.pixels()) EXPECT_EQ(v, out.pixels()[0]);
}

TEST(Preprocess, Deterministic) {
  std::mt19937_64 rng(8);
  const auto frame = random_image(rng, 30, 30);
  const RoiSpec roi("p", 0, 0, 30, 30);
  EXPECT_EQ(preprocess_roi(frame, roi), preprocess_roi(frame, roi));
}

TEST(ImageIo, PngRoundTripWithPhys) {
  testsupport::TempDir dir;
  std::mt19937_64 rng(1);
  auto img = random_image(rng, 33, 21);
  img.set_dpi(300);
  write_png(dir / "a.png", img);
  EXPECT_EQ(read_png(dir / "a.png"), img);

  const auto bytes = testsupport::slurp(dir / "a.png");
  const auto at = bytes.find("pHYs");
  ASSERT_NE(at, std::string::npos);
  auto be32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[off + i]);
    return v;
  };
  EXPECT_EQ(be32(at + 4), 11811u);
  EXPECT_EQ(be32(at + 8), 11811u);
  EXPECT_EQ(static_cast<int>(bytes[at + 12]), 1);  // unit: metre
}

TEST(ImageIo, PgmRoundTripAndDispatch) {
  testsupport::TempDir dir;
  const auto img = ramp(9, 4);
  write_pgm(dir / "a.pgm", img);
  EXPECT_EQ(read_pgm(dir / "a.pgm"), img);
  EXPECT_EQ(load_image(dir / "a.pgm"), img);
}

TEST(ImageIo, LumaWeights) {
  EXPECT_EQ(luma601(255, 0, 0), 76);
  EXPECT_EQ(luma601(0, 255, 0), 150);
  EXPECT_EQ(luma601(0, 0, 255), 29);
  EXPECT_EQ(luma601(200, 200, 200), 200);
}
