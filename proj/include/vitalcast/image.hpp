#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vitalcast/error.hpp"

namespace vitalcast {

/// Row-major 8-bit grayscale raster. dpi is carried as metadata only.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0, int dpi = 0)
      : width_(width), height_(height), pixels_(checked_area(width, height), fill), dpi_(dpi) {}
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels, int dpi = 0)
      : width_(width), height_(height), pixels_(std::move(pixels)), dpi_(dpi) {
    if (pixels_.size() != checked_area(width, height)) {
      throw Error(Errc::InvalidArgument, "pixel buffer size does not match dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int dpi() const noexcept { return dpi_; }
  void set_dpi(int dpi) noexcept { dpi_ = dpi; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }

  /// Clamp-to-edge access.
  std::uint8_t clamped(int x, int y) const {
    return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  friend bool operator==(const GrayImage& a, const GrayImage& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.pixels_ == b.pixels_;
  }

 private:
  static std::size_t checked_area(int width, int height) {
    if (width < 0 || height < 0) throw Error(Errc::InvalidArgument, "negative image dimensions");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
  int dpi_ = 0;
};

/// Grayscale raster restricted to {0, 255}.
class BinaryImage {
 public:
  BinaryImage() = default;
  BinaryImage(int width, int height) : image_(width, height, 0) {}
  explicit BinaryImage(GrayImage image) : image_(std::move(image)) {
    for (auto v : image_.pixels()) {
      if (v != 0 && v != 255) throw Error(Errc::InvalidArgument, "binary image pixel not in {0,255}");
    }
  }

  int width() const noexcept { return image_.width(); }
  int height() const noexcept { return image_.height(); }
  bool empty() const noexcept { return image_.empty(); }
  bool on(int x, int y) const { return image_.at(x, y) != 0; }
  void set(int x, int y, bool value) { image_.at(x, y) = value ? 255 : 0; }
  std::span<const std::uint8_t> pixels() const noexcept { return image_.pixels(); }
  const GrayImage& gray() const noexcept { return image_; }

  friend bool operator==(const BinaryImage& a, const BinaryImage& b) { return a.image_ == b.image_; }

 private:
  GrayImage image_;
};

/// Named rectangle of a frame holding one on-screen metric.
class RoiSpec {
 public:
  RoiSpec(std::string channel, int x, int y, int w, int h)
      : channel_(std::move(channel)), x_(x), y_(y), w_(w), h_(h) {
    if (w <= 0 || h <= 0) throw Error(Errc::InvalidRoi, "roi '" + channel_ + "' must have w>0 and h>0");
    if (x < 0 || y < 0) throw Error(Errc::InvalidRoi, "roi '" + channel_ + "' origin must be non-negative");
  }

  const std::string& channel() const noexcept { return channel_; }
  int x() const noexcept { return x_; }
  int y() const noexcept { return y_; }
  int w() const noexcept { return w_; }
  int h() const noexcept { return h_; }

  bool fits(int width, int height) const noexcept {
    return static_cast<long>(x_) + w_ <= width && static_cast<long>(y_) + h_ <= height;
  }
  bool overlaps(const RoiSpec& o) const noexcept {
    return x_ < o.x_ + o.w_ && o.x_ < x_ + w_ && y_ < o.y_ + o.h_ && o.y_ < y_ + h_;
  }

  friend bool operator==(const RoiSpec&, const RoiSpec&) = default;

 private:
  std::string channel_;
  int x_, y_, w_, h_;
};

inline std::uint8_t clamp_to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

/// ITU-R BT.601 luma.
inline std::uint8_t luma601(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return clamp_to_byte(0.299 * r + 0.587 * g + 0.114 * b);
}

inline GrayImage crop(const GrayImage& img, const RoiSpec& roi) {
  if (!roi.fits(img.width(), img.height())) {
    throw Error(Errc::RoiOutOfBounds, "roi '" + roi.channel() + "' exceeds " + std::to_string(img.width()) +
                                          "x" + std::to_string(img.height()) + " frame");
  }
  GrayImage out(roi.w(), roi.h(), 0, img.dpi());
  for (int y = 0; y < roi.h(); ++y) {
    for (int x = 0; x < roi.w(); ++x) out.at(x, y) = img.at(roi.x() + x, roi.y() + y);
  }
  return out;
}

/// Bilinear resampling with pixel-centre alignment; same-size input is returned unchanged.
inline GrayImage resize(const GrayImage& img, int width = 90, int height = 44, int dpi = 300) {
  if (img.empty()) throw Error(Errc::EmptyImage, "cannot resize an empty image");
  if (width <= 0 || height <= 0) throw Error(Errc::InvalidArgument, "resize target must be positive");
  GrayImage out(width, height, 0, dpi);
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double wx = fx - x0;
      const double top = img.at(x0, y0) * (1.0 - wx) + img.at(x1, y0) * wx;
      const double bottom = img.at(x0, y1) * (1.0 - wx) + img.at(x1, y1) * wx;
      out.at(x, y) = clamp_to_byte(top * (1.0 - wy) + bottom * wy);
    }
  }
  return out;
}

/// Smoothing kernel used by sharpen: centre weight 5, the eight neighbours 1, normalised by 13.
inline constexpr std::array<double, 9> kSmoothKernel = {1 / 13.0, 1 / 13.0, 1 / 13.0, 1 / 13.0, 5 / 13.0,
                                                         1 / 13.0, 1 / 13.0, 1 / 13.0, 1 / 13.0};

inline double smoothed_at(const GrayImage& img, int x, int y) {
  double acc = 0.0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      acc += kSmoothKernel[static_cast<std::size_t>((dy + 1) * 3 + (dx + 1))] * img.clamped(x + dx, y + dy);
    }
  }
  return acc;
}

/// out = clamp(smooth + factor * (img - smooth)). factor 1 is the identity, 0 yields the smoothed image.
inline GrayImage sharpen(const GrayImage& img, double factor = 4.0) {
  if (!(factor >= 0.0)) throw Error(Errc::InvalidArgument, "sharpen factor must be >= 0");
  GrayImage out(img.width(), img.height(), 0, img.dpi());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double s = smoothed_at(img, x, y);
      out.at(x, y) = clamp_to_byte(s + factor * (img.at(x, y) - s));
    }
  }
  return out;
}

using Histogram = std::array<std::uint64_t, 256>;

inline Histogram histogram(const GrayImage& img) {
  Histogram h{};
  for (auto v : img.pixels()) ++h[v];
  return h;
}

namespace detail {

using u128 = unsigned __int128;

// a/b < c/d for non-negative a, c and positive b, d, without overflow for
// b, d < 2^64 and a, c < 2^128.
inline bool fraction_less(u128 a, u128 b, u128 c, u128 d) {
  const u128 qa = a / b, qc = c / d;
  if (qa != qc) return qa < qc;
  return (a % b) * d < (c % d) * b;
}

}  // namespace detail

/// Otsu threshold over the 256 candidate levels. Class 0 is {v <= t}, class 1 is {v > t}.
/// Between-class variance is compared exactly in integer arithmetic; ties resolve to the
/// lowest threshold. Returns nullopt when no candidate splits the image (constant image).
inline std::optional<std::uint8_t> otsu_threshold(const Histogram& hist) {
  std::uint64_t total = 0, sum = 0;
  for (int v = 0; v < 256; ++v) {
    total += hist[static_cast<std::size_t>(v)];
    sum += hist[static_cast<std::size_t>(v)] * static_cast<std::uint64_t>(v);
  }
  // sigma_b^2 * N^2 = D^2 / (n0 * n1), D = s0 * N - S * n0.
  std::optional<std::uint8_t> best;
  detail::u128 best_num = 0, best_den = 1;
  std::uint64_t n0 = 0, s0 = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += hist[static_cast<std::size_t>(t)];
    s0 += hist[static_cast<std::size_t>(t)] * static_cast<std::uint64_t>(t);
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const __int128 d = static_cast<__int128>(s0) * total - static_cast<__int128>(sum) * n0;
    const detail::u128 mag = static_cast<detail::u128>(d < 0 ? -d : d);
    const detail::u128 num = mag * mag;
    const detail::u128 den = static_cast<detail::u128>(n0) * n1;
    if (!best || detail::fraction_less(best_num, best_den, num, den)) {
      best = static_cast<std::uint8_t>(t);
      best_num = num;
      best_den = den;
    }
  }
  return best;
}

inline std::optional<std::uint8_t> otsu_threshold(const GrayImage& img) { return otsu_threshold(histogram(img)); }

struct BinarizeParams {
  enum class Method { Otsu, Fixed };
  Method method = Method::Otsu;
  std::uint8_t fixed_threshold = 128;

  static BinarizeParams otsu() { return {}; }
  static BinarizeParams fixed(std::uint8_t t) { return {Method::Fixed, t}; }
};

/// Pixels strictly above the threshold become 255. A constant image under Otsu maps to all 0.
inline BinaryImage binarize(const GrayImage& img, const BinarizeParams& params = {}) {
  if (img.empty()) throw Error(Errc::EmptyImage, "cannot binarize an empty image");
  std::optional<std::uint8_t> threshold;
  if (params.method == BinarizeParams::Method::Fixed) {
    threshold = params.fixed_threshold;
  } else {
    threshold = otsu_threshold(img);
  }
  BinaryImage out(img.width(), img.height());
  if (!threshold) return out;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out.set(x, y, img.at(x, y) > *threshold);
  }
  return out;
}

/// Normalised 1-D Gaussian taps, radius ceil(3 sigma). sigma 0 gives the single tap {1}.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0)) throw Error(Errc::InvalidArgument, "blur sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-(k * k) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(k + radius)] = w;
    total += w;
  }
  for (auto& w : taps) w /= total;
  return taps;
}

/// Separable Gaussian blur with clamp-to-edge borders; rounding happens once, after both passes.
inline GrayImage gaussian_blur(const GrayImage& img, double sigma = 0.8) {
  const auto taps = gaussian_kernel(sigma);
  if (taps.size() == 1 || img.empty()) return img;
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = img.width(), h = img.height();
  std::vector<double> horizontal(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] * img.clamped(x + k, y);
      }
      horizontal[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  GrayImage out(w, h, 0, img.dpi());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int yy = std::clamp(y + k, 0, h - 1);
        acc += taps[static_cast<std::size_t>(k + radius)] * horizontal[static_cast<std::size_t>(yy) * w + x];
      }
      out.at(x, y) = clamp_to_byte(acc);
    }
  }
  return out;
}

struct PreprocessParams {
  int width = 90;
  int height = 44;
  int dpi = 300;
  double sharpen_factor = 4.0;
  BinarizeParams binarize{};
  double blur_sigma = 0.8;
};

struct PreprocessStages {
  GrayImage cropped;
  GrayImage resized;
  GrayImage sharpened;
  BinaryImage binary;
  GrayImage blurred;
};

/// crop -> resize -> sharpen -> binarize -> blur, keeping every intermediate.
inline PreprocessStages preprocess_stages(const GrayImage& frame, const RoiSpec& roi,
                                          const PreprocessParams& params = {}) {
  PreprocessStages s;
  s.cropped = crop(frame, roi);
  s.resized = resize(s.cropped, params.width, params.height, params.dpi);
  s.sharpened = sharpen(s.resized, params.sharpen_factor);
  s.binary = binarize(s.sharpened, params.binarize);
  s.blurred = gaussian_blur(s.binary.gray(), params.blur_sigma);
  s.blurred.set_dpi(params.dpi);
  return s;
}

inline GrayImage preprocess_roi(const GrayImage& frame, const RoiSpec& roi, const PreprocessParams& params = {}) {
  return preprocess_stages(frame, roi, params).blurred;
}

}  // namespace vitalcast
