#pragma once

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "vitalcast/error.hpp"
#include "vitalcast/image.hpp"

namespace vitalcast {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Kept free of objects with destructors: libpng reports errors by longjmp.
inline bool png_write_rows(std::FILE* fp, png_uint_32 width, png_uint_32 height, png_bytepp rows, int dpi) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (dpi > 0) {
    const auto ppm = static_cast<png_uint_32>(dpi / 0.0254 + 0.5);
    png_set_pHYs(png, info, ppm, ppm, PNG_RESOLUTION_METER);
  }
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

/// Pixels-per-metre value written to the pHYs chunk for a given dpi (300 -> 11811).
inline unsigned dpi_to_ppm(int dpi) { return static_cast<unsigned>(dpi / 0.0254 + 0.5); }

inline void write_png(const std::filesystem::path& path, const GrayImage& img) {
  if (img.empty()) throw Error(Errc::EmptyImage, "refusing to write empty image " + path.string());
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
  auto px = img.pixels();
  for (int y = 0; y < img.height(); ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(px.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width()));
  }
  if (!detail::png_write_rows(fp.get(), static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()),
                              rows.data(), img.dpi())) {
    throw Error(Errc::IoFailure, "libpng failed writing " + path.string());
  }
  if (std::fflush(fp.get()) != 0) throw Error(Errc::IoFailure, "flush failed for " + path.string());
}

/// Reads any 8/16-bit PNG. Colour input is reduced to luma with BT.601 weights.
inline GrayImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(Errc::IoFailure, "cannot read png " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::IoFailure, "cannot decode png " + path.string() + ": " + msg);
  }
  const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
  if (!color) return GrayImage(w, h, std::move(buffer));
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = luma601(buffer[3 * i], buffer[3 * i + 1], buffer[3 * i + 2]);
  return GrayImage(w, h, std::move(gray));
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels().data()), static_cast<std::streamsize>(img.pixels().size()));
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

/// Binary PGM (P5), maxval <= 255, '#' comments allowed in the header.
inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        tok.push_back(c);
        break;
      }
    }
    while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) tok.push_back(c);
    return tok;
  };
  if (next_token() != "P5") throw Error(Errc::IoFailure, path.string() + " is not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw Error(Errc::IoFailure, "malformed PGM header in " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw Error(Errc::IoFailure, "unsupported PGM geometry in " + path.string());
  }
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (in.gcount() != static_cast<std::streamsize>(px.size())) {
    throw Error(Errc::IoFailure, "truncated PGM " + path.string());
  }
  return GrayImage(w, h, std::move(px));
}

/// Dispatches on extension: .pgm -> PGM, anything else -> PNG.
inline GrayImage load_image(const std::filesystem::path& path) {
  if (path.extension() == ".pgm") return read_pgm(path);
  return read_png(path);
}

}  // namespace vitalcast
