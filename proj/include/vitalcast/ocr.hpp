#pragma once

#include <stdlib.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vitalcast/csv.hpp"
#include "vitalcast/error.hpp"
#include "vitalcast/glyphs.hpp"
#include "vitalcast/image.hpp"
#include "vitalcast/image_io.hpp"
#include "vitalcast/parallel.hpp"
#include "vitalcast/subprocess.hpp"
#include "vitalcast/video_prep.hpp"

namespace vitalcast {

inline constexpr const char* kOcrEngineEnv = "VITALCAST_OCR_ENGINE";

// ---------------------------------------------------------------------------
// Plausibility ranges

struct ChannelRange {
  std::string channel;
  long min = 0;
  long max = 0;
};

struct RangeTable {
  std::map<std::string, ChannelRange> ranges;
  bool enabled = true;

  void set(ChannelRange r) {
    if (r.min > r.max) throw Error(Errc::InvalidArgument, "range for '" + r.channel + "' has min > max");
    ranges[r.channel] = std::move(r);
  }
  const ChannelRange* find(const std::string& channel) const {
    auto it = ranges.find(channel);
    return it == ranges.end() ? nullptr : &it->second;
  }
};

inline RangeTable default_ranges() {
  RangeTable t;
  t.set({"heart_rate", 25, 250});
  t.set({"power", 0, 2500});
  return t;
}

/// Accepts raw OCR text iff, after trimming whitespace, it is a run of decimal digits whose
/// value lies in the channel's range. Channels without a range (or with gating off) only
/// need to be well-formed.
inline std::optional<long> parse_reading(std::string_view raw_text, const std::string& channel,
                                         const RangeTable& ranges = default_ranges()) {
  const auto text = trim(raw_text);
  if (text.empty() || text.size() > 9) return std::nullopt;
  if (!std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) return std::nullopt;
  const long value = std::stol(std::string(text));
  if (ranges.enabled) {
    if (const auto* r = ranges.find(channel); r && (value < r->min || value > r->max)) return std::nullopt;
  }
  return value;
}

// ---------------------------------------------------------------------------
// Template matcher

struct GlyphMatch {
  char symbol = '?';
  double score = 0.0;
};

/// Box-filters a binary image onto a width x height grid; a cell is on when at least half of
/// its source area is foreground.
inline BinaryImage area_resample(const BinaryImage& src, int width, int height) {
  BinaryImage out(width, height);
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int cy = 0; cy < height; ++cy) {
    const double y0 = cy * sy, y1 = (cy + 1) * sy;
    for (int cx = 0; cx < width; ++cx) {
      const double x0 = cx * sx, x1 = (cx + 1) * sx;
      double covered = 0.0;
      for (int y = static_cast<int>(y0); y < static_cast<int>(std::ceil(y1)) && y < src.height(); ++y) {
        const double wy = std::min(y1, y + 1.0) - std::max(y0, static_cast<double>(y));
        for (int x = static_cast<int>(x0); x < static_cast<int>(std::ceil(x1)) && x < src.width(); ++x) {
          if (!src.on(x, y)) continue;
          covered += wy * (std::min(x1, x + 1.0) - std::max(x0, static_cast<double>(x)));
        }
      }
      out.set(cx, cy, covered >= 0.5 * sx * sy);
    }
  }
  return out;
}

/// Best template by pixel agreement (agreeing pixels / template pixels). A glyph whose size
/// differs from a template is area-resampled to that template's size first. Ties go to the
/// earlier template.
inline GlyphMatch template_match_digit(const BinaryImage& glyph, const GlyphSet& templates) {
  const auto px = glyph.pixels();
  if (glyph.empty() || std::none_of(px.begin(), px.end(), [](auto v) { return v != 0; })) {
    throw Error(Errc::NoGlyphFound, "glyph has no foreground pixels");
  }
  GlyphMatch best;
  bool have = false;
  for (const auto& t : templates) {
    const int tw = t.image.width(), th = t.image.height();
    const BinaryImage sample =
        (glyph.width() == tw && glyph.height() == th) ? glyph : area_resample(glyph, tw, th);
    int agree = 0;
    for (int y = 0; y < th; ++y) {
      for (int x = 0; x < tw; ++x) agree += sample.on(x, y) == t.image.on(x, y);
    }
    const double score = static_cast<double>(agree) / (tw * th);
    if (!have || score > best.score) {
      best = {t.symbol, score};
      have = true;
    }
  }
  if (!have) throw Error(Errc::InvalidArgument, "empty template set");
  return best;
}

/// Clears 8-connected foreground components smaller than min_pixels.
inline BinaryImage remove_specks(const BinaryImage& img, int min_pixels) {
  BinaryImage out = img;
  const int w = img.width(), h = img.height();
  std::vector<char> seen(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
  std::vector<std::pair<int, int>> component, stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!img.on(x0, y0) || seen[static_cast<std::size_t>(y0 * w + x0)]) continue;
      component.clear();
      stack.assign(1, {x0, y0});
      seen[static_cast<std::size_t>(y0 * w + x0)] = 1;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        component.emplace_back(x, y);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || !img.on(nx, ny)) continue;
            auto& mark = seen[static_cast<std::size_t>(ny * w + nx)];
            if (!mark) {
              mark = 1;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
      if (static_cast<int>(component.size()) < min_pixels) {
        for (const auto& [x, y] : component) out.set(x, y, false);
      }
    }
  }
  return out;
}

/// Splits a binary line image into glyphs at blank columns. Each glyph is cropped to its own
/// bounding box. Connected components with fewer than min_pixels pixels are specks and are
/// cleared first so they cannot stretch a neighbouring glyph's box.
inline std::vector<BinaryImage> segment_glyphs(const BinaryImage& line, int min_pixels = 4) {
  const BinaryImage img = remove_specks(line, min_pixels);
  std::vector<int> column_counts(static_cast<std::size_t>(img.width()), 0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) column_counts[static_cast<std::size_t>(x)] += img.on(x, y);
  }
  std::vector<BinaryImage> glyphs;
  int x = 0;
  while (x < img.width()) {
    if (column_counts[static_cast<std::size_t>(x)] == 0) {
      ++x;
      continue;
    }
    const int start = x;
    int pixels = 0;
    while (x < img.width() && column_counts[static_cast<std::size_t>(x)] > 0) pixels += column_counts[static_cast<std::size_t>(x++)];
    if (pixels < min_pixels) continue;
    int top = img.height(), bottom = -1;
    for (int y = 0; y < img.height(); ++y) {
      for (int cx = start; cx < x; ++cx) {
        if (img.on(cx, y)) {
          top = std::min(top, y);
          bottom = std::max(bottom, y);
          break;
        }
      }
    }
    BinaryImage glyph(x - start, bottom - top + 1);
    for (int y = top; y <= bottom; ++y) {
      for (int cx = start; cx < x; ++cx) glyph.set(cx - start, y - top, img.on(cx, y));
    }
    glyphs.push_back(std::move(glyph));
  }
  return glyphs;
}

// ---------------------------------------------------------------------------
// Recognizer

struct Recognition {
  std::string raw_text;
  double confidence = 0.0;
};

struct RecognizerSpec {
  enum class Kind { Template, External };
  Kind kind = Kind::Template;
  std::optional<std::string> engine_path;
  std::string char_whitelist = "0123456789";
  int page_seg_mode = 7;  // single text line
  std::optional<GlyphSet> templates;

  static RecognizerSpec template_matcher() { return {}; }
  static RecognizerSpec external(std::optional<std::string> path = std::nullopt) {
    RecognizerSpec s;
    s.kind = Kind::External;
    s.engine_path = std::move(path);
    return s;
  }
};

namespace detail {

inline Recognition parse_engine_output(const std::string& out) {
  Recognition rec;
  if (out.rfind("level\t", 0) != 0) {
    rec.raw_text = std::string(trim(out.substr(0, out.find('\n'))));
    return rec;
  }
  std::istringstream lines(out);
  std::string line;
  std::getline(lines, line);
  std::vector<std::string> words;
  double conf_sum = 0.0;
  int conf_n = 0;
  while (std::getline(lines, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 11 || cols[0] != "5") continue;
    const auto conf = parse_double(cols[10]);
    std::string text = cols.size() > 11 ? std::string(trim(cols[11])) : std::string();
    if (text.empty()) continue;
    words.push_back(std::move(text));
    if (conf && *conf >= 0.0) {
      conf_sum += *conf;
      ++conf_n;
    }
  }
  for (std::size_t i = 0; i < words.size(); ++i) rec.raw_text += (i ? " " : "") + words[i];
  if (conf_n > 0 && !rec.raw_text.empty()) rec.confidence = std::clamp(conf_sum / conf_n / 100.0, 0.0, 1.0);
  return rec;
}

// mkstemps-backed scratch file, removed on destruction.
class ScratchFile {
 public:
  explicit ScratchFile(const std::string& suffix) {
    auto pattern = (std::filesystem::temp_directory_path() / ("vitalcast-XXXXXX" + suffix)).string();
    const int fd = ::mkstemps(pattern.data(), static_cast<int>(suffix.size()));
    if (fd < 0) throw Error(Errc::IoFailure, "cannot create scratch file");
    ::close(fd);
    path_ = pattern;
  }
  ~ScratchFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  ScratchFile(const ScratchFile&) = delete;
  ScratchFile& operator=(const ScratchFile&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace detail

/// Pluggable recognizer: the built-in template matcher or a Tesseract-compatible CLI.
/// Construction resolves the engine, so a missing engine fails before any frame is read.
class Recognizer {
 public:
  explicit Recognizer(RecognizerSpec spec) : spec_(std::move(spec)) {
    if (spec_.kind == RecognizerSpec::Kind::External) {
      std::vector<std::string> candidates;
      if (spec_.engine_path && !spec_.engine_path->empty()) {
        candidates.push_back(*spec_.engine_path);
      } else {
        if (const char* env = std::getenv(kOcrEngineEnv); env && *env) candidates.emplace_back(env);
        candidates.emplace_back("tesseract");
      }
      for (const auto& c : candidates) {
        if (auto found = resolve_executable(c)) {
          engine_ = *found;
          break;
        }
      }
      if (engine_.empty()) throw Error(Errc::EngineMissing, "OCR engine not found (set ocr_engine_path or " + std::string(kOcrEngineEnv) + ")");
    }
  }

  const RecognizerSpec& spec() const noexcept { return spec_; }

  /// Engine arguments after the input/output operands; recorded in run manifests.
  std::vector<std::string> engine_flags() const {
    return {"--psm", std::to_string(spec_.page_seg_mode), "-c", "tessedit_char_whitelist=" + spec_.char_whitelist, "tsv"};
  }

  std::string version() const {
    if (spec_.kind == RecognizerSpec::Kind::Template) return "template-matcher 7x10";
    auto r = run_process({engine_.string(), "--version"});
    const auto& text = r.out.empty() ? r.err : r.out;
    auto line = text.substr(0, text.find('\n'));
    return line.empty() ? "unknown" : line;
  }

  Recognition recognize(const GrayImage& img) const {
    if (img.empty()) throw Error(Errc::EmptyImage, "cannot recognize an empty image");
    return spec_.kind == RecognizerSpec::Kind::Template ? recognize_template(img) : recognize_external(img);
  }

 private:
  Recognition recognize_template(const GrayImage& img) const {
    const auto& glyph_set = spec_.templates ? *spec_.templates : shipped_glyphs();
    const auto glyphs = segment_glyphs(binarize(img, BinarizeParams::fixed(127)));
    Recognition rec;
    if (glyphs.empty()) return rec;
    double total = 0.0;
    for (const auto& g : glyphs) {
      const auto m = template_match_digit(g, glyph_set);
      rec.raw_text += m.symbol;
      total += m.score;
    }
    rec.confidence = total / static_cast<double>(glyphs.size());
    return rec;
  }

  Recognition recognize_external(const GrayImage& img) const {
    detail::ScratchFile scratch(".png");
    write_png(scratch.path(), img);
    std::vector<std::string> argv{engine_.string(), scratch.path().string(), "stdout"};
    for (auto& f : engine_flags()) argv.push_back(std::move(f));
    auto r = run_process(argv);
    if (r.exit_code != 0) {
      throw Error(Errc::EngineFailure, "OCR engine exit " + std::to_string(r.exit_code) + ": " + r.err);
    }
    return detail::parse_engine_output(r.out);
  }

  RecognizerSpec spec_;
  std::filesystem::path engine_;
};

// ---------------------------------------------------------------------------
// Series extraction

struct Reading {
  long t_seconds = 0;
  std::string channel;
  std::string raw_text;
  std::optional<long> value;
  double confidence = 0.0;

  friend bool operator==(const Reading&, const Reading&) = default;
};

struct FrameError {
  long t_seconds = 0;
  std::string channel;  // empty when the whole frame failed to load
  std::string message;
};

struct ExtractResult {
  std::map<std::string, std::vector<Reading>> series;
  std::vector<FrameError> errors;
};

struct ExtractOptions {
  PreprocessParams preprocess{};
  std::size_t jobs = 0;
};

using FrameLoader = std::function<GrayImage(std::size_t)>;

/// One Reading per (frame, roi), ordered by time. Failed reads become gaps (no value,
/// confidence 0) and are logged; they never abort the run.
inline ExtractResult extract_series(std::span<const long> timestamps, const FrameLoader& load,
                                    std::span<const RoiSpec> rois, const Recognizer& recognizer,
                                    const RangeTable& ranges = default_ranges(), const ExtractOptions& options = {}) {
  if (!std::is_sorted(timestamps.begin(), timestamps.end()) ||
      std::adjacent_find(timestamps.begin(), timestamps.end()) != timestamps.end()) {
    throw Error(Errc::InvalidArgument, "frames must be strictly ordered by t_seconds");
  }
  const std::size_t n = timestamps.size();
  std::vector<std::vector<Reading>> per_frame(n);
  std::vector<std::vector<FrameError>> per_frame_errors(n);

  parallel_for(n, options.jobs, [&](std::size_t i) {
    const long t = timestamps[i];
    auto& readings = per_frame[i];
    for (const auto& roi : rois) readings.push_back({t, roi.channel(), "", std::nullopt, 0.0});
    GrayImage frame;
    try {
      frame = load(i);
    } catch (const std::exception& e) {
      per_frame_errors[i].push_back({t, "", e.what()});
      return;
    }
    for (std::size_t r = 0; r < rois.size(); ++r) {
      try {
        const auto rec = recognizer.recognize(preprocess_roi(frame, rois[r], options.preprocess));
        auto& reading = readings[r];
        reading.raw_text = rec.raw_text;
        reading.value = parse_reading(rec.raw_text, rois[r].channel(), ranges);
        reading.confidence = reading.value ? rec.confidence : 0.0;
      } catch (const Error& e) {
        per_frame_errors[i].push_back({t, rois[r].channel(), e.what()});
      }
    }
  });

  ExtractResult result;
  for (const auto& roi : rois) result.series[roi.channel()].reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& reading : per_frame[i]) result.series[reading.channel].push_back(std::move(reading));
    for (auto& e : per_frame_errors[i]) result.errors.push_back(std::move(e));
  }
  return result;
}

inline ExtractResult extract_series(const std::vector<FrameFile>& frames, std::span<const RoiSpec> rois,
                                    const Recognizer& recognizer, const RangeTable& ranges = default_ranges(),
                                    const ExtractOptions& options = {}) {
  std::vector<long> timestamps;
  timestamps.reserve(frames.size());
  for (const auto& f : frames) timestamps.push_back(static_cast<long>(std::floor(f.t_seconds)));
  return extract_series(timestamps, [&](std::size_t i) { return load_image(frames[i].path); }, rois, recognizer,
                        ranges, options);
}

// ---------------------------------------------------------------------------
// Telemetry CSV: t_seconds,channel,raw_text,value,confidence

inline std::string telemetry_csv(const ExtractResult& result) {
  std::vector<const Reading*> rows;
  for (const auto& [channel, readings] : result.series) {
    for (const auto& r : readings) rows.push_back(&r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Reading* a, const Reading* b) {
    return a->t_seconds < b->t_seconds;
  });
  std::string out = "t_seconds,channel,raw_text,value,confidence\n";
  for (const auto* r : rows) {
    out += std::to_string(r->t_seconds) + "," + csv_escape(r->channel) + "," + csv_escape(r->raw_text) + "," +
           (r->value ? std::to_string(*r->value) : "") + "," + format_number(r->confidence) + "\n";
  }
  return out;
}

inline std::string frame_errors_csv(const std::vector<FrameError>& errors) {
  std::string out = "t_seconds,channel,message\n";
  for (const auto& e : errors) {
    out += std::to_string(e.t_seconds) + "," + csv_escape(e.channel) + "," + csv_escape(e.message) + "\n";
  }
  return out;
}

inline std::map<std::string, std::vector<Reading>> read_telemetry_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const char* names[] = {"t_seconds", "channel", "raw_text", "value", "confidence"};
  std::size_t idx[5];
  for (int i = 0; i < 5; ++i) {
    auto c = table.column(names[i]);
    if (!c) throw Error(Errc::MissingColumn, std::string(names[i]) + " missing from " + path.string());
    idx[i] = *c;
  }
  std::map<std::string, std::vector<Reading>> series;
  for (const auto& row : table.rows) {
    if (row.size() < table.header.size()) throw Error(Errc::IoFailure, "short row in " + path.string());
    Reading r;
    auto t = parse_integer(row[idx[0]]);
    if (!t) throw Error(Errc::IoFailure, "bad t_seconds in " + path.string());
    r.t_seconds = static_cast<long>(*t);
    r.channel = row[idx[1]];
    r.raw_text = row[idx[2]];
    if (!trim(row[idx[3]]).empty()) {
      auto v = parse_integer(row[idx[3]]);
      if (!v) throw Error(Errc::IoFailure, "bad value in " + path.string());
      r.value = static_cast<long>(*v);
    }
    r.confidence = parse_double(row[idx[4]]).value_or(0.0);
    series[r.channel].push_back(std::move(r));
  }
  return series;
}

}  // namespace vitalcast
