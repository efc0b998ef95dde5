#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vitalcast/csv.hpp"
#include "vitalcast/error.hpp"
#include "vitalcast/glyphs.hpp"
#include "vitalcast/image.hpp"
#include "vitalcast/image_io.hpp"
#include "vitalcast/parallel.hpp"
#include "vitalcast/video_prep.hpp"

namespace vitalcast {

// Fixture generator. Every output is a pure function of its parameters and seed; each
// consumer of randomness gets its own stream derived from (seed, purpose, index), so
// adding a channel or rendering in parallel does not perturb other streams.

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

enum class Profile { Interval, Steady };

struct TruthParams {
  long duration = 600;
  Profile profile = Profile::Interval;
  double high_w = 250.0;
  double low_w = 120.0;
  long period_s = 120;   // interval: high for the first half of each period
  double steady_w = 200.0;
  double hr_rest = 60.0;
  double hr_gain = 0.44;  // bpm per W above rest
  double tau_s = 30.0;
  double read_noise_sd = 0.0;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  long duration = 0;
  std::vector<double> hr;     // model heart rate per second
  std::vector<double> power;  // model power per second
  std::vector<long> shown_hr;     // what the overlay displays (rounded, optional read noise)
  std::vector<long> shown_power;
  std::uint64_t seed = 0;

  const std::vector<long>& shown(const std::string& channel) const {
    if (channel == "heart_rate") return shown_hr;
    if (channel == "power") return shown_power;
    throw Error(Errc::InvalidArgument, "no ground truth for channel '" + channel + "'");
  }
  std::vector<long>& shown(const std::string& channel) {
    return const_cast<std::vector<long>&>(static_cast<const GroundTruth&>(*this).shown(channel));
  }
  const std::vector<double>& model(const std::string& channel) const {
    if (channel == "heart_rate") return hr;
    if (channel == "power") return power;
    throw Error(Errc::InvalidArgument, "no ground truth for channel '" + channel + "'");
  }
};

inline double hr_target(const TruthParams& p, double watts) { return p.hr_rest + p.hr_gain * watts; }

inline double profile_power(const TruthParams& p, long t) {
  if (p.profile == Profile::Steady) return p.steady_w;
  return (t % p.period_s) < p.period_s / 2 ? p.high_w : p.low_w;
}

/// HR follows a first-order lag toward hr_rest + hr_gain * power:
/// HR(t+1) = HR(t) + (target(P(t)) - HR(t)) / tau, HR(0) = hr_rest.
inline GroundTruth generate_truth(const TruthParams& p) {
  if (p.duration < 60) throw Error(Errc::BadDuration, "fixture duration must be >= 60 s");
  if (p.profile == Profile::Interval && p.period_s < 2) throw Error(Errc::InvalidArgument, "period_s must be >= 2");
  if (!(p.tau_s >= 1.0)) throw Error(Errc::InvalidArgument, "tau_s must be >= 1");
  GroundTruth g;
  g.duration = p.duration;
  g.seed = p.seed;
  const auto n = static_cast<std::size_t>(p.duration);
  g.hr.resize(n);
  g.power.resize(n);
  double hr = p.hr_rest;
  for (std::size_t t = 0; t < n; ++t) {
    g.power[t] = profile_power(p, static_cast<long>(t));
    g.hr[t] = hr;
    hr += (hr_target(p, g.power[t]) - hr) / p.tau_s;
  }
  auto noise = make_stream(p.seed, 1);
  std::normal_distribution<double> read_noise(0.0, p.read_noise_sd > 0.0 ? p.read_noise_sd : 1.0);
  auto shown = [&](double v, long lo, long hi) {
    if (p.read_noise_sd > 0.0) v += read_noise(noise);
    return std::clamp(std::lround(v), lo, hi);
  };
  for (std::size_t t = 0; t < n; ++t) {
    g.shown_hr.push_back(shown(g.hr[t], 25, 250));
    g.shown_power.push_back(shown(g.power[t], 0, 2500));
  }
  return g;
}

/// Adds `magnitude` to the displayed value at `count` distinct seeded seconds; returns them sorted.
inline std::vector<long> inject_spikes(GroundTruth& g, const std::string& channel, std::size_t count, long magnitude,
                                       std::uint64_t seed) {
  if (count > static_cast<std::size_t>(g.duration)) throw Error(Errc::InvalidArgument, "more spikes than seconds");
  auto rng = make_stream(seed, 2);
  std::uniform_int_distribution<long> pick(0, g.duration - 1);
  std::set<long> times;
  while (times.size() < count) times.insert(pick(rng));
  auto& values = g.shown(channel);
  for (long t : times) values[static_cast<std::size_t>(t)] += magnitude;
  return {times.begin(), times.end()};
}

/// Per-second emotion channels. valence = rho * standardize(power) + sqrt(1 - rho^2) * eps;
/// attention drifts downward; the seven discrete emotions are low-level seeded noise.
inline std::map<std::string, std::vector<double>> generate_correlated_emotion(const GroundTruth& g, double rho,
                                                                              std::uint64_t seed) {
  if (!(std::abs(rho) <= 1.0)) throw Error(Errc::InvalidArgument, "|rho| must be <= 1");
  const auto n = g.power.size();
  double mean = 0.0;
  for (double v : g.power) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : g.power) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));

  std::map<std::string, std::vector<double>> out;
  std::normal_distribution<double> unit(0.0, 1.0);
  {
    auto rng = make_stream(seed, 10);
    auto& valence = out["valence"];
    const double resid = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (std::size_t t = 0; t < n; ++t) {
      const double z = sd > 0.0 ? (g.power[t] - mean) / sd : 0.0;
      valence.push_back(rho * z + resid * unit(rng));
    }
  }
  {
    auto rng = make_stream(seed, 11);
    auto& attention = out["attention"];
    for (std::size_t t = 0; t < n; ++t) {
      attention.push_back(80.0 - 30.0 * static_cast<double>(t) / static_cast<double>(n) + 3.0 * unit(rng));
    }
  }
  const char* discrete[] = {"joy", "anger", "sadness", "contempt", "fear", "surprise", "disgust"};
  for (std::uint64_t c = 0; c < 7; ++c) {
    auto rng = make_stream(seed, 20 + c);
    auto& col = out[discrete[c]];
    for (std::size_t t = 0; t < n; ++t) col.push_back(std::clamp(5.0 + 3.0 * unit(rng), 0.0, 100.0));
  }
  return out;
}

/// Emotion export with `rate_hz` rows per second repeating that second's value.
inline std::string synth_emotion_csv(const std::map<std::string, std::vector<double>>& channels, int rate_hz = 1) {
  if (rate_hz < 1 || rate_hz > 1000) throw Error(Errc::InvalidArgument, "emotion rate must be in [1, 1000] Hz");
  std::string out = "timestamp_ms";
  for (const auto& [name, values] : channels) out += "," + name;
  out += "\n";
  const std::size_t n = channels.empty() ? 0 : channels.begin()->second.size();
  for (std::size_t t = 0; t < n; ++t) {
    for (int j = 0; j < rate_hz; ++j) {
      out += std::to_string(static_cast<long long>(t) * 1000 + j * 1000 / rate_hz);
      for (const auto& [name, values] : channels) out += "," + format_number(values[t]);
      out += "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Overlay rendering

struct RenderLayout {
  int frame_width = 480;
  int frame_height = 270;
  std::vector<RoiSpec> rois;
  int scale = 4;  // screen pixels per glyph pixel
  std::uint8_t panel = 20;
  std::uint8_t ink = 235;

  static RenderLayout standard() {
    RenderLayout l;
    l.rois = {RoiSpec("heart_rate", 24, 24, 120, 60), RoiSpec("power", 24, 108, 160, 60)};
    return l;
  }

  void validate() const {
    if (frame_width <= 0 || frame_height <= 0) throw Error(Errc::InvalidArgument, "frame size must be positive");
    if (scale < 1) throw Error(Errc::InvalidArgument, "glyph scale must be >= 1");
    for (std::size_t i = 0; i < rois.size(); ++i) {
      if (!rois[i].fits(frame_width, frame_height)) {
        throw Error(Errc::RoiOutOfBounds, "roi '" + rois[i].channel() + "' exceeds the frame");
      }
      for (std::size_t j = i + 1; j < rois.size(); ++j) {
        if (rois[i].overlaps(rois[j])) {
          throw Error(Errc::InvalidArgument, "rois '" + rois[i].channel() + "' and '" + rois[j].channel() + "' overlap");
        }
      }
    }
  }
};

struct RenderNoise {
  double pixel_flip_p = 0.0;  // probability a frame pixel is inverted
  double glyph_swap_p = 0.0;  // probability a digit is drawn as a confusable one
};

inline char confusable(char d) {
  switch (d) {
    case '1': return '7';
    case '7': return '1';
    case '3': return '8';
    case '8': return '3';
    case '5': return '6';
    case '6': return '5';
    case '0': return '8';
    default: return d;
  }
}

/// Draws `text` left-aligned and vertically centred inside roi. Glyph pitch is glyph width
/// plus two glyph pixels.
inline void draw_text(GrayImage& frame, const RoiSpec& roi, const std::string& text, const GlyphSet& glyphs,
                      int scale, std::uint8_t ink) {
  const int gw = kGlyphWidth * scale, gh = kGlyphHeight * scale, gap = 2 * scale, margin = 2 * scale;
  const int width = static_cast<int>(text.size()) * gw + (static_cast<int>(text.size()) - 1) * gap;
  if (width + 2 * margin > roi.w() || gh > roi.h()) {
    throw Error(Errc::InvalidArgument, "text '" + text + "' does not fit roi '" + roi.channel() + "'");
  }
  const int top = roi.y() + (roi.h() - gh) / 2;
  int left = roi.x() + margin;
  for (char c : text) {
    const auto& g = glyph_for(glyphs, c);
    for (int y = 0; y < gh; ++y) {
      for (int x = 0; x < gw; ++x) {
        if (g.on(x / scale, y / scale)) frame.at(left + x, top + y) = ink;
      }
    }
    left += gw + gap;
  }
}

inline GrayImage render_frame(const GroundTruth& g, long t, const RenderLayout& layout, const GlyphSet& glyphs,
                              const RenderNoise& noise = {}) {
  GrayImage frame(layout.frame_width, layout.frame_height);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) frame.at(x, y) = static_cast<std::uint8_t>(60 + (x * 7 + y * 3) % 50);
  }
  auto swaps = make_stream(g.seed, 30, static_cast<std::uint64_t>(t));
  std::bernoulli_distribution swap(noise.glyph_swap_p);
  for (const auto& roi : layout.rois) {
    for (int y = roi.y(); y < roi.y() + roi.h(); ++y) {
      for (int x = roi.x(); x < roi.x() + roi.w(); ++x) frame.at(x, y) = layout.panel;
    }
    std::string text = std::to_string(g.shown(roi.channel()).at(static_cast<std::size_t>(t)));
    if (noise.glyph_swap_p > 0.0) {
      for (auto& c : text) {
        if (swap(swaps)) c = confusable(c);
      }
    }
    draw_text(frame, roi, text, glyphs, layout.scale, layout.ink);
  }
  if (noise.pixel_flip_p > 0.0) {
    auto flips = make_stream(g.seed, 31, static_cast<std::uint64_t>(t));
    std::bernoulli_distribution flip(noise.pixel_flip_p);
    for (auto& v : frame.pixels()) {
      if (flip(flips)) v = static_cast<std::uint8_t>(255 - v);
    }
  }
  return frame;
}

inline std::string truth_csv(const GroundTruth& g) {
  std::string out = "t_seconds,hr,power\n";
  for (long t = 0; t < g.duration; ++t) {
    const auto i = static_cast<std::size_t>(t);
    out += std::to_string(t) + "," + std::to_string(g.shown_hr[i]) + "," + std::to_string(g.shown_power[i]) + "\n";
  }
  return out;
}

/// Writes frame_%08d.png for every second plus truth.csv into out_dir.
inline std::vector<FrameFile> render_frames(const GroundTruth& g, const RenderLayout& layout, const GlyphSet& glyphs,
                                            const std::filesystem::path& out_dir, const RenderNoise& noise = {},
                                            std::size_t jobs = 0) {
  layout.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<FrameFile> frames(static_cast<std::size_t>(g.duration));
  parallel_for(frames.size(), jobs, [&](std::size_t i) {
    const auto t = static_cast<long>(i);
    frames[i] = {static_cast<double>(t), out_dir / frame_file_name(t)};
    write_png(frames[i].path, render_frame(g, t, layout, glyphs, noise));
  });
  write_text_file(out_dir / "truth.csv", truth_csv(g));
  return frames;
}

}  // namespace vitalcast
