#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vitalcast/error.hpp"
#include "vitalcast/image.hpp"
#include "vitalcast/subprocess.hpp"

namespace vitalcast {

namespace fs = std::filesystem;

inline constexpr const char* kMediaToolEnv = "VITALCAST_MEDIA_TOOL";

/// Handle to an FFmpeg-compatible executable.
class MediaTool {
 public:
  explicit MediaTool(fs::path executable) : path_(std::move(executable)) {}

  /// Resolution order: explicit config value, VITALCAST_MEDIA_TOOL, `ffmpeg` on PATH.
  static MediaTool discover(const std::optional<std::string>& configured = std::nullopt) {
    std::vector<std::string> candidates;
    if (configured && !configured->empty()) {
      candidates.push_back(*configured);
    } else {
      if (const char* env = std::getenv(kMediaToolEnv); env && *env) candidates.emplace_back(env);
      candidates.emplace_back("ffmpeg");
    }
    for (const auto& c : candidates) {
      if (auto found = resolve_executable(c)) return MediaTool(*found);
    }
    throw Error(Errc::MediaToolMissing, "no media tool found (set media_tool_path or " + std::string(kMediaToolEnv) + ")");
  }

  const fs::path& path() const noexcept { return path_; }

  /// First line of `-version`, recorded in manifests.
  std::string version() const {
    auto r = run_process({path_.string(), "-version"});
    auto line = r.out.substr(0, r.out.find('\n'));
    return line.empty() ? "unknown" : line;
  }

  ProcessResult run(const std::vector<std::string>& args) const {
    std::vector<std::string> argv{path_.string(), "-hide_banner", "-nostdin", "-y"};
    argv.insert(argv.end(), args.begin(), args.end());
    return run_process(argv);
  }

  /// Like run() but a nonzero exit becomes MediaToolFailure carrying the stderr tail.
  void run_checked(const std::vector<std::string>& args) const {
    auto r = run(args);
    if (r.exit_code != 0) {
      const auto tail = r.err.size() > 2000 ? r.err.substr(r.err.size() - 2000) : r.err;
      throw Error(Errc::MediaToolFailure, "exit " + std::to_string(r.exit_code) + ": " + tail);
    }
  }

 private:
  fs::path path_;
};

struct VideoMeta {
  double duration = 0.0;
  double fps = 0.0;
  int width = 0;
  int height = 0;
};

struct VideoPart {
  fs::path path;
  double trim_start = 0.0;
  std::optional<double> trim_end;  // nullopt: end of file

  void validate() const {
    if (!(trim_start >= 0.0)) throw Error(Errc::InvalidArgument, "trim_start must be >= 0 for " + path.string());
    if (trim_end && !(*trim_end > trim_start)) {
      throw Error(Errc::InvalidArgument, "trim_end must exceed trim_start for " + path.string());
    }
  }
};

struct PrepPlan {
  std::vector<VideoPart> parts;
  double target_fps = 30.0;
  std::optional<RoiSpec> inset_roi;

  void validate() const {
    if (parts.empty()) throw Error(Errc::InvalidArgument, "prep plan has no parts");
    if (!(target_fps > 0.0)) throw Error(Errc::InvalidArgument, "target_fps must be > 0");
    for (const auto& p : parts) p.validate();
  }
};

/// Encoder arguments for intermediate videos: lossless-quantiser x264 in 4:4:4, which accepts odd sizes.
inline std::vector<std::string> default_codec_args() {
  return {"-an", "-c:v", "libx264", "-preset", "ultrafast", "-qp", "0", "-pix_fmt", "yuv444p"};
}

/// Formats a number for ffmpeg arguments without locale or exponent surprises.
inline std::string media_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  s.erase(s.find_last_not_of('0') + 1);
  if (s.back() == '.') s.pop_back();
  return s;
}

namespace detail {

inline std::optional<VideoMeta> parse_probe_output(const std::string& text) {
  static const std::regex duration_re(R"(Duration: (\d+):(\d+):(\d+(?:\.\d+)?))");
  static const std::regex video_re(R"(Stream #\d+:\d+.*?: Video: (.*))");
  static const std::regex dims_re(R"(, (\d+)x(\d+)[ ,])");
  static const std::regex fps_re(R"(([\d.]+)(k?) fps)");
  std::smatch m;
  if (!std::regex_search(text, m, duration_re)) return std::nullopt;
  VideoMeta meta;
  meta.duration = std::stod(m[1]) * 3600 + std::stod(m[2]) * 60 + std::stod(m[3]);

  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::smatch vm;
    if (!std::regex_search(line, vm, video_re)) continue;
    const std::string desc = vm[1];
    std::smatch dm, fm;
    if (std::regex_search(desc, dm, dims_re)) {
      meta.width = std::stoi(dm[1]);
      meta.height = std::stoi(dm[2]);
    }
    if (std::regex_search(desc, fm, fps_re)) {
      meta.fps = std::stod(fm[1]) * (fm[2] == "k" ? 1000.0 : 1.0);
    }
    break;
  }
  if (meta.duration <= 0.0 || meta.fps <= 0.0 || meta.width <= 0 || meta.height <= 0) return std::nullopt;
  return meta;
}

}  // namespace detail

inline VideoMeta probe(const MediaTool& tool, const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(Errc::UnreadableVideo, path.string() + " does not exist");
  if (fs::file_size(path, ec) == 0) throw Error(Errc::UnreadableVideo, path.string() + " is empty");
  auto r = tool.run({"-i", path.string()});
  auto meta = detail::parse_probe_output(r.err);
  if (!meta) throw Error(Errc::UnreadableVideo, "media tool could not read a video stream from " + path.string());
  return *meta;
}

/// Trims each part frame-accurately, resamples every part to target_fps and concatenates them.
/// The output duration must equal the summed trimmed durations within one frame period.
inline VideoMeta normalize_and_concat(const MediaTool& tool, const PrepPlan& plan, const fs::path& out,
                                      const std::vector<std::string>& codec_args = default_codec_args()) {
  plan.validate();
  std::vector<std::string> args;
  std::string graph;
  double expected = 0.0;
  for (std::size_t i = 0; i < plan.parts.size(); ++i) {
    const auto& part = plan.parts[i];
    const auto meta = probe(tool, part.path);
    const double end = part.trim_end.value_or(meta.duration);
    if (part.trim_start >= meta.duration) {
      throw Error(Errc::InvalidArgument, "trim_start beyond end of " + part.path.string());
    }
    if (end > meta.duration + 1.0 / meta.fps) {
      throw Error(Errc::InvalidArgument, "trim_end beyond end of " + part.path.string());
    }
    expected += std::min(end, meta.duration) - part.trim_start;
    args.insert(args.end(), {"-i", part.path.string()});
    graph += "[" + std::to_string(i) + ":v]trim=start=" + media_number(part.trim_start) +
             ":end=" + media_number(end) + ",setpts=PTS-STARTPTS,fps=" + media_number(plan.target_fps) + "[v" +
             std::to_string(i) + "];";
  }
  for (std::size_t i = 0; i < plan.parts.size(); ++i) graph += "[v" + std::to_string(i) + "]";
  graph += "concat=n=" + std::to_string(plan.parts.size()) + ":v=1:a=0[out]";
  args.insert(args.end(), {"-filter_complex", graph, "-map", "[out]"});
  args.insert(args.end(), codec_args.begin(), codec_args.end());
  args.push_back(out.string());
  tool.run_checked(args);

  const auto meta = probe(tool, out);
  if (std::abs(meta.fps - plan.target_fps) > 1e-3) {
    throw Error(Errc::MediaToolFailure, "output fps " + media_number(meta.fps) + " != target " +
                                            media_number(plan.target_fps));
  }
  // The container reports duration in centiseconds, hence the half-centisecond allowance.
  if (std::abs(meta.duration - expected) > 1.0 / plan.target_fps + 0.005) {
    throw Error(Errc::MediaToolFailure, "output duration " + media_number(meta.duration) + " s drifts from expected " +
                                            media_number(expected) + " s by more than one frame");
  }
  return meta;
}

inline VideoMeta crop_video(const MediaTool& tool, const fs::path& path, const RoiSpec& roi, const fs::path& out,
                            const std::vector<std::string>& codec_args = default_codec_args()) {
  const auto in = probe(tool, path);
  if (!roi.fits(in.width, in.height)) {
    throw Error(Errc::RoiOutOfBounds, "roi '" + roi.channel() + "' exceeds " + std::to_string(in.width) + "x" +
                                          std::to_string(in.height) + " video");
  }
  std::vector<std::string> args{"-i", path.string(), "-vf",
                                "crop=" + std::to_string(roi.w()) + ":" + std::to_string(roi.h()) + ":" +
                                    std::to_string(roi.x()) + ":" + std::to_string(roi.y())};
  args.insert(args.end(), codec_args.begin(), codec_args.end());
  args.push_back(out.string());
  tool.run_checked(args);
  return probe(tool, out);
}

struct FrameFile {
  double t_seconds = 0.0;
  fs::path path;
};

inline std::string frame_file_name(long index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%08ld.png", index);
  return buf;
}

/// Parses the index out of `frame_%08d.png`; nullopt for any other name.
inline std::optional<long> frame_index(const fs::path& p) {
  static const std::regex re(R"(frame_(\d{8,})\.png)");
  std::smatch m;
  const std::string name = p.filename().string();
  if (!std::regex_match(name, m, re)) return std::nullopt;
  return std::stol(m[1]);
}

/// Frame files in a directory ordered by index; t = index / rate.
inline std::vector<FrameFile> list_frames(const fs::path& dir, double rate = 1.0) {
  std::vector<std::pair<long, fs::path>> found;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (auto idx = frame_index(entry.path())) found.emplace_back(*idx, entry.path());
  }
  if (ec) throw Error(Errc::IoFailure, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(found.begin(), found.end());
  std::vector<FrameFile> frames;
  frames.reserve(found.size());
  for (auto& [idx, p] : found) frames.push_back({static_cast<double>(idx) / rate, std::move(p)});
  return frames;
}

/// Samples `rate` frames per second into out_dir as lossless PNG. Stale frame files are removed first.
inline std::vector<FrameFile> extract_frames(const MediaTool& tool, const fs::path& path, const fs::path& out_dir,
                                             double rate = 1.0) {
  if (!(rate > 0.0)) throw Error(Errc::InvalidArgument, "frame rate must be > 0");
  const auto meta = probe(tool, path);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  for (const auto& f : list_frames(out_dir, rate)) fs::remove(f.path, ec);

  tool.run_checked({"-i", path.string(), "-vf", "fps=" + media_number(rate), "-start_number", "0",
                    (out_dir / "frame_%08d.png").string()});
  auto frames = list_frames(out_dir, rate);
  const double nominal = std::floor(meta.duration * rate);
  if (std::abs(static_cast<double>(frames.size()) - nominal) > 1.0) {
    throw Error(Errc::MediaToolFailure, "extracted " + std::to_string(frames.size()) + " frames, expected about " +
                                            media_number(nominal));
  }
  return frames;
}

/// Assembles `frame_%08d.png` stills shown for 1/input_rate seconds each into a video at out_fps.
inline VideoMeta frames_to_video(const MediaTool& tool, const fs::path& frames_dir, const fs::path& out,
                                 double input_rate = 1.0, double out_fps = 30.0,
                                 const std::vector<std::string>& codec_args = default_codec_args()) {
  std::vector<std::string> args{"-framerate", media_number(input_rate), "-start_number", "0",
                                "-i",         (frames_dir / "frame_%08d.png").string(),
                                "-vf",        "fps=" + media_number(out_fps)};
  args.insert(args.end(), codec_args.begin(), codec_args.end());
  args.push_back(out.string());
  tool.run_checked(args);
  return probe(tool, out);
}

}  // namespace vitalcast
