#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vitalcast/analysis.hpp"
#include "vitalcast/csv.hpp"
#include "vitalcast/emotion.hpp"
#include "vitalcast/error.hpp"
#include "vitalcast/image.hpp"
#include "vitalcast/ocr.hpp"
#include "vitalcast/series.hpp"
#include "vitalcast/synth.hpp"
#include "vitalcast/video_prep.hpp"

namespace vitalcast {

using nlohmann::json;

/// Every accepted key with its default. Keys absent here are rejected, except inside the
/// free-form maps listed in free_form_keys().
inline json default_pipeline_json() {
  return json::parse(R"({
    "media_tool_path": null,
    "ocr_engine_path": null,
    "video": null,
    "frames_dir": null,
    "frame_rate": 1,
    "rois": [],
    "image": {"width": 90, "height": 44, "dpi": 300, "sharpen_factor": 4,
              "binarize": "otsu", "fixed_threshold": 128, "blur_sigma": 0.8},
    "recognizer": {"kind": "template", "whitelist": "0123456789", "psm": 7},
    "ranges": {"enabled": true,
               "channels": {"heart_rate": {"min": 25, "max": 250}, "power": {"min": 0, "max": 2500}}},
    "clean": {"z_threshold": 3, "ema_alpha": null, "two_sided": true, "sample_std": false,
              "clamp_min": null, "clamp_max": null},
    "emotion": {"path": null, "timestamp_column": "timestamp_ms", "channel_map": {}, "offset_ms": 0},
    "analysis": {"features": null, "pairs": null, "window": 60, "step": 60,
                 "tradeoff": {"pair": null, "alpha": null}, "format": "csv"},
    "output_dir": "out",
    "seed": 0,
    "jobs": 0
  })");
}

inline json default_video_json() {
  return json::parse(R"({"parts": [], "target_fps": 30, "inset_roi": null})");
}

inline const std::set<std::string>& free_form_keys() {
  static const std::set<std::string> keys = {"emotion.channel_map", "ranges.channels"};
  return keys;
}

namespace detail {

inline std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline bool compatible(const json& def, const json& val) {
  if (def.is_null() || val.is_null()) return true;
  if (def.is_number() && val.is_number()) return true;
  return def.type() == val.type();
}

/// Overlays `user` onto `base`, rejecting keys and types the defaults do not declare.
inline void merge_checked(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw Error(Errc::ConfigError, "'" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const auto path = join_path(prefix, key);
    if (free_form_keys().count(prefix)) {
      base[key] = value;
      continue;
    }
    if (!base.contains(key)) throw Error(Errc::ConfigError, "unknown config key '" + path + "'");
    auto& slot = base[key];
    if (path == "video" && value.is_object()) {
      if (slot.is_null()) slot = default_video_json();
      merge_checked(slot, value, path);
    } else if (slot.is_object() && value.is_object()) {
      merge_checked(slot, value, path);
    } else if (!compatible(slot, value)) {
      throw Error(Errc::ConfigError, "config key '" + path + "' has the wrong type");
    } else {
      slot = value;
    }
  }
}

template <typename T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, "config key '" + path + "': " + e.what());
  }
}

inline RoiSpec roi_from_json(const json& j, const std::string& path, std::string default_channel = "") {
  if (!j.is_object()) throw Error(Errc::ConfigError, "'" + path + "' must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key != "channel" && key != "x" && key != "y" && key != "w" && key != "h") {
      throw Error(Errc::ConfigError, "unknown config key '" + path + "." + key + "'");
    }
  }
  try {
    return RoiSpec(j.value("channel", default_channel), j.at("x").get<int>(), j.at("y").get<int>(),
                   j.at("w").get<int>(), j.at("h").get<int>());
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, "'" + path + "': " + e.what());
  }
}

}  // namespace detail

/// Applies `key.path=value` overrides. The value is parsed as JSON when possible, otherwise
/// taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(Errc::ConfigError, "override '" + assignment + "' is not key=value");
  const auto key = assignment.substr(0, eq);
  const auto raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(Errc::ConfigError, "override key '" + key + "' has an empty segment");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct AnalysisParams {
  std::optional<std::vector<std::string>> features;
  std::optional<std::vector<std::pair<std::string, std::string>>> pairs;
  long window = 60;
  long step = 60;
  std::optional<std::pair<std::string, std::string>> tradeoff_pair;
  double tradeoff_alpha = 2.0 / 31.0;
  ReportFormat format = ReportFormat::Csv;
};

struct PipelineConfig {
  std::filesystem::path base_dir;
  json effective;
  std::string hash;

  std::optional<std::string> media_tool_path;
  std::optional<std::string> ocr_engine_path;
  std::optional<PrepPlan> video;
  std::optional<std::filesystem::path> frames_dir;
  double frame_rate = 1.0;
  std::vector<RoiSpec> rois;
  PreprocessParams image;
  RecognizerSpec recognizer;
  RangeTable ranges;
  CleanParams clean;
  std::optional<std::filesystem::path> emotion_path;
  EmotionMapping emotion;
  AnalysisParams analysis;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;

  std::filesystem::path stage_dir(const std::string& stage) const { return output_dir / stage; }
  std::filesystem::path frames_source() const { return frames_dir ? *frames_dir : stage_dir("prep") / "frames"; }
};

/// Builds a validated config from a user document. Relative paths resolve against base_dir.
inline PipelineConfig load_config(const json& user, const std::filesystem::path& base_dir,
                                  const std::vector<std::string>& overrides = {}) {
  json doc = user;
  for (const auto& o : overrides) apply_override(doc, o);
  json eff = default_pipeline_json();
  detail::merge_checked(eff, doc, "");

  PipelineConfig cfg;
  cfg.base_dir = base_dir;
  cfg.effective = eff;
  json hashed = eff;
  hashed.erase("jobs");
  cfg.hash = fnv1a_hex(hashed.dump());
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  auto require_exists = [&](const std::filesystem::path& p, const std::string& key) {
    std::error_code ec;
    if (!std::filesystem::exists(p, ec)) throw Error(Errc::ConfigError, "'" + key + "' refers to missing " + p.string());
  };
  using detail::get_as;

  if (!eff["media_tool_path"].is_null()) cfg.media_tool_path = resolve(get_as<std::string>(eff["media_tool_path"], "media_tool_path")).string();
  if (!eff["ocr_engine_path"].is_null()) {
    cfg.ocr_engine_path = resolve(get_as<std::string>(eff["ocr_engine_path"], "ocr_engine_path")).string();
  }

  if (!eff["video"].is_null()) {
    const auto& v = eff["video"];
    PrepPlan plan;
    plan.target_fps = get_as<double>(v["target_fps"], "video.target_fps");
    if (!v["parts"].is_array()) throw Error(Errc::ConfigError, "'video.parts' must be an array");
    for (std::size_t i = 0; i < v["parts"].size(); ++i) {
      const auto& p = v["parts"][i];
      const auto key = "video.parts[" + std::to_string(i) + "]";
      for (const auto& [k, val] : p.items()) {
        if (k != "path" && k != "trim_start" && k != "trim_end") throw Error(Errc::ConfigError, "unknown config key '" + key + "." + k + "'");
      }
      VideoPart part;
      part.path = resolve(get_as<std::string>(p.value("path", json()), key + ".path"));
      part.trim_start = get_as<double>(p.value("trim_start", json(0.0)), key + ".trim_start");
      if (p.contains("trim_end") && !p["trim_end"].is_null()) part.trim_end = get_as<double>(p["trim_end"], key + ".trim_end");
      require_exists(part.path, key + ".path");
      plan.parts.push_back(std::move(part));
    }
    if (!v["inset_roi"].is_null()) plan.inset_roi = detail::roi_from_json(v["inset_roi"], "video.inset_roi", "inset");
    try {
      plan.validate();
    } catch (const Error& e) {
      throw Error(Errc::ConfigError, e.message());
    }
    cfg.video = std::move(plan);
  }
  if (!eff["frames_dir"].is_null()) {
    cfg.frames_dir = resolve(get_as<std::string>(eff["frames_dir"], "frames_dir"));
    require_exists(*cfg.frames_dir, "frames_dir");
  }
  if (cfg.video && cfg.frames_dir) throw Error(Errc::ConfigError, "set either 'video' or 'frames_dir', not both");
  cfg.frame_rate = get_as<double>(eff["frame_rate"], "frame_rate");
  if (!(cfg.frame_rate > 0.0)) throw Error(Errc::ConfigError, "'frame_rate' must be > 0");

  if (!eff["rois"].is_array()) throw Error(Errc::ConfigError, "'rois' must be an array");
  for (std::size_t i = 0; i < eff["rois"].size(); ++i) {
    cfg.rois.push_back(detail::roi_from_json(eff["rois"][i], "rois[" + std::to_string(i) + "]"));
  }
  for (std::size_t i = 0; i < cfg.rois.size(); ++i) {
    if (cfg.rois[i].channel().empty()) throw Error(Errc::ConfigError, "rois[" + std::to_string(i) + "] needs a channel");
    for (std::size_t j = i + 1; j < cfg.rois.size(); ++j) {
      if (cfg.rois[i].channel() == cfg.rois[j].channel()) {
        throw Error(Errc::ConfigError, "duplicate roi channel '" + cfg.rois[i].channel() + "'");
      }
      if (cfg.rois[i].overlaps(cfg.rois[j])) {
        throw Error(Errc::ConfigError, "metric rois '" + cfg.rois[i].channel() + "' and '" + cfg.rois[j].channel() +
                                           "' overlap");
      }
    }
  }

  const auto& img = eff["image"];
  cfg.image.width = get_as<int>(img["width"], "image.width");
  cfg.image.height = get_as<int>(img["height"], "image.height");
  cfg.image.dpi = get_as<int>(img["dpi"], "image.dpi");
  cfg.image.sharpen_factor = get_as<double>(img["sharpen_factor"], "image.sharpen_factor");
  cfg.image.blur_sigma = get_as<double>(img["blur_sigma"], "image.blur_sigma");
  const auto method = get_as<std::string>(img["binarize"], "image.binarize");
  const auto fixed = get_as<int>(img["fixed_threshold"], "image.fixed_threshold");
  if (fixed < 0 || fixed > 255) throw Error(Errc::ConfigError, "'image.fixed_threshold' must be in [0,255]");
  if (method == "otsu") {
    cfg.image.binarize = BinarizeParams::otsu();
  } else if (method == "fixed") {
    cfg.image.binarize = BinarizeParams::fixed(static_cast<std::uint8_t>(fixed));
  } else {
    throw Error(Errc::ConfigError, "'image.binarize' must be \"otsu\" or \"fixed\"");
  }
  if (cfg.image.width <= 0 || cfg.image.height <= 0) throw Error(Errc::ConfigError, "image size must be positive");
  if (!(cfg.image.sharpen_factor >= 0.0)) throw Error(Errc::ConfigError, "'image.sharpen_factor' must be >= 0");
  if (!(cfg.image.blur_sigma >= 0.0)) throw Error(Errc::ConfigError, "'image.blur_sigma' must be >= 0");

  const auto& rec = eff["recognizer"];
  const auto kind = get_as<std::string>(rec["kind"], "recognizer.kind");
  if (kind == "template") {
    cfg.recognizer = RecognizerSpec::template_matcher();
  } else if (kind == "external") {
    cfg.recognizer = RecognizerSpec::external(cfg.ocr_engine_path);
    if (cfg.ocr_engine_path) require_exists(*cfg.ocr_engine_path, "ocr_engine_path");
  } else {
    throw Error(Errc::ConfigError, "'recognizer.kind' must be \"template\" or \"external\"");
  }
  cfg.recognizer.char_whitelist = get_as<std::string>(rec["whitelist"], "recognizer.whitelist");
  cfg.recognizer.page_seg_mode = get_as<int>(rec["psm"], "recognizer.psm");

  cfg.ranges = RangeTable{};
  cfg.ranges.enabled = get_as<bool>(eff["ranges"]["enabled"], "ranges.enabled");
  for (const auto& [channel, r] : eff["ranges"]["channels"].items()) {
    const auto key = "ranges.channels." + channel;
    if (!r.is_object() || !r.contains("min") || !r.contains("max") || r.size() != 2) {
      throw Error(Errc::ConfigError, "'" + key + "' must be {\"min\":..,\"max\":..}");
    }
    const long lo = get_as<long>(r["min"], key + ".min"), hi = get_as<long>(r["max"], key + ".max");
    if (lo > hi) throw Error(Errc::ConfigError, "'" + key + "' has min > max");
    cfg.ranges.set({channel, lo, hi});
  }

  const auto& cl = eff["clean"];
  cfg.clean.z_threshold = get_as<double>(cl["z_threshold"], "clean.z_threshold");
  if (!cl["ema_alpha"].is_null()) cfg.clean.ema_alpha = get_as<double>(cl["ema_alpha"], "clean.ema_alpha");
  cfg.clean.two_sided = get_as<bool>(cl["two_sided"], "clean.two_sided");
  cfg.clean.sample_std = get_as<bool>(cl["sample_std"], "clean.sample_std");
  if (!cl["clamp_min"].is_null()) cfg.clean.clamp_min = get_as<double>(cl["clamp_min"], "clean.clamp_min");
  if (!cl["clamp_max"].is_null()) cfg.clean.clamp_max = get_as<double>(cl["clamp_max"], "clean.clamp_max");
  try {
    cfg.clean.validate();
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, e.message());
  }

  const auto& em = eff["emotion"];
  if (!em["path"].is_null()) {
    cfg.emotion_path = resolve(get_as<std::string>(em["path"], "emotion.path"));
    require_exists(*cfg.emotion_path, "emotion.path");
  }
  cfg.emotion.timestamp_column = get_as<std::string>(em["timestamp_column"], "emotion.timestamp_column");
  cfg.emotion.offset_ms = get_as<double>(em["offset_ms"], "emotion.offset_ms");
  for (const auto& [column, canonical] : em["channel_map"].items()) {
    cfg.emotion.channel_map[column] = get_as<std::string>(canonical, "emotion.channel_map." + column);
  }

  const auto& an = eff["analysis"];
  if (!an["features"].is_null()) cfg.analysis.features = get_as<std::vector<std::string>>(an["features"], "analysis.features");
  if (!an["pairs"].is_null()) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& p : an["pairs"]) {
      const auto v = get_as<std::vector<std::string>>(p, "analysis.pairs");
      if (v.size() != 2) throw Error(Errc::ConfigError, "'analysis.pairs' entries must name two features");
      pairs.emplace_back(v[0], v[1]);
    }
    cfg.analysis.pairs = std::move(pairs);
  }
  cfg.analysis.window = get_as<long>(an["window"], "analysis.window");
  cfg.analysis.step = get_as<long>(an["step"], "analysis.step");
  if (cfg.analysis.window < 2 || cfg.analysis.step < 1) {
    throw Error(Errc::ConfigError, "'analysis.window' must be >= 2 and 'analysis.step' >= 1");
  }
  const auto& tr = an["tradeoff"];
  if (!tr["pair"].is_null()) {
    const auto v = get_as<std::vector<std::string>>(tr["pair"], "analysis.tradeoff.pair");
    if (v.size() != 2) throw Error(Errc::ConfigError, "'analysis.tradeoff.pair' must name two features");
    cfg.analysis.tradeoff_pair = std::make_pair(v[0], v[1]);
  }
  cfg.analysis.tradeoff_alpha =
      tr["alpha"].is_null() ? cfg.clean.ema_alpha : get_as<double>(tr["alpha"], "analysis.tradeoff.alpha");
  if (!(cfg.analysis.tradeoff_alpha > 0.0 && cfg.analysis.tradeoff_alpha <= 1.0)) {
    throw Error(Errc::ConfigError, "'analysis.tradeoff.alpha' must be in (0,1]");
  }
  const auto format = get_as<std::string>(an["format"], "analysis.format");
  if (format == "csv") {
    cfg.analysis.format = ReportFormat::Csv;
  } else if (format == "json") {
    cfg.analysis.format = ReportFormat::Json;
  } else {
    throw Error(Errc::ConfigError, "'analysis.format' must be \"csv\" or \"json\"");
  }

  cfg.output_dir = resolve(get_as<std::string>(eff["output_dir"], "output_dir"));
  cfg.seed = get_as<std::uint64_t>(eff["seed"], "seed");
  const auto jobs = get_as<long>(eff["jobs"], "jobs");
  if (jobs < 0) throw Error(Errc::ConfigError, "'jobs' must be >= 0");
  cfg.jobs = static_cast<std::size_t>(jobs);
  return cfg;
}

inline PipelineConfig load_config_file(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, e.message());
  }
  json doc = json::parse(text, nullptr, false, true);
  if (doc.is_discarded()) throw Error(Errc::ConfigError, path.string() + " is not valid JSON");
  return load_config(doc, std::filesystem::absolute(path).parent_path(), overrides);
}

// ---------------------------------------------------------------------------
// Synthetic fixture description

struct FixtureConfig {
  std::string name = "fixture";
  TruthParams truth;
  RenderLayout layout = RenderLayout::standard();
  RenderNoise noise;
  std::string spike_channel = "power";
  std::size_t spike_count = 0;
  long spike_magnitude = 800;
  double emotion_rho = 0.36;
  int emotion_rate_hz = 1;
  bool assemble_video = false;
  std::optional<std::string> media_tool_path;
};

inline json default_fixture_json() {
  return json::parse(R"({
    "name": "fixture", "duration": 600, "profile": "interval", "seed": 0,
    "high_w": 250, "low_w": 120, "period_s": 120, "steady_w": 200,
    "hr_rest": 60, "hr_gain": 0.44, "tau_s": 30, "read_noise_sd": 0,
    "frame_width": 480, "frame_height": 270, "scale": 4, "rois": null,
    "noise": {"pixel_flip_p": 0, "glyph_swap_p": 0},
    "spikes": {"channel": "power", "count": 0, "magnitude": 800},
    "emotion": {"rho": 0.36, "rate_hz": 1},
    "assemble_video": false, "media_tool_path": null
  })");
}

inline FixtureConfig load_fixture_config(const json& user, const std::vector<std::string>& overrides = {}) {
  json doc = user;
  for (const auto& o : overrides) apply_override(doc, o);
  json eff = default_fixture_json();
  detail::merge_checked(eff, doc, "");
  using detail::get_as;
  FixtureConfig f;
  f.name = get_as<std::string>(eff["name"], "name");
  if (f.name.empty() || f.name.find('/') != std::string::npos) throw Error(Errc::ConfigError, "'name' must be a plain directory name");
  auto& t = f.truth;
  t.duration = get_as<long>(eff["duration"], "duration");
  const auto profile = get_as<std::string>(eff["profile"], "profile");
  if (profile == "interval") {
    t.profile = Profile::Interval;
  } else if (profile == "steady") {
    t.profile = Profile::Steady;
  } else {
    throw Error(Errc::ConfigError, "'profile' must be \"interval\" or \"steady\"");
  }
  t.seed = get_as<std::uint64_t>(eff["seed"], "seed");
  t.high_w = get_as<double>(eff["high_w"], "high_w");
  t.low_w = get_as<double>(eff["low_w"], "low_w");
  t.period_s = get_as<long>(eff["period_s"], "period_s");
  t.steady_w = get_as<double>(eff["steady_w"], "steady_w");
  t.hr_rest = get_as<double>(eff["hr_rest"], "hr_rest");
  t.hr_gain = get_as<double>(eff["hr_gain"], "hr_gain");
  t.tau_s = get_as<double>(eff["tau_s"], "tau_s");
  t.read_noise_sd = get_as<double>(eff["read_noise_sd"], "read_noise_sd");
  f.layout.frame_width = get_as<int>(eff["frame_width"], "frame_width");
  f.layout.frame_height = get_as<int>(eff["frame_height"], "frame_height");
  f.layout.scale = get_as<int>(eff["scale"], "scale");
  if (!eff["rois"].is_null()) {
    f.layout.rois.clear();
    for (std::size_t i = 0; i < eff["rois"].size(); ++i) {
      f.layout.rois.push_back(detail::roi_from_json(eff["rois"][i], "rois[" + std::to_string(i) + "]"));
    }
  }
  try {
    f.layout.validate();
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, e.message());
  }
  f.noise.pixel_flip_p = get_as<double>(eff["noise"]["pixel_flip_p"], "noise.pixel_flip_p");
  f.noise.glyph_swap_p = get_as<double>(eff["noise"]["glyph_swap_p"], "noise.glyph_swap_p");
  for (double p : {f.noise.pixel_flip_p, f.noise.glyph_swap_p}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::ConfigError, "noise probabilities must be in [0,1]");
  }
  f.spike_channel = get_as<std::string>(eff["spikes"]["channel"], "spikes.channel");
  f.spike_count = get_as<std::size_t>(eff["spikes"]["count"], "spikes.count");
  f.spike_magnitude = get_as<long>(eff["spikes"]["magnitude"], "spikes.magnitude");
  f.emotion_rho = get_as<double>(eff["emotion"]["rho"], "emotion.rho");
  f.emotion_rate_hz = get_as<int>(eff["emotion"]["rate_hz"], "emotion.rate_hz");
  f.assemble_video = get_as<bool>(eff["assemble_video"], "assemble_video");
  if (!eff["media_tool_path"].is_null()) f.media_tool_path = get_as<std::string>(eff["media_tool_path"], "media_tool_path");
  return f;
}

}  // namespace vitalcast
