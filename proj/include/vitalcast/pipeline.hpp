#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vitalcast/analysis.hpp"
#include "vitalcast/config.hpp"
#include "vitalcast/csv.hpp"
#include "vitalcast/emotion.hpp"
#include "vitalcast/error.hpp"
#include "vitalcast/ocr.hpp"
#include "vitalcast/series.hpp"
#include "vitalcast/synth.hpp"
#include "vitalcast/video_prep.hpp"

namespace vitalcast {

inline constexpr const char* kVersion = "0.1.0";

// Stage artifacts under output_dir are the only contract between stages:
//   prep/     concat.mp4, inset.mp4 (optional), frames/frame_%08d.png
//   extract/  telemetry.csv, frame_errors.csv
//   clean/    cleaned.csv, removals.csv
//   emotion/  emotion.csv
//   analyze/  aligned.csv, matrix.csv, windows.csv, tradeoff.csv, session.json
// and every stage directory carries a manifest.json.

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitMissingTool = 3, kExitStageFailure = 4 };

inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::InvalidRoi:
      return kExitConfig;
    case Errc::MediaToolMissing:
    case Errc::EngineMissing:
      return kExitMissingTool;
    default:
      return kExitStageFailure;
  }
}

struct StageResult {
  std::string stage;
  json manifest;
};

inline json base_manifest(const PipelineConfig& cfg, const std::string& stage) {
  return {{"stage", stage},
          {"vitalcast_version", kVersion},
          {"config_hash", cfg.hash},
          {"seed", cfg.seed},
          {"tools", json::object()},
          {"counts", json::object()},
          {"skipped", false}};
}

inline std::filesystem::path prepare_stage_dir(const PipelineConfig& cfg, const std::string& stage) {
  const auto dir = cfg.stage_dir(stage);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

inline StageResult finish_stage(const std::filesystem::path& dir, json manifest) {
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return {manifest["stage"].get<std::string>(), std::move(manifest)};
}

/// Trim/normalise/concatenate the configured parts, crop the athlete inset when configured,
/// and sample frames. A frames_dir config has nothing to prepare.
inline StageResult run_prep(const PipelineConfig& cfg) {
  auto manifest = base_manifest(cfg, "prep");
  const auto dir = prepare_stage_dir(cfg, "prep");
  if (!cfg.video) {
    if (!cfg.frames_dir) throw Error(Errc::ConfigError, "neither 'video' nor 'frames_dir' is configured");
    manifest["skipped"] = true;
    manifest["reason"] = "frames_dir configured";
    return finish_stage(dir, std::move(manifest));
  }
  const auto tool = MediaTool::discover(cfg.media_tool_path);
  manifest["tools"]["media_tool"] = tool.version();
  const auto concat = normalize_and_concat(tool, *cfg.video, dir / "concat.mp4");
  if (cfg.video->inset_roi) {
    const auto inset = crop_video(tool, dir / "concat.mp4", *cfg.video->inset_roi, dir / "inset.mp4");
    manifest["counts"]["inset_width"] = inset.width;
    manifest["counts"]["inset_height"] = inset.height;
  }
  const auto frames = extract_frames(tool, dir / "concat.mp4", dir / "frames", cfg.frame_rate);
  manifest["counts"]["parts"] = cfg.video->parts.size();
  manifest["counts"]["duration_s"] = concat.duration;
  manifest["counts"]["fps"] = concat.fps;
  manifest["counts"]["frames"] = frames.size();
  return finish_stage(dir, std::move(manifest));
}

inline StageResult run_extract(const PipelineConfig& cfg) {
  if (cfg.rois.empty()) throw Error(Errc::ConfigError, "no metric 'rois' configured");
  const Recognizer recognizer(cfg.recognizer);
  auto manifest = base_manifest(cfg, "extract");
  const auto frames = list_frames(cfg.frames_source(), cfg.frame_rate);
  if (frames.empty()) throw Error(Errc::IoFailure, "no frame_%08d.png files in " + cfg.frames_source().string());
  const auto dir = prepare_stage_dir(cfg, "extract");

  ExtractOptions options{cfg.image, cfg.jobs};
  const auto result = extract_series(frames, cfg.rois, recognizer, cfg.ranges, options);
  write_text_file(dir / "telemetry.csv", telemetry_csv(result));
  write_text_file(dir / "frame_errors.csv", frame_errors_csv(result.errors));

  manifest["tools"]["ocr_engine"] = recognizer.version();
  manifest["recognizer"] = {{"kind", cfg.recognizer.kind == RecognizerSpec::Kind::Template ? "template" : "external"}};
  if (cfg.recognizer.kind == RecognizerSpec::Kind::External) manifest["recognizer"]["flags"] = recognizer.engine_flags();
  manifest["counts"]["frames"] = frames.size();
  manifest["counts"]["frame_errors"] = result.errors.size();
  for (const auto& [channel, readings] : result.series) {
    const auto values = std::count_if(readings.begin(), readings.end(), [](const Reading& r) { return r.value.has_value(); });
    manifest["counts"]["channels"][channel] = {{"readings", readings.size()},
                                               {"values", values},
                                               {"gaps", static_cast<long>(readings.size()) - values}};
  }
  return finish_stage(dir, std::move(manifest));
}

inline StageResult run_clean(const PipelineConfig& cfg) {
  const auto series = read_telemetry_csv(cfg.stage_dir("extract") / "telemetry.csv");
  auto manifest = base_manifest(cfg, "clean");
  const auto dir = prepare_stage_dir(cfg, "clean");
  std::map<std::string, CleanedSeries> cleaned;
  for (const auto& [channel, readings] : series) {
    const auto s = to_series(channel, readings);
    cleaned[channel] = clean_series(s, cfg.clean);
    json counts = {{"input", s.samples.size()},
                   {"kept", cleaned[channel].kept.samples.size()},
                   {"removed", cleaned[channel].removed.size()}};
    if (!s.samples.empty()) {
      const auto m = series_stats(s, cfg.clean.sample_std);
      counts["mean"] = m.mean;
      counts["std"] = m.std;
    }
    manifest["counts"]["channels"][channel] = std::move(counts);
  }
  write_text_file(dir / "cleaned.csv", cleaned_csv(cleaned));
  write_text_file(dir / "removals.csv", removals_csv(cleaned));
  manifest["params"] = {{"z_threshold", cfg.clean.z_threshold},
                        {"two_sided", cfg.clean.two_sided},
                        {"sample_std", cfg.clean.sample_std},
                        {"ema_alpha", cfg.clean.ema_alpha}};
  return finish_stage(dir, std::move(manifest));
}

inline StageResult run_ingest_emotion(const PipelineConfig& cfg) {
  auto manifest = base_manifest(cfg, "emotion");
  const auto dir = prepare_stage_dir(cfg, "emotion");
  if (!cfg.emotion_path) {
    std::error_code ec;
    std::filesystem::remove(dir / "emotion.csv", ec);
    manifest["skipped"] = true;
    manifest["reason"] = "no emotion export configured";
    return finish_stage(dir, std::move(manifest));
  }
  const auto series = parse_emotion_csv(*cfg.emotion_path, cfg.emotion);
  write_text_file(dir / "emotion.csv", emotion_csv(series));
  manifest["counts"]["rows"] = series.size();
  manifest["counts"]["skipped_rows"] = series.skipped_rows;
  for (const auto& [name, values] : series.channels) manifest["counts"]["channels"].push_back(name);
  return finish_stage(dir, std::move(manifest));
}

/// Re-reads a canonical emotion.csv written by the ingest stage.
inline EmotionSeries read_canonical_emotion(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  EmotionMapping mapping;
  for (const auto& h : table.header) {
    if (h != mapping.timestamp_column) mapping.channel_map[h] = h;
  }
  return parse_emotion_table(table, mapping, path.string());
}

inline StageResult run_analyze(const PipelineConfig& cfg) {
  const auto cleaned = read_cleaned_csv(cfg.stage_dir("clean") / "cleaned.csv");
  std::optional<EmotionSeries> emotion;
  const auto emotion_file = cfg.stage_dir("emotion") / "emotion.csv";
  if (cfg.emotion_path) emotion = read_canonical_emotion(emotion_file);

  long duration = 0;
  std::vector<TelemetrySeries> telemetry;
  for (const auto& [channel, c] : cleaned) {
    if (!c.kept.samples.empty()) duration = std::max(duration, c.kept.samples.back().t_seconds);
    telemetry.push_back(c.kept);
  }
  if (emotion && emotion->size()) {
    duration = std::max(duration, static_cast<long>(std::floor(emotion->timestamps_ms.back() / 1000.0)));
  }
  if (duration <= 0) throw Error(Errc::EmptySeries, "nothing to analyse: cleaned telemetry and emotion are empty");
  const auto data = align(emotion.value_or(EmotionSeries{}), telemetry, duration);

  const auto features = cfg.analysis.features.value_or(data.feature_names());
  auto report = correlation_matrix(data, features);

  std::vector<std::pair<std::string, std::string>> pairs;
  if (cfg.analysis.pairs) {
    pairs = *cfg.analysis.pairs;
  } else {
    for (const auto& [a, b] : std::vector<std::pair<std::string, std::string>>{
             {"power", "valence"}, {"heart_rate", "valence"}, {"power", "heart_rate"}}) {
      if (data.columns.count(a) && data.columns.count(b)) pairs.emplace_back(a, b);
    }
  }
  for (const auto& [a, b] : pairs) {
    auto w = windowed_correlation(data, a, b, cfg.analysis.window, cfg.analysis.step);
    report.windows.insert(report.windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }

  std::optional<TradeoffSeries> tradeoff;
  if (cfg.analysis.tradeoff_pair) {
    tradeoff = tradeoff_series(data, cfg.analysis.tradeoff_pair->first, cfg.analysis.tradeoff_pair->second,
                               cfg.analysis.tradeoff_alpha);
  } else if (data.columns.count("attention") && data.columns.count("valence")) {
    tradeoff = tradeoff_series(data, "attention", "valence", cfg.analysis.tradeoff_alpha);
  }

  auto manifest = base_manifest(cfg, "analyze");
  manifest["counts"]["grid_seconds"] = data.grid_size();
  manifest["counts"]["features"] = features.size();
  manifest["counts"]["windows"] = report.windows.size();
  manifest["params"] = {{"window", cfg.analysis.window}, {"step", cfg.analysis.step}};

  const auto dir = prepare_stage_dir(cfg, "analyze");
  for (const char* stale : {"matrix.csv", "windows.csv", "tradeoff.csv"}) {
    std::error_code ec;
    std::filesystem::remove(dir / stale, ec);
  }
  write_text_file(dir / "aligned.csv", aligned_csv(data));
  export_report(report, tradeoff, cfg.analysis.format, dir, manifest);
  return finish_stage(dir, std::move(manifest));
}

inline std::vector<StageResult> run_pipeline(const PipelineConfig& cfg) {
  std::vector<StageResult> results;
  results.push_back(run_prep(cfg));
  results.push_back(run_extract(cfg));
  results.push_back(run_clean(cfg));
  results.push_back(run_ingest_emotion(cfg));
  results.push_back(run_analyze(cfg));
  return results;
}

// ---------------------------------------------------------------------------
// Fixture generation

struct FixtureOutput {
  std::filesystem::path dir;
  GroundTruth truth;
  std::vector<long> spike_times;
  std::map<std::string, std::vector<double>> emotion;
};

inline json roi_json(const RoiSpec& r) {
  return {{"channel", r.channel()}, {"x", r.x()}, {"y", r.y()}, {"w", r.w()}, {"h", r.h()}};
}

/// Writes <out_root>/<name>/: frames/ (frame PNGs + truth.csv), emotion.csv, spikes.csv,
/// pipeline.json and, when requested, fixture.mp4 with pipeline_video.json.
inline FixtureOutput write_fixture(const FixtureConfig& fc, const std::filesystem::path& out_root, std::size_t jobs = 0) {
  FixtureOutput out;
  out.dir = out_root / fc.name;
  std::error_code ec;
  std::filesystem::create_directories(out.dir / "frames", ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + out.dir.string() + ": " + ec.message());

  out.truth = generate_truth(fc.truth);
  if (fc.spike_count > 0) {
    out.spike_times = inject_spikes(out.truth, fc.spike_channel, fc.spike_count, fc.spike_magnitude, fc.truth.seed);
  }
  for (const auto& f : list_frames(out.dir / "frames")) std::filesystem::remove(f.path, ec);
  render_frames(out.truth, fc.layout, shipped_glyphs(), out.dir / "frames", fc.noise, jobs);
  out.emotion = generate_correlated_emotion(out.truth, fc.emotion_rho, fc.truth.seed);
  write_text_file(out.dir / "emotion.csv", synth_emotion_csv(out.emotion, fc.emotion_rate_hz));

  std::string spikes = "t_seconds,channel\n";
  for (long t : out.spike_times) spikes += std::to_string(t) + "," + fc.spike_channel + "\n";
  write_text_file(out.dir / "spikes.csv", spikes);

  json pipeline = {{"frames_dir", "frames"},
                   {"rois", json::array()},
                   {"emotion", {{"path", "emotion.csv"}}},
                   {"output_dir", "out"},
                   {"seed", fc.truth.seed}};
  for (const auto& r : fc.layout.rois) pipeline["rois"].push_back(roi_json(r));
  write_text_file(out.dir / "pipeline.json", pipeline.dump(2) + "\n");

  if (fc.assemble_video) {
    const auto tool = MediaTool::discover(fc.media_tool_path);
    frames_to_video(tool, out.dir / "frames", out.dir / "fixture.mp4", 1.0, 30.0);
    json video = pipeline;
    video.erase("frames_dir");
    video["video"] = {{"parts", json::array({{{"path", "fixture.mp4"}}})}, {"target_fps", 30}};
    video["output_dir"] = "out_video";
    write_text_file(out.dir / "pipeline_video.json", video.dump(2) + "\n");
  }
  return out;
}

}  // namespace vitalcast
