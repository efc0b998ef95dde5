#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vitalcast/csv.hpp"
#include "vitalcast/error.hpp"
#include "vitalcast/ocr.hpp"

namespace vitalcast {

struct Sample {
  long t_seconds = 0;
  double value = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Ordered samples of one channel at nominal 1 Hz. Gaps are simply missing timestamps.
struct TelemetrySeries {
  std::string channel;
  std::vector<Sample> samples;

  void validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!std::isfinite(samples[i].value)) throw Error(Errc::InvalidArgument, channel + ": non-finite sample");
      if (i > 0 && samples[i].t_seconds <= samples[i - 1].t_seconds) {
        throw Error(Errc::InvalidArgument, channel + ": timestamps must be strictly increasing");
      }
    }
  }

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(s.value);
    return v;
  }
};

/// Readings with a value become samples; gaps are dropped.
inline TelemetrySeries to_series(const std::string& channel, const std::vector<Reading>& readings) {
  TelemetrySeries s{channel, {}};
  for (const auto& r : readings) {
    if (r.value) s.samples.push_back({r.t_seconds, static_cast<double>(*r.value)});
  }
  s.validate();
  return s;
}

struct CleanParams {
  double z_threshold = 3.0;
  double ema_alpha = 2.0 / (30 + 1);
  bool two_sided = true;
  bool sample_std = false;  // n-1 denominator instead of n
  std::optional<double> clamp_min;
  std::optional<double> clamp_max;

  void validate() const {
    if (!(z_threshold > 0.0)) throw Error(Errc::InvalidArgument, "z_threshold must be > 0");
    if (!(ema_alpha > 0.0 && ema_alpha <= 1.0)) throw Error(Errc::InvalidArgument, "ema_alpha must be in (0,1]");
    if (clamp_min && clamp_max && *clamp_min > *clamp_max) {
      throw Error(Errc::InvalidArgument, "clamp_min exceeds clamp_max");
    }
  }
};

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

inline Moments series_stats(const TelemetrySeries& s, bool sample_std = false) {
  const auto n = s.samples.size();
  if (n == 0) throw Error(Errc::EmptySeries, s.channel + ": no samples");
  double sum = 0.0;
  for (const auto& x : s.samples) sum += x.value;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& x : s.samples) ss += (x.value - mean) * (x.value - mean);
  const double denom = sample_std ? static_cast<double>(n) - 1.0 : static_cast<double>(n);
  return {mean, denom > 0.0 ? std::sqrt(ss / denom) : 0.0};
}

struct Removal {
  long t_seconds = 0;
  double value = 0.0;
  double z = 0.0;
};

struct ZscoreResult {
  TelemetrySeries kept;
  std::vector<Removal> removed;
  Moments moments;
};

/// One pass against the moments of the full input. Fewer than two samples or zero spread
/// passes everything through. The optional value clamp removes out-of-range samples after
/// the z cut.
inline ZscoreResult zscore_filter(const TelemetrySeries& s, const CleanParams& params = {}) {
  params.validate();
  ZscoreResult out;
  out.kept.channel = s.channel;
  if (s.samples.empty()) return out;
  out.moments = series_stats(s, params.sample_std);
  const bool active = s.samples.size() >= 2 && out.moments.std > 0.0;
  for (const auto& x : s.samples) {
    const double z = active ? (x.value - out.moments.mean) / out.moments.std : 0.0;
    const bool outlier = active && (params.two_sided ? std::abs(z) > params.z_threshold : z > params.z_threshold);
    const bool clamped = (params.clamp_min && x.value < *params.clamp_min) ||
                         (params.clamp_max && x.value > *params.clamp_max);
    if (outlier || clamped) {
      out.removed.push_back({x.t_seconds, x.value, z});
    } else {
      out.kept.samples.push_back(x);
    }
  }
  return out;
}

/// y0 = x0, y_t = alpha x_t + (1 - alpha) y_{t-1} over present samples; gaps carry state.
inline TelemetrySeries ema(const TelemetrySeries& s, double alpha) {
  if (s.samples.empty()) throw Error(Errc::EmptySeries, s.channel + ": no samples");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::InvalidArgument, "ema alpha must be in (0,1]");
  TelemetrySeries out{s.channel, {}};
  out.samples.reserve(s.samples.size());
  double y = s.samples.front().value;
  out.samples.push_back(s.samples.front());
  for (std::size_t i = 1; i < s.samples.size(); ++i) {
    // Same recurrence written as an increment, which is exact on constant input.
    y = alpha == 1.0 ? s.samples[i].value : y + alpha * (s.samples[i].value - y);
    out.samples.push_back({s.samples[i].t_seconds, y});
  }
  return out;
}

struct CleanedSeries {
  TelemetrySeries kept;
  TelemetrySeries smoothed;
  std::vector<Removal> removed;
};

inline CleanedSeries clean_series(const TelemetrySeries& s, const CleanParams& params = {}) {
  auto z = zscore_filter(s, params);
  CleanedSeries out{z.kept, {s.channel, {}}, std::move(z.removed)};
  if (!out.kept.samples.empty()) out.smoothed = ema(out.kept, params.ema_alpha);
  return out;
}

// Cleaned CSV: t_seconds,channel,value,ema. Removals CSV: t_seconds,channel,value,z.

inline std::string cleaned_csv(const std::map<std::string, CleanedSeries>& cleaned) {
  std::string out = "t_seconds,channel,value,ema\n";
  for (const auto& [channel, c] : cleaned) {
    for (std::size_t i = 0; i < c.kept.samples.size(); ++i) {
      const auto& k = c.kept.samples[i];
      out += std::to_string(k.t_seconds) + "," + csv_escape(channel) + "," + format_number(k.value) + "," +
             format_number(c.smoothed.samples[i].value) + "\n";
    }
  }
  return out;
}

inline std::string removals_csv(const std::map<std::string, CleanedSeries>& cleaned) {
  std::string out = "t_seconds,channel,value,z\n";
  for (const auto& [channel, c] : cleaned) {
    for (const auto& r : c.removed) {
      out += std::to_string(r.t_seconds) + "," + csv_escape(channel) + "," + format_number(r.value) + "," +
             format_number(r.z) + "\n";
    }
  }
  return out;
}

/// Reads a cleaned CSV back into per-channel (value, ema) series.
inline std::map<std::string, CleanedSeries> read_cleaned_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const auto t = table.column("t_seconds"), ch = table.column("channel"), v = table.column("value"),
             e = table.column("ema");
  if (!t || !ch || !v || !e) throw Error(Errc::MissingColumn, "cleaned csv " + path.string() + " lacks a column");
  std::map<std::string, CleanedSeries> out;
  for (const auto& row : table.rows) {
    if (row.size() < table.header.size()) throw Error(Errc::IoFailure, "short row in " + path.string());
    const auto ts = parse_integer(row[*t]);
    const auto value = parse_double(row[*v]);
    const auto smoothed = parse_double(row[*e]);
    if (!ts || !value || !smoothed) throw Error(Errc::IoFailure, "malformed row in " + path.string());
    auto& c = out[row[*ch]];
    c.kept.channel = c.smoothed.channel = row[*ch];
    c.kept.samples.push_back({static_cast<long>(*ts), *value});
    c.smoothed.samples.push_back({static_cast<long>(*ts), *smoothed});
  }
  for (const auto& [name, c] : out) c.kept.validate();
  return out;
}

}  // namespace vitalcast
