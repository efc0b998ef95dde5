#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vitalcast/csv.hpp"
#include "vitalcast/error.hpp"
#include "vitalcast/series.hpp"

namespace vitalcast {

/// The seven discrete emotions plus the continuous affect channels.
inline const std::vector<std::string>& canonical_emotion_channels() {
  static const std::vector<std::string> names = {"joy",     "anger",    "sadness",   "contempt",  "fear",
                                                 "surprise", "disgust", "valence", "attention", "engagement"};
  return names;
}

struct EmotionSeries {
  std::vector<double> timestamps_ms;
  std::map<std::string, std::vector<double>> channels;
  std::size_t skipped_rows = 0;

  std::size_t size() const noexcept { return timestamps_ms.size(); }
};

struct EmotionMapping {
  std::string timestamp_column = "timestamp_ms";
  /// export column -> canonical channel. Empty: match canonical names case-insensitively.
  std::map<std::string, std::string> channel_map;
  double offset_ms = 0.0;
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::optional<std::size_t> find_column(const CsvTable& t, const std::string& name) {
  if (auto exact = t.column(name)) return exact;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (lower(t.header[i]) == lower(name)) return i;
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses an emotion export. Rows with an unparseable timestamp or channel value are skipped
/// and counted; rows are sorted by time and a repeated timestamp keeps the last row read.
inline EmotionSeries parse_emotion_table(const CsvTable& table, const EmotionMapping& mapping,
                                         const std::string& source = "emotion export") {
  const auto ts_col = detail::find_column(table, mapping.timestamp_column);
  if (!ts_col) throw Error(Errc::MissingColumn, "timestamp column '" + mapping.timestamp_column + "' not in " + source);

  std::vector<std::pair<std::size_t, std::string>> channel_cols;
  if (mapping.channel_map.empty()) {
    for (const auto& name : canonical_emotion_channels()) {
      if (auto c = detail::find_column(table, name); c && *c != *ts_col) channel_cols.emplace_back(*c, name);
    }
  } else {
    for (const auto& [column, canonical] : mapping.channel_map) {
      if (auto c = detail::find_column(table, column)) channel_cols.emplace_back(*c, canonical);
    }
  }
  if (channel_cols.empty()) throw Error(Errc::MissingColumn, "no emotion channel columns resolved in " + source);
  if (table.rows.empty()) throw Error(Errc::EmptyExport, source + " has a header but no rows");

  struct Row {
    double t;
    std::size_t order;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  std::size_t skipped = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& fields = table.rows[r];
    auto cell = [&](std::size_t c) -> std::optional<double> {
      return c < fields.size() ? parse_double(fields[c]) : std::nullopt;
    };
    const auto t = cell(*ts_col);
    Row row{t.value_or(0.0) + mapping.offset_ms, r, {}};
    bool ok = t.has_value();
    for (const auto& [c, name] : channel_cols) {
      const auto v = ok ? cell(c) : std::nullopt;
      if (!v) {
        ok = false;
        break;
      }
      row.values.push_back(*v);
    }
    if (ok) {
      rows.push_back(std::move(row));
    } else {
      ++skipped;
    }
  }
  if (rows.empty()) throw Error(Errc::EmptyExport, "no parseable rows in " + source);

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  EmotionSeries series;
  series.skipped_rows = skipped;
  for (const auto& [c, name] : channel_cols) series.channels[name];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i + 1 < rows.size() && rows[i + 1].t == rows[i].t) continue;  // later row wins
    series.timestamps_ms.push_back(rows[i].t);
    for (std::size_t k = 0; k < channel_cols.size(); ++k) {
      series.channels[channel_cols[k].second].push_back(rows[i].values[k]);
    }
  }
  return series;
}

inline EmotionSeries parse_emotion_csv(const std::filesystem::path& path, const EmotionMapping& mapping = {}) {
  return parse_emotion_table(read_csv(path), mapping, path.string());
}

/// Canonical export: timestamp_ms followed by channels in name order.
inline std::string emotion_csv(const EmotionSeries& s) {
  std::string out = "timestamp_ms";
  for (const auto& [name, values] : s.channels) out += "," + csv_escape(name);
  out += "\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += format_number(s.timestamps_ms[i]);
    for (const auto& [name, values] : s.channels) out += "," + format_number(values[i]);
    out += "\n";
  }
  return out;
}

/// Per-second feature grid 0..T. A cell is present iff some source sample maps to it.
struct AlignedDataset {
  long duration = 0;  // T; the grid has T + 1 seconds
  std::map<std::string, std::vector<std::optional<double>>> columns;

  std::size_t grid_size() const noexcept { return static_cast<std::size_t>(duration) + 1; }

  const std::vector<std::optional<double>>& column(const std::string& name) const {
    auto it = columns.find(name);
    if (it == columns.end()) throw Error(Errc::UnknownFeature, "unknown feature '" + name + "'");
    return it->second;
  }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> names;
    for (const auto& [name, col] : columns) names.push_back(name);
    return names;
  }
};

/// Emotion samples are averaged over [k, k+1) s; telemetry samples land on their own second.
/// Samples outside the grid are ignored.
inline AlignedDataset align(const EmotionSeries& emotion, const std::vector<TelemetrySeries>& telemetry, long duration) {
  if (duration <= 0) throw Error(Errc::InvalidArgument, "alignment duration must be > 0");
  AlignedDataset data;
  data.duration = duration;
  const std::size_t n = data.grid_size();

  for (const auto& [name, values] : emotion.channels) {
    std::vector<double> sum(n, 0.0);
    std::vector<std::size_t> count(n, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double second = std::floor(emotion.timestamps_ms[i] / 1000.0);
      if (second < 0.0 || second > static_cast<double>(duration)) continue;
      const auto k = static_cast<std::size_t>(second);
      sum[k] += values[i];
      ++count[k];
    }
    auto& col = data.columns[name];
    col.assign(n, std::nullopt);
    for (std::size_t k = 0; k < n; ++k) {
      if (count[k]) col[k] = sum[k] / static_cast<double>(count[k]);
    }
  }
  for (const auto& s : telemetry) {
    if (data.columns.count(s.channel)) {
      throw Error(Errc::InvalidArgument, "feature '" + s.channel + "' supplied by both emotion and telemetry");
    }
    auto& col = data.columns[s.channel];
    col.assign(n, std::nullopt);
    for (const auto& x : s.samples) {
      if (x.t_seconds >= 0 && x.t_seconds <= duration) col[static_cast<std::size_t>(x.t_seconds)] = x.value;
    }
  }
  return data;
}

inline std::string aligned_csv(const AlignedDataset& data) {
  std::string out = "t_seconds";
  for (const auto& [name, col] : data.columns) out += "," + csv_escape(name);
  out += "\n";
  for (std::size_t k = 0; k < data.grid_size(); ++k) {
    out += std::to_string(k);
    for (const auto& [name, col] : data.columns) out += "," + (col[k] ? format_number(*col[k]) : std::string());
    out += "\n";
  }
  return out;
}

}  // namespace vitalcast
