#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vitalcast/csv.hpp"
#include "vitalcast/emotion.hpp"
#include "vitalcast/error.hpp"

namespace vitalcast {

/// r = sum(dx dy) / sqrt(sum(dx^2) sum(dy^2)) with two-pass centring, clamped to [-1, 1].
/// Throws TooFewPairs below two samples and ZeroVariance when either input is constant.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::InvalidArgument, "pearson inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw Error(Errc::TooFewPairs, "need at least 2 pairs, have " + std::to_string(n));
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) throw Error(Errc::ZeroVariance, "constant input");
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::ZeroVariance, "variance underflow");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct PearsonResult {
  std::optional<double> r;
  std::size_t n_pairs = 0;
  std::string reason;  // empty when r is present
};

/// Pearson over the indices where both cells are present.
inline PearsonResult pearson_complete(std::span<const std::optional<double>> x,
                                      std::span<const std::optional<double>> y) {
  if (x.size() != y.size()) throw Error(Errc::InvalidArgument, "pearson inputs differ in length");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] && y[i]) {
      a.push_back(*x[i]);
      b.push_back(*y[i]);
    }
  }
  PearsonResult res;
  res.n_pairs = a.size();
  try {
    res.r = pearson(a, b);
  } catch (const Error& e) {
    if (e.code() == Errc::TooFewPairs) {
      res.reason = "too_few_pairs";
    } else if (e.code() == Errc::ZeroVariance) {
      res.reason = "zero_variance";
    } else {
      throw;
    }
  }
  return res;
}

struct WindowCorrelation {
  long start_s = 0;
  long end_s = 0;
  std::string feature_a;
  std::string feature_b;
  std::optional<double> r;
  std::size_t n_pairs = 0;
  std::string reason;
};

/// Tumbling windows [k*step, k*step + window) aligned to t = 0; a trailing partial window is dropped.
inline std::vector<WindowCorrelation> windowed_correlation(const AlignedDataset& data, const std::string& feature_a,
                                                           const std::string& feature_b, long window = 60,
                                                           long step = 60) {
  if (window < 2) throw Error(Errc::InvalidArgument, "window must be >= 2 s");
  if (step < 1) throw Error(Errc::InvalidArgument, "step must be >= 1 s");
  const auto& a = data.column(feature_a);
  const auto& b = data.column(feature_b);
  const long grid = static_cast<long>(data.grid_size());
  std::vector<WindowCorrelation> out;
  for (long start = 0; start + window <= grid; start += step) {
    const auto offset = static_cast<std::size_t>(start);
    const auto len = static_cast<std::size_t>(window);
    auto res = pearson_complete(std::span(a).subspan(offset, len), std::span(b).subspan(offset, len));
    out.push_back({start, start + window, feature_a, feature_b, res.r, res.n_pairs, std::move(res.reason)});
  }
  return out;
}

struct CorrelationReport {
  std::vector<std::string> features;
  std::vector<std::vector<std::optional<double>>> matrix;
  std::vector<std::vector<std::string>> reasons;
  std::vector<WindowCorrelation> windows;
};

/// Full-session pairwise Pearson over complete cases. The diagonal is 1 wherever the feature
/// has variance; an all-absent feature gets reason "no_data" across its row and column.
inline CorrelationReport correlation_matrix(const AlignedDataset& data, const std::vector<std::string>& features) {
  if (features.size() < 2) throw Error(Errc::InvalidArgument, "correlation matrix needs at least 2 features");
  CorrelationReport rep;
  rep.features = features;
  const std::size_t n = features.size();
  rep.matrix.assign(n, std::vector<std::optional<double>>(n));
  rep.reasons.assign(n, std::vector<std::string>(n));
  std::vector<const std::vector<std::optional<double>>*> cols;
  std::vector<bool> empty;
  for (const auto& f : features) {
    cols.push_back(&data.column(f));
    empty.push_back(std::none_of(cols.back()->begin(), cols.back()->end(), [](const auto& c) { return c.has_value(); }));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      std::optional<double> r;
      std::string reason;
      if (empty[i] || empty[j]) {
        reason = "no_data";
      } else {
        auto res = pearson_complete(*cols[i], *cols[j]);
        r = res.r;
        reason = res.reason;
        if (i == j && r) r = 1.0;
      }
      rep.matrix[i][j] = rep.matrix[j][i] = r;
      rep.reasons[i][j] = rep.reasons[j][i] = reason;
    }
  }
  return rep;
}

struct TradeoffSeries {
  std::string feature_a;
  std::string feature_b;
  double alpha = 1.0;
  std::vector<std::optional<double>> a;
  std::vector<std::optional<double>> b;
};

/// EMA over the present cells of a grid column; absent cells stay absent and carry state.
inline std::vector<std::optional<double>> ema_column(const std::vector<std::optional<double>>& col, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::InvalidArgument, "ema alpha must be in (0,1]");
  std::vector<std::optional<double>> out(col.size());
  std::optional<double> y;
  for (std::size_t k = 0; k < col.size(); ++k) {
    if (!col[k]) continue;
    y = !y || alpha == 1.0 ? *col[k] : *y + alpha * (*col[k] - *y);
    out[k] = y;
  }
  return out;
}

inline TradeoffSeries tradeoff_series(const AlignedDataset& data, const std::string& feature_a,
                                      const std::string& feature_b, double alpha) {
  return {feature_a, feature_b, alpha, ema_column(data.column(feature_a), alpha),
          ema_column(data.column(feature_b), alpha)};
}

// ---------------------------------------------------------------------------
// Report files

enum class ReportFormat { Csv, Json };

inline std::string optional_cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline std::string matrix_csv(const CorrelationReport& rep) {
  std::string out = "feature";
  for (const auto& f : rep.features) out += "," + csv_escape(f);
  out += "\n";
  for (std::size_t i = 0; i < rep.features.size(); ++i) {
    out += csv_escape(rep.features[i]);
    for (std::size_t j = 0; j < rep.features.size(); ++j) out += "," + optional_cell(rep.matrix[i][j]);
    out += "\n";
  }
  return out;
}

inline std::string windows_csv(const std::vector<WindowCorrelation>& windows) {
  std::string out = "start_s,end_s,feature_a,feature_b,r,n_pairs\n";
  for (const auto& w : windows) {
    out += std::to_string(w.start_s) + "," + std::to_string(w.end_s) + "," + csv_escape(w.feature_a) + "," +
           csv_escape(w.feature_b) + "," + optional_cell(w.r) + "," + std::to_string(w.n_pairs) + "\n";
  }
  return out;
}

inline std::string tradeoff_csv(const TradeoffSeries& t) {
  std::string out = "t_seconds," + csv_escape(t.feature_a) + "," + csv_escape(t.feature_b) + "\n";
  for (std::size_t k = 0; k < t.a.size(); ++k) {
    out += std::to_string(k) + "," + optional_cell(t.a[k]) + "," + optional_cell(t.b[k]) + "\n";
  }
  return out;
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json session_json(const CorrelationReport& rep, const std::optional<TradeoffSeries>& tradeoff,
                                   const nlohmann::json& manifest) {
  nlohmann::json j;
  j["features"] = rep.features;
  auto& matrix = j["matrix"] = nlohmann::json::array();
  for (const auto& row : rep.matrix) {
    auto jr = nlohmann::json::array();
    for (const auto& v : row) jr.push_back(optional_json(v));
    matrix.push_back(std::move(jr));
  }
  j["matrix_reasons"] = rep.reasons;
  auto& windows = j["windows"] = nlohmann::json::array();
  for (const auto& w : rep.windows) {
    windows.push_back({{"start_s", w.start_s},
                       {"end_s", w.end_s},
                       {"feature_a", w.feature_a},
                       {"feature_b", w.feature_b},
                       {"r", optional_json(w.r)},
                       {"n_pairs", w.n_pairs},
                       {"reason", w.reason}});
  }
  if (tradeoff) {
    auto a = nlohmann::json::array(), b = nlohmann::json::array();
    for (const auto& v : tradeoff->a) a.push_back(optional_json(v));
    for (const auto& v : tradeoff->b) b.push_back(optional_json(v));
    j["tradeoff"] = {{"feature_a", tradeoff->feature_a},
                     {"feature_b", tradeoff->feature_b},
                     {"alpha", tradeoff->alpha},
                     {"a", std::move(a)},
                     {"b", std::move(b)}};
  } else {
    j["tradeoff"] = nullptr;
  }
  j["manifest"] = manifest;
  return j;
}

/// Writes matrix.csv, windows.csv, tradeoff.csv (CSV format only) and session.json.
/// Returns the written paths in that order.
inline std::vector<std::filesystem::path> export_report(const CorrelationReport& rep,
                                                        const std::optional<TradeoffSeries>& tradeoff,
                                                        ReportFormat format, const std::filesystem::path& out_dir,
                                                        const nlohmann::json& manifest = nlohmann::json::object()) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  if (format == ReportFormat::Csv) {
    write_text_file(out_dir / "matrix.csv", matrix_csv(rep));
    written.push_back(out_dir / "matrix.csv");
    write_text_file(out_dir / "windows.csv", windows_csv(rep.windows));
    written.push_back(out_dir / "windows.csv");
    if (tradeoff) {
      write_text_file(out_dir / "tradeoff.csv", tradeoff_csv(*tradeoff));
      written.push_back(out_dir / "tradeoff.csv");
    }
  }
  write_text_file(out_dir / "session.json", session_json(rep, tradeoff, manifest).dump(2) + "\n");
  written.push_back(out_dir / "session.json");
  return written;
}

// Parse-back helpers for the report files.

inline std::optional<double> parse_optional_cell(const std::string& cell, const std::filesystem::path& source) {
  if (trim(cell).empty()) return std::nullopt;
  auto v = parse_double(cell);
  if (!v) throw Error(Errc::IoFailure, "bad numeric cell '" + cell + "' in " + source.string());
  return v;
}

inline std::vector<WindowCorrelation> read_windows_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const std::vector<std::string> expected = {"start_s", "end_s", "feature_a", "feature_b", "r", "n_pairs"};
  if (table.header != expected) throw Error(Errc::MissingColumn, "unexpected windows header in " + path.string());
  std::vector<WindowCorrelation> out;
  for (const auto& row : table.rows) {
    if (row.size() != expected.size()) throw Error(Errc::IoFailure, "short row in " + path.string());
    WindowCorrelation w;
    w.start_s = static_cast<long>(parse_integer(row[0]).value_or(0));
    w.end_s = static_cast<long>(parse_integer(row[1]).value_or(0));
    w.feature_a = row[2];
    w.feature_b = row[3];
    w.r = parse_optional_cell(row[4], path);
    w.n_pairs = static_cast<std::size_t>(parse_integer(row[5]).value_or(0));
    out.push_back(std::move(w));
  }
  return out;
}

/// Reads matrix.csv into (features, matrix); reasons are only kept in session.json.
inline CorrelationReport read_matrix_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  if (table.header.empty() || table.header.front() != "feature") {
    throw Error(Errc::MissingColumn, "unexpected matrix header in " + path.string());
  }
  CorrelationReport rep;
  rep.features.assign(table.header.begin() + 1, table.header.end());
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw Error(Errc::IoFailure, "short row in " + path.string());
    std::vector<std::optional<double>> values;
    for (std::size_t j = 1; j < row.size(); ++j) values.push_back(parse_optional_cell(row[j], path));
    rep.matrix.push_back(std::move(values));
  }
  return rep;
}

}  // namespace vitalcast
