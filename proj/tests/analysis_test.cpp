#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "support.hpp"

using namespace vitalcast;

namespace {

long double direct_r(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

AlignedDataset dataset(long duration, std::map<std::string, std::vector<std::optional<double>>> columns) {
  AlignedDataset d;
  d.duration = duration;
  d.columns = std::move(columns);
  return d;
}

Errc error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Pearson, Examples) {
  const std::vector<double> a{1, 2, 3}, b{2, 4, 6}, c{3, 2, 1};
  EXPECT_DOUBLE_EQ(pearson(a, b), 1.0);
  EXPECT_DOUBLE_EQ(pearson(a, c), -1.0);
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  EXPECT_NEAR(pearson(x, y), 0.8, 1e-15);
  EXPECT_NEAR(pearson(x, y), static_cast<double>(direct_r(x, y)), 1e-15);
}

TEST(Pearson, Errors) {
  const std::vector<double> one{1}, flat{2, 2, 2}, v{1, 2, 3};
  EXPECT_EQ(error_of([&] { pearson(one, one); }), Errc::TooFewPairs);
  EXPECT_EQ(error_of([&] { pearson(flat, v); }), Errc::ZeroVariance);
  EXPECT_EQ(error_of([&] { pearson(v, flat); }), Errc::ZeroVariance);
}

TEST(Pearson, SymmetryScaleAndRange) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(2 + trial % 50), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = g(rng);
      y[i] = 0.3 * x[i] + g(rng);
    }
    const double r = pearson(x, y);
    EXPECT_EQ(r, pearson(y, x));
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
    std::vector<double> ax(x.size()), nx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      ax[i] = -3.7 * x[i] + 12.0;
      nx[i] = -4.0 * x[i];
    }
    EXPECT_NEAR(pearson(ax, y), -r, 1e-12);
    EXPECT_EQ(pearson(nx, y), -r);  // power-of-two scale is exact
  }
}

TEST(PearsonComplete, UsesOnlyCompletePairs) {
  const std::vector<std::optional<double>> x{1, 2, std::nullopt, 4, 5}, y{2, 4, 9, std::nullopt, 10};
  const auto r = pearson_complete(x, y);
  EXPECT_EQ(r.n_pairs, 3u);
  ASSERT_TRUE(r.r);
  EXPECT_DOUBLE_EQ(*r.r, 1.0);
  const std::vector<std::optional<double>> a{1, std::nullopt}, b{std::nullopt, 1};
  const auto none = pearson_complete(a, b);
  EXPECT_FALSE(none.r);
  EXPECT_EQ(none.reason, "too_few_pairs");
}

TEST(Windows, LinearRelationEveryWindow) {
  std::vector<std::optional<double>> power(121), valence(121);
  for (std::size_t t = 0; t <= 120; ++t) {
    power[t] = 100.0 + static_cast<double>((t * 37) % 90);
    valence[t] = 2.0 * *power[t];
  }
  const auto d = dataset(120, {{"power", power}, {"valence", valence}});
  const auto w = windowed_correlation(d, "power", "valence");
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].start_s, 0);
  EXPECT_EQ(w[0].end_s, 60);
  EXPECT_EQ(w[1].start_s, 60);
  EXPECT_EQ(w[1].end_s, 120);
  for (const auto& x : w) {
    ASSERT_TRUE(x.r);
    EXPECT_EQ(*x.r, 1.0);
    EXPECT_EQ(x.n_pairs, 60u);
  }
}

TEST(Windows, ConstantWindowIsAbsentWithPairsRecorded) {
  std::vector<std::optional<double>> power(120, 200.0), valence(120);
  for (std::size_t t = 0; t < 120; ++t) valence[t] = std::sin(static_cast<double>(t));
  for (std::size_t t = 60; t < 120; ++t) power[t] = 150.0 + static_cast<double>(t % 7);
  power[70] = std::nullopt;
  const auto w = windowed_correlation(dataset(119, {{"power", power}, {"valence", valence}}), "power", "valence");
  ASSERT_EQ(w.size(), 2u);
  EXPECT_FALSE(w[0].r);
  EXPECT_EQ(w[0].reason, "zero_variance");
  EXPECT_EQ(w[0].n_pairs, 60u);
  EXPECT_TRUE(w[1].r);
  EXPECT_EQ(w[1].n_pairs, 59u);
}

TEST(Windows, TailDroppedAndStepHonoured) {
  std::vector<std::optional<double>> a(150), b(150);
  for (std::size_t t = 0; t < 150; ++t) {
    a[t] = static_cast<double>(t);
    b[t] = static_cast<double>(t * t);
  }
  const auto d = dataset(149, {{"a", a}, {"b", b}});
  EXPECT_EQ(windowed_correlation(d, "a", "b").size(), 2u);
  EXPECT_EQ(windowed_correlation(d, "a", "b", 60, 30).size(), 4u);
  EXPECT_EQ(error_of([&] { windowed_correlation(d, "a", "nope"); }), Errc::UnknownFeature);
  EXPECT_THROW(windowed_correlation(d, "a", "b", 1, 1), Error);
}

TEST(Matrix, NegatedFeatureAndEmptyColumn) {
  std::vector<std::optional<double>> x(10), y(10), empty(10);
  for (std::size_t t = 0; t < 10; ++t) {
    x[t] = static_cast<double>(t * t);
    y[t] = -*x[t];
  }
  const auto rep = correlation_matrix(dataset(9, {{"x", x}, {"y", y}, {"e", empty}}), {"x", "y", "e"});
  EXPECT_EQ(rep.matrix[0][0], 1.0);
  EXPECT_EQ(rep.matrix[0][1], -1.0);
  EXPECT_EQ(rep.matrix[1][0], -1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_FALSE(rep.matrix[2][i]);
    EXPECT_FALSE(rep.matrix[i][2]);
    EXPECT_EQ(rep.reasons[2][i], "no_data");
  }
  EXPECT_THROW(correlation_matrix(dataset(9, {{"x", x}}), {"x"}), Error);
}

TEST(Matrix, MatchesPairwiseOracle) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0, 1);
  std::map<std::string, std::vector<std::optional<double>>> cols;
  std::vector<std::vector<double>> raw(3, std::vector<double>(300));
  for (std::size_t t = 0; t < 300; ++t) {
    raw[0][t] = g(rng);
    raw[1][t] = 0.5 * raw[0][t] + g(rng);
    raw[2][t] = -0.2 * raw[1][t] + g(rng);
  }
  const std::vector<std::string> names{"f0", "f1", "f2"};
  for (int i = 0; i < 3; ++i) cols[names[i]] = {raw[i].begin(), raw[i].end()};
  const auto rep = correlation_matrix(dataset(299, cols), names);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      ASSERT_TRUE(rep.matrix[i][j]);
      EXPECT_EQ(*rep.matrix[i][j], *rep.matrix[j][i]);
      EXPECT_NEAR(*rep.matrix[i][j], static_cast<double>(direct_r(raw[i], raw[j])), 1e-12);
    }
  }
}

TEST(Tradeoff, IdentityConstantAndRecurrence) {
  std::vector<std::optional<double>> att(100), val(100), flat(100, 3.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0, 1);
  for (std::size_t t = 0; t < 100; ++t) {
    att[t] = 80.0 - 0.3 * static_cast<double>(t) + g(rng);
    val[t] = g(rng);
  }
  att[40] = std::nullopt;
  const auto d = dataset(99, {{"attention", att}, {"valence", val}, {"flat", flat}});
  const auto raw = tradeoff_series(d, "attention", "valence", 1.0);
  EXPECT_EQ(raw.a, att);
  EXPECT_EQ(raw.b, val);
  for (const auto& v : tradeoff_series(d, "flat", "flat", 0.2).a) EXPECT_EQ(v, 3.0);

  const double alpha = 2.0 / 31.0;
  const auto sm = tradeoff_series(d, "attention", "valence", alpha);
  EXPECT_FALSE(sm.a[40]);
  double y = *att[0];
  for (std::size_t t = 1; t < 100; ++t) {
    if (!att[t]) continue;
    y = alpha * *att[t] + (1 - alpha) * y;
    EXPECT_NEAR(*sm.a[t], y, 1e-9);
  }
  EXPECT_EQ(error_of([&] { tradeoff_series(d, "attention", "nope", alpha); }), Errc::UnknownFeature);
}

TEST(Report, FilesRoundTripAndAreDeterministic) {
  testsupport::TempDir dir;
  std::vector<std::optional<double>> a(120), b(120);
  for (std::size_t t = 0; t < 120; ++t) {
    a[t] = std::cos(0.1 * static_cast<double>(t));
    b[t] = t < 60 ? 5.0 : std::sin(0.3 * static_cast<double>(t));
  }
  const auto d = dataset(119, {{"a", a}, {"b", b}});
  auto rep = correlation_matrix(d, {"a", "b"});
  rep.windows = windowed_correlation(d, "a", "b");
  const auto tr = tradeoff_series(d, "a", "b", 0.25);
  const nlohmann::json manifest = {{"config_hash", "abc"}, {"seed", 4}};
  const auto files = export_report(rep, tr, ReportFormat::Csv, dir / "r1", manifest);
  export_report(rep, tr, ReportFormat::Csv, dir / "r2", manifest);
  ASSERT_EQ(files.size(), 4u);
  EXPECT_EQ(testsupport::snapshot(dir / "r1"), testsupport::snapshot(dir / "r2"));

  const auto windows = read_windows_csv(dir / "r1" / "windows.csv");
  ASSERT_EQ(windows.size(), rep.windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    EXPECT_EQ(windows[i].r, rep.windows[i].r);
    EXPECT_EQ(windows[i].n_pairs, rep.windows[i].n_pairs);
    EXPECT_EQ(windows[i].start_s, rep.windows[i].start_s);
  }
  const auto matrix = read_matrix_csv(dir / "r1" / "matrix.csv");
  EXPECT_EQ(matrix.features, rep.features);
  EXPECT_EQ(matrix.matrix, rep.matrix);

  const auto session = nlohmann::json::parse(testsupport::slurp(dir / "r1" / "session.json"));
  EXPECT_EQ(session["manifest"], manifest);
  EXPECT_EQ(session["windows"][0]["r"], nullptr);
  EXPECT_EQ(session["windows"][0]["reason"], "zero_variance");
  EXPECT_EQ(session["tradeoff"]["feature_a"], "a");
}

TEST(Report, EmptyWindowsGiveHeaderOnly) {
  testsupport::TempDir dir;
  export_report(CorrelationReport{}, std::nullopt, ReportFormat::Csv, dir.path());
  EXPECT_EQ(testsupport::slurp(dir / "windows.csv"), "start_s,end_s,feature_a,feature_b,r,n_pairs\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "tradeoff.csv"));
  testsupport::TempDir json_dir;
  export_report(CorrelationReport{}, std::nullopt, ReportFormat::Json, json_dir.path());
  EXPECT_FALSE(std::filesystem::exists(json_dir / "windows.csv"));
  EXPECT_TRUE(std::filesystem::exists(json_dir / "session.json"));
}
