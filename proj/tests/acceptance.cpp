// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "support.hpp"

using namespace vitalcast;
namespace fs = std::filesystem;
using boost::multiprecision::cpp_rational;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<long> seconds(long n) {
  std::vector<long> ts(static_cast<std::size_t>(n));
  for (long t = 0; t < n; ++t) ts[static_cast<std::size_t>(t)] = t;
  return ts;
}

// 1. 600 s fixture, noise off, template backend: >= 99% exact per channel in < 60 s.
Outcome ocr_round_trip() {
  testsupport::TempDir dir;
  TruthParams p;
  p.duration = 600;
  const auto g = generate_truth(p);
  const auto layout = RenderLayout::standard();
  const auto frames = render_frames(g, layout, shipped_glyphs(), dir.path());

  const auto start = std::chrono::steady_clock::now();
  const auto result = extract_series(frames, layout.rois, Recognizer(RecognizerSpec::template_matcher()));
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Outcome o{true, ""};
  for (const auto& roi : layout.rois) {
    const auto& readings = result.series.at(roi.channel());
    std::size_t exact = 0;
    for (std::size_t t = 0; t < readings.size(); ++t) exact += readings[t].value == g.shown(roi.channel())[t];
    const double rate = static_cast<double>(exact) / 600.0;
    o.pass = o.pass && readings.size() == 600 && rate >= 0.99;
    o.detail += roi.channel() + " " + std::to_string(exact) + "/600, ";
  }
  o.pass = o.pass && elapsed < 60.0;
  o.detail += "extract " + fmt("%.2f", elapsed) + " s";
  return o;
}

// 2. Five +800 W spikes on a steady 200 W fixture with sd 3 W read noise, rendered and OCR'd.
// The filter must remove exactly the spikes (oracle: z from directly computed moments) and the
// cleaned EMA must sit within 1 W RMSE of the noise-free power.
Outcome cleaning_efficacy() {
  TruthParams p;
  p.duration = 600;
  p.profile = Profile::Steady;
  p.read_noise_sd = 3.0;
  p.seed = 0;
  auto g = generate_truth(p);
  const auto spikes = inject_spikes(g, "power", 5, 800, p.seed);
  const auto layout = RenderLayout::standard();
  const auto result = extract_series(
      seconds(600), [&](std::size_t i) { return render_frame(g, static_cast<long>(i), layout, shipped_glyphs()); },
      layout.rois, Recognizer(RecognizerSpec::template_matcher()));
  const auto series = to_series("power", result.series.at("power"));

  long double sum = 0;
  for (const auto& s : series.samples) sum += s.value;
  const long double mean = sum / series.samples.size();
  long double ss = 0;
  for (const auto& s : series.samples) ss += (s.value - mean) * (s.value - mean);
  const long double sd = std::sqrt(ss / series.samples.size());
  std::set<long> oracle;
  double min_spike_z = 1e9;
  for (const auto& s : series.samples) {
    const long double z = (s.value - mean) / sd;
    if (std::fabs(static_cast<double>(z)) > 3.0) oracle.insert(s.t_seconds);
    if (std::binary_search(spikes.begin(), spikes.end(), s.t_seconds)) min_spike_z = std::min(min_spike_z, double(z));
  }

  const auto cleaned = clean_series(series);
  std::set<long> removed;
  for (const auto& r : cleaned.removed) removed.insert(r.t_seconds);
  const std::set<long> expected(spikes.begin(), spikes.end());

  double sq = 0;
  for (const auto& s : cleaned.smoothed.samples) {
    const double d = s.value - g.power[static_cast<std::size_t>(s.t_seconds)];
    sq += d * d;
  }
  const double rmse = std::sqrt(sq / static_cast<double>(cleaned.smoothed.samples.size()));

  Outcome o;
  o.pass = series.samples.size() == 600 && min_spike_z > 6.0 && removed == expected && oracle == expected &&
           rmse <= 1.0;
  o.detail = "removed " + std::to_string(removed.size()) + "/5 spikes (min z " + fmt("%.2f", min_spike_z) +
             ", oracle agrees: " + (oracle == removed ? "yes" : "no") + "), EMA RMSE " + fmt("%.3f", rmse) + " W";
  return o;
}

// 3. rho = 0.36 over 1800 s through the emotion CSV, alignment and matrix.
Outcome correlation_recovery() {
  testsupport::TempDir dir;
  TruthParams p;
  p.duration = 1800;
  const auto g = generate_truth(p);
  const auto emotion = generate_correlated_emotion(g, 0.36, p.seed);
  write_text_file(dir / "emotion.csv", synth_emotion_csv(emotion, 1));
  TelemetrySeries power{"power", {}};
  for (long t = 0; t < 1800; ++t) power.samples.push_back({t, static_cast<double>(g.shown_power[static_cast<std::size_t>(t)])});
  const auto data = align(parse_emotion_csv(dir / "emotion.csv"), {power}, 1799);
  const auto rep = correlation_matrix(data, {"power", "valence"});
  const auto r = rep.matrix[0][1];
  Outcome o;
  o.pass = r && std::abs(*r - 0.36) <= 0.05;
  o.detail = "r(power, valence) = " + (r ? fmt("%.4f", *r) : std::string("absent")) + " over 1800 s, seed 0";
  return o;
}

// 4. 1000 random pairs against the direct formula, plus exact symmetry and scale sign.
Outcome pearson_oracle() {
  std::mt19937_64 rng(20240);
  std::uniform_int_distribution<int> len(2, 100);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0, worst_affine = 0;
  std::size_t symmetric = 0, exact_scale = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(len(rng));
    std::vector<double> x(n), y(n);
    const double mix = u(rng);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 10 * g(rng) + 50 * u(rng);
      y[i] = mix * x[i] + g(rng) * 7;
    }
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += x[i];
      my += y[i];
    }
    mx /= n;
    my /= n;
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    const double direct = static_cast<double>(sxy / std::sqrt(sxx * syy));
    const double r = pearson(x, y);
    worst = std::max(worst, std::abs(r - direct));
    symmetric += r == pearson(y, x);

    // sign(a) scaling: exact for power-of-two a, 1e-12 for a general affine map.
    const int k = std::uniform_int_distribution<int>(-4, 4)(rng);
    const double a = (trial % 2 ? -1.0 : 1.0) * std::ldexp(1.0, k);
    std::vector<double> ax(n), bx(n);
    const double a2 = (trial % 2 ? -1.0 : 1.0) * (0.1 + 5 * std::abs(u(rng)));
    const double b2 = 100 * u(rng);
    for (std::size_t i = 0; i < n; ++i) {
      ax[i] = a * x[i];
      bx[i] = a2 * x[i] + b2;
    }
    const double sign = a < 0 ? -1.0 : 1.0;
    exact_scale += pearson(ax, y) == sign * r;
    worst_affine = std::max(worst_affine, std::abs(pearson(bx, y) - sign * r));
  }
  Outcome o;
  o.pass = worst < 1e-12 && symmetric == 1000 && exact_scale == 1000 && worst_affine < 1e-12;
  std::ostringstream s;
  s << "max |r - direct| " << worst << ", symmetric " << symmetric << "/1000, exact 2^k scale " << exact_scale
    << "/1000, affine max dev " << worst_affine;
  o.detail = s.str();
  return o;
}

// 5. 200 random small images against the exhaustive 256-candidate search (lowest tie).
Outcome otsu_oracle() {
  std::mt19937_64 rng(5150);
  std::uniform_int_distribution<int> dim(1, 12), level(0, 255), levels(1, 6);
  std::size_t agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    GrayImage img(dim(rng), dim(rng));
    // Mix full-range noise with few-level images, which produce threshold ties.
    std::vector<int> palette(static_cast<std::size_t>(levels(rng)));
    for (auto& v : palette) v = level(rng);
    std::uniform_int_distribution<std::size_t> pick(0, palette.size() - 1);
    for (auto& px : img.pixels()) px = static_cast<std::uint8_t>(trial % 3 == 0 ? level(rng) : palette[pick(rng)]);

    std::optional<int> expected;
    cpp_rational best = -1;
    for (int t = 0; t < 256; ++t) {
      cpp_rational n0 = 0, n1 = 0, s0 = 0, s1 = 0;
      for (auto v : img.pixels()) {
        if (v <= t) {
          n0 += 1;
          s0 += v;
        } else {
          n1 += 1;
          s1 += v;
        }
      }
      if (n0 == 0 || n1 == 0) continue;
      const cpp_rational d = s0 / n0 - s1 / n1;
      const cpp_rational var = (n0 / (n0 + n1)) * (n1 / (n0 + n1)) * d * d;
      if (var > best) {
        best = var;
        expected = t;
      }
    }
    const auto got = otsu_threshold(img);
    bool same = got.has_value() == expected.has_value() && (!got || int(*got) == *expected);
    if (same && !expected) {
      const auto b = binarize(img);
      for (auto v : b.pixels()) same = same && v == 0;
    }
    agree += same;
  }
  Outcome o;
  o.pass = agree == 200;
  o.detail = std::to_string(agree) + "/200 thresholds equal the exhaustive argmax";
  return o;
}

ProcessResult cli(const std::vector<std::string>& args) { return testsupport::run_cli(args); }

// 6. Two `run` invocations with the same config and seed give byte-identical artifacts.
Outcome determinism() {
  testsupport::TempDir dir;
  const auto f = testsupport::make_fixture(dir.path(), {"name=det", "duration=180", "spikes.count=3", "seed=11"});
  const auto config = (f.dir / "pipeline.json").string();
  const auto out = f.dir / "out";
  auto first = cli({"run", "--config", config});
  if (first.exit_code != 0) return {false, "first run failed: " + first.err};
  const auto a = testsupport::snapshot(out);
  fs::remove_all(out);
  auto second = cli({"run", "--config", config, "--jobs", "1"});
  if (second.exit_code != 0) return {false, "second run failed: " + second.err};
  const auto b = testsupport::snapshot(out);
  std::size_t same = 0;
  for (const auto& [name, bytes] : a) same += b.count(name) && b.at(name) == bytes;
  Outcome o;
  o.pass = a.size() == b.size() && same == a.size() && a.size() >= 15;
  o.detail = std::to_string(same) + "/" + std::to_string(a.size()) + " artifacts identical across two runs";
  return o;
}

// 7. Deleting a stage's artifacts and re-running only that stage reproduces them.
Outcome stage_contract() {
  testsupport::TempDir dir;
  const auto f = testsupport::make_fixture(dir.path(), {"name=stages", "duration=120", "spikes.count=2"});
  const auto config = (f.dir / "pipeline.json").string();
  const auto out = f.dir / "out";
  if (auto r = cli({"run", "--config", config}); r.exit_code != 0) return {false, "run failed: " + r.err};
  const auto reference = testsupport::snapshot(out);

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"prep", "prep"}, {"extract", "extract"}, {"clean", "clean"}, {"emotion", "ingest-emotion"}, {"analyze", "analyze"}};
  std::size_t reproduced = 0;
  std::string failures;
  for (const auto& [dir_name, command] : stages) {
    fs::remove_all(out / dir_name);
    const auto r = cli({command, "--config", config});
    const auto now = testsupport::snapshot(out);
    if (r.exit_code == 0 && now == reference) {
      ++reproduced;
    } else {
      failures += " " + dir_name;
    }
  }
  Outcome o;
  o.pass = reproduced == stages.size();
  o.detail = std::to_string(reproduced) + "/" + std::to_string(stages.size()) + " stages reproduced byte-identically" +
             (failures.empty() ? "" : " (failed:" + failures + ")");
  return o;
}

// 8. Windowed correlation through the full pipeline: an exact linear relation gives r = 1 in
// every window; a constant-power fixture gives absent r with n_pairs recorded.
Outcome windowed() {
  testsupport::TempDir dir;
  const auto linear = testsupport::make_fixture(
      dir.path(), {"name=linear", "duration=120", "period_s=40", "emotion.rho=1"});
  const auto flat = testsupport::make_fixture(dir.path(), {"name=flat", "duration=120", "profile=steady"});
  for (const auto& f : {linear, flat}) {
    auto r = cli({"run", "--config", (f.dir / "pipeline.json").string(), "--set",
                  "analysis.pairs=[[\"power\",\"valence\"]]"});
    if (r.exit_code != 0) return {false, "run failed: " + r.err};
  }
  const auto lw = read_windows_csv(linear.dir / "out" / "analyze" / "windows.csv");
  const auto fw = read_windows_csv(flat.dir / "out" / "analyze" / "windows.csv");
  const auto session = nlohmann::json::parse(testsupport::slurp(flat.dir / "out" / "analyze" / "session.json"));

  bool linear_ok = lw.size() == 2;
  double worst = 0;
  for (const auto& w : lw) {
    linear_ok = linear_ok && w.r && w.n_pairs == 60;
    if (w.r) worst = std::max(worst, std::abs(*w.r - 1.0));
  }
  linear_ok = linear_ok && worst <= 1e-12;
  bool flat_ok = fw.size() == 2;
  for (std::size_t i = 0; i < fw.size(); ++i) {
    flat_ok = flat_ok && !fw[i].r && fw[i].n_pairs == 60 && session["windows"][i]["reason"] == "zero_variance";
  }
  Outcome o;
  o.pass = linear_ok && flat_ok;
  std::ostringstream s;
  s << "linear: " << lw.size() << " windows, max |r-1| " << worst << "; constant power: " << fw.size()
    << " windows with absent r";
  if (!fw.empty()) s << " (n_pairs " << fw[0].n_pairs << ", reason " << session["windows"][0]["reason"].get<std::string>() << ")";
  o.detail = s.str();
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ocr round-trip", ocr_round_trip},
      {"cleaning efficacy", cleaning_efficacy},
      {"correlation recovery", correlation_recovery},
      {"pearson oracle equivalence", pearson_oracle},
      {"otsu oracle equivalence", otsu_oracle},
      {"determinism", determinism},
      {"stage contract", stage_contract},
      {"windowed correlation", windowed},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%zu] %-28s %s  %s\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
