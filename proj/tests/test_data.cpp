#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "aelstm/data.hpp"
#include "support.hpp"

using namespace aelstm;
using testing::kind_of;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "aelstm_test_data";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_text(const std::string& name, const std::string& text) {
  const fs::path p = scratch(name);
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

SeriesFrame frame_of(std::vector<std::pair<std::string, std::vector<double>>> cols, std::string target = "y") {
  SeriesFrame f;
  for (auto& [n, v] : cols) f.add_column(n, std::move(v));
  f.target = std::move(target);
  return f;
}

std::vector<double> ramp(std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = scale * static_cast<double>(i);
  return v;
}

}  // namespace

TEST_CASE("load_csv reads a small well-formed file") {
  const auto p = write_text("three.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9.5\n");
  const auto load = load_csv(p, {"a", "b"}, "y");
  CHECK(load.frame.length() == 3);
  CHECK(load.dropped_rows == 0);
  CHECK(load.frame.column("y") == std::vector<double>{3, 6, 9.5});
  CHECK(load.frame.target == "y");
  CHECK(read_csv_header(p) == std::vector<std::string>{"a", "b", "y"});
}

TEST_CASE("load_csv schema errors") {
  const auto p = write_text("notarget.csv", "a,b\n1,2\n");
  CHECK(kind_of([&] { load_csv(p, {"a"}, "y"); }) == ErrorKind::schema);
  try {
    load_csv(p, {"a", "zz"}, "y");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("zz") != std::string::npos);
    CHECK(std::string(e.what()).find("y") != std::string::npos);
  }
  CHECK(kind_of([] { load_csv(scratch("does_not_exist.csv"), {"a"}, ""); }) == ErrorKind::io);
  const auto empty = write_text("allbad.csv", "a,y\nx,1\n2,\n");
  CHECK(kind_of([&] { load_csv(empty, {"a"}, "y"); }) == ErrorKind::data);
}

TEST_CASE("load_csv drops a corrupt row from the fixture") {
  const fs::path fixture = fs::path(AELSTM_FIXTURE_DIR) / "corrupt_row.csv";
  const auto load = load_csv(fixture, {"Speed", "Acceleration", "DY_flt_force"}, "Power");
  CHECK(load.frame.length() == 99);
  CHECK(load.dropped_rows == 1);
  // Only selected columns matter.
  CHECK(load_csv(fixture, {"Speed"}, "Power").dropped_rows == 0);
}

TEST_CASE("csv round trip preserves values and metadata exactly") {
  SeriesFrame f = frame_of({{"x", {0.1, 1.0 / 3.0, -2.5e-300, 12345.678}}, {"y", {1, 2, 3, 4}}});
  f.meta = {{"seed", "7"}, {"sample_period_s", "1"}};
  const auto p = scratch("round.csv");
  write_csv(p, f);
  const auto back = load_csv(p, {"x"}, "y");
  CHECK(back.frame.column("x") == f.column("x"));
  CHECK(back.frame.column("y") == f.column("y"));
  CHECK(back.frame.meta == f.meta);
}

TEST_CASE("min-max normalization") {
  const SeriesFrame f = frame_of({{"x", {0, 5, 10}}, {"y", {2, 4, 6}}});
  const auto n = fit_normalize(f);
  CHECK(n.frame.column("x") == std::vector<double>{0, 0.5, 1});
  CHECK(n.stats.min[n.stats.index_of("x")] == 0.0);
  CHECK(n.stats.max[n.stats.index_of("x")] == 10.0);

  const SeriesFrame test = frame_of({{"x", {12}}, {"y", {4}}});
  const auto t = fit_normalize(test, &n.stats);
  CHECK(t.frame.column("x")[0] == doctest::Approx(1.2));
  CHECK(t.clamped == 0);

  CHECK(kind_of([] { fit_normalize(frame_of({{"x", {3, 3, 3}}, {"y", {1, 2, 3}}})); }) == ErrorKind::data);
  CHECK(kind_of([&] { n.stats.index_of("nope"); }) == ErrorKind::schema);
}

TEST_CASE("reused statistics clamp features but never the target") {
  const auto fit = fit_normalize(frame_of({{"x", {0, 10}}, {"y", {0, 10}}}));
  const auto t = fit_normalize(frame_of({{"x", {30, -20, 5}}, {"y", {30, -20, 5}}}), &fit.stats);
  CHECK(t.frame.column("x") == std::vector<double>{1.5, -0.5, 0.5});
  CHECK(t.frame.column("y") == std::vector<double>{3.0, -2.0, 0.5});
  CHECK(t.clamped == 2);
}

TEST_CASE("normalization round trip") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-300.0, 900.0);
  std::vector<double> x(500);
  for (double& v : x) v = u(rng);
  const auto n = fit_normalize(frame_of({{"x", x}, {"y", ramp(500)}}));
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(n.stats.denormalize("x", n.frame.column("x")[i]) - x[i]) < 1e-12 * std::max(1.0, std::abs(x[i])));
    CHECK(std::abs(n.stats.denormalize("x", n.stats.normalize("x", x[i])) - x[i]) < 1e-12 * 900.0);
  }
  const auto [a, b] = n.stats.affine("y");
  CHECK(a == doctest::Approx(499.0));
  CHECK(b == 0.0);
}

TEST_CASE("windowing shape, alignment and provenance") {
  const std::size_t L = 40, T = 8;
  SeriesFrame f = frame_of({{"x", ramp(L, 1.0 / 39.0)}, {"y", ramp(L, 0.5)}});
  f.row_offset = 100;
  const auto w = make_windows(f, {"x"}, T);
  REQUIRE(w.size() == L - T + 1);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w.inputs[i].rows() == T);
    CHECK(w.inputs[i].cols() == 1);
    CHECK(w.first_row[i] == 100 + i);
    CHECK(w.last_row[i] == 100 + i + T - 1);
    CHECK(w.targets[i] == f.column("y")[i + T - 1]);
    CHECK(w.inputs[i](T - 1, 0) == f.column("x")[i + T - 1]);
    for (double v : w.inputs[i].data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (i) CHECK(w.last_row[i - 1] < w.last_row[i]);
  }
  CHECK(kind_of([&] { make_windows(f, {"x"}, L + 1); }) == ErrorKind::data);
  SeriesFrame no_target = f;
  no_target.target.clear();
  CHECK(make_windows(no_target, {"x"}, T).targets.empty());
}

TEST_CASE("chronological 70/30 split") {
  auto sizes = [](std::size_t n) {
    const auto [tr, te] = split_70_30(frame_of({{"x", ramp(n)}, {"y", ramp(n)}}), 10);
    return std::pair{tr.length(), te.length()};
  };
  CHECK(sizes(100) == std::pair<std::size_t, std::size_t>{70, 30});
  CHECK(sizes(101) == std::pair<std::size_t, std::size_t>{70, 31});
  CHECK(kind_of([] { split_70_30(frame_of({{"x", ramp(99)}, {"y", ramp(99)}}), 10); }) == ErrorKind::data);
}

TEST_CASE("no test window touches the training segment") {
  const std::size_t n = 1000, T = 16;
  const auto [train, test] = split_70_30(frame_of({{"x", ramp(n)}, {"y", ramp(n)}}), T);
  CHECK(test.row_offset == train.length());
  const auto tw = make_windows(train, {"x"}, T);
  const auto sw = make_windows(test, {"x"}, T);
  const std::size_t train_last = train.row_offset + train.length() - 1;
  for (std::size_t i = 0; i < tw.size(); ++i) CHECK(tw.last_row[i] <= train_last);
  for (std::size_t i = 0; i < sw.size(); ++i) {
    CHECK(sw.first_row[i] > train_last);
    // the window's first feature value is the originating row's value
    CHECK(sw.inputs[i](0, 0) == static_cast<double>(sw.first_row[i]));
  }
}

TEST_CASE("synthetic cycle matches the highway cycle figures") {
  const auto f = generate_synthetic(GeneratorSpec{}, 1);
  REQUIRE(f.length() == 800);
  const auto& v = f.column("Speed");
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  const double km = std::accumulate(v.begin(), v.end(), 0.0) / 3600.0;
  CHECK(std::abs(mean - 77.7) <= 2.0);
  CHECK(std::abs(km - 16.45) <= 0.5);
  CHECK(*std::min_element(v.begin(), v.end()) >= 0.0);
  CHECK(v.front() == 0.0);
  for (double p : f.column("Power_true")) CHECK(p >= 0.0);
}

TEST_CASE("synthetic kinematics and power follow the longitudinal model") {
  GeneratorSpec spec;
  spec.duration_s = 1600;
  const auto f = generate_synthetic(spec, 3);
  const auto& v = f.column("Speed");
  const auto& a = f.column("Acceleration");
  const auto& force = f.column("DY_flt_force");
  const auto& p = f.column("Power_true");
  for (std::size_t i = 1; i + 1 < f.length(); ++i) {
    const double ms = v[i] / 3.6;
    // central difference of the 1 Hz trace against the analytic derivative
    CHECK(std::abs((v[i + 1] - v[i - 1]) / 7.2 - a[i]) < 0.25);
    const double ref = spec.mass_kg * a[i] + spec.c0_n + spec.c1_n_per_mps * ms + spec.c2_n_per_mps2 * ms * ms;
    CHECK(force[i] == doctest::Approx(ref).epsilon(1e-12));
    CHECK(p[i] == doctest::Approx(std::max(ref, 0.0) * ms / spec.efficiency / 1000.0).epsilon(1e-12).scale(1e-12));
  }
  // the cycle tiles
  for (std::size_t i = 0; i < 800; ++i) CHECK(v[i] == v[i + 800]);
}

TEST_CASE("zero noise and seeding") {
  GeneratorSpec quiet;
  quiet.noise_s0_kw = 0.0;
  quiet.noise_s1_kw_per_mps2 = 0.0;
  const auto q = generate_synthetic(quiet, 5);
  CHECK(q.column("Power") == q.column("Power_true"));

  const auto a = generate_synthetic(GeneratorSpec{}, 9);
  const auto b = generate_synthetic(GeneratorSpec{}, 9);
  const auto c = generate_synthetic(GeneratorSpec{}, 10);
  CHECK(a.column("Power") == b.column("Power"));
  CHECK(a.column("Power_true") == c.column("Power_true"));
  CHECK(a.column("Speed") == c.column("Speed"));
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.length(); ++i) differ += a.column("Power")[i] != c.column("Power")[i];
  CHECK(differ == a.length());
}

TEST_CASE("synthetic residuals are heavy tailed") {
  GeneratorSpec spec;
  spec.duration_s = 10000;
  const auto f = generate_synthetic(spec, 11);
  std::vector<double> z;
  for (std::size_t i = 0; i < f.length(); ++i) {
    const double s = spec.noise_s0_kw + spec.noise_s1_kw_per_mps2 * std::abs(f.column("Acceleration")[i]);
    z.push_back((f.column("Power")[i] - f.column("Power_true")[i]) / s);
  }
  const double n = static_cast<double>(z.size());
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : z) {
    m2 += std::pow(x - mean, 2) / n;
    m4 += std::pow(x - mean, 4) / n;
  }
  const double excess = m4 / (m2 * m2) - 3.0;
  CAPTURE(excess);
  CHECK(excess > 1.0);
  // Student-t(4) has variance nu/(nu-2) = 2.
  CHECK(m2 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("generator metadata and spec parsing") {
  const auto f = generate_synthetic(GeneratorSpec{}, 4);
  auto has = [&](const std::string& k) {
    return std::any_of(f.meta.begin(), f.meta.end(), [&](const auto& kv) { return kv.first == k; });
  };
  for (const char* k : {"duration_s", "mass_kg", "c0_n", "c1_n_per_mps", "c2_n_per_mps2", "efficiency", "regen",
                        "noise_s0_kw", "noise_s1_kw_per_mps2", "noise_nu", "seed"})
    CHECK(has(k));

  const auto spec = GeneratorSpec::parse("duration_s = 120\nnoise_nu = 6\n");
  CHECK(spec.duration_s == 120.0);
  CHECK(spec.noise_nu == 6.0);
  CHECK(generate_synthetic(spec, 1).length() == 120);
  CHECK(kind_of([] { GeneratorSpec::parse("duration_s = -1\n"); }) == ErrorKind::config);
  CHECK(kind_of([] { GeneratorSpec::parse("wheels = 4\n"); }) == ErrorKind::config);
}

TEST_CASE("regenerative segments allow negative power") {
  GeneratorSpec spec;
  spec.regen = true;
  const auto f = generate_synthetic(spec, 1);
  const auto& p = f.column("Power_true");
  CHECK(*std::min_element(p.begin(), p.end()) < 0.0);
}
