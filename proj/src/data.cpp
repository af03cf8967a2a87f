#include "aelstm/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "aelstm/error.hpp"
#include "aelstm/kv.hpp"

namespace aelstm {

// ---------------------------------------------------------------------------
// SeriesFrame

bool SeriesFrame::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

const std::vector<double>& SeriesFrame::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) fail(ErrorKind::schema, "missing column '" + name + "'");
  return columns[static_cast<std::size_t>(it - names.begin())];
}

std::vector<double>& SeriesFrame::column(const std::string& name) {
  return const_cast<std::vector<double>&>(std::as_const(*this).column(name));
}

void SeriesFrame::add_column(std::string name, std::vector<double> values) {
  if (!columns.empty() && values.size() != length())
    fail(ErrorKind::shape, "column '" + name + "' length differs from frame length");
  names.push_back(std::move(name));
  columns.push_back(std::move(values));
}

SeriesFrame SeriesFrame::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > length()) fail(ErrorKind::data, "slice out of range");
  SeriesFrame out;
  out.names = names;
  out.target = target;
  out.sample_period = sample_period;
  out.row_offset = row_offset + begin;
  out.meta = meta;
  for (const auto& c : columns)
    out.columns.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(begin), c.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_finite(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

void parse_meta(const std::string& body, std::vector<std::pair<std::string, std::string>>& meta) {
  std::istringstream in(body);
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    meta.emplace_back(token.substr(0, eq), token.substr(eq + 1));
  }
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::vector<std::string> read_csv_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    return split_commas(t);
  }
  fail(ErrorKind::schema, "'" + path.string() + "' has no header row");
}

CsvLoad load_csv(const std::filesystem::path& path, const std::vector<std::string>& features,
                 const std::string& target) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");

  CsvLoad result;
  SeriesFrame& frame = result.frame;
  std::vector<std::string> header;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      constexpr std::string_view kMeta = "# meta:";
      if (t.rfind(kMeta, 0) == 0) parse_meta(t.substr(kMeta.size()), frame.meta);
      continue;
    }
    header = split_commas(t);
    break;
  }
  if (header.empty()) fail(ErrorKind::schema, "'" + path.string() + "' has no header row");

  std::vector<std::string> wanted = features;
  if (!target.empty()) wanted.push_back(target);
  std::vector<std::size_t> source;
  std::vector<std::string> missing;
  for (const auto& name : wanted) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) missing.push_back(name);
    else source.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  if (!missing.empty()) {
    std::string msg = "missing column(s) in '" + path.string() + "':";
    for (const auto& m : missing) msg += " " + m;
    fail(ErrorKind::schema, msg);
  }

  frame.names = wanted;
  frame.target = target;
  frame.columns.assign(wanted.size(), {});
  std::vector<double> row(wanted.size());
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = split_commas(t);
    bool ok = true;
    for (std::size_t k = 0; k < source.size() && ok; ++k)
      ok = source[k] < cells.size() && parse_finite(cells[source[k]], row[k]);
    if (!ok) {
      ++result.dropped_rows;
      continue;
    }
    for (std::size_t k = 0; k < row.size(); ++k) frame.columns[k].push_back(row[k]);
  }
  if (result.dropped_rows)
    std::cerr << "warning: dropped " << result.dropped_rows << " row(s) with missing or unparsable values from '"
              << path.string() << "'\n";
  if (frame.length() == 0) fail(ErrorKind::data, "'" + path.string() + "' contains no usable rows");
  for (const auto& [k, v] : frame.meta)
    if (k == "sample_period_s") parse_finite(v, frame.sample_period);
  return result;
}

void write_csv(const std::filesystem::path& path, const SeriesFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  if (!frame.meta.empty()) {
    out << "# meta:";
    for (const auto& [k, v] : frame.meta) out << ' ' << k << '=' << v;
    out << '\n';
  }
  for (std::size_t c = 0; c < frame.names.size(); ++c) out << (c ? "," : "") << frame.names[c];
  out << '\n';
  for (std::size_t r = 0; r < frame.length(); ++r) {
    for (std::size_t c = 0; c < frame.columns.size(); ++c) out << (c ? "," : "") << format_double(frame.columns[c][r]);
    out << '\n';
  }
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Normalization

std::size_t NormStats::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) fail(ErrorKind::schema, "no normalization statistics for column '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

double NormStats::normalize(const std::string& name, double v) const {
  const std::size_t i = index_of(name);
  return (v - min[i]) / (max[i] - min[i]);
}

double NormStats::denormalize(const std::string& name, double v) const {
  const std::size_t i = index_of(name);
  return v * (max[i] - min[i]) + min[i];
}

std::pair<double, double> NormStats::affine(const std::string& name) const {
  const std::size_t i = index_of(name);
  return {max[i] - min[i], min[i]};
}

Normalized fit_normalize(const SeriesFrame& frame, const NormStats* stats) {
  Normalized out;
  out.frame = frame;
  if (stats) {
    out.stats = *stats;
  } else {
    for (std::size_t c = 0; c < frame.names.size(); ++c) {
      const auto& col = frame.columns[c];
      if (col.empty()) fail(ErrorKind::data, "cannot normalize empty column '" + frame.names[c] + "'");
      const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
      if (!(*hi > *lo)) fail(ErrorKind::data, "column '" + frame.names[c] + "' is constant; min-max range is degenerate");
      out.stats.names.push_back(frame.names[c]);
      out.stats.min.push_back(*lo);
      out.stats.max.push_back(*hi);
    }
  }
  for (std::size_t c = 0; c < frame.names.size(); ++c) {
    const std::string& name = frame.names[c];
    const std::size_t i = out.stats.index_of(name);
    const double lo = out.stats.min[i], range = out.stats.max[i] - out.stats.min[i];
    if (!(range > 0.0)) fail(ErrorKind::data, "column '" + name + "' has a degenerate range in the statistics");
    const bool is_target = name == frame.target;
    for (auto& v : out.frame.columns[c]) {
      v = (v - lo) / range;
      if (stats && !is_target && (v < -0.5 || v > 1.5)) {
        v = std::clamp(v, -0.5, 1.5);
        ++out.clamped;
      }
    }
  }
  if (out.clamped)
    std::cerr << "warning: clamped " << out.clamped << " feature value(s) outside [-0.5, 1.5] after normalization\n";
  return out;
}

// ---------------------------------------------------------------------------
// Windowing and splitting

WindowedDataset make_windows(const SeriesFrame& frame, const std::vector<std::string>& features,
                             std::size_t window_length) {
  if (window_length < 1) fail(ErrorKind::config, "window_length must be >= 1");
  const std::size_t n = frame.length();
  if (n < window_length)
    fail(ErrorKind::data, "series of " + std::to_string(n) + " rows is shorter than one window of " +
                              std::to_string(window_length));
  std::vector<const std::vector<double>*> cols;
  for (const auto& f : features) cols.push_back(&frame.column(f));
  const std::vector<double>* target = frame.target.empty() || !frame.has(frame.target) ? nullptr : &frame.column(frame.target);

  WindowedDataset ds;
  ds.features = features;
  const std::size_t count = n - window_length + 1;
  ds.inputs.reserve(count);
  for (std::size_t start = 0; start < count; ++start) {
    Tensor w = Tensor::matrix(window_length, features.size());
    for (std::size_t t = 0; t < window_length; ++t)
      for (std::size_t f = 0; f < features.size(); ++f) w(t, f) = (*cols[f])[start + t];
    ds.inputs.push_back(std::move(w));
    ds.first_row.push_back(frame.row_offset + start);
    ds.last_row.push_back(frame.row_offset + start + window_length - 1);
    if (target) ds.targets.push_back((*target)[start + window_length - 1]);
  }
  return ds;
}

std::pair<SeriesFrame, SeriesFrame> split_70_30(const SeriesFrame& frame, std::size_t window_length) {
  const std::size_t n = frame.length();
  if (n < 10 * window_length)
    fail(ErrorKind::data, "series of " + std::to_string(n) + " rows is too short to split (need >= " +
                              std::to_string(10 * window_length) + ")");
  const std::size_t cut = n * 7 / 10;
  return {frame.slice(0, cut), frame.slice(cut, n)};
}

// ---------------------------------------------------------------------------
// Synthetic drive cycle

void GeneratorSpec::validate() const {
  std::vector<std::string> problems;
  if (!(duration_s > 0.0)) problems.push_back("duration_s must be > 0");
  if (!(mass_kg > 0.0)) problems.push_back("mass_kg must be > 0");
  if (!(efficiency > 0.0 && efficiency <= 1.0)) problems.push_back("efficiency must lie in (0, 1]");
  if (!(c0_n >= 0.0 && c1_n_per_mps >= 0.0 && c2_n_per_mps2 >= 0.0)) problems.push_back("road-load coefficients must be >= 0");
  if (!(noise_s0_kw >= 0.0 && noise_s1_kw_per_mps2 >= 0.0)) problems.push_back("noise scales must be >= 0");
  if (!(noise_nu > 0.0)) problems.push_back("noise_nu must be > 0");
  if (problems.empty()) return;
  std::string msg = "invalid generator spec:";
  for (const auto& p : problems) msg += " " + p + ";";
  fail(ErrorKind::config, msg);
}

GeneratorSpec GeneratorSpec::parse(const std::string& text) {
  KeyValues kv = KeyValues::parse(text);
  GeneratorSpec s;
  s.duration_s = kv.get_double("duration_s", s.duration_s);
  s.mass_kg = kv.get_double("mass_kg", s.mass_kg);
  s.c0_n = kv.get_double("c0_n", s.c0_n);
  s.c1_n_per_mps = kv.get_double("c1_n_per_mps", s.c1_n_per_mps);
  s.c2_n_per_mps2 = kv.get_double("c2_n_per_mps2", s.c2_n_per_mps2);
  s.efficiency = kv.get_double("efficiency", s.efficiency);
  s.regen = kv.get_bool("regen", s.regen);
  s.noise_s0_kw = kv.get_double("noise_s0_kw", s.noise_s0_kw);
  s.noise_s1_kw_per_mps2 = kv.get_double("noise_s1_kw_per_mps2", s.noise_s1_kw_per_mps2);
  s.noise_nu = kv.get_double("noise_nu", s.noise_nu);
  for (const auto& k : kv.unused()) kv.problems().push_back(k + ": unknown key");
  if (!kv.problems().empty()) {
    std::string msg = "invalid generator spec:";
    for (const auto& p : kv.problems()) msg += " " + p + ";";
    fail(ErrorKind::config, msg);
  }
  s.validate();
  return s;
}

std::vector<std::pair<std::string, std::string>> GeneratorSpec::describe() const {
  return {{"duration_s", format_double(duration_s)},
          {"sample_period_s", "1"},
          {"mass_kg", format_double(mass_kg)},
          {"c0_n", format_double(c0_n)},
          {"c1_n_per_mps", format_double(c1_n_per_mps)},
          {"c2_n_per_mps2", format_double(c2_n_per_mps2)},
          {"efficiency", format_double(efficiency)},
          {"regen", regen ? "true" : "false"},
          {"noise_s0_kw", format_double(noise_s0_kw)},
          {"noise_s1_kw_per_mps2", format_double(noise_s1_kw_per_mps2)},
          {"noise_nu", format_double(noise_nu)}};
}

namespace {

struct Segment {
  double target_kmh;
  double ramp_s;
  double hold_s;
};

// Ramp/hold plan for one 800 s cycle: mean ~76 km/h, ~16.9 km.
constexpr std::array<Segment, 14> kPlan = {{{72, 35, 20}, {80, 18, 38}, {71, 14, 26}, {86, 24, 44}, {83, 12, 30},
                                            {56, 22, 16}, {76, 22, 38}, {90, 24, 52}, {86, 14, 36}, {94, 20, 44},
                                            {81, 18, 32}, {86, 16, 38}, {72, 18, 26}, {80, 16, 40}}};
constexpr double kLeadIn = 2.0;
constexpr double kFinalRamp = 35.0;

double cosine_ramp(double v0, double v1, double u) {
  return v0 + (v1 - v0) * 0.5 * (1.0 - std::cos(std::numbers::pi * u));
}

double plan_speed(double t) {
  if (t < kLeadIn) return 0.0;
  double start = kLeadIn, v = 0.0;
  for (const auto& seg : kPlan) {
    if (t < start + seg.ramp_s) return cosine_ramp(v, seg.target_kmh, (t - start) / seg.ramp_s);
    start += seg.ramp_s;
    v = seg.target_kmh;
    if (t < start + seg.hold_s) return v;
    start += seg.hold_s;
  }
  if (t < start + kFinalRamp) return cosine_ramp(v, 0.0, (t - start) / kFinalRamp);
  return 0.0;
}

// Small speed fluctuations, faded in and out at the cycle ends.
double wobble(double t) {
  constexpr double kFade = 60.0;
  double env = 1.0;
  if (t < kFade) env = 0.5 * (1.0 - std::cos(std::numbers::pi * t / kFade));
  else if (t > kCycleSeconds - kFade) env = 0.5 * (1.0 - std::cos(std::numbers::pi * (kCycleSeconds - t) / kFade));
  const double two_pi = 2.0 * std::numbers::pi;
  return env * (2.0 * std::sin(two_pi * t / 47.0) + 1.3 * std::sin(two_pi * t / 19.0 + 1.0) +
                0.8 * std::sin(two_pi * t / 11.0 + 2.0));
}

}  // namespace

double cycle_speed_kmh(double t) {
  const double tc = std::fmod(std::max(t, 0.0), kCycleSeconds);
  return std::max(0.0, plan_speed(tc) + wobble(tc));
}

SeriesFrame generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = static_cast<std::size_t>(std::floor(spec.duration_s));
  if (n == 0) fail(ErrorKind::config, "duration_s must cover at least one 1 Hz sample");

  std::vector<double> time(n), speed(n), accel(n), force(n), roadload(n), power_true(n), power(n);
  std::mt19937_64 rng(seed);
  std::student_t_distribution<double> student(spec.noise_nu);
  constexpr double kH = 1e-3;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    const double v_kmh = cycle_speed_kmh(t);
    const double v = v_kmh / 3.6;
    const double a = i == 0 && v_kmh == 0.0 ? 0.0 : (cycle_speed_kmh(t + kH) - cycle_speed_kmh(std::max(0.0, t - kH))) /
                                                        (t + kH - std::max(0.0, t - kH)) / 3.6;
    const double road = spec.c0_n + spec.c1_n_per_mps * v + spec.c2_n_per_mps2 * v * v;
    const double f = spec.mass_kg * a + road;
    double p_w = 0.0;
    if (f >= 0.0) p_w = f * v / spec.efficiency;
    else if (spec.regen) p_w = f * v * spec.efficiency;
    const double p_kw = p_w / 1000.0;
    const double scale = spec.noise_s0_kw + spec.noise_s1_kw_per_mps2 * std::abs(a);
    const double eps = student(rng);

    time[i] = t;
    speed[i] = v_kmh;
    accel[i] = a;
    force[i] = f;
    roadload[i] = road;
    power_true[i] = p_kw;
    power[i] = scale > 0.0 ? p_kw + scale * eps : p_kw;
  }

  SeriesFrame frame;
  frame.target = "Power";
  frame.sample_period = 1.0;
  frame.add_column("time_s", std::move(time));
  frame.add_column("Speed", std::move(speed));
  frame.add_column("Acceleration", std::move(accel));
  frame.add_column("DY_flt_force", std::move(force));
  frame.add_column("DY_Roadld", std::move(roadload));
  frame.add_column("Power_true", std::move(power_true));
  frame.add_column("Power", std::move(power));
  frame.meta = spec.describe();
  frame.meta.emplace_back("seed", std::to_string(seed));
  return frame;
}

}  // namespace aelstm
