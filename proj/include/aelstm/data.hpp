#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aelstm/tensor.hpp"

namespace aelstm {

// Column-oriented time series sampled at a fixed period.
struct SeriesFrame {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::string target;           // empty when the frame carries no target
  double sample_period = 1.0;   // seconds
  std::size_t row_offset = 0;   // index of row 0 in the originating series
  std::vector<std::pair<std::string, std::string>> meta;

  std::size_t length() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
  bool has(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;
  std::vector<double>& column(const std::string& name);
  void add_column(std::string name, std::vector<double> values);
  // Rows [begin, end) as a new frame; row_offset is carried forward.
  SeriesFrame slice(std::size_t begin, std::size_t end) const;
};

struct CsvLoad {
  SeriesFrame frame;
  std::size_t dropped_rows = 0;
};

// Reads `features` and, when non-empty, `target`. Lines starting with '#'
// are comments; `# meta: k=v ...` lines are captured into frame.meta.
// Rows with a missing or unparsable selected value are dropped and counted.
CsvLoad load_csv(const std::filesystem::path& path, const std::vector<std::string>& features,
                 const std::string& target);

// Column names from the header row (comment and meta lines skipped).
std::vector<std::string> read_csv_header(const std::filesystem::path& path);

// Comma-separated text with an optional `# meta:` header line.
void write_csv(const std::filesystem::path& path, const SeriesFrame& frame);
std::string format_double(double v);

struct NormStats {
  std::vector<std::string> names;
  std::vector<double> min;
  std::vector<double> max;

  std::size_t index_of(const std::string& name) const;
  double normalize(const std::string& name, double v) const;
  double denormalize(const std::string& name, double v) const;
  // y = a * y_norm + b for the named column.
  std::pair<double, double> affine(const std::string& name) const;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct Normalized {
  SeriesFrame frame;
  NormStats stats;
  std::size_t clamped = 0;  // reused-stat feature values clamped to [-0.5, 1.5]
};

// Min-max scaling of every column of the frame. With `stats` the fitted
// ranges are reused (test time); feature values are clamped to [-0.5, 1.5],
// the target column never is.
Normalized fit_normalize(const SeriesFrame& frame, const NormStats* stats = nullptr);

struct WindowedDataset {
  std::vector<Tensor> inputs;        // N windows of T x F
  std::vector<double> targets;       // normalized target at each window's final row (empty without target)
  std::vector<std::size_t> first_row;  // provenance, in originating-series row indices
  std::vector<std::size_t> last_row;
  std::vector<std::string> features;

  std::size_t size() const noexcept { return inputs.size(); }
};

// Stride-1 windows of length T; N = length - T + 1.
WindowedDataset make_windows(const SeriesFrame& frame, const std::vector<std::string>& features,
                             std::size_t window_length);

// First floor(0.7 n) rows train, the rest test. Requires n >= 10 T.
std::pair<SeriesFrame, SeriesFrame> split_70_30(const SeriesFrame& frame, std::size_t window_length);

struct GeneratorSpec {
  double duration_s = 800.0;
  double mass_kg = 1800.0;
  double c0_n = 120.0;
  double c1_n_per_mps = 1.5;
  double c2_n_per_mps2 = 0.35;
  double efficiency = 0.9;
  bool regen = false;
  // Observation noise s(t) * eps, s(t) = s0 + s1 |a(t)|, eps ~ Student-t(nu).
  double noise_s0_kw = 0.8;
  double noise_s1_kw_per_mps2 = 2.0;
  double noise_nu = 4.0;

  void validate() const;
  static GeneratorSpec parse(const std::string& text);
  std::vector<std::pair<std::string, std::string>> describe() const;
};

inline constexpr double kCycleSeconds = 800.0;

// Highway-cycle speed trace in km/h at time t (seconds); tiles every 800 s.
double cycle_speed_kmh(double t);

// 1 Hz series with columns time_s, Speed (km/h), Acceleration (m/s^2),
// DY_flt_force (N), DY_Roadld (N), Power_true (kW) and Power (kW, observed).
SeriesFrame generate_synthetic(const GeneratorSpec& spec, std::uint64_t seed);

}  // namespace aelstm
