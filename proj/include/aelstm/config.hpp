#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "aelstm/lstm.hpp"
#include "aelstm/objectives.hpp"
#include "aelstm/trainer.hpp"

namespace aelstm {

enum class SplitMode : std::uint8_t { chronological, none };

struct DataConfig {
  std::vector<std::string> features = {"Speed", "Acceleration", "DY_flt_force"};
  std::string target = "Power";
  // chronological: train on the first 70% of the file's rows.
  SplitMode split = SplitMode::chronological;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

// Method presets mirroring the comparison grid.
inline constexpr std::array<std::string_view, 4> kMethodPresets = {"tnll-anchor", "tnll-dropout", "quantile-anchor",
                                                                   "quantile-dropout"};

inline constexpr double kDefaultDropoutRate = 0.1;

// Everything needed to reproduce a run; rendered verbatim into archives.
struct RunConfig {
  std::string method = "tnll-anchor";
  NetworkConfig network;
  TrainConfig train;
  PriorSpec prior;
  DataConfig data;
  double alpha = 0.1;

  // Parses `key = value` sections ([method], [network], [likelihood], [prior],
  // [train], [data], [eval]). The method preset is applied first and explicit
  // keys override it. `method_override` (from --method) replaces the file's
  // method name. All problems are reported together as one config error.
  static RunConfig parse(const std::string& text, std::string_view method_override = {});
  static RunConfig defaults(std::string_view method = "tnll-anchor");

  // Complete text form with every field explicit; parse(render()) == *this.
  std::string render() const;
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

void apply_method_preset(RunConfig& config, std::string_view method);

}  // namespace aelstm
