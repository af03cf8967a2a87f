#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "aelstm/archive.hpp"
#include "aelstm/config.hpp"
#include "aelstm/data.hpp"
#include "aelstm/eval.hpp"
#include "aelstm/trainer.hpp"
#include "aelstm/uq.hpp"

namespace aelstm {

enum class EvalSplit : std::uint8_t { all, train, test };
EvalSplit parse_eval_split(std::string_view text);

// Only the configured feature and target columns, in that order.
SeriesFrame select_columns(const SeriesFrame& frame, const std::vector<std::string>& features,
                           const std::string& target);

// Rows of `frame` a split refers to; train/test follow the 70/30 chronological cut.
SeriesFrame select_split(const SeriesFrame& frame, EvalSplit split, std::size_t window_length);

// Fits normalization on the training rows (per config.data.split) and trains.
ModelArchive train_model(const RunConfig& config, const SeriesFrame& raw, const ProgressSink& progress = {});

struct PredictionSet {
  std::vector<std::size_t> t_index;  // final row of each window
  std::vector<double> y_true;        // raw target units; empty when the frame has no target
  std::vector<IntervalPrediction> rows;  // denormalized
};

PredictionSet predict_frame(const ModelArchive& archive, const SeriesFrame& raw, double alpha,
                            const PredictOptions& options = {});

struct EvaluationReport {
  MetricsReport metrics;
  CalibrationReport calibration;
};

EvaluationReport evaluate_predictions(const PredictionSet& predictions, double alpha);

void write_predictions(const std::filesystem::path& path, const PredictionSet& predictions);

// Full command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aelstm
