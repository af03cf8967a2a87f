#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aelstm/lstm.hpp"
#include "aelstm/objectives.hpp"

namespace aelstm {

enum class EnsembleMode : std::uint8_t { anchored, mc_dropout };

std::string_view to_string(EnsembleMode mode) noexcept;
EnsembleMode parse_ensemble_mode(std::string_view text);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct TrainConfig {
  std::size_t members = 30;
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 42;
  EnsembleMode mode = EnsembleMode::anchored;
  // Stochastic passes per prediction in mc_dropout mode.
  std::size_t mc_samples = 30;
  // Worker threads for member training; 0 picks the hardware concurrency.
  std::size_t threads = 0;

  // Throws Error(config) naming every violated field, including cross-checks
  // against the network's dropout rate.
  void validate(const NetworkConfig& network) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Independent sub-seed for (purpose, index) derived from a base seed.
enum class SeedStream : std::uint64_t { anchors = 1, init = 2, shuffle = 3, train_dropout = 4, infer_dropout = 5 };
std::uint64_t derive_seed(std::uint64_t base, SeedStream stream, std::uint64_t index);

// Per-member anchors W_anc ~ N(0, sigma_g^2 I), laid out like NetworkParams.
struct AnchorSet {
  std::vector<NetworkParams> members;
  friend bool operator==(const AnchorSet&, const AnchorSet&) = default;
};

AnchorSet draw_anchors(const NetworkConfig& network, std::size_t members, const PriorSpec& prior,
                       std::uint64_t seed);

struct AdamState {
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  std::size_t step = 0;

  static AdamState zeros_like(const NetworkParams& params);
};

// One bias-corrected Adam update at step t >= 1 on flat buffers.
void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> first,
               std::span<double> second, std::size_t t, const AdamConfig& config);

// Increments state.step and updates every tensor.
void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, const AdamConfig& config);

struct EpochRecord {
  std::size_t member = 0;
  std::size_t epoch = 0;
  double data = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

// `member=<m> epoch=<e> data=<v> penalty=<v>`
std::string format_progress(const EpochRecord& record);

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  // Full training-set objective before the first and after the last update.
  ObjectiveValue initial;
  ObjectiveValue final;
};

using ProgressSink = std::function<void(const EpochRecord&)>;

struct TrainingData {
  std::span<const Tensor> windows;
  std::span<const double> targets;
};

// Objective over an entire dataset (data term averaged over every window,
// penalty weighted per prior.scaling for that dataset's size).
ObjectiveValue dataset_objective(const NetworkConfig& network, const NetworkParams& params, const TrainingData& data,
                                 const NetworkParams* anchors, const PriorSpec& prior);

struct MemberResult {
  NetworkParams params;
  TrainingLog log;
};

// Trains one network from `init`. With `anchors` the objective carries the
// anchor penalty, weighted per prior.scaling; in mc_dropout mode fresh masks
// are drawn per batch.
MemberResult train_member(std::size_t member, const TrainingData& data, const NetworkParams& init,
                          const NetworkParams* anchors, const NetworkConfig& network, const TrainConfig& config,
                          const PriorSpec& prior, const ProgressSink& progress = {});

struct EnsembleModel {
  NetworkConfig network;
  TrainConfig train;
  PriorSpec prior;
  std::vector<NetworkParams> members;
  AnchorSet anchors;  // empty in mc_dropout mode
  std::vector<TrainingLog> logs;

  EnsembleMode mode() const noexcept { return train.mode; }
};

EnsembleModel train_ensemble(const TrainingData& data, const NetworkConfig& network, const TrainConfig& config,
                             const PriorSpec& prior, const ProgressSink& progress = {});

struct PredictOptions {
  // Setting this false evaluates every mc_dropout pass without masks.
  bool dropout_masks = true;
};

// outputs[k][w]: member k (anchored) or stochastic pass k (mc_dropout) on window w.
std::vector<std::vector<HeadOutput>> predict_members(const EnsembleModel& model, std::span<const Tensor> windows,
                                                     const PredictOptions& options = {});

std::vector<HeadOutput> predict_members(const EnsembleModel& model, const Tensor& window,
                                        const PredictOptions& options = {});

}  // namespace aelstm
