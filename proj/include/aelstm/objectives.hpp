#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "aelstm/lstm.hpp"
#include "aelstm/tensor.hpp"

namespace aelstm {

// How the anchor penalty is weighted against the per-sample data term.
//   per_sample: penalty / N_train, the averaged negative log-posterior
//   unit:       penalty added at full strength to the averaged data term
enum class PenaltyScaling : std::uint8_t { per_sample, unit };

std::string_view to_string(PenaltyScaling s) noexcept;
PenaltyScaling parse_penalty_scaling(std::string_view text);

// Per-block prior variances sigma_g^2, indexed by GateBlock.
struct PriorSpec {
  std::array<double, 5> variance = {0.01, 0.01, 0.01, 0.01, 0.01};
  PenaltyScaling scaling = PenaltyScaling::per_sample;
  // Multiplier applied by anchor_penalty; set from `scaling` by effective_prior.
  double weight = 1.0;

  double operator[](GateBlock g) const { return variance[static_cast<std::size_t>(g)]; }
  static PriorSpec uniform(double v) { return PriorSpec{{v, v, v, v, v}}; }
  void validate() const;

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

// Student-t negative log-likelihood without the nu-only constants:
//   log s + (nu+1)/2 * log(1 + (y-mu)^2 / (nu s^2))
double t_nll(double y, double mu, double s, double nu, double scale_floor = 1e-4);

// Full negative log density of the location-scale t, constants included.
// Used for reported log-scores where nu may differ between runs.
double t_log_score(double y, double mu, double s, double nu);

// log s + (y-mu)^2 / (2 s^2)
double gaussian_nll(double y, double mu, double s, double scale_floor = 1e-4);

double pinball_loss(double y, double prediction, double tau);
// Mean pinball loss over the three levels in kQuantileLevels.
double multi_quantile_loss(double y, const std::array<double, 3>& predictions);

// Copy of `prior` whose weight matches its scaling for a training set of n windows.
PriorSpec effective_prior(const PriorSpec& prior, std::size_t n);

// weight * sum_g ||W_g - A_g||^2 / (2 sigma_g^2), biases included in their gate's block.
double anchor_penalty(const NetworkParams& params, const NetworkParams& anchors, const PriorSpec& prior);

// Graph-side pieces of the member objective.
Var t_nll(Var y, Var mu, Var s, double nu);
Var pinball_loss(Var y, Var predictions);
Var anchor_penalty(Graph& graph, const NetworkVars& vars, const NetworkParams& anchors, const PriorSpec& prior);

// A batch of windows (each T x F) and normalized targets.
struct Batch {
  std::span<const Tensor> windows;
  std::span<const double> targets;
  std::span<const std::size_t> indices;  // selects the rows of this batch
};

struct ObjectiveValue {
  double data = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

// Data term (mean per-sample loss for the configured head) plus, when
// `anchors` is non-null, the gate-wise anchor penalty. When `gradient` is
// non-null it receives d(total)/d(params) in the canonical layout.
ObjectiveValue member_objective(const NetworkConfig& config, const NetworkParams& params, const Batch& batch,
                                const NetworkParams* anchors, const PriorSpec& prior,
                                const DropoutMask* mask = nullptr, NetworkParams* gradient = nullptr);

}  // namespace aelstm
