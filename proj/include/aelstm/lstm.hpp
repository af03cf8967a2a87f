#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aelstm/tensor.hpp"

namespace aelstm {

// Parameter blocks over which the prior factorizes. Every trainable tensor
// belongs to exactly one of them.
enum class GateBlock : std::uint8_t { input = 0, forget = 1, output = 2, candidate = 3, head = 4 };

inline constexpr std::array<GateBlock, 5> kGateBlocks = {GateBlock::input, GateBlock::forget,
                                                         GateBlock::output, GateBlock::candidate,
                                                         GateBlock::head};

std::string_view to_string(GateBlock block) noexcept;

enum class HeadKind : std::uint8_t { student_t, quantile };

std::string_view to_string(HeadKind kind) noexcept;
HeadKind parse_head_kind(std::string_view text);

inline constexpr std::array<double, 3> kQuantileLevels = {0.1, 0.5, 0.9};

struct NetworkConfig {
  std::size_t num_layers = 4;
  std::size_t hidden_dim = 32;
  std::size_t input_dim = 1;
  std::size_t window_length = 16;
  HeadKind head = HeadKind::student_t;
  double dropout_rate = 0.0;
  // Degrees of freedom of the t-head; fixed, not learned.
  double nu = 4.0;
  // s(x) = softplus(raw) + scale_floor, in normalized target units.
  double scale_floor = 1e-4;

  std::size_t head_outputs() const noexcept { return head == HeadKind::student_t ? 2 : 3; }
  // Throws Error(config) listing every violated field.
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// Weights use the row-vector convention: a gate pre-activation for a batch of
// inputs X (rows) is X * w_x + H * w_h + b + b_h.
struct GateParams {
  Tensor w_x;  // in x hidden
  Tensor w_h;  // hidden x hidden
  Tensor b;    // 1 x hidden
  Tensor b_h;  // 1 x hidden

  friend bool operator==(const GateParams&, const GateParams&) = default;
};

struct LstmLayerParams {
  // Gate order: input, forget, output, candidate.
  std::array<GateParams, 4> gates;

  static LstmLayerParams zeros(std::size_t in_dim, std::size_t hidden_dim);
  std::size_t input_dim() const { return gates[0].w_x.rows(); }
  std::size_t hidden_dim() const { return gates[0].w_x.cols(); }

  friend bool operator==(const LstmLayerParams&, const LstmLayerParams&) = default;
};

struct HeadParams {
  Tensor w;  // hidden x outputs
  Tensor b;  // 1 x outputs

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct ParamRef {
  GateBlock block;
  std::string name;
  Tensor* tensor;
};

struct ConstParamRef {
  GateBlock block;
  std::string name;
  const Tensor* tensor;
};

struct NetworkParams {
  std::vector<LstmLayerParams> layers;
  HeadParams head;

  static NetworkParams zeros(const NetworkConfig& config);

  // Canonical flat order: per layer, per gate (i, f, o, c): w_x, w_h, b, b_h;
  // then head w, b. Adam state, anchors, and archives all use this order.
  std::vector<ParamRef> tensors();
  std::vector<ConstParamRef> tensors() const;

  std::size_t num_scalars() const;
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  // True when both parameter sets have the same tensor names and shapes.
  bool same_layout(const NetworkParams& other) const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

// Inverted-dropout masks, one rows x hidden tensor per layer output. Entries
// are 0 or 1/(1-p). A mask is reused across all time steps of a pass.
struct DropoutMask {
  std::vector<Tensor> layers;
};

DropoutMask sample_dropout_mask(const NetworkConfig& config, std::size_t rows, std::mt19937_64& rng);

struct CellStep {
  std::vector<double> h, c;
  std::vector<double> input_gate, forget_gate, output_gate, candidate;
};

CellStep lstm_cell_step(std::span<const double> x, std::span<const double> h_prev,
                        std::span<const double> c_prev, const LstmLayerParams& params);

struct HeadOutput {
  double mu = 0.0;
  double scale = 0.0;
  std::array<double, 3> quantiles{};
};

// Graph-side view of a parameter set; `all` follows the canonical flat order.
struct NetworkVars {
  struct Gate {
    Var w_x, w_h, b, b_h;
  };
  std::vector<std::array<Gate, 4>> layers;
  Var head_w, head_b;
  std::vector<Var> all;
};

NetworkVars bind_params(Graph& graph, const NetworkParams& params, bool requires_grad);

struct HeadVars {
  Var mu;         // B x 1 (t-head)
  Var scale;      // B x 1 (t-head)
  Var quantiles;  // B x 3 (quantile head)
};

// Runs a batch through the network. `steps` holds T tensors of shape B x F,
// step t containing row t of every window in the batch.
HeadVars forward(Graph& graph, const NetworkConfig& config, const NetworkVars& vars,
                 std::span<const Tensor> steps, const DropoutMask* mask = nullptr);

// Packs the windows selected by `indices` (each T x F) into time-major steps.
std::vector<Tensor> time_major(std::span<const Tensor> windows, std::span<const std::size_t> indices);

// Single window (T x F) convenience path.
HeadOutput forward(const NetworkConfig& config, const NetworkParams& params, const Tensor& window,
                   const DropoutMask* mask = nullptr);

// Evaluates many windows in chunks; `masks`, when non-empty, supplies one
// single-row mask per window.
std::vector<HeadOutput> forward_windows(const NetworkConfig& config, const NetworkParams& params,
                                        std::span<const Tensor> windows,
                                        std::span<const DropoutMask> masks = {});

}  // namespace aelstm
