#include "aelstm/lstm.hpp"

#include <cmath>
#include <sstream>

#include "aelstm/error.hpp"

namespace aelstm {

std::string_view to_string(GateBlock block) noexcept {
  switch (block) {
    case GateBlock::input: return "input";
    case GateBlock::forget: return "forget";
    case GateBlock::output: return "output";
    case GateBlock::candidate: return "candidate";
    case GateBlock::head: return "head";
  }
  return "?";
}

std::string_view to_string(HeadKind kind) noexcept {
  return kind == HeadKind::student_t ? "student_t" : "quantile";
}

HeadKind parse_head_kind(std::string_view text) {
  if (text == "student_t" || text == "t") return HeadKind::student_t;
  if (text == "quantile") return HeadKind::quantile;
  fail(ErrorKind::config, "unknown head kind '" + std::string(text) + "' (expected student_t or quantile)");
}

void NetworkConfig::validate() const {
  std::vector<std::string> problems;
  if (num_layers < 1) problems.push_back("num_layers must be >= 1");
  if (hidden_dim < 1) problems.push_back("hidden_dim must be >= 1");
  if (input_dim < 1) problems.push_back("input_dim must be >= 1");
  if (window_length < 1) problems.push_back("window_length must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) problems.push_back("dropout_rate must lie in [0, 1)");
  if (!(nu > 0.0)) problems.push_back("nu must be > 0");
  if (!(scale_floor > 0.0)) problems.push_back("scale_floor must be > 0");
  if (problems.empty()) return;
  std::ostringstream os;
  os << "invalid network config:";
  for (const auto& p : problems) os << ' ' << p << ';';
  fail(ErrorKind::config, os.str());
}

LstmLayerParams LstmLayerParams::zeros(std::size_t in_dim, std::size_t hidden_dim) {
  LstmLayerParams p;
  for (auto& g : p.gates) {
    g.w_x = Tensor::matrix(in_dim, hidden_dim);
    g.w_h = Tensor::matrix(hidden_dim, hidden_dim);
    g.b = Tensor::matrix(1, hidden_dim);
    g.b_h = Tensor::matrix(1, hidden_dim);
  }
  return p;
}

NetworkParams NetworkParams::zeros(const NetworkConfig& config) {
  config.validate();
  NetworkParams p;
  for (std::size_t l = 0; l < config.num_layers; ++l)
    p.layers.push_back(LstmLayerParams::zeros(l == 0 ? config.input_dim : config.hidden_dim, config.hidden_dim));
  p.head.w = Tensor::matrix(config.hidden_dim, config.head_outputs());
  p.head.b = Tensor::matrix(1, config.head_outputs());
  return p;
}

namespace {

constexpr std::array<const char*, 4> kGateTags = {"i", "f", "o", "c"};

template <class Self, class Ref>
std::vector<Ref> collect(Self& self) {
  std::vector<Ref> out;
  out.reserve(self.layers.size() * 16 + 2);
  for (std::size_t l = 0; l < self.layers.size(); ++l) {
    for (std::size_t g = 0; g < 4; ++g) {
      auto& gate = self.layers[l].gates[g];
      const auto block = static_cast<GateBlock>(g);
      const std::string prefix = "l" + std::to_string(l) + "." + kGateTags[g] + ".";
      out.push_back({block, prefix + "w_x", &gate.w_x});
      out.push_back({block, prefix + "w_h", &gate.w_h});
      out.push_back({block, prefix + "b", &gate.b});
      out.push_back({block, prefix + "b_h", &gate.b_h});
    }
  }
  out.push_back({GateBlock::head, "head.w", &self.head.w});
  out.push_back({GateBlock::head, "head.b", &self.head.b});
  return out;
}

}  // namespace

std::vector<ParamRef> NetworkParams::tensors() { return collect<NetworkParams, ParamRef>(*this); }

std::vector<ConstParamRef> NetworkParams::tensors() const {
  return collect<const NetworkParams, ConstParamRef>(*this);
}

std::size_t NetworkParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& r : tensors()) n += r.tensor->size();
  return n;
}

std::vector<double> NetworkParams::flatten() const {
  std::vector<double> out;
  out.reserve(num_scalars());
  for (const auto& r : tensors()) out.insert(out.end(), r.tensor->data().begin(), r.tensor->data().end());
  return out;
}

void NetworkParams::assign_flat(std::span<const double> values) {
  if (values.size() != num_scalars())
    fail(ErrorKind::shape, "assign_flat: expected " + std::to_string(num_scalars()) + " values, got " +
                               std::to_string(values.size()));
  std::size_t k = 0;
  for (auto& r : tensors())
    for (auto& v : r.tensor->data()) v = values[k++];
}

bool NetworkParams::same_layout(const NetworkParams& other) const {
  const auto a = tensors();
  const auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].name != b[i].name || a[i].tensor->shape() != b[i].tensor->shape()) return false;
  return true;
}

DropoutMask sample_dropout_mask(const NetworkConfig& config, std::size_t rows, std::mt19937_64& rng) {
  const double p = config.dropout_rate;
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::config, "dropout_rate must lie in [0, 1)");
  if (p == 0.0) fail(ErrorKind::config, "dropout masks require dropout_rate > 0");
  const double keep_value = 1.0 / (1.0 - p);
  DropoutMask mask;
  mask.layers.reserve(config.num_layers);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    Tensor m = Tensor::matrix(rows, config.hidden_dim);
    for (auto& v : m.data()) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = u < p ? 0.0 : keep_value;
    }
    mask.layers.push_back(std::move(m));
  }
  return mask;
}

CellStep lstm_cell_step(std::span<const double> x, std::span<const double> h_prev,
                        std::span<const double> c_prev, const LstmLayerParams& params) {
  const std::size_t in = params.input_dim(), hidden = params.hidden_dim();
  if (x.size() != in || h_prev.size() != hidden || c_prev.size() != hidden)
    fail(ErrorKind::shape, "lstm_cell_step: expected x[" + std::to_string(in) + "], h/c[" +
                               std::to_string(hidden) + "]");
  Graph g;
  const Var xv = g.constant(Tensor({1, in}, std::vector<double>(x.begin(), x.end())));
  const Var hv = g.constant(Tensor({1, hidden}, std::vector<double>(h_prev.begin(), h_prev.end())));
  const Var cv = g.constant(Tensor({1, hidden}, std::vector<double>(c_prev.begin(), c_prev.end())));
  std::array<Var, 4> act;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& gp = params.gates[k];
    const Var pre = add(add(add(matmul(xv, g.constant(gp.w_x)), g.constant(gp.b)), matmul(hv, g.constant(gp.w_h))),
                        g.constant(gp.b_h));
    act[k] = k == 3 ? tanh(pre) : sigmoid(pre);
  }
  const Var c = add(mul(act[1], cv), mul(act[0], act[3]));
  const Var h = mul(act[2], tanh(c));
  auto vec = [](Var v) { return std::vector<double>(v.value().data().begin(), v.value().data().end()); };
  return {vec(h), vec(c), vec(act[0]), vec(act[1]), vec(act[2]), vec(act[3])};
}

NetworkVars bind_params(Graph& graph, const NetworkParams& params, bool requires_grad) {
  NetworkVars v;
  for (const auto& layer : params.layers) {
    std::array<NetworkVars::Gate, 4> gates;
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& gp = layer.gates[k];
      gates[k] = {graph.leaf(gp.w_x, requires_grad), graph.leaf(gp.w_h, requires_grad),
                  graph.leaf(gp.b, requires_grad), graph.leaf(gp.b_h, requires_grad)};
      v.all.insert(v.all.end(), {gates[k].w_x, gates[k].w_h, gates[k].b, gates[k].b_h});
    }
    v.layers.push_back(gates);
  }
  v.head_w = graph.leaf(params.head.w, requires_grad);
  v.head_b = graph.leaf(params.head.b, requires_grad);
  v.all.push_back(v.head_w);
  v.all.push_back(v.head_b);
  return v;
}

HeadVars forward(Graph& graph, const NetworkConfig& config, const NetworkVars& vars,
                 std::span<const Tensor> steps, const DropoutMask* mask) {
  if (steps.empty()) fail(ErrorKind::input, "forward: empty window");
  if (vars.layers.size() != config.num_layers) fail(ErrorKind::shape, "forward: layer count mismatch");
  const std::size_t batch = steps[0].rows();
  const std::size_t hidden = config.hidden_dim;
  for (const auto& s : steps) {
    if (s.rank() != 2 || s.rows() != batch || s.cols() != config.input_dim)
      fail(ErrorKind::input, "forward: step shape " + shape_string(s.shape()) + " does not match batch " +
                                 std::to_string(batch) + " x input_dim " + std::to_string(config.input_dim));
    if (!s.all_finite()) fail(ErrorKind::input, "forward: window contains non-finite values");
  }
  if (mask) {
    if (mask->layers.size() != config.num_layers) fail(ErrorKind::shape, "forward: dropout mask layer count mismatch");
    for (const auto& m : mask->layers)
      if (m.rows() != batch || m.cols() != hidden) fail(ErrorKind::shape, "forward: dropout mask shape mismatch");
  }

  const Var ones = graph.constant(Tensor::matrix(batch, 1, 1.0));
  std::vector<Var> sequence;
  sequence.reserve(steps.size());
  for (const auto& s : steps) sequence.push_back(graph.constant(s));

  Var top;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const auto& gates = vars.layers[l];
    const bool last = l + 1 == config.num_layers;
    std::array<Var, 4> bias_rows;
    for (std::size_t k = 0; k < 4; ++k) bias_rows[k] = matmul(ones, add(gates[k].b, gates[k].b_h));
    const Var mask_l = mask ? graph.constant(mask->layers[l]) : Var();

    Var h = graph.constant(Tensor::matrix(batch, hidden));
    Var c = graph.constant(Tensor::matrix(batch, hidden));
    std::vector<Var> next;
    if (!last) next.reserve(sequence.size());
    for (const Var x : sequence) {
      std::array<Var, 4> act;
      for (std::size_t k = 0; k < 4; ++k) {
        const Var pre = add(add(matmul(x, gates[k].w_x), matmul(h, gates[k].w_h)), bias_rows[k]);
        act[k] = k == 3 ? tanh(pre) : sigmoid(pre);
      }
      c = add(mul(act[1], c), mul(act[0], act[3]));
      h = mul(act[2], tanh(c));
      if (!last) next.push_back(mask ? mul(h, mask_l) : h);
    }
    if (last) top = mask ? mul(h, mask_l) : h;
    else sequence = std::move(next);
  }

  const Var out = add(matmul(top, vars.head_w), matmul(ones, vars.head_b));
  HeadVars head;
  if (config.head == HeadKind::student_t) {
    head.mu = column(out, 0);
    head.scale = shift(softplus(column(out, 1)), config.scale_floor);
  } else {
    head.quantiles = out;
  }
  return head;
}

std::vector<Tensor> time_major(std::span<const Tensor> windows, std::span<const std::size_t> indices) {
  if (indices.empty()) fail(ErrorKind::input, "time_major: empty batch");
  const Tensor& first = windows[indices[0]];
  const std::size_t T = first.rows(), F = first.cols(), B = indices.size();
  std::vector<Tensor> steps;
  steps.reserve(T);
  for (std::size_t t = 0; t < T; ++t) steps.push_back(Tensor::matrix(B, F));
  for (std::size_t b = 0; b < B; ++b) {
    const Tensor& w = windows[indices[b]];
    if (w.rows() != T || w.cols() != F)
      fail(ErrorKind::input, "time_major: window " + std::to_string(indices[b]) + " has shape " +
                                 shape_string(w.shape()));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) steps[t](b, f) = w(t, f);
  }
  return steps;
}

namespace {

void check_window(const NetworkConfig& config, const Tensor& w) {
  if (w.rank() != 2 || w.rows() != config.window_length || w.cols() != config.input_dim)
    fail(ErrorKind::input, "window shape " + shape_string(w.shape()) + " does not match T=" +
                               std::to_string(config.window_length) + " x F=" + std::to_string(config.input_dim));
}

}  // namespace

HeadOutput forward(const NetworkConfig& config, const NetworkParams& params, const Tensor& window,
                   const DropoutMask* mask) {
  const std::array<Tensor, 1> one = {window};
  if (mask) {
    const std::array<DropoutMask, 1> masks = {*mask};
    return forward_windows(config, params, one, masks).front();
  }
  return forward_windows(config, params, one).front();
}

std::vector<HeadOutput> forward_windows(const NetworkConfig& config, const NetworkParams& params,
                                        std::span<const Tensor> windows, std::span<const DropoutMask> masks) {
  constexpr std::size_t kChunk = 128;
  if (!masks.empty() && masks.size() != windows.size())
    fail(ErrorKind::shape, "forward_windows: need one mask per window");
  for (const auto& w : windows) check_window(config, w);

  std::vector<HeadOutput> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const std::size_t stop = std::min(windows.size(), start + kChunk);
    std::vector<std::size_t> idx(stop - start);
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = start + k;

    DropoutMask chunk_mask;
    if (!masks.empty()) {
      for (std::size_t l = 0; l < config.num_layers; ++l) {
        Tensor m = Tensor::matrix(idx.size(), config.hidden_dim);
        for (std::size_t k = 0; k < idx.size(); ++k) {
          const Tensor& src = masks[idx[k]].layers.at(l);
          for (std::size_t j = 0; j < config.hidden_dim; ++j) m(k, j) = src(0, j);
        }
        chunk_mask.layers.push_back(std::move(m));
      }
    }

    Graph g;
    const NetworkVars vars = bind_params(g, params, false);
    const auto steps = time_major(windows, idx);
    const HeadVars head = forward(g, config, vars, steps, masks.empty() ? nullptr : &chunk_mask);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      HeadOutput o;
      if (config.head == HeadKind::student_t) {
        o.mu = head.mu.value()[k];
        o.scale = head.scale.value()[k];
      } else {
        for (std::size_t q = 0; q < 3; ++q) o.quantiles[q] = head.quantiles.value()(k, q);
      }
      out.push_back(o);
    }
  }
  return out;
}

}  // namespace aelstm
