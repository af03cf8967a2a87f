#include "aelstm/objectives.hpp"

#include <cmath>
#include <numbers>

#include "aelstm/error.hpp"

namespace aelstm {

std::string_view to_string(PenaltyScaling s) noexcept { return s == PenaltyScaling::per_sample ? "per_sample" : "unit"; }

PenaltyScaling parse_penalty_scaling(std::string_view text) {
  if (text == "per_sample") return PenaltyScaling::per_sample;
  if (text == "unit") return PenaltyScaling::unit;
  fail(ErrorKind::config, "unknown prior scaling '" + std::string(text) + "' (expected per_sample or unit)");
}

void PriorSpec::validate() const {
  for (auto g : kGateBlocks)
    if (!((*this)[g] > 0.0) || !std::isfinite((*this)[g]))
      fail(ErrorKind::config, "prior variance for block '" + std::string(to_string(g)) + "' must be finite and > 0");
  if (!(weight > 0.0) || !std::isfinite(weight)) fail(ErrorKind::config, "prior weight must be finite and > 0");
}

PriorSpec effective_prior(const PriorSpec& prior, std::size_t n) {
  if (n == 0) fail(ErrorKind::contract, "effective_prior: empty training set");
  PriorSpec p = prior;
  p.weight = prior.scaling == PenaltyScaling::per_sample ? 1.0 / static_cast<double>(n) : 1.0;
  return p;
}

namespace {

void check_scale(double s, double floor, const char* who) {
  if (!(s >= floor))
    fail(ErrorKind::contract, std::string(who) + ": scale " + std::to_string(s) + " below floor " + std::to_string(floor));
}

}  // namespace

double t_nll(double y, double mu, double s, double nu, double scale_floor) {
  check_scale(s, scale_floor, "t_nll");
  if (!(nu > 0.0)) fail(ErrorKind::contract, "t_nll: nu must be > 0");
  const double r = y - mu;
  return std::log(s) + 0.5 * (nu + 1.0) * std::log1p(r * r / (nu * s * s));
}

double t_log_score(double y, double mu, double s, double nu) {
  if (!(s > 0.0) || !(nu > 0.0)) fail(ErrorKind::contract, "t_log_score: s and nu must be > 0");
  const double r = y - mu;
  return std::log(s) + 0.5 * std::log(nu * std::numbers::pi) + std::lgamma(0.5 * nu) - std::lgamma(0.5 * (nu + 1.0)) +
         0.5 * (nu + 1.0) * std::log1p(r * r / (nu * s * s));
}

double gaussian_nll(double y, double mu, double s, double scale_floor) {
  check_scale(s, scale_floor, "gaussian_nll");
  const double r = y - mu;
  return std::log(s) + r * r / (2.0 * s * s);
}

double pinball_loss(double y, double prediction, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) fail(ErrorKind::config, "pinball_loss: tau must lie in (0, 1)");
  const double u = y - prediction;
  return std::max(tau * u, (tau - 1.0) * u);
}

double multi_quantile_loss(double y, const std::array<double, 3>& predictions) {
  double acc = 0.0;
  for (std::size_t k = 0; k < 3; ++k) acc += pinball_loss(y, predictions[k], kQuantileLevels[k]);
  return acc / 3.0;
}

double anchor_penalty(const NetworkParams& params, const NetworkParams& anchors, const PriorSpec& prior) {
  if (!params.same_layout(anchors)) fail(ErrorKind::shape, "anchor_penalty: parameter/anchor partition mismatch");
  const auto p = params.tensors();
  const auto a = anchors.tensors();
  std::array<double, 5> sq{};
  for (std::size_t i = 0; i < p.size(); ++i) {
    double acc = 0.0;
    const auto pv = p[i].tensor->data();
    const auto av = a[i].tensor->data();
    for (std::size_t k = 0; k < pv.size(); ++k) {
      const double d = pv[k] - av[k];
      acc += d * d;
    }
    sq[static_cast<std::size_t>(p[i].block)] += acc;
  }
  double total = 0.0;
  for (auto g : kGateBlocks) total += prior.weight * sq[static_cast<std::size_t>(g)] / (2.0 * prior[g]);
  return total;
}

Var t_nll(Var y, Var mu, Var s, double nu) {
  const Var z = div(square(sub(y, mu)), scale(square(s), nu));
  return add(log(s), scale(log(shift(z, 1.0)), 0.5 * (nu + 1.0)));
}

Var pinball_loss(Var y, Var predictions) {
  // tau*u + relu(-u) equals max(tau*u, (tau-1)*u).
  Graph& g = y.graph();
  const std::size_t rows = predictions.value().rows();
  Tensor taus = Tensor::matrix(rows, 3);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < 3; ++k) taus(r, k) = kQuantileLevels[k];
  Tensor ones = Tensor::matrix(1, 3, 1.0);
  const Var y3 = matmul(y, g.constant(std::move(ones)));
  const Var u = sub(y3, predictions);
  return add(mul(g.constant(std::move(taus)), u), relu(scale(u, -1.0)));
}

Var anchor_penalty(Graph& graph, const NetworkVars& vars, const NetworkParams& anchors, const PriorSpec& prior) {
  const auto a = anchors.tensors();
  if (a.size() != vars.all.size()) fail(ErrorKind::shape, "anchor_penalty: parameter/anchor partition mismatch");
  std::array<Var, 5> block_sums;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].tensor->shape() != vars.all[i].value().shape())
      fail(ErrorKind::shape, "anchor_penalty: shape mismatch for " + a[i].name);
    const Var sq = sum(square(sub(vars.all[i], graph.constant(*a[i].tensor))));
    auto& slot = block_sums[static_cast<std::size_t>(a[i].block)];
    slot = slot.valid() ? add(slot, sq) : sq;
  }
  Var total;
  for (auto g : kGateBlocks) {
    const Var s = block_sums[static_cast<std::size_t>(g)];
    if (!s.valid()) continue;
    const Var term = scale(s, prior.weight / (2.0 * prior[g]));
    total = total.valid() ? add(total, term) : term;
  }
  return total;
}

ObjectiveValue member_objective(const NetworkConfig& config, const NetworkParams& params, const Batch& batch,
                                const NetworkParams* anchors, const PriorSpec& prior, const DropoutMask* mask,
                                NetworkParams* gradient) {
  if (batch.indices.empty()) fail(ErrorKind::contract, "member_objective: empty batch");
  Graph g;
  const NetworkVars vars = bind_params(g, params, gradient != nullptr);
  const auto steps = time_major(batch.windows, batch.indices);
  const HeadVars head = forward(g, config, vars, steps, mask);

  Tensor y = Tensor::matrix(batch.indices.size(), 1);
  for (std::size_t k = 0; k < batch.indices.size(); ++k) y[k] = batch.targets[batch.indices[k]];
  const Var yv = g.constant(std::move(y));

  const Var data = config.head == HeadKind::student_t ? mean(t_nll(yv, head.mu, head.scale, config.nu))
                                                      : mean(pinball_loss(yv, head.quantiles));
  Var total = data;
  Var penalty;
  if (anchors) {
    penalty = anchor_penalty(g, vars, *anchors, prior);
    total = add(data, penalty);
  }

  ObjectiveValue out;
  out.data = data.value().item();
  out.penalty = penalty.valid() ? penalty.value().item() : 0.0;
  out.total = total.value().item();

  if (gradient) {
    g.backward(total);
    if (!gradient->same_layout(params)) *gradient = NetworkParams(params);
    auto refs = gradient->tensors();
    for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].tensor = g.grad(vars.all[i]);
  }
  return out;
}

}  // namespace aelstm
