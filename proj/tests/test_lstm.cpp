#include <doctest.h>

#include <cmath>
#include <random>

#include "aelstm/error.hpp"
#include "aelstm/lstm.hpp"

using namespace aelstm;

namespace {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, hidden x in like the textbook gate equations

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Mat transposed(const Tensor& t) {
  Mat m(t.cols(), Vec(t.rows()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[c][r] = t(r, c);
  return m;
}

Vec affine(const Mat& wx, const Vec& x, const Mat& wh, const Vec& h, const Tensor& b, const Tensor& bh) {
  Vec z(wx.size());
  for (std::size_t j = 0; j < wx.size(); ++j) {
    double acc = b[j] + bh[j];
    for (std::size_t k = 0; k < x.size(); ++k) acc += wx[j][k] * x[k];
    for (std::size_t k = 0; k < h.size(); ++k) acc += wh[j][k] * h[k];
    z[j] = acc;
  }
  return z;
}

// Plain scalar evaluation of the six cell equations.
struct OracleStep {
  Vec h, c;
};

OracleStep oracle_step(const Vec& x, const Vec& h, const Vec& c, const LstmLayerParams& p) {
  auto pre = [&](int g) {
    const auto& q = p.gates[g];
    return affine(transposed(q.w_x), x, transposed(q.w_h), h, q.b, q.b_h);
  };
  const Vec zi = pre(0), zf = pre(1), zo = pre(2), zc = pre(3);
  OracleStep s{Vec(h.size()), Vec(h.size())};
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double i = logistic(zi[j]), f = logistic(zf[j]), o = logistic(zo[j]), g = std::tanh(zc[j]);
    s.c[j] = f * c[j] + i * g;
    s.h[j] = o * std::tanh(s.c[j]);
  }
  return s;
}

HeadOutput oracle_forward(const NetworkConfig& cfg, const NetworkParams& params, const Tensor& window) {
  std::vector<Vec> seq(window.rows());
  for (std::size_t t = 0; t < window.rows(); ++t)
    for (std::size_t f = 0; f < window.cols(); ++f) seq[t].push_back(window(t, f));
  for (const auto& layer : params.layers) {
    Vec h(cfg.hidden_dim, 0.0), c(cfg.hidden_dim, 0.0);
    for (auto& x : seq) {
      const OracleStep s = oracle_step(x, h, c, layer);
      h = s.h;
      c = s.c;
      x = h;
    }
  }
  const Vec& h = seq.back();
  Vec out(params.head.b.size());
  for (std::size_t o = 0; o < out.size(); ++o) {
    out[o] = params.head.b[o];
    for (std::size_t k = 0; k < h.size(); ++k) out[o] += h[k] * params.head.w(k, o);
  }
  HeadOutput r;
  if (cfg.head == HeadKind::student_t) {
    r.mu = out[0];
    r.scale = std::log1p(std::exp(out[1])) + cfg.scale_floor;
  } else {
    r.quantiles = {out[0], out[1], out[2]};
  }
  return r;
}

void randomize(NetworkParams& p, std::mt19937_64& rng, double sd = 0.5) {
  std::normal_distribution<double> n(0.0, sd);
  for (auto& r : p.tensors())
    for (double& v : r.tensor->data()) v = n(rng);
}

Tensor random_window(std::size_t T, std::size_t F, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor w = Tensor::matrix(T, F);
  for (double& v : w.data()) v = u(rng);
  return w;
}

NetworkConfig small_config(HeadKind head = HeadKind::student_t) {
  NetworkConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_dim = 3;
  cfg.input_dim = 2;
  cfg.window_length = 4;
  cfg.head = head;
  return cfg;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an aelstm::Error");
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("zero parameters give half-open gates") {
  const auto p = LstmLayerParams::zeros(2, 3);
  const double x[] = {0.3, -0.7};
  const double h[] = {0.1, 0.2, 0.3};
  const double c[] = {1.0, -2.0, 0.5};
  const CellStep s = lstm_cell_step(x, h, c, p);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(s.input_gate[j] == 0.5);
    CHECK(s.forget_gate[j] == 0.5);
    CHECK(s.output_gate[j] == 0.5);
    CHECK(s.candidate[j] == 0.0);
    CHECK(s.c[j] == doctest::Approx(0.5 * c[j]));
    CHECK(s.h[j] == doctest::Approx(0.5 * std::tanh(0.5 * c[j])));
  }
}

TEST_CASE("zero candidate weights and zero cell state keep the cell empty") {
  std::mt19937_64 rng(1);
  LstmLayerParams p = LstmLayerParams::zeros(2, 3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int g = 0; g < 3; ++g)
    for (Tensor* t : {&p.gates[g].w_x, &p.gates[g].w_h, &p.gates[g].b})
      for (double& v : t->data()) v = n(rng);
  const double x[] = {0.4, 0.9};
  const double h[] = {0.2, -0.1, 0.3};
  const double c[] = {0.0, 0.0, 0.0};
  const CellStep s = lstm_cell_step(x, h, c, p);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(s.c[j] == 0.0);
    CHECK(s.h[j] == 0.0);
  }
}

TEST_CASE("cell step matches the scalar oracle and keeps gates bounded") {
  std::mt19937_64 rng(2);
  NetworkConfig cfg = small_config();
  cfg.num_layers = 1;
  NetworkParams params = NetworkParams::zeros(cfg);
  for (int trial = 0; trial < 20; ++trial) {
    randomize(params, rng, 0.5);
    std::normal_distribution<double> n(0.0, 1.0);
    Vec x = {n(rng), n(rng)}, h = {n(rng), n(rng), n(rng)}, c = {n(rng), n(rng), n(rng)};
    const CellStep s = lstm_cell_step(x, h, c, params.layers[0]);
    const OracleStep o = oracle_step(x, h, c, params.layers[0]);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::abs(s.h[j] - o.h[j]) < 1e-14);
      CHECK(std::abs(s.c[j] - o.c[j]) < 1e-14);
      CHECK(s.input_gate[j] > 0.0);
      CHECK(s.input_gate[j] < 1.0);
      CHECK(s.forget_gate[j] > 0.0);
      CHECK(s.forget_gate[j] < 1.0);
      CHECK(s.output_gate[j] > 0.0);
      CHECK(s.output_gate[j] < 1.0);
      CHECK(std::abs(s.candidate[j]) < 1.0);
    }
  }
}

TEST_CASE("cell step rejects mismatched dimensions") {
  const auto p = LstmLayerParams::zeros(2, 3);
  const double x[] = {1.0};
  const double h[] = {0, 0, 0};
  CHECK(kind_of([&] { lstm_cell_step(x, h, h, p); }) == ErrorKind::shape);
}

TEST_CASE("zero window and zero parameters give the softplus(0) scale") {
  NetworkConfig cfg = small_config();
  const NetworkParams params = NetworkParams::zeros(cfg);
  const HeadOutput out = forward(cfg, params, Tensor::matrix(4, 2));
  CHECK(out.mu == 0.0);
  CHECK(out.scale == doctest::Approx(std::log(2.0) + 1e-4).epsilon(1e-15));
}

TEST_CASE("network forward matches the scalar oracle end to end") {
  std::mt19937_64 rng(3);
  for (HeadKind head : {HeadKind::student_t, HeadKind::quantile}) {
    const NetworkConfig cfg = small_config(head);
    NetworkParams params = NetworkParams::zeros(cfg);
    for (int trial = 0; trial < 5; ++trial) {
      randomize(params, rng);
      const Tensor w = random_window(4, 2, rng);
      const HeadOutput got = forward(cfg, params, w);
      const HeadOutput want = oracle_forward(cfg, params, w);
      CHECK(std::abs(got.mu - want.mu) < 1e-10);
      CHECK(std::abs(got.scale - want.scale) < 1e-10);
      for (int q = 0; q < 3; ++q) CHECK(std::abs(got.quantiles[q] - want.quantiles[q]) < 1e-10);
    }
  }
}

TEST_CASE("forward is deterministic and batched evaluation agrees with single windows") {
  std::mt19937_64 rng(4);
  const NetworkConfig cfg = small_config();
  NetworkParams params = NetworkParams::zeros(cfg);
  randomize(params, rng);
  std::vector<Tensor> windows;
  for (int i = 0; i < 7; ++i) windows.push_back(random_window(4, 2, rng));
  const auto batch = forward_windows(cfg, params, windows);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const HeadOutput a = forward(cfg, params, windows[i]);
    const HeadOutput b = forward(cfg, params, windows[i]);
    CHECK(a.mu == b.mu);
    CHECK(a.scale == b.scale);
    CHECK(std::abs(batch[i].mu - a.mu) < 1e-14);
    CHECK(std::abs(batch[i].scale - a.scale) < 1e-14);
  }
}

TEST_CASE("scale never drops below the floor") {
  NetworkConfig cfg = small_config();
  NetworkParams params = NetworkParams::zeros(cfg);
  params.head.b[1] = -800.0;
  CHECK(forward(cfg, params, Tensor::matrix(4, 2, 0.5)).scale >= cfg.scale_floor);
}

TEST_CASE("forward rejects non-finite and misshapen windows") {
  const NetworkConfig cfg = small_config();
  const NetworkParams params = NetworkParams::zeros(cfg);
  Tensor w = Tensor::matrix(4, 2);
  w(2, 1) = NAN;
  CHECK(kind_of([&] { forward(cfg, params, w); }) == ErrorKind::input);
  CHECK(kind_of([&] { forward(cfg, params, Tensor::matrix(3, 2)); }) == ErrorKind::input);
}

TEST_CASE("dropout masks") {
  NetworkConfig cfg = small_config();
  std::mt19937_64 rng(5);
  CHECK(kind_of([&] { sample_dropout_mask(cfg, 1, rng); }) == ErrorKind::config);
  cfg.dropout_rate = 1.0;
  CHECK(kind_of([&] { sample_dropout_mask(cfg, 1, rng); }) == ErrorKind::config);

  cfg.dropout_rate = 0.5;
  cfg.hidden_dim = 32;
  std::size_t zeros = 0, total = 0;
  for (int m = 0; m < 10; ++m) {
    const DropoutMask mask = sample_dropout_mask(cfg, 1, rng);
    REQUIRE(mask.layers.size() == cfg.num_layers);
    for (const auto& layer : mask.layers)
      for (double v : layer.data()) {
        ++total;
        if (v == 0.0) ++zeros;
        else CHECK(v == 2.0);
      }
  }
  const double frac = static_cast<double>(zeros) / static_cast<double>(total);
  CHECK(frac > 0.4);
  CHECK(frac < 0.6);
}

TEST_CASE("a dropout mask changes the output and all-ones mask does not") {
  std::mt19937_64 rng(6);
  NetworkConfig cfg = small_config();
  cfg.dropout_rate = 0.5;
  NetworkParams params = NetworkParams::zeros(cfg);
  randomize(params, rng);
  const Tensor w = random_window(4, 2, rng);
  DropoutMask ones;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) ones.layers.push_back(Tensor::matrix(1, cfg.hidden_dim, 1.0));
  CHECK(forward(cfg, params, w, &ones).mu == doctest::Approx(forward(cfg, params, w).mu).epsilon(1e-15));
  bool changed = false;
  for (int k = 0; k < 10 && !changed; ++k) {
    const DropoutMask m = sample_dropout_mask(cfg, 1, rng);
    changed = forward(cfg, params, w, &m).mu != forward(cfg, params, w).mu;
  }
  CHECK(changed);
}

TEST_CASE("parameter layout: canonical names, blocks and flat round trip") {
  NetworkConfig cfg = small_config();
  NetworkParams params = NetworkParams::zeros(cfg);
  const auto refs = params.tensors();
  REQUIRE(refs.size() == 2 * 4 * 4 + 2);
  CHECK(refs[0].name == "l0.i.w_x");
  CHECK(refs[0].block == GateBlock::input);
  CHECK(refs[4].block == GateBlock::forget);
  CHECK(refs[15].block == GateBlock::candidate);
  CHECK(refs.back().block == GateBlock::head);
  // 2 layers: (2*3 + 9 + 3 + 3) * 4 + (3*3 + 9 + 3 + 3) * 4; head 3*2 + 2
  CHECK(params.num_scalars() == 84 + 96 + 8);

  std::mt19937_64 rng(8);
  randomize(params, rng);
  const auto flat = params.flatten();
  NetworkParams copy = NetworkParams::zeros(cfg);
  copy.assign_flat(flat);
  CHECK(copy == params);
  CHECK(copy.same_layout(params));
  CHECK_FALSE(copy.same_layout(NetworkParams::zeros(small_config(HeadKind::quantile))));
  CHECK(kind_of([&] { copy.assign_flat(std::vector<double>(3)); }) == ErrorKind::shape);
}

TEST_CASE("network config validation lists every problem") {
  NetworkConfig cfg;
  cfg.num_layers = 0;
  cfg.hidden_dim = 0;
  cfg.dropout_rate = 1.5;
  try {
    cfg.validate();
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    const std::string msg = e.what();
    CHECK(msg.find("num_layers") != std::string::npos);
    CHECK(msg.find("hidden_dim") != std::string::npos);
    CHECK(msg.find("dropout_rate") != std::string::npos);
  }
  CHECK(parse_head_kind("quantile") == HeadKind::quantile);
  CHECK(kind_of([] { parse_head_kind("gauss"); }) == ErrorKind::config);
}
