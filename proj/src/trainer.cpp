#include "aelstm/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "aelstm/error.hpp"

namespace aelstm {

std::string_view to_string(EnsembleMode mode) noexcept {
  return mode == EnsembleMode::anchored ? "anchored" : "mc_dropout";
}

EnsembleMode parse_ensemble_mode(std::string_view text) {
  if (text == "anchored") return EnsembleMode::anchored;
  if (text == "mc_dropout") return EnsembleMode::mc_dropout;
  fail(ErrorKind::config, "unknown ensemble mode '" + std::string(text) + "' (expected anchored or mc_dropout)");
}

void TrainConfig::validate(const NetworkConfig& network) const {
  std::vector<std::string> problems;
  if (members < 1) problems.push_back("members must be >= 1");
  if (epochs < 1) problems.push_back("epochs must be >= 1");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (!(adam.learning_rate >= 0.0) || !std::isfinite(adam.learning_rate))
    problems.push_back("learning_rate must be finite and >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) problems.push_back("beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) problems.push_back("beta2 must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) problems.push_back("epsilon must be > 0");
  if (mode == EnsembleMode::mc_dropout) {
    if (!(network.dropout_rate > 0.0)) problems.push_back("mc_dropout mode requires dropout_rate > 0");
    if (mc_samples < 1) problems.push_back("mc_samples must be >= 1");
  } else if (network.dropout_rate != 0.0) {
    problems.push_back("anchored mode requires dropout_rate = 0");
  }
  if (problems.empty()) return;
  std::ostringstream os;
  os << "invalid training config:";
  for (const auto& p : problems) os << ' ' << p << ';';
  fail(ErrorKind::config, os.str());
}

std::uint64_t derive_seed(std::uint64_t base, SeedStream stream, std::uint64_t index) {
  // splitmix64 finalizer over a combination of the three inputs
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

namespace {

NetworkParams draw_gaussian(const NetworkConfig& network, const PriorSpec& prior, std::mt19937_64& rng) {
  NetworkParams p = NetworkParams::zeros(network);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& ref : p.tensors()) {
    const double sd = std::sqrt(prior[ref.block]);
    for (auto& v : ref.tensor->data()) v = sd * normal(rng);
  }
  return p;
}

}  // namespace

AnchorSet draw_anchors(const NetworkConfig& network, std::size_t members, const PriorSpec& prior,
                       std::uint64_t seed) {
  prior.validate();
  AnchorSet set;
  set.members.reserve(members);
  for (std::size_t m = 0; m < members; ++m) {
    std::mt19937_64 rng(derive_seed(seed, SeedStream::anchors, m));
    set.members.push_back(draw_gaussian(network, prior, rng));
  }
  return set;
}

AdamState AdamState::zeros_like(const NetworkParams& params) {
  AdamState s;
  for (const auto& ref : params.tensors()) {
    s.first.emplace_back(ref.tensor->shape(), 0.0);
    s.second.emplace_back(ref.tensor->shape(), 0.0);
  }
  return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, std::span<double> first,
               std::span<double> second, std::size_t t, const AdamConfig& config) {
  if (t < 1) fail(ErrorKind::contract, "adam_step: step counter must be >= 1");
  if (grads.size() != params.size() || first.size() != params.size() || second.size() != params.size())
    fail(ErrorKind::shape, "adam_step: buffer lengths differ");
  for (double g : grads)
    if (!std::isfinite(g)) fail(ErrorKind::training, "adam_step: non-finite gradient");
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    first[i] = config.beta1 * first[i] + (1.0 - config.beta1) * grads[i];
    second[i] = config.beta2 * second[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    const double m_hat = first[i] / c1;
    const double v_hat = second[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, const AdamConfig& config) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  if (p.size() != g.size() || state.first.size() != p.size())
    fail(ErrorKind::shape, "adam_step: parameter, gradient and moment layouts differ");
  const std::size_t t = ++state.step;
  for (std::size_t i = 0; i < p.size(); ++i)
    adam_step(p[i].tensor->data(), g[i].tensor->data(), state.first[i].data(), state.second[i].data(), t, config);
}

std::string format_progress(const EpochRecord& r) {
  std::ostringstream os;
  os.precision(10);
  os << "member=" << r.member << " epoch=" << r.epoch << " data=" << r.data << " penalty=" << r.penalty;
  return os.str();
}

ObjectiveValue dataset_objective(const NetworkConfig& network, const NetworkParams& params, const TrainingData& data,
                                 const NetworkParams* anchors, const PriorSpec& prior) {
  constexpr std::size_t kChunk = 256;
  const std::size_t n = data.windows.size();
  if (n == 0 || data.targets.size() != n) fail(ErrorKind::contract, "dataset_objective: empty or mismatched dataset");
  double data_sum = 0.0;
  for (std::size_t start = 0; start < n; start += kChunk) {
    std::vector<std::size_t> idx(std::min(kChunk, n - start));
    std::iota(idx.begin(), idx.end(), start);
    const ObjectiveValue v = member_objective(network, params, {data.windows, data.targets, idx}, nullptr, prior);
    data_sum += v.data * static_cast<double>(idx.size());
  }
  ObjectiveValue out;
  out.data = data_sum / static_cast<double>(n);
  out.penalty = anchors ? anchor_penalty(params, *anchors, effective_prior(prior, n)) : 0.0;
  out.total = out.data + out.penalty;
  return out;
}

MemberResult train_member(std::size_t member, const TrainingData& data, const NetworkParams& init,
                          const NetworkParams* anchors, const NetworkConfig& network, const TrainConfig& config,
                          const PriorSpec& prior, const ProgressSink& progress) {
  const std::size_t n = data.windows.size();
  if (n == 0 || data.targets.size() != n) fail(ErrorKind::data, "train_member: empty or mismatched training data");
  const bool dropout = config.mode == EnsembleMode::mc_dropout;
  const PriorSpec weighted = effective_prior(prior, n);

  MemberResult result{init, {}};
  NetworkParams& params = result.params;
  AdamState state = AdamState::zeros_like(params);
  NetworkParams grad = params;
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, SeedStream::shuffle, member));
  std::mt19937_64 mask_rng(derive_seed(config.seed, SeedStream::train_dropout, member));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto where = [&](std::size_t epoch) {
    return "member " + std::to_string(member) + " epoch " + std::to_string(epoch) + ": ";
  };

  try {
    result.log.initial = dataset_objective(network, params, data, anchors, prior);
  } catch (const Error& e) {
    fail(ErrorKind::training, "member " + std::to_string(member) + " before epoch 1: " + e.what());
  }
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double data_acc = 0.0, penalty_acc = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      DropoutMask mask;
      if (dropout) mask = sample_dropout_mask(network, idx.size(), mask_rng);
      ObjectiveValue v;
      try {
        v = member_objective(network, params, {data.windows, data.targets, idx}, anchors, weighted,
                             dropout ? &mask : nullptr, &grad);
        if (!std::isfinite(v.total)) fail(ErrorKind::training, "objective diverged (non-finite)");
        adam_step(params, grad, state, config.adam);
      } catch (const Error& e) {
        fail(ErrorKind::training, where(epoch) + e.what());
      }
      data_acc += v.data;
      penalty_acc += v.penalty;
      ++batches;
    }
    EpochRecord rec;
    rec.member = member;
    rec.epoch = epoch;
    rec.data = data_acc / static_cast<double>(batches);
    rec.penalty = penalty_acc / static_cast<double>(batches);
    rec.total = rec.data + rec.penalty;
    if (!std::isfinite(rec.total)) fail(ErrorKind::training, where(epoch) + "objective diverged (non-finite)");
    result.log.epochs.push_back(rec);
    if (progress) progress(rec);
  }
  try {
    result.log.final = dataset_objective(network, params, data, anchors, prior);
  } catch (const Error& e) {
    fail(ErrorKind::training, where(config.epochs) + e.what());
  }
  return result;
}

EnsembleModel train_ensemble(const TrainingData& data, const NetworkConfig& network, const TrainConfig& config,
                             const PriorSpec& prior, const ProgressSink& progress) {
  network.validate();
  config.validate(network);
  prior.validate();

  EnsembleModel model;
  model.network = network;
  model.train = config;
  model.prior = prior;

  const bool anchored = config.mode == EnsembleMode::anchored;
  const std::size_t count = anchored ? config.members : 1;
  std::vector<NetworkParams> inits;
  if (anchored) {
    model.anchors = draw_anchors(network, count, prior, config.seed);
    inits = model.anchors.members;
  } else {
    std::mt19937_64 rng(derive_seed(config.seed, SeedStream::init, 0));
    inits.push_back(draw_gaussian(network, prior, rng));
  }

  std::mutex sink_mutex;
  ProgressSink locked;
  if (progress)
    locked = [&](const EpochRecord& r) {
      std::lock_guard<std::mutex> lock(sink_mutex);
      progress(r);
    };

  std::vector<MemberResult> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t m = next++; m < count; m = next++) {
      try {
        results[m] = train_member(m, data, inits[m], anchored ? &model.anchors.members[m] : nullptr, network, config,
                                  prior, locked);
      } catch (...) {
        errors[m] = std::current_exception();
      }
    }
  };
  std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t m = 0; m < count; ++m)
    if (errors[m]) std::rethrow_exception(errors[m]);

  for (auto& r : results) {
    model.members.push_back(std::move(r.params));
    model.logs.push_back(std::move(r.log));
  }
  return model;
}

std::vector<std::vector<HeadOutput>> predict_members(const EnsembleModel& model, std::span<const Tensor> windows,
                                                     const PredictOptions& options) {
  if (model.members.empty()) fail(ErrorKind::contract, "predict_members: model has no members");
  std::vector<std::vector<HeadOutput>> out;
  if (model.mode() == EnsembleMode::anchored) {
    for (const auto& member : model.members) out.push_back(forward_windows(model.network, member, windows));
    return out;
  }
  const NetworkParams& net = model.members.front();
  for (std::size_t pass = 0; pass < model.train.mc_samples; ++pass) {
    if (!options.dropout_masks) {
      out.push_back(forward_windows(model.network, net, windows));
      continue;
    }
    const std::uint64_t pass_seed = derive_seed(model.train.seed, SeedStream::infer_dropout, pass);
    std::vector<DropoutMask> masks;
    masks.reserve(windows.size());
    for (std::size_t w = 0; w < windows.size(); ++w) {
      std::mt19937_64 rng(derive_seed(pass_seed, SeedStream::infer_dropout, w));
      masks.push_back(sample_dropout_mask(model.network, 1, rng));
    }
    out.push_back(forward_windows(model.network, net, windows, masks));
  }
  return out;
}

std::vector<HeadOutput> predict_members(const EnsembleModel& model, const Tensor& window,
                                        const PredictOptions& options) {
  const std::array<Tensor, 1> one = {window};
  const auto all = predict_members(model, one, options);
  std::vector<HeadOutput> out;
  out.reserve(all.size());
  for (const auto& k : all) out.push_back(k.front());
  return out;
}

}  // namespace aelstm
