#include "aelstm/config.hpp"

#include <algorithm>
#include <sstream>

#include "aelstm/data.hpp"
#include "aelstm/error.hpp"
#include "aelstm/kv.hpp"

namespace aelstm {

namespace {

constexpr std::array<std::string_view, 5> kPriorKeys = {"variance_input", "variance_forget", "variance_output",
                                                        "variance_candidate", "variance_head"};

std::string_view split_name(SplitMode m) { return m == SplitMode::chronological ? "chronological" : "none"; }

}  // namespace

void apply_method_preset(RunConfig& config, std::string_view method) {
  if (method == "tnll-anchor") {
    config.network.head = HeadKind::student_t;
    config.train.mode = EnsembleMode::anchored;
    config.network.dropout_rate = 0.0;
  } else if (method == "tnll-dropout") {
    config.network.head = HeadKind::student_t;
    config.train.mode = EnsembleMode::mc_dropout;
    config.network.dropout_rate = kDefaultDropoutRate;
  } else if (method == "quantile-anchor") {
    config.network.head = HeadKind::quantile;
    config.train.mode = EnsembleMode::anchored;
    config.network.dropout_rate = 0.0;
  } else if (method == "quantile-dropout") {
    config.network.head = HeadKind::quantile;
    config.train.mode = EnsembleMode::mc_dropout;
    config.network.dropout_rate = kDefaultDropoutRate;
  } else {
    fail(ErrorKind::config, "unknown method '" + std::string(method) +
                                "' (expected tnll-anchor, tnll-dropout, quantile-anchor or quantile-dropout)");
  }
  config.method = std::string(method);
}

RunConfig RunConfig::defaults(std::string_view method) {
  RunConfig c;
  apply_method_preset(c, method);
  c.network.input_dim = c.data.features.size();
  return c;
}

RunConfig RunConfig::parse(const std::string& text, std::string_view method_override) {
  KeyValues kv = KeyValues::parse(text);
  RunConfig c;
  std::string method = kv.get_string("method.name", c.method);
  if (!method_override.empty()) method = std::string(method_override);
  apply_method_preset(c, method);

  auto& net = c.network;
  net.num_layers = kv.get_size("network.num_layers", net.num_layers);
  net.hidden_dim = kv.get_size("network.hidden_dim", net.hidden_dim);
  net.window_length = kv.get_size("network.window_length", net.window_length);
  if (const auto* head = kv.find("network.head")) {
    kv.get_string("network.head", "");
    try {
      net.head = parse_head_kind(*head);
    } catch (const Error& e) {
      kv.problems().push_back(std::string("network.head: ") + e.what());
    }
  }
  net.dropout_rate = kv.get_double("network.dropout_rate", net.dropout_rate);
  net.scale_floor = kv.get_double("network.scale_floor", net.scale_floor);
  net.nu = kv.get_double("likelihood.nu", net.nu);

  const double shared = kv.get_double("prior.variance", c.prior.variance[0]);
  for (std::size_t g = 0; g < 5; ++g)
    c.prior.variance[g] = kv.get_double("prior." + std::string(kPriorKeys[g]), shared);
  if (const auto* scaling = kv.find("prior.scaling")) {
    kv.get_string("prior.scaling", "");
    try {
      c.prior.scaling = parse_penalty_scaling(*scaling);
    } catch (const Error& e) {
      kv.problems().push_back(std::string("prior.scaling: ") + e.what());
    }
  }

  auto& tr = c.train;
  tr.members = kv.get_size("train.members", tr.members);
  tr.epochs = kv.get_size("train.epochs", tr.epochs);
  tr.batch_size = kv.get_size("train.batch_size", tr.batch_size);
  tr.adam.learning_rate = kv.get_double("train.learning_rate", tr.adam.learning_rate);
  tr.adam.beta1 = kv.get_double("train.beta1", tr.adam.beta1);
  tr.adam.beta2 = kv.get_double("train.beta2", tr.adam.beta2);
  tr.adam.epsilon = kv.get_double("train.epsilon", tr.adam.epsilon);
  tr.seed = kv.get_u64("train.seed", tr.seed);
  if (const auto* mode = kv.find("train.mode")) {
    kv.get_string("train.mode", "");
    try {
      tr.mode = parse_ensemble_mode(*mode);
    } catch (const Error& e) {
      kv.problems().push_back(std::string("train.mode: ") + e.what());
    }
  }
  tr.mc_samples = kv.get_size("train.mc_samples", tr.mc_samples);
  tr.threads = kv.get_size("train.threads", tr.threads);

  c.data.features = kv.get_list("data.features", c.data.features);
  c.data.target = kv.get_string("data.target", c.data.target);
  const std::string split = kv.get_string("data.split", std::string(split_name(c.data.split)));
  if (split == "chronological") c.data.split = SplitMode::chronological;
  else if (split == "none") c.data.split = SplitMode::none;
  else kv.problems().push_back("data.split: expected chronological or none, got '" + split + "'");
  net.input_dim = c.data.features.size();

  c.alpha = kv.get_double("eval.alpha", c.alpha);

  for (const auto& k : kv.unused()) kv.problems().push_back(k + ": unknown key");
  std::vector<std::string> problems = kv.problems();
  try {
    c.validate();
  } catch (const Error& e) {
    problems.emplace_back(e.what());
  }
  if (!problems.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& p : problems) msg += " " + p + ";";
    fail(ErrorKind::config, msg);
  }
  return c;
}

void RunConfig::validate() const {
  std::vector<std::string> problems;
  auto collect = [&](auto&& check) {
    try {
      check();
    } catch (const Error& e) {
      problems.emplace_back(e.what());
    }
  };
  collect([&] { network.validate(); });
  collect([&] { train.validate(network); });
  collect([&] { prior.validate(); });
  if (data.features.empty()) problems.emplace_back("data.features must list at least one column");
  if (data.target.empty()) problems.emplace_back("data.target must be set");
  if (std::find(data.features.begin(), data.features.end(), data.target) != data.features.end())
    problems.emplace_back("data.target must not also be a feature");
  if (network.input_dim != data.features.size()) problems.emplace_back("network input_dim must equal the feature count");
  if (!(alpha > 0.0 && alpha < 1.0)) problems.emplace_back("eval.alpha must lie in (0, 1)");
  if (network.head == HeadKind::student_t && !(network.nu > 2.0))
    problems.emplace_back("likelihood.nu must be > 2 for interval variance decomposition");
  if (problems.empty()) return;
  std::string msg;
  for (const auto& p : problems) msg += (msg.empty() ? "" : " ") + p;
  fail(ErrorKind::config, msg);
}

std::string RunConfig::render() const {
  std::ostringstream os;
  os << "[method]\nname = " << method << "\n\n";
  os << "[network]\n"
     << "num_layers = " << network.num_layers << '\n'
     << "hidden_dim = " << network.hidden_dim << '\n'
     << "window_length = " << network.window_length << '\n'
     << "head = " << to_string(network.head) << '\n'
     << "dropout_rate = " << format_double(network.dropout_rate) << '\n'
     << "scale_floor = " << format_double(network.scale_floor) << "\n\n";
  os << "[likelihood]\nnu = " << format_double(network.nu) << "\n\n";
  os << "[prior]\n";
  for (std::size_t g = 0; g < 5; ++g) os << kPriorKeys[g] << " = " << format_double(prior.variance[g]) << '\n';
  os << "scaling = " << to_string(prior.scaling) << '\n';
  os << "\n[train]\n"
     << "members = " << train.members << '\n'
     << "epochs = " << train.epochs << '\n'
     << "batch_size = " << train.batch_size << '\n'
     << "learning_rate = " << format_double(train.adam.learning_rate) << '\n'
     << "beta1 = " << format_double(train.adam.beta1) << '\n'
     << "beta2 = " << format_double(train.adam.beta2) << '\n'
     << "epsilon = " << format_double(train.adam.epsilon) << '\n'
     << "seed = " << train.seed << '\n'
     << "mode = " << to_string(train.mode) << '\n'
     << "mc_samples = " << train.mc_samples << '\n'
     << "threads = " << train.threads << "\n\n";
  os << "[data]\nfeatures = ";
  for (std::size_t i = 0; i < data.features.size(); ++i) os << (i ? ", " : "") << data.features[i];
  os << "\ntarget = " << data.target << "\nsplit = " << split_name(data.split) << "\n\n";
  os << "[eval]\nalpha = " << format_double(alpha) << '\n';
  return os.str();
}

}  // namespace aelstm
