#include "aelstm/app.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "aelstm/error.hpp"

namespace aelstm {

EvalSplit parse_eval_split(std::string_view text) {
  if (text == "all") return EvalSplit::all;
  if (text == "train") return EvalSplit::train;
  if (text == "test") return EvalSplit::test;
  fail(ErrorKind::config, "unknown split '" + std::string(text) + "' (expected all, train or test)");
}

SeriesFrame select_columns(const SeriesFrame& frame, const std::vector<std::string>& features,
                           const std::string& target) {
  SeriesFrame out;
  out.sample_period = frame.sample_period;
  out.row_offset = frame.row_offset;
  out.meta = frame.meta;
  std::vector<std::string> missing;
  auto take = [&](const std::string& name) {
    if (!frame.has(name)) {
      missing.push_back(name);
      return;
    }
    out.add_column(name, frame.column(name));
  };
  for (const auto& f : features) take(f);
  if (!target.empty()) {
    take(target);
    out.target = target;
  }
  if (!missing.empty()) {
    std::string msg = "missing column(s):";
    for (const auto& m : missing) msg += " " + m;
    fail(ErrorKind::schema, msg);
  }
  return out;
}

SeriesFrame select_split(const SeriesFrame& frame, EvalSplit split, std::size_t window_length) {
  if (split == EvalSplit::all) return frame;
  auto [train, test] = split_70_30(frame, window_length);
  return split == EvalSplit::train ? train : test;
}

ModelArchive train_model(const RunConfig& config, const SeriesFrame& raw, const ProgressSink& progress) {
  config.validate();
  const SeriesFrame frame = select_columns(raw, config.data.features, config.data.target);
  const SeriesFrame train_rows =
      config.data.split == SplitMode::chronological
          ? select_split(frame, EvalSplit::train, config.network.window_length)
          : frame;
  Normalized norm = fit_normalize(train_rows);
  const WindowedDataset ds = make_windows(norm.frame, config.data.features, config.network.window_length);

  ModelArchive archive;
  archive.config = config;
  archive.stats = std::move(norm.stats);
  archive.model = train_ensemble(TrainingData{ds.inputs, ds.targets}, config.network, config.train, config.prior,
                                 progress);
  for (auto& log : archive.model.logs) log.epochs.clear();
  return archive;
}

PredictionSet predict_frame(const ModelArchive& archive, const SeriesFrame& raw, double alpha,
                            const PredictOptions& options) {
  const auto& cfg = archive.config;
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::config, "alpha must lie in (0, 1)");
  if (cfg.network.head == HeadKind::quantile && std::abs(alpha - 0.1) > 1e-12)
    fail(ErrorKind::config, "quantile-head intervals are fixed at the 0.1/0.9 levels; alpha must be 0.1");

  const bool has_target = raw.has(cfg.data.target);
  const SeriesFrame frame = select_columns(raw, cfg.data.features, has_target ? cfg.data.target : std::string());
  const Normalized norm = fit_normalize(frame, &archive.stats);
  const WindowedDataset ds = make_windows(norm.frame, cfg.data.features, cfg.network.window_length);

  const auto outputs = predict_members(archive.model, ds.inputs, options);
  const auto summaries = summarize_windows(outputs, cfg.network.head, cfg.network.nu, alpha);
  const auto [a, b] = archive.stats.affine(cfg.data.target);

  PredictionSet set;
  set.t_index = ds.last_row;
  set.rows.reserve(summaries.size());
  for (const auto& s : summaries) set.rows.push_back(denormalize(s, a, b));
  if (has_target) {
    const auto& y = frame.column(cfg.data.target);
    for (std::size_t r : ds.last_row) set.y_true.push_back(y[r - frame.row_offset]);
  }
  return set;
}

EvaluationReport evaluate_predictions(const PredictionSet& p, double alpha) {
  if (p.y_true.size() != p.rows.size()) fail(ErrorKind::data, "evaluation needs the target column");
  std::vector<double> mu, sd;
  std::vector<Interval> iv;
  for (const auto& r : p.rows) {
    mu.push_back(r.mu);
    sd.push_back(r.total_sd);
    iv.push_back({r.lo, r.hi});
  }
  EvaluationReport rep;
  rep.metrics = accuracy_metrics(p.y_true, mu);
  rep.calibration = calibration_report(p.y_true, mu, sd, iv, 1.0 - alpha);
  return rep;
}

void write_predictions(const std::filesystem::path& path, const PredictionSet& p) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  const bool with_y = !p.y_true.empty();
  out << "t_index" << (with_y ? ",y_true" : "") << ",mu,lo,hi,au,eu\n";
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const auto& r = p.rows[i];
    out << p.t_index[i];
    if (with_y) out << ',' << format_double(p.y_true[i]);
    out << ',' << format_double(r.mu) << ',' << format_double(r.lo) << ',' << format_double(r.hi) << ','
        << format_double(r.aleatoric) << ',' << format_double(r.epistemic) << '\n';
  }
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SeriesFrame load_for_model(const ModelArchive& archive, const std::string& path, bool need_target) {
  const auto& d = archive.config.data;
  std::string target = d.target;
  if (!need_target) {
    const auto header = read_csv_header(path);
    if (std::find(header.begin(), header.end(), target) == header.end()) target.clear();
  }
  return load_csv(path, d.features, target).frame;
}

struct Options {
  std::string config, data, model, out, method, split = "all";
  std::uint64_t seed = 42;
  double alpha = 0.0;
  bool json = false;
};

int cmd_generate(const Options& o, CLI::App& sub, std::ostream& out) {
  GeneratorSpec spec;
  if (!o.config.empty()) spec = GeneratorSpec::parse(read_text(o.config));
  spec.validate();
  const std::uint64_t seed = sub.count("--seed") ? o.seed : 42;
  const SeriesFrame frame = generate_synthetic(spec, seed);
  write_csv(o.out, frame);
  out << "wrote " << frame.length() << " rows to " << o.out << '\n';
  return 0;
}

void print_report(std::ostream& out, const EvaluationReport& r, bool json) {
  out << (json ? report_json(r.metrics, r.calibration) : report_text(r.metrics, r.calibration));
  if (json) out << '\n';
}

int cmd_train(const Options& o, CLI::App& sub, std::ostream& out, std::ostream& err) {
  RunConfig cfg = o.config.empty() ? RunConfig::defaults(o.method.empty() ? "tnll-anchor" : o.method)
                                   : RunConfig::parse(read_text(o.config), o.method);
  if (sub.count("--seed")) cfg.train.seed = o.seed;
  cfg.validate();

  const SeriesFrame raw = load_csv(o.data, cfg.data.features, cfg.data.target).frame;
  const ModelArchive archive = train_model(cfg, raw, [&err](const EpochRecord& r) { err << format_progress(r) << '\n'; });
  save_model(o.out, archive);

  const SeriesFrame fit_rows = cfg.data.split == SplitMode::chronological
                                   ? select_split(raw, EvalSplit::train, cfg.network.window_length)
                                   : raw;
  const auto report = evaluate_predictions(predict_frame(archive, fit_rows, cfg.alpha), cfg.alpha);
  if (!o.json) {
    out << "method = " << cfg.method << '\n'
        << "members = " << archive.model.members.size() << '\n'
        << "epochs = " << cfg.train.epochs << '\n'
        << "model = " << o.out << '\n';
  }
  print_report(out, report, o.json);
  return 0;
}

double resolve_alpha(const Options& o, CLI::App& sub, const ModelArchive& archive) {
  return sub.count("--alpha") ? o.alpha : archive.config.alpha;
}

int cmd_predict(const Options& o, CLI::App& sub, std::ostream& out) {
  const ModelArchive archive = load_model(o.model);
  const double alpha = resolve_alpha(o, sub, archive);
  const SeriesFrame raw = select_split(load_for_model(archive, o.data, false), parse_eval_split(o.split),
                                       archive.config.network.window_length);
  const PredictionSet p = predict_frame(archive, raw, alpha);
  write_predictions(o.out, p);
  out << "wrote " << p.rows.size() << " predictions to " << o.out << '\n';
  return 0;
}

int cmd_evaluate(const Options& o, CLI::App& sub, std::ostream& out) {
  const ModelArchive archive = load_model(o.model);
  const double alpha = resolve_alpha(o, sub, archive);
  const SeriesFrame raw = select_split(load_for_model(archive, o.data, true), parse_eval_split(o.split),
                                       archive.config.network.window_length);
  print_report(out, evaluate_predictions(predict_frame(archive, raw, alpha), alpha), o.json);
  return 0;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anchored LSTM ensembles with Student-t heads for vehicle power prediction"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("generate", "Write a synthetic highway-cycle dataset");
  gen->add_option("--config", o.config, "Generator spec (key = value)");
  gen->add_option("--out", o.out, "Output CSV")->required();
  gen->add_option("--seed", o.seed, "Noise seed");

  auto* train = app.add_subcommand("train", "Train an ensemble and write a model archive");
  train->add_option("--config", o.config, "Run config (key = value sections)");
  train->add_option("--data", o.data, "Training CSV")->required();
  train->add_option("--out,--model", o.out, "Model archive to write")->required();
  train->add_option("--method", o.method, "Method preset");
  train->add_option("--seed", o.seed, "Base training seed");
  train->add_flag("--json", o.json, "Print final training metrics as JSON");

  auto* pred = app.add_subcommand("predict", "Write per-window predictions and intervals");
  pred->add_option("--model", o.model, "Model archive")->required();
  pred->add_option("--data", o.data, "Input CSV")->required();
  pred->add_option("--out", o.out, "Output CSV")->required();
  pred->add_option("--alpha", o.alpha, "Miscoverage level (default from the model, 0.1)");
  pred->add_option("--split", o.split, "all, train or test rows of the input");

  auto* eval = app.add_subcommand("evaluate", "Report accuracy and calibration metrics");
  eval->add_option("--model", o.model, "Model archive")->required();
  eval->add_option("--data", o.data, "Labelled CSV")->required();
  eval->add_option("--alpha", o.alpha, "Miscoverage level (default from the model, 0.1)");
  eval->add_option("--split", o.split, "all, train or test rows of the input");
  eval->add_flag("--json", o.json, "Emit JSON");

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (*gen) return cmd_generate(o, *gen, out);
    if (*train) return cmd_train(o, *train, out, err);
    if (*pred) return cmd_predict(o, *pred, out);
    return cmd_evaluate(o, *eval, out);
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << one_line(e.what()) << '\n';
  } catch (const std::exception& e) {
    err << "error[internal]: " << one_line(e.what()) << '\n';
  }
  return 1;
}

}  // namespace aelstm
