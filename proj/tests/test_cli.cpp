#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "aelstm/app.hpp"
#include "aelstm/uq.hpp"

using namespace aelstm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "aelstm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

fs::path dir() {
  const fs::path d = fs::temp_directory_path() / "aelstm_test_cli";
  fs::create_directories(d);
  return d;
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = dir() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

const std::string kTinyRun = R"([network]
num_layers = 1
hidden_dim = 4
window_length = 8
[train]
members = 1
epochs = 1
threads = 1
)";

// Generates a 400 s dataset and trains a one-member model once per process.
const fs::path& fixture_model() {
  static const fs::path model = [] {
    const auto spec = write("gen.cfg", "duration_s = 400\n");
    REQUIRE(cli({"generate", "--config", spec.string(), "--out", (dir() / "data.csv").string(), "--seed", "7"}).code ==
            0);
    const auto cfg = write("tiny.cfg", kTinyRun);
    const fs::path m = dir() / "tiny.bin";
    const Run r = cli({"train", "--config", cfg.string(), "--data", (dir() / "data.csv").string(), "--out", m.string()});
    REQUIRE(r.code == 0);
    return m;
  }();
  return model;
}

fs::path data_csv() {
  fixture_model();
  return dir() / "data.csv";
}

}  // namespace

TEST_CASE("generate: default spec writes one 800 s cycle") {
  const auto out = dir() / "default.csv";
  const Run r = cli({"generate", "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("800 rows") != std::string::npos);
  const auto rows = read_rows(out);
  CHECK(rows.size() == 802);  // meta line + header + 800 samples
  CHECK(rows[0][0].rfind("# meta:", 0) == 0);
}

TEST_CASE("generate: seeds control only the noise") {
  const auto a = dir() / "s1.csv", b = dir() / "s1b.csv", c = dir() / "s2.csv";
  cli({"generate", "--out", a.string(), "--seed", "1"});
  cli({"generate", "--out", b.string(), "--seed", "1"});
  cli({"generate", "--out", c.string(), "--seed", "2"});
  CHECK(slurp(a) == slurp(b));
  const auto ra = read_rows(a), rc = read_rows(c);
  REQUIRE(ra.size() == rc.size());
  const auto& header = ra[1];
  const auto col = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), n) - header.begin());
  };
  std::size_t same_truth = 0, same_obs = 0;
  for (std::size_t i = 2; i < ra.size(); ++i) {
    same_truth += ra[i][col("Power_true")] == rc[i][col("Power_true")];
    same_obs += ra[i][col("Power")] == rc[i][col("Power")];
  }
  CHECK(same_truth == ra.size() - 2);
  CHECK(same_obs == 0);
}

TEST_CASE("train: one-member smoke run produces a loadable archive") {
  const auto model = load_model(fixture_model());
  CHECK(model.model.members.size() == 1);
  CHECK(model.model.anchors.members.size() == 1);
  CHECK(model.config.train.epochs == 1);
}

TEST_CASE("train: progress lines go to stderr") {
  const auto cfg = write("tiny2.cfg", kTinyRun);
  const Run r = cli({"train", "--config", cfg.string(), "--data", data_csv().string(), "--out",
                     (dir() / "tiny2.bin").string(), "--json"});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("member=0 epoch=1 data=") == 0);
  CHECK(nlohmann::json::parse(r.out).contains("r2"));
}

TEST_CASE("train: dropout mode with a zero rate is rejected") {
  const auto cfg = write("bad.cfg", kTinyRun + "mode = mc_dropout\n[network]\ndropout_rate = 0\n");
  const Run r = cli({"train", "--config", cfg.string(), "--data", data_csv().string(), "--out",
                     (dir() / "bad.bin").string()});
  CHECK(r.code != 0);
  CHECK(r.err.rfind("error[config]:", 0) == 0);
  CHECK(r.err.find("dropout_rate") != std::string::npos);
}

TEST_CASE("evaluate: report fields") {
  const Run text = cli({"evaluate", "--model", fixture_model().string(), "--data", data_csv().string()});
  REQUIRE(text.code == 0);
  CHECK(text.out.find("nominal = 0.9") != std::string::npos);

  const Run js = cli({"evaluate", "--model", fixture_model().string(), "--data", data_csv().string(), "--json",
                      "--alpha", "0.2", "--split", "test"});
  REQUIRE(js.code == 0);
  const auto j = nlohmann::json::parse(js.out);
  for (const char* key : {"rmse", "mae", "r2", "ev", "coverage", "cov_low", "cov_high", "width", "stvar"})
    CHECK(j.contains(key));
  CHECK(j["nominal"].get<double>() == doctest::Approx(0.8));
  CHECK(j["n"].get<std::size_t>() == 400 - 280 - 8 + 1);
}

TEST_CASE("predict: one row per window and the single-member interval") {
  const auto out = dir() / "pred.csv";
  const Run r = cli({"predict", "--model", fixture_model().string(), "--data", data_csv().string(), "--out",
                     out.string()});
  REQUIRE(r.code == 0);
  const auto rows = read_rows(out);
  REQUIRE(rows.size() == 1 + 400 - 8 + 1);
  CHECK(rows[0] == std::vector<std::string>{"t_index", "y_true", "mu", "lo", "hi", "au", "eu"});

  // AU = sqrt(nu/(nu-2)) s for one member, so hi - lo = 2 t s = 2 t AU / sqrt(2).
  const double t = student_t_quantile(0.95, 4.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double lo = std::stod(rows[i][3]), hi = std::stod(rows[i][4]), au = std::stod(rows[i][5]);
    CHECK(hi - lo == doctest::Approx(2.0 * t * au / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(std::stod(rows[i][6]) == 0.0);
    CHECK(std::stoul(rows[i][0]) == i - 1 + 7);
  }
}

TEST_CASE("predict: input without the target column") {
  GeneratorSpec spec;
  spec.duration_s = 50;
  SeriesFrame f = generate_synthetic(spec, 1);
  SeriesFrame features = select_columns(f, {"Speed", "Acceleration", "DY_flt_force"}, "");
  const auto in = dir() / "features.csv";
  write_csv(in, features);
  const auto out = dir() / "pred_nolabel.csv";
  REQUIRE(cli({"predict", "--model", fixture_model().string(), "--data", in.string(), "--out", out.string()}).code ==
          0);
  const auto rows = read_rows(out);
  CHECK(rows[0] == std::vector<std::string>{"t_index", "mu", "lo", "hi", "au", "eu"});
  CHECK(rows.size() == 1 + 50 - 8 + 1);
}

TEST_CASE("predict: save/load round trip matches the in-memory model") {
  const auto archive = load_model(fixture_model());
  const SeriesFrame raw = load_csv(data_csv(), archive.config.data.features, archive.config.data.target).frame;
  const auto a = predict_frame(archive, raw, 0.1);
  const auto b = predict_frame(decode_archive(encode_archive(archive)), raw, 0.1);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].mu == b.rows[i].mu);
    CHECK(a.rows[i].lo == b.rows[i].lo);
    CHECK(a.rows[i].hi == b.rows[i].hi);
  }
}

TEST_CASE("error paths exit nonzero with a category prefix") {
  const std::string bytes = slurp(fixture_model());
  const auto truncated = write("truncated.bin", bytes.substr(0, bytes.size() / 2));
  Run r = cli({"evaluate", "--model", truncated.string(), "--data", data_csv().string()});
  CHECK(r.code != 0);
  CHECK(r.err.rfind("error[archive]:", 0) == 0);
  CHECK(r.err.find("offset") != std::string::npos);

  const auto schema = write("schema.csv", "Speed,Power\n1,2\n3,4\n");
  r = cli({"evaluate", "--model", fixture_model().string(), "--data", schema.string()});
  CHECK(r.code != 0);
  CHECK(r.err.rfind("error[schema]:", 0) == 0);
  CHECK(r.err.find("Acceleration") != std::string::npos);

  const auto tiny = write("short.csv", "Speed,Acceleration,DY_flt_force,Power\n1,2,3,4\n");
  r = cli({"predict", "--model", fixture_model().string(), "--data", tiny.string(), "--out",
           (dir() / "x.csv").string()});
  CHECK(r.code != 0);
  CHECK(r.err.rfind("error[data]:", 0) == 0);

  r = cli({"train", "--data", data_csv().string(), "--out", (dir() / "m.bin").string(), "--method", "nope"});
  CHECK(r.err.rfind("error[config]:", 0) == 0);

  r = cli({"frobnicate"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error[usage]:", 0) == 0);
  CHECK(r.err.find('\n') == r.err.size() - 1);

  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("evaluate: training rows fit better than held-out rows") {
  const auto spec = write("gen_long.cfg", "duration_s = 1500\n");
  const auto data = dir() / "long.csv";
  REQUIRE(cli({"generate", "--config", spec.string(), "--out", data.string(), "--seed", "3"}).code == 0);
  const auto cfg = write("fit.cfg", R"([network]
num_layers = 1
hidden_dim = 8
window_length = 8
[train]
members = 2
epochs = 15
threads = 1
)");
  const auto model = dir() / "fit.bin";
  REQUIRE(cli({"train", "--config", cfg.string(), "--data", data.string(), "--out", model.string()}).code == 0);
  auto r2 = [&](const char* split) {
    const Run r = cli({"evaluate", "--model", model.string(), "--data", data.string(), "--split", split, "--json"});
    REQUIRE(r.code == 0);
    return nlohmann::json::parse(r.out)["r2"].get<double>();
  };
  const double train = r2("train"), test = r2("test");
  CAPTURE(train);
  CAPTURE(test);
  CHECK(train > test);
}
