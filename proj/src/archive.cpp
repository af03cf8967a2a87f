#include "aelstm/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "aelstm/error.hpp"

namespace aelstm {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  template <class T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void u8(std::uint8_t v) { pod(v); }
  void u32(std::uint32_t v) { pod(v); }
  void u64(std::uint64_t v) { pod(v); }
  void f64(double v) { pod(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T pod(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::uint8_t u8(const char* what) { return pod<std::uint8_t>(what); }
  std::uint32_t u32(const char* what) { return pod<std::uint32_t>(what); }
  std::uint64_t u64(const char* what) { return pod<std::uint64_t>(what); }
  double f64(const char* what) { return std::bit_cast<double>(pod<std::uint64_t>(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  [[noreturn]] void corrupt(const std::string& msg) const {
    fail(ErrorKind::archive, msg + " at offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      fail(ErrorKind::archive, std::string("truncated archive reading ") + what + " at offset " +
                                   std::to_string(pos_) + " (need " + std::to_string(n) + " bytes, " +
                                   std::to_string(bytes_.size() - pos_) + " left)");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void write_params(Writer& w, const NetworkParams& params) {
  const auto refs = params.tensors();
  w.u32(static_cast<std::uint32_t>(refs.size()));
  for (const auto& r : refs) {
    w.str(r.name);
    w.u8(static_cast<std::uint8_t>(r.block));
    w.u32(static_cast<std::uint32_t>(r.tensor->shape().size()));
    for (auto d : r.tensor->shape()) w.u64(d);
    for (double v : r.tensor->data()) w.f64(v);
  }
}

NetworkParams read_params(Reader& r, const NetworkConfig& network) {
  NetworkParams params = NetworkParams::zeros(network);
  auto refs = params.tensors();
  const std::uint32_t count = r.u32("tensor count");
  if (count != refs.size())
    r.corrupt("parameter set has " + std::to_string(count) + " tensors, configuration expects " +
              std::to_string(refs.size()));
  for (auto& ref : refs) {
    const std::string name = r.str("tensor name");
    if (name != ref.name) r.corrupt("expected tensor '" + ref.name + "', found '" + name + "'");
    const std::uint8_t block = r.u8("block tag");
    if (block != static_cast<std::uint8_t>(ref.block)) r.corrupt("block tag mismatch for '" + name + "'");
    const std::uint32_t rank = r.u32("rank");
    if (rank != ref.tensor->shape().size()) r.corrupt("rank mismatch for '" + name + "'");
    for (std::uint32_t d = 0; d < rank; ++d) {
      if (r.u64("dimension") != ref.tensor->shape()[d]) r.corrupt("shape mismatch for '" + name + "'");
    }
    for (double& v : ref.tensor->data()) v = r.f64("tensor data");
  }
  return params;
}

void write_objective(Writer& w, const ObjectiveValue& v) {
  w.f64(v.data);
  w.f64(v.penalty);
  w.f64(v.total);
}

ObjectiveValue read_objective(Reader& r) {
  ObjectiveValue v;
  v.data = r.f64("log");
  v.penalty = r.f64("log");
  v.total = r.f64("log");
  return v;
}

}  // namespace

std::string encode_archive(const ModelArchive& archive) {
  Writer w;
  for (char c : kArchiveMagic) w.pod(c);
  w.u32(kArchiveVersion);
  w.str(kArchiveFloatEncoding);
  w.str(archive.config.render());

  const auto& st = archive.stats;
  w.u32(static_cast<std::uint32_t>(st.names.size()));
  for (std::size_t i = 0; i < st.names.size(); ++i) {
    w.str(st.names[i]);
    w.f64(st.min[i]);
    w.f64(st.max[i]);
  }

  const auto& m = archive.model;
  w.u8(static_cast<std::uint8_t>(m.mode()));
  w.u32(static_cast<std::uint32_t>(m.members.size()));
  for (const auto& p : m.members) write_params(w, p);
  w.u32(static_cast<std::uint32_t>(m.anchors.members.size()));
  for (const auto& p : m.anchors.members) write_params(w, p);
  w.u32(static_cast<std::uint32_t>(m.logs.size()));
  for (const auto& log : m.logs) {
    write_objective(w, log.initial);
    write_objective(w, log.final);
  }
  return w.take();
}

ModelArchive decode_archive(const std::string& bytes) {
  Reader r(bytes);
  for (char c : kArchiveMagic) {
    if (r.pod<char>("magic") != c) fail(ErrorKind::archive, "not a model archive (bad magic)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kArchiveVersion)
    fail(ErrorKind::version, "unsupported archive version " + std::to_string(version) + " (this build reads " +
                                 std::to_string(kArchiveVersion) + ")");
  if (const std::string enc = r.str("float encoding"); enc != kArchiveFloatEncoding)
    r.corrupt("unknown float encoding '" + enc + "'");

  ModelArchive a;
  const std::size_t config_at = r.offset();
  const std::string text = r.str("config");
  try {
    a.config = RunConfig::parse(text);
  } catch (const Error& e) {
    fail(ErrorKind::archive, "embedded config at offset " + std::to_string(config_at) + " is invalid: " + e.what());
  }

  const std::uint32_t ncols = r.u32("stats count");
  for (std::uint32_t i = 0; i < ncols; ++i) {
    a.stats.names.push_back(r.str("stats name"));
    a.stats.min.push_back(r.f64("stats min"));
    a.stats.max.push_back(r.f64("stats max"));
  }

  auto& m = a.model;
  m.network = a.config.network;
  m.train = a.config.train;
  m.prior = a.config.prior;
  if (r.u8("mode") != static_cast<std::uint8_t>(m.train.mode)) r.corrupt("ensemble mode disagrees with config");
  const std::uint32_t members = r.u32("member count");
  if (members == 0) r.corrupt("archive holds no networks");
  for (std::uint32_t k = 0; k < members; ++k) m.members.push_back(read_params(r, m.network));
  const std::uint32_t anchors = r.u32("anchor count");
  if (m.mode() == EnsembleMode::anchored ? anchors != members : anchors != 0)
    r.corrupt("anchor count " + std::to_string(anchors) + " does not fit the ensemble mode");
  for (std::uint32_t k = 0; k < anchors; ++k) m.anchors.members.push_back(read_params(r, m.network));
  const std::uint32_t logs = r.u32("log count");
  if (logs != members) r.corrupt("log count does not match member count");
  for (std::uint32_t k = 0; k < logs; ++k) {
    TrainingLog log;
    log.initial = read_objective(r);
    log.final = read_objective(r);
    m.logs.push_back(std::move(log));
  }
  if (!r.at_end()) r.corrupt("trailing bytes after archive body");
  return a;
}

void save_model(const std::filesystem::path& path, const ModelArchive& archive) {
  const std::string bytes = encode_archive(archive);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

ModelArchive load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_archive(bytes);
}

}  // namespace aelstm
