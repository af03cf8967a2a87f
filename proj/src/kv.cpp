#include "aelstm/kv.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "aelstm/error.hpp"

namespace aelstm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorKind::config, "line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::config, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorKind::config, "line " + std::to_string(lineno) + ": empty key");
    kv.values_[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
  }
  return kv;
}

const std::string* KeyValues::find(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  used_.insert(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size() || !std::isfinite(out)) {
    problems_.push_back(key + ": expected a finite number, got '" + *v + "'");
    return fallback;
  }
  return out;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  used_.insert(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    problems_.push_back(key + ": expected a non-negative integer, got '" + *v + "'");
    return fallback;
  }
  return out;
}

std::size_t KeyValues::get_size(const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool KeyValues::get_bool(const std::string& key, bool fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  used_.insert(key);
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  problems_.push_back(key + ": expected true/false, got '" + *v + "'");
  return fallback;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  used_.insert(key);
  return *v;
}

std::vector<std::string> KeyValues::get_list(const std::string& key, const std::vector<std::string>& fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  used_.insert(key);
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(*v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> KeyValues::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

}  // namespace aelstm
