#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace aelstm {

// Flat `key = value` text with optional `[section]` headers. Keys are stored
// as `section.key` (or bare `key` before any section). `#` starts a comment.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string* find(const std::string& key) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

  // Typed reads record problems instead of throwing so callers can report
  // every bad field at once.
  double get_double(const std::string& key, double fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::string get_string(const std::string& key, const std::string& fallback);
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback);

  // Keys never read by any getter.
  std::vector<std::string> unused() const;
  std::vector<std::string>& problems() { return problems_; }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
  std::vector<std::string> problems_;
};

}  // namespace aelstm
