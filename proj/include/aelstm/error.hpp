#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aelstm {

enum class ErrorKind {
  shape,
  domain,
  contract,
  input,
  config,
  schema,
  data,
  training,
  evaluation,
  archive,
  version,
  io,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a category so the CLI can print
// a stable `error[<category>]: ...` line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace aelstm
