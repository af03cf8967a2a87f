#pragma once

#include <doctest.h>

#include <functional>

#include "aelstm/error.hpp"

namespace testing {

inline aelstm::ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const aelstm::Error& e) {
    return e.kind();
  }
  FAIL("expected an aelstm::Error");
  return aelstm::ErrorKind::io;
}

}  // namespace testing
