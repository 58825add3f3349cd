// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "depthadapt/errors.hpp"

namespace testsupport {

struct Caught {
  std::optional<depthadapt::ErrorCategory> category;
  std::string message;
};

template <typename F>
Caught catch_error(F&& f) {
  try {
    f();
  } catch (const depthadapt::Error& e) {
    return {e.category(), e.what()};
  }
  return {};
}

}  // namespace testsupport
