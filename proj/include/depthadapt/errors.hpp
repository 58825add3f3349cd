// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace depthadapt {

enum class ErrorCategory {
  Dimension,
  Configuration,
  Domain,
  Contract,
  State,
  Rank,
  Classification,
  Evaluation,
  Schedule,
  Format,
  Io,
  Report,
};

std::string_view category_name(ErrorCategory c);

/// Process exit code used by the CLI for each category (0 is reserved for success).
int exit_code(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message);

  ErrorCategory category() const noexcept { return category_; }
  /// The message without the category prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCategory category_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCategory category, const std::string& message);

}  // namespace depthadapt
