// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/errors.hpp"

namespace depthadapt {

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Dimension: return "dimension";
    case ErrorCategory::Configuration: return "configuration";
    case ErrorCategory::Domain: return "domain";
    case ErrorCategory::Contract: return "contract";
    case ErrorCategory::State: return "state";
    case ErrorCategory::Rank: return "rank";
    case ErrorCategory::Classification: return "classification";
    case ErrorCategory::Evaluation: return "evaluation";
    case ErrorCategory::Schedule: return "schedule";
    case ErrorCategory::Format: return "format";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Report: return "report";
  }
  return "unknown";
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Configuration: return 2;
    case ErrorCategory::Format: return 3;
    case ErrorCategory::Io: return 4;
    case ErrorCategory::Schedule: return 5;
    case ErrorCategory::Evaluation: return 6;
    case ErrorCategory::Report: return 7;
    default: return 1;
  }
}

Error::Error(ErrorCategory category, const std::string& message)
    : std::runtime_error(std::string(category_name(category)) + " error: " + message),
      category_(category),
      detail_(message) {}

void fail(ErrorCategory category, const std::string& message) { throw Error(category, message); }

}  // namespace depthadapt
