// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 FlexiHorizon Authors

#pragma once

#include <stdexcept>
#include <string>

namespace fh {

/// Violated precondition on caller-supplied data.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input valid but too large for an intentionally bounded algorithm.
struct ResourceLimit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed file content; message carries the 1-based line number.
struct ParseError : std::runtime_error {
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

/// Missing or incompatible on-disk artifact (checkpoint, labels, dataset).
struct ArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad run configuration (unknown key, invalid value, impossible combination).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fh
