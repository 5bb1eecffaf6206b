// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ganwatch {

/// Base class for all ganwatch errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input text (loss logs, feature files, scripts).
struct ParseError : Error {
  using Error::Error;
};

/// Well-formed input that violates a schema or data invariant
/// (non-finite losses, duplicate epochs, mismatched image sizes, ...).
struct ValidationError : Error {
  using Error::Error;
};

}  // namespace ganwatch
