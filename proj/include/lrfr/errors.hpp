#pragma once

#include <stdexcept>
#include <string>

namespace lrfr {

/// Malformed input data: bad file contents, schema violations, missing
/// labels/candidates. Messages carry line numbers where applicable.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad template definition or a template referencing annotations the
/// instance does not carry. Message names the offending template.
class TemplateError : public DataError {
 public:
  explicit TemplateError(const std::string& msg) : DataError(msg) {}
};

/// Non-finite values where finite ones are required (scores, gradients).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lrfr
