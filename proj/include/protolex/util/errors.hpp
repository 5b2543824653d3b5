// Copyright 2026 The Protolex Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PROTOLEX_UTIL_ERRORS_HPP_
#define PROTOLEX_UTIL_ERRORS_HPP_

#include <sstream>
#include <stdexcept>
#include <string>

namespace protolex {

// All pipeline failures carry a stable machine-readable code next to the
// human-readable message. The CLI prints them as one-line JSON objects.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

namespace err {

// Stable error codes used across modules.
inline constexpr const char* kParse = "parse";
inline constexpr const char* kUnknownClass = "unknown-class";
inline constexpr const char* kDuplicateId = "duplicate-id";
inline constexpr const char* kValidation = "validation";
inline constexpr const char* kIo = "io";
inline constexpr const char* kConfigMismatch = "config-mismatch";
inline constexpr const char* kCorruptPayload = "corrupt-payload";
inline constexpr const char* kVersionMismatch = "version-mismatch";
inline constexpr const char* kDivergence = "divergence";

}  // namespace err

template <typename... Parts>
[[noreturn]] void fail(const char* code, Parts&&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  throw Error(code, os.str());
}

template <typename... Parts>
void require(bool condition, const char* code, Parts&&... parts) {
  if (!condition) fail(code, std::forward<Parts>(parts)...);
}

}  // namespace protolex

#endif  // PROTOLEX_UTIL_ERRORS_HPP_
