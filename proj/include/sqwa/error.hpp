// Copyright 2026 The SQWA Lab Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sqwa {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kLabelOutOfRange,
  kEmptyDataset,
  kDegenerate,
  kBadMagic,
  kTruncated,
  kCountMismatch,
  kUnsupportedFormat,
  kUnsupportedVersion,
  kChecksumMismatch,
  kBankIncomplete,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure in the library surfaces as this exception; the
// code lets callers and tests tell diagnostics apart without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace sqwa
