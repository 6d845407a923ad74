// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tinytwin {

enum class Errc {
  // trace files
  BadMagic,
  UnsupportedVersion,
  Truncated,
  NonFiniteTap,
  IoFailure,
  StepOutOfRange,
  // generators and import
  InvalidArgument,
  NyquistViolation,
  GridTooShort,
  MalformedRow,
  NonMonotonicTime,
  // convolution
  TapLengthMismatch,
  NonPositiveNoise,
  // wire protocol and sessions
  ShortRead,
  UnknownType,
  LengthMismatch,
  UeTimeout,
  ConnectionLost,
  HandshakeRejected,
  InvalidCore,
  EchoTimeout,
  SessionFailure,
  // telemetry / bench
  BindFailure,
  EmptySample,
  InsufficientCores,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tinytwin
