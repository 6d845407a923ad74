// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/error.hpp"

namespace tinytwin {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::Truncated: return "Truncated";
    case Errc::NonFiniteTap: return "NonFiniteTap";
    case Errc::IoFailure: return "IoFailure";
    case Errc::StepOutOfRange: return "StepOutOfRange";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NyquistViolation: return "NyquistViolation";
    case Errc::GridTooShort: return "GridTooShort";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::NonMonotonicTime: return "NonMonotonicTime";
    case Errc::TapLengthMismatch: return "TapLengthMismatch";
    case Errc::NonPositiveNoise: return "NonPositiveNoise";
    case Errc::ShortRead: return "ShortRead";
    case Errc::UnknownType: return "UnknownType";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UeTimeout: return "UeTimeout";
    case Errc::ConnectionLost: return "ConnectionLost";
    case Errc::HandshakeRejected: return "HandshakeRejected";
    case Errc::InvalidCore: return "InvalidCore";
    case Errc::EchoTimeout: return "EchoTimeout";
    case Errc::SessionFailure: return "SessionFailure";
    case Errc::BindFailure: return "BindFailure";
    case Errc::EmptySample: return "EmptySample";
    case Errc::InsufficientCores: return "InsufficientCores";
  }
  return "Unknown";
}

}  // namespace tinytwin
