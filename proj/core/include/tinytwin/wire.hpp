// SPDX-License-Identifier: Apache-2.0
//
// Fronthaul wire format. Every message is a 24-byte little-endian header
// followed by `payload_len` bytes:
//
//   offset  size  field
//   0       4     magic 0x54545731 ("TTW1")
//   4       1     version (1)
//   5       1     msg_type
//   6       4     ue_id
//   10      8     slot_index
//   18      4     payload_len
//   22      2     reserved (0)
//
// IQ payloads are payload_len/8 samples of (f32 I, f32 Q).
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tinytwin/chan_model.hpp"
#include "tinytwin/error.hpp"

namespace tinytwin {

inline constexpr std::uint32_t kWireMagic = 0x54545731;
inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kWireHeaderSize = 24;
/// Upper bound on a single payload; larger length fields are rejected.
inline constexpr std::uint32_t kMaxPayload = 64u << 20;

enum class MsgType : std::uint8_t {
  hello = 1,
  hello_ack = 2,
  iq_dl = 3,
  iq_ul = 4,
  time_sync = 5,
  echo_req = 6,
  echo_resp = 7,
  bye = 8,
};

struct WireMessage {
  MsgType type = MsgType::hello;
  std::uint32_t ue_id = 0;
  std::uint64_t slot_index = 0;
  std::vector<std::byte> payload;

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

struct WireHeader {
  MsgType type;
  std::uint32_t ue_id;
  std::uint64_t slot_index;
  std::uint32_t payload_len;
};

enum class SessionMode : std::uint8_t { vanilla = 0, optimized = 1 };

/// TIME_SYNC payload: the gNB's clock and the session shape.
struct TimeSync {
  std::int64_t epoch_ns = 0;  // steady_clock epoch of slot 0
  std::int64_t slot_duration_ns = 1'000'000;
  std::uint32_t samples_per_slot = 0;
  SessionMode mode = SessionMode::optimized;
  std::uint8_t echo_delay_slots = 2;
};
inline constexpr std::size_t kTimeSyncSize = 24;

std::vector<std::byte> encode(const WireMessage& msg);
/// Writes only the header for `payload_len` bytes into `dst` (24 bytes).
void encode_header(const WireHeader& h, std::span<std::byte, kWireHeaderSize> dst);

/// Header validation shared by the stream reader and `decode`. Returns the
/// header or the typed failure; never throws.
struct HeaderResult {
  std::optional<WireHeader> header;
  Errc error = Errc::ShortRead;
};
HeaderResult parse_header(std::span<const std::byte> bytes) noexcept;

struct DecodeResult {
  std::optional<WireMessage> message;
  Errc error = Errc::ShortRead;
  explicit operator bool() const { return message.has_value(); }
};

/// Decodes exactly one message occupying all of `bytes`. Never throws on
/// malformed input (allocation failure aside).
DecodeResult try_decode(std::span<const std::byte> bytes);
/// Throwing variant.
WireMessage decode(std::span<const std::byte> bytes);

/// Validates the per-type payload layout (fixed sizes, IQ alignment).
bool payload_shape_ok(MsgType type, std::size_t payload_len) noexcept;

WireMessage make_iq(MsgType type, std::uint32_t ue_id, std::uint64_t slot, std::span<const cf32> samples);
std::vector<cf32> iq_samples(const WireMessage& msg);
void iq_samples_into(std::span<const std::byte> payload, std::span<cf32> out);

WireMessage make_time_sync(std::uint32_t ue_id, const TimeSync& ts);
TimeSync parse_time_sync(const WireMessage& msg);

struct EchoProbe {
  std::uint64_t probe_id = 0;
  std::vector<std::byte> data;
};
WireMessage make_echo(MsgType type, std::uint32_t ue_id, std::uint64_t slot, const EchoProbe& probe);
EchoProbe parse_echo(const WireMessage& msg);

}  // namespace tinytwin
