// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/wire.hpp"

#include <algorithm>
#include <cstring>

#include "byte_io.hpp"

namespace tinytwin {

using detail::load_le;
using detail::store_le;

namespace {

bool known_type(std::uint8_t t) noexcept { return t >= 1 && t <= 8; }

}  // namespace

bool payload_shape_ok(MsgType type, std::size_t len) noexcept {
  switch (type) {
    case MsgType::hello:
    case MsgType::hello_ack:
    case MsgType::bye: return len == 0;
    case MsgType::time_sync: return len == kTimeSyncSize;
    case MsgType::iq_dl:
    case MsgType::iq_ul: return len % 8 == 0;
    case MsgType::echo_req:
    case MsgType::echo_resp: return len >= 8;
  }
  return false;
}

void encode_header(const WireHeader& h, std::span<std::byte, kWireHeaderSize> dst) {
  std::byte* p = dst.data();
  store_le<std::uint32_t>(p, kWireMagic);
  store_le<std::uint8_t>(p + 4, kWireVersion);
  store_le<std::uint8_t>(p + 5, static_cast<std::uint8_t>(h.type));
  store_le<std::uint32_t>(p + 6, h.ue_id);
  store_le<std::uint64_t>(p + 10, h.slot_index);
  store_le<std::uint32_t>(p + 18, h.payload_len);
  store_le<std::uint16_t>(p + 22, 0);
}

std::vector<std::byte> encode(const WireMessage& msg) {
  if (msg.payload.size() > kMaxPayload) throw Error(Errc::LengthMismatch, "payload exceeds maximum");
  if (!payload_shape_ok(msg.type, msg.payload.size()))
    throw Error(Errc::LengthMismatch, "payload size " + std::to_string(msg.payload.size()) + " invalid for type " +
                                          std::to_string(static_cast<int>(msg.type)));
  std::vector<std::byte> out(kWireHeaderSize + msg.payload.size());
  encode_header({msg.type, msg.ue_id, msg.slot_index, static_cast<std::uint32_t>(msg.payload.size())},
                std::span<std::byte, kWireHeaderSize>(out.data(), kWireHeaderSize));
  std::copy(msg.payload.begin(), msg.payload.end(), out.begin() + kWireHeaderSize);
  return out;
}

HeaderResult parse_header(std::span<const std::byte> bytes) noexcept {
  if (bytes.size() < kWireHeaderSize) return {std::nullopt, Errc::ShortRead};
  const std::byte* p = bytes.data();
  if (load_le<std::uint32_t>(p) != kWireMagic) return {std::nullopt, Errc::BadMagic};
  if (load_le<std::uint8_t>(p + 4) != kWireVersion) return {std::nullopt, Errc::UnsupportedVersion};
  const auto type = load_le<std::uint8_t>(p + 5);
  if (!known_type(type)) return {std::nullopt, Errc::UnknownType};
  WireHeader h{static_cast<MsgType>(type), load_le<std::uint32_t>(p + 6), load_le<std::uint64_t>(p + 10),
               load_le<std::uint32_t>(p + 18)};
  if (h.payload_len > kMaxPayload || !payload_shape_ok(h.type, h.payload_len))
    return {std::nullopt, Errc::LengthMismatch};
  return {h, Errc::ShortRead};
}

DecodeResult try_decode(std::span<const std::byte> bytes) {
  const auto hr = parse_header(bytes);
  if (!hr.header) return {std::nullopt, hr.error};
  const auto& h = *hr.header;
  const auto body = bytes.size() - kWireHeaderSize;
  if (body < h.payload_len) return {std::nullopt, Errc::ShortRead};
  if (body > h.payload_len) return {std::nullopt, Errc::LengthMismatch};
  WireMessage m{h.type, h.ue_id, h.slot_index,
                std::vector<std::byte>(bytes.begin() + kWireHeaderSize, bytes.end())};
  return {std::move(m), Errc::ShortRead};
}

WireMessage decode(std::span<const std::byte> bytes) {
  auto r = try_decode(bytes);
  if (!r) throw Error(r.error, "cannot decode " + std::to_string(bytes.size()) + "-byte message");
  return std::move(*r.message);
}

WireMessage make_iq(MsgType type, std::uint32_t ue_id, std::uint64_t slot, std::span<const cf32> samples) {
  WireMessage m{type, ue_id, slot, std::vector<std::byte>(samples.size() * 8)};
  std::byte* p = m.payload.data();
  for (const cf32& s : samples) {
    store_le<float>(p, s.real());
    store_le<float>(p + 4, s.imag());
    p += 8;
  }
  return m;
}

void iq_samples_into(std::span<const std::byte> payload, std::span<cf32> out) {
  if (payload.size() != out.size() * 8)
    throw Error(Errc::LengthMismatch, "IQ payload of " + std::to_string(payload.size()) + " bytes, expected " +
                                          std::to_string(out.size() * 8));
  const std::byte* p = payload.data();
  for (auto& s : out) {
    s = cf32(load_le<float>(p), load_le<float>(p + 4));
    p += 8;
  }
}

std::vector<cf32> iq_samples(const WireMessage& msg) {
  if (msg.payload.size() % 8 != 0) throw Error(Errc::LengthMismatch, "IQ payload not a multiple of 8 bytes");
  std::vector<cf32> out(msg.payload.size() / 8);
  iq_samples_into(msg.payload, out);
  return out;
}

WireMessage make_time_sync(std::uint32_t ue_id, const TimeSync& ts) {
  WireMessage m{MsgType::time_sync, ue_id, 0, std::vector<std::byte>(kTimeSyncSize)};
  std::byte* p = m.payload.data();
  store_le<std::int64_t>(p, ts.epoch_ns);
  store_le<std::int64_t>(p + 8, ts.slot_duration_ns);
  store_le<std::uint32_t>(p + 16, ts.samples_per_slot);
  store_le<std::uint8_t>(p + 20, static_cast<std::uint8_t>(ts.mode));
  store_le<std::uint8_t>(p + 21, ts.echo_delay_slots);
  return m;
}

TimeSync parse_time_sync(const WireMessage& msg) {
  if (msg.type != MsgType::time_sync || msg.payload.size() != kTimeSyncSize)
    throw Error(Errc::LengthMismatch, "not a TIME_SYNC message");
  const std::byte* p = msg.payload.data();
  TimeSync ts;
  ts.epoch_ns = load_le<std::int64_t>(p);
  ts.slot_duration_ns = load_le<std::int64_t>(p + 8);
  ts.samples_per_slot = load_le<std::uint32_t>(p + 16);
  const auto mode = load_le<std::uint8_t>(p + 20);
  if (mode > 1) throw Error(Errc::UnknownType, "unknown session mode " + std::to_string(mode));
  ts.mode = static_cast<SessionMode>(mode);
  ts.echo_delay_slots = load_le<std::uint8_t>(p + 21);
  return ts;
}

WireMessage make_echo(MsgType type, std::uint32_t ue_id, std::uint64_t slot, const EchoProbe& probe) {
  WireMessage m{type, ue_id, slot, std::vector<std::byte>(8 + probe.data.size())};
  store_le<std::uint64_t>(m.payload.data(), probe.probe_id);
  std::copy(probe.data.begin(), probe.data.end(), m.payload.begin() + 8);
  return m;
}

EchoProbe parse_echo(const WireMessage& msg) {
  if (msg.payload.size() < 8) throw Error(Errc::LengthMismatch, "echo payload shorter than probe id");
  EchoProbe e;
  e.probe_id = load_le<std::uint64_t>(msg.payload.data());
  e.data.assign(msg.payload.begin() + 8, msg.payload.end());
  return e;
}

}  // namespace tinytwin
