// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "test_util.hpp"
#include "tinytwin/wire.hpp"

#include <cstring>

using namespace testutil;
using tt::Errc;
using tt::MsgType;

namespace {

std::vector<std::byte> bytes_of(std::initializer_list<int> v) {
  std::vector<std::byte> out;
  for (int x : v) out.push_back(static_cast<std::byte>(x));
  return out;
}

}  // namespace

TEST_SUITE("wire") {

TEST_CASE("header layout is little-endian at fixed offsets") {
  const auto enc = tt::encode({MsgType::iq_ul, 0x01020304u, 0x1122334455667788ull, bytes_of({1, 2, 3, 4, 5, 6, 7, 8})});
  REQUIRE(enc.size() == tt::kWireHeaderSize + 8);
  CHECK(enc[0] == std::byte{0x31});
  CHECK(enc[3] == std::byte{0x54});
  CHECK(enc[4] == std::byte{1});
  CHECK(enc[5] == std::byte{4});
  CHECK(enc[6] == std::byte{0x04});
  CHECK(enc[9] == std::byte{0x01});
  CHECK(enc[10] == std::byte{0x88});
  CHECK(enc[17] == std::byte{0x11});
  CHECK(enc[18] == std::byte{8});
  CHECK(enc[22] == std::byte{0});
  CHECK(enc[23] == std::byte{0});
}

TEST_CASE("every message type round-trips") {
  std::mt19937_64 rng(3);
  const std::vector<tt::WireMessage> msgs{
      {MsgType::hello, 7, 0, {}},
      {MsgType::hello_ack, 7, 0, {}},
      tt::make_iq(MsgType::iq_dl, 1, 99, random_iq(rng, 1920)),
      tt::make_iq(MsgType::iq_ul, 2, 100, random_iq(rng, 3)),
      tt::make_iq(MsgType::iq_ul, 2, 101, {}),
      tt::make_time_sync(5, {123456789, 1'000'000, 1920, tt::SessionMode::vanilla, 2}),
      tt::make_echo(MsgType::echo_req, 3, 10, {42, bytes_of({9, 9, 9})}),
      tt::make_echo(MsgType::echo_resp, 3, 12, {42, {}}),
      {MsgType::bye, 0xFFFFFFFFu, ~0ull, {}},
  };
  for (const auto& m : msgs) {
    const auto enc = tt::encode(m);
    const auto r = tt::try_decode(enc);
    REQUIRE(r);
    CHECK(*r.message == m);
  }
}

TEST_CASE("IQ payload keeps float bits exactly") {
  std::vector<tt::cf32> s{{1.5f, -0.0f}, {std::numeric_limits<float>::denorm_min(), 3.0e38f}};
  const auto back = tt::iq_samples(tt::decode(tt::encode(tt::make_iq(MsgType::iq_dl, 0, 0, s))));
  REQUIRE(back.size() == 2);
  CHECK(std::memcmp(back.data(), s.data(), sizeof(tt::cf32) * 2) == 0);
  std::vector<tt::cf32> wrong(3);
  CHECK(error_code_of([&] { tt::iq_samples_into(tt::make_iq(MsgType::iq_dl, 0, 0, s).payload, wrong); }) ==
        Errc::LengthMismatch);
}

TEST_CASE("time sync and echo helpers") {
  tt::TimeSync ts{-5, 500'000, 960, tt::SessionMode::optimized, 3};
  const auto back = tt::parse_time_sync(tt::make_time_sync(1, ts));
  CHECK(back.epoch_ns == -5);
  CHECK(back.slot_duration_ns == 500'000);
  CHECK(back.samples_per_slot == 960);
  CHECK(back.mode == tt::SessionMode::optimized);
  CHECK(back.echo_delay_slots == 3);
  auto bad = tt::make_time_sync(1, ts);
  bad.payload[20] = std::byte{7};
  CHECK(error_code_of([&] { tt::parse_time_sync(bad); }) == Errc::UnknownType);
  CHECK(error_code_of([&] { tt::parse_time_sync({MsgType::hello, 0, 0, {}}); }) == Errc::LengthMismatch);

  const auto e = tt::parse_echo(tt::make_echo(MsgType::echo_req, 0, 0, {77, bytes_of({1, 2})}));
  CHECK(e.probe_id == 77);
  CHECK(e.data == bytes_of({1, 2}));
}

TEST_CASE("malformed input yields typed errors") {
  const auto good = tt::encode(tt::make_iq(MsgType::iq_dl, 1, 2, std::vector<tt::cf32>(4)));

  CHECK(tt::try_decode(std::span(good).first(10)).error == Errc::ShortRead);
  CHECK(tt::try_decode(std::span(good).first(good.size() - 1)).error == Errc::ShortRead);

  auto extra = good;
  extra.push_back(std::byte{0});
  CHECK(tt::try_decode(extra).error == Errc::LengthMismatch);

  auto magic = good;
  magic[0] = std::byte{0};
  CHECK(tt::try_decode(magic).error == Errc::BadMagic);

  auto ver = good;
  ver[4] = std::byte{2};
  CHECK(tt::try_decode(ver).error == Errc::UnsupportedVersion);

  auto type = good;
  type[5] = std::byte{0};
  CHECK(tt::try_decode(type).error == Errc::UnknownType);
  type[5] = std::byte{9};
  CHECK(tt::try_decode(type).error == Errc::UnknownType);

  auto odd = tt::encode({MsgType::iq_dl, 0, 0, bytes_of({0, 0, 0, 0, 0, 0, 0, 0})});
  odd[18] = std::byte{7};
  odd.pop_back();
  CHECK(tt::try_decode(odd).error == Errc::LengthMismatch);

  auto huge = good;
  huge[21] = std::byte{0x7f};
  CHECK(tt::try_decode(huge).error == Errc::LengthMismatch);

  CHECK(error_code_of([&] { tt::decode(magic); }) == Errc::BadMagic);
  CHECK(error_code_of([&] { tt::encode({MsgType::hello, 0, 0, bytes_of({1})}); }) == Errc::LengthMismatch);
}

TEST_CASE("random and mutated inputs never crash") {
  std::mt19937_64 rng(11);
  const auto seed_msg = tt::encode(tt::make_echo(MsgType::echo_req, 4, 5, {1, bytes_of({1, 2, 3})}));
  int ok = 0;
  for (int i = 0; i < 20000; ++i) {
    std::vector<std::byte> buf;
    if (i % 2 == 0) {
      buf.resize(rng() % 64);
      for (auto& b : buf) b = static_cast<std::byte>(rng());
    } else {
      buf = seed_msg;
      const int flips = 1 + static_cast<int>(rng() % 4);
      for (int f = 0; f < flips; ++f) buf[rng() % buf.size()] = static_cast<std::byte>(rng());
      if (rng() % 3 == 0) buf.resize(rng() % (buf.size() + 1));
    }
    const auto r = tt::try_decode(buf);
    if (r) {
      ++ok;
      // reserved bytes are ignored on input and written as zero
      buf[22] = buf[23] = std::byte{0};
      CHECK(tt::encode(*r.message) == buf);
    }
  }
  CHECK(ok > 0);
}

}
