// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "tinytwin/fronthaul.hpp"
#include "tinytwin/wire.hpp"

namespace {

using namespace tinytwin;

void BM_EncodeIq(benchmark::State& st) {
  IqPool pool(1, static_cast<std::uint32_t>(st.range(0)));
  std::uint64_t s = 0;
  for (auto _ : st) {
    auto bytes = encode(make_iq(MsgType::iq_dl, 3, s, pool.frame(s)));
    benchmark::DoNotOptimize(bytes.data());
    ++s;
  }
  st.SetBytesProcessed(static_cast<std::int64_t>(st.iterations()) * (st.range(0) * 8 + 24));
}
BENCHMARK(BM_EncodeIq)->Arg(1920)->Arg(30720);

void BM_DecodeIq(benchmark::State& st) {
  IqPool pool(1, static_cast<std::uint32_t>(st.range(0)));
  const auto bytes = encode(make_iq(MsgType::iq_ul, 3, 9, pool.frame(0)));
  std::vector<cf32> out(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) {
    auto msg = decode(bytes);
    iq_samples_into(msg.payload, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetBytesProcessed(static_cast<std::int64_t>(st.iterations()) * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_DecodeIq)->Arg(1920)->Arg(30720);

}  // namespace
