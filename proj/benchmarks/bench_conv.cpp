// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "tinytwin/bench.hpp"
#include "tinytwin/conv_engine.hpp"
#include "tinytwin/fronthaul.hpp"
#include "tinytwin/trace_gen.hpp"

namespace {

using namespace tinytwin;

constexpr std::uint32_t kSlot = 1920;

void BM_ConvolveFull(benchmark::State& st) {
  const auto taps = static_cast<std::size_t>(st.range(0));
  const auto trace = synthetic_bench_trace(taps, 7, 16);
  IqPool pool(1, kSlot);
  ConvState state(taps);
  std::vector<cf32> out(kSlot);
  std::uint64_t s = 0;
  for (auto _ : st) {
    convolve_full(pool.frame(s), trace.step(s), state, out);
    benchmark::DoNotOptimize(out.data());
    ++s;
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations()) * kSlot);
  st.counters["MAC/s"] = benchmark::Counter(static_cast<double>(st.iterations()) * kSlot * static_cast<double>(taps),
                                            benchmark::Counter::kIsRate);
}
BENCHMARK(BM_ConvolveFull)->Arg(1)->Arg(10)->Arg(20)->Arg(50)->Arg(100);

void BM_ConvolveSparse(benchmark::State& st) {
  const std::size_t taps = 100;
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto trace = synthetic_bench_trace(taps, 7, 16);
  IqPool pool(1, kSlot);
  ChannelFilter filter(taps, n);
  std::vector<cf32> buf(kSlot);
  std::uint64_t s = 0;
  for (auto _ : st) {
    const auto f = pool.frame(s);
    std::copy(f.begin(), f.end(), buf.begin());
    filter.apply(trace.step(s), buf);
    benchmark::DoNotOptimize(buf.data());
    ++s;
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations()) * kSlot);
}
BENCHMARK(BM_ConvolveSparse)->Arg(1)->Arg(5)->Arg(10)->Arg(20)->Arg(100);

void BM_SelectTopN(benchmark::State& st) {
  const auto trace = synthetic_bench_trace(100, 3, 16);
  const auto n = static_cast<std::size_t>(st.range(0));
  std::uint64_t s = 0;
  for (auto _ : st) benchmark::DoNotOptimize(select_top_n(trace.step(s++), n));
}
BENCHMARK(BM_SelectTopN)->Arg(5)->Arg(20);

void BM_AddAwgn(benchmark::State& st) {
  std::vector<cf32> buf(kSlot);
  std::uint64_t s = 0;
  for (auto _ : st) {
    add_awgn(buf, 0.01, awgn_stream_seed(1, s++, 0, Direction::downlink));
    benchmark::DoNotOptimize(buf.data());
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations()) * kSlot);
}
BENCHMARK(BM_AddAwgn);

void BM_JakesGains(benchmark::State& st) {
  JakesConfig cfg;
  cfg.doppler_hz = 194.4;
  cfg.duration_s = static_cast<double>(st.range(0)) * 1e-3;
  cfg.seed = 1;
  for (auto _ : st) benchmark::DoNotOptimize(gen_jakes_gains(cfg));
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations()) * st.range(0));
}
BENCHMARK(BM_JakesGains)->Arg(1000)->Arg(10000);

}  // namespace
