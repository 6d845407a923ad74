// SPDX-License-Identifier: Apache-2.0
//
// In-process metrics registry rendered in the plain-text exposition format
// (version 0.0.4), plus an HTTP endpoint serving it on /metrics.
#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "tinytwin/link.hpp"

namespace tinytwin {

using Labels = std::vector<std::pair<std::string, std::string>>;

class Counter {
 public:
  void increment(double delta = 1.0);
  double value() const { return value_.load(std::memory_order_relaxed); }

 private:
  std::atomic<double> value_{0.0};
};

class Gauge {
 public:
  void set(double v) { value_.store(v, std::memory_order_relaxed); }
  double value() const { return value_.load(std::memory_order_relaxed); }

 private:
  std::atomic<double> value_{0.0};
};

class Histogram {
 public:
  explicit Histogram(std::vector<double> upper_bounds);

  void observe(double v);

  struct Snapshot {
    std::vector<double> upper_bounds;
    std::vector<std::uint64_t> cumulative;  // one per bound, then +Inf
    std::uint64_t count = 0;
    double sum = 0.0;
  };
  Snapshot snapshot() const;

 private:
  mutable std::mutex mu_;
  std::vector<double> bounds_;
  std::vector<std::uint64_t> buckets_;  // per bucket, last is +Inf
  std::uint64_t count_ = 0;
  double sum_ = 0.0;
};

class MetricsRegistry {
 public:
  Counter& counter(const std::string& name, const std::string& help, const Labels& labels = {});
  Gauge& gauge(const std::string& name, const std::string& help, const Labels& labels = {});
  Histogram& histogram(const std::string& name, const std::string& help, const std::vector<double>& bounds,
                       const Labels& labels = {});

  std::string render() const;

 private:
  enum class Kind { counter, gauge, histogram };
  struct Family {
    Kind kind;
    std::string help;
    std::map<Labels, std::unique_ptr<Counter>> counters;
    std::map<Labels, std::unique_ptr<Gauge>> gauges;
    std::map<Labels, std::unique_ptr<Histogram>> histograms;
  };
  Family& family(const std::string& name, Kind kind, const std::string& help);

  mutable std::mutex mu_;
  std::map<std::string, Family> families_;
};

inline const std::vector<double> kSlotComputeBuckets = {0.0005, 0.001, 0.002, 0.004, 0.008, 0.016};

/// The twin's named metric families.
class TwinMetrics {
 public:
  explicit TwinMetrics(MetricsRegistry& registry);

  struct UeHandles {
    Gauge* snr_db;
    Gauge* mcs;
    Gauge* buffer_bits;
    Counter* bits_delivered;
    Counter* drops;
    std::uint64_t last_delivered = 0;
    std::uint64_t last_drops = 0;
  };

  UeHandles ue(std::uint32_t ue_id);
  static void record_link(UeHandles& h, const LinkState& state);
  void observe_slot(double compute_seconds) { slot_compute_->observe(compute_seconds); }
  void count_ue_timeout(std::uint32_t ue_id);

  MetricsRegistry& registry() { return registry_; }

 private:
  MetricsRegistry& registry_;
  Histogram* slot_compute_;
};

/// Background HTTP service answering GET /metrics.
class MetricsServer {
 public:
  /// Binds immediately (port 0 picks a free port); throws BindFailure.
  MetricsServer(const MetricsRegistry& registry, const std::string& host, std::uint16_t port);
  ~MetricsServer();
  MetricsServer(const MetricsServer&) = delete;
  MetricsServer& operator=(const MetricsServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
};

std::unique_ptr<MetricsServer> serve_metrics(const MetricsRegistry& registry, const std::string& endpoint);

}  // namespace tinytwin
