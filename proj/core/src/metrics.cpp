// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "tinytwin/error.hpp"

namespace tinytwin {

void Counter::increment(double delta) {
  if (delta < 0.0) throw Error(Errc::InvalidArgument, "counters only go up");
  value_.fetch_add(delta, std::memory_order_relaxed);
}

Histogram::Histogram(std::vector<double> upper_bounds) : bounds_(std::move(upper_bounds)) {
  if (!std::is_sorted(bounds_.begin(), bounds_.end()) ||
      std::adjacent_find(bounds_.begin(), bounds_.end()) != bounds_.end())
    throw Error(Errc::InvalidArgument, "histogram bounds must be strictly increasing");
  buckets_.assign(bounds_.size() + 1, 0);
}

void Histogram::observe(double v) {
  const auto idx = static_cast<std::size_t>(std::lower_bound(bounds_.begin(), bounds_.end(), v) - bounds_.begin());
  std::lock_guard lk(mu_);
  ++buckets_[idx];
  ++count_;
  sum_ += v;
}

Histogram::Snapshot Histogram::snapshot() const {
  std::lock_guard lk(mu_);
  Snapshot s{bounds_, {}, count_, sum_};
  std::uint64_t run = 0;
  for (auto b : buckets_) s.cumulative.push_back(run += b);
  return s;
}

MetricsRegistry::Family& MetricsRegistry::family(const std::string& name, Kind kind, const std::string& help) {
  auto [it, inserted] = families_.try_emplace(name);
  if (inserted) {
    it->second.kind = kind;
    it->second.help = help;
  } else if (it->second.kind != kind) {
    throw Error(Errc::InvalidArgument, "metric " + name + " registered with a different type");
  }
  return it->second;
}

Counter& MetricsRegistry::counter(const std::string& name, const std::string& help, const Labels& labels) {
  std::lock_guard lk(mu_);
  auto& slot = family(name, Kind::counter, help).counters[labels];
  if (!slot) slot = std::make_unique<Counter>();
  return *slot;
}

Gauge& MetricsRegistry::gauge(const std::string& name, const std::string& help, const Labels& labels) {
  std::lock_guard lk(mu_);
  auto& slot = family(name, Kind::gauge, help).gauges[labels];
  if (!slot) slot = std::make_unique<Gauge>();
  return *slot;
}

Histogram& MetricsRegistry::histogram(const std::string& name, const std::string& help,
                                      const std::vector<double>& bounds, const Labels& labels) {
  std::lock_guard lk(mu_);
  auto& slot = family(name, Kind::histogram, help).histograms[labels];
  if (!slot) slot = std::make_unique<Histogram>(bounds);
  return *slot;
}

namespace {

std::string escape_label(const std::string& v) {
  std::string out;
  for (char c : v) {
    if (c == '\\') out += "\\\\";
    else if (c == '"') out += "\\\"";
    else if (c == '\n') out += "\\n";
    else out += c;
  }
  return out;
}

std::string escape_help(const std::string& v) {
  std::string out;
  for (char c : v) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else out += c;
  }
  return out;
}

std::string format_value(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "+Inf" : "-Inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string label_block(const Labels& labels, const std::pair<std::string, std::string>* extra = nullptr) {
  if (labels.empty() && extra == nullptr) return {};
  std::string s = "{";
  bool first = true;
  auto add = [&](const std::pair<std::string, std::string>& kv) {
    if (!first) s += ',';
    first = false;
    s += kv.first + "=\"" + escape_label(kv.second) + "\"";
  };
  for (const auto& kv : labels) add(kv);
  if (extra) add(*extra);
  return s + "}";
}

}  // namespace

std::string MetricsRegistry::render() const {
  std::lock_guard lk(mu_);
  std::ostringstream os;
  for (const auto& [name, fam] : families_) {
    os << "# HELP " << name << ' ' << escape_help(fam.help) << '\n';
    switch (fam.kind) {
      case Kind::counter:
        os << "# TYPE " << name << " counter\n";
        for (const auto& [labels, c] : fam.counters)
          os << name << label_block(labels) << ' ' << format_value(c->value()) << '\n';
        break;
      case Kind::gauge:
        os << "# TYPE " << name << " gauge\n";
        for (const auto& [labels, g] : fam.gauges)
          os << name << label_block(labels) << ' ' << format_value(g->value()) << '\n';
        break;
      case Kind::histogram:
        os << "# TYPE " << name << " histogram\n";
        for (const auto& [labels, h] : fam.histograms) {
          const auto snap = h->snapshot();
          for (std::size_t i = 0; i <= snap.upper_bounds.size(); ++i) {
            const std::pair<std::string, std::string> le{
                "le", i < snap.upper_bounds.size() ? format_value(snap.upper_bounds[i]) : "+Inf"};
            os << name << "_bucket" << label_block(labels, &le) << ' ' << snap.cumulative[i] << '\n';
          }
          os << name << "_sum" << label_block(labels) << ' ' << format_value(snap.sum) << '\n';
          os << name << "_count" << label_block(labels) << ' ' << snap.count << '\n';
        }
        break;
    }
  }
  return os.str();
}

TwinMetrics::TwinMetrics(MetricsRegistry& registry)
    : registry_(registry),
      slot_compute_(&registry.histogram("tinytwin_slot_compute_seconds",
                                        "Wall-clock compute time per slot, excluding pacing sleep",
                                        kSlotComputeBuckets)) {}

TwinMetrics::UeHandles TwinMetrics::ue(std::uint32_t ue_id) {
  const Labels l{{"ue", std::to_string(ue_id)}};
  return UeHandles{
      &registry_.gauge("tinytwin_ue_snr_db", "Channel SNR of the last slot in dB", l),
      &registry_.gauge("tinytwin_ue_mcs", "MCS selected for the last slot", l),
      &registry_.gauge("tinytwin_ue_buffer_bits", "Bits queued for the UE", l),
      &registry_.counter("tinytwin_ue_bits_delivered_total", "Bits delivered in successful transport blocks", l),
      &registry_.counter("tinytwin_ue_drops_total", "Failed transport blocks", l),
  };
}

void TwinMetrics::record_link(UeHandles& h, const LinkState& s) {
  h.snr_db->set(s.snr_db);
  h.mcs->set(s.mcs);
  h.buffer_bits->set(static_cast<double>(s.buffer_bits));
  h.bits_delivered->increment(static_cast<double>(s.bits_delivered - h.last_delivered));
  h.drops->increment(static_cast<double>(s.drops - h.last_drops));
  h.last_delivered = s.bits_delivered;
  h.last_drops = s.drops;
}

void TwinMetrics::count_ue_timeout(std::uint32_t ue_id) {
  registry_.counter("tinytwin_ue_timeouts_total", "Uplink frames missing at the slot deadline",
                    {{"ue", std::to_string(ue_id)}})
      .increment();
}

}  // namespace tinytwin
