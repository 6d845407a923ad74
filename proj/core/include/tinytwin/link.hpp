// SPDX-License-Identifier: Apache-2.0
//
// Link abstraction driving the telemetry observables: SNR selects an MCS from
// a static table, the table decides transport-block success, and a single
// scalar queue per UE tracks offered, delivered and forfeited bits.
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tinytwin/chan_model.hpp"

namespace tinytwin {

struct McsRow {
  double snr_threshold_db = 0.0;
  int mcs = 0;
  std::uint64_t bits_per_slot = 0;
};

class McsTable {
 public:
  /// Rows must start at MCS 0 with strictly increasing thresholds, MCS indices
  /// and bits_per_slot.
  explicit McsTable(std::vector<McsRow> rows);

  /// 28 rows, thresholds -4..23 dB in 1 dB steps, bits scaled from the NR
  /// 64QAM MCS table spectral efficiencies over 106 PRBs x 12 data symbols.
  static McsTable nr_default();
  static McsTable from_json(const nlohmann::json& doc);
  static McsTable load_json(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::vector<McsRow>& rows() const { return rows_; }
  int max_mcs() const { return rows_.back().mcs; }
  /// Throws InvalidArgument for an MCS not in the table.
  const McsRow& row_for(int mcs) const;

 private:
  std::vector<McsRow> rows_;
};

/// Highest MCS whose threshold <= snr_db (closed lower bound); 0 below the table.
int select_mcs(double snr_db, const McsTable& table);

struct TbModel {
  /// Default is a deterministic cliff; stochastic draws failures from a
  /// logistic curve around the threshold.
  bool stochastic = false;
  double margin_db = 0.0;
  double sigmoid_scale_db = 0.5;
  std::uint64_t seed = 0;
};

/// Cliff: success iff snr_db >= threshold(mcs) - margin. Stochastic: failure
/// probability 1 / (1 + exp(-(threshold - margin - snr) / scale)), drawn
/// deterministically from (seed, slot, ue).
bool tb_outcome(double snr_db, int mcs, const McsTable& table, const TbModel& model, std::uint64_t slot,
                std::uint32_t ue_id);

struct LinkState {
  std::uint32_t ue_id = 0;
  std::uint64_t slot_index = 0;
  double snr_db = 0.0;
  int mcs = 0;
  bool tb_success = true;
  std::uint64_t bits_delivered = 0;  // cumulative
  std::uint64_t drops = 0;           // cumulative failed transport blocks
  std::uint64_t buffer_bits = 0;
  std::uint64_t offered_bits = 0;  // cumulative
  std::uint64_t lost_bits = 0;     // cumulative grants forfeited by failed TBs
};

struct FrameOutcome {
  std::uint64_t slot_index = 0;
  double snr_db = 0.0;
  int mcs = 0;
  bool tb_success = true;
};

/// Queues offered bits, then serves min(buffer, bits_per_slot(mcs)). A failed
/// TB forfeits its grant and counts one drop; an empty buffer schedules no TB.
/// offered == delivered + buffer + lost holds after every call.
LinkState update_link(const LinkState& state, const FrameOutcome& outcome, std::uint64_t offered_bits,
                      const McsTable& table);

/// Per-UE link adaptation loop: one call per slot.
class LinkAdapter {
 public:
  LinkAdapter(std::uint32_t ue_id, McsTable table, TbModel model = {});

  const LinkState& step(std::uint64_t slot, double snr_db, std::uint64_t offered_bits);
  const LinkState& state() const { return state_; }
  const McsTable& table() const { return table_; }

 private:
  McsTable table_;
  TbModel model_;
  LinkState state_;
};

struct LinkSimConfig {
  double signal_power = 1.0;
  double noise_power = 1.0;
  std::uint64_t offered_bits_per_slot = 0;
  std::uint64_t num_slots = 0;  // 0 = one pass over the trace
  std::uint32_t ue_id = 0;
  TbModel tb{};
};

/// Replays a trace slot by slot through the link model (one slot per trace
/// step) and returns the state after each slot.
std::vector<LinkState> simulate_link(const CirTrace& trace, const McsTable& table, const LinkSimConfig& cfg);

}  // namespace tinytwin
