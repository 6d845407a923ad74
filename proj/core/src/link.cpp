// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/link.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tinytwin/conv_engine.hpp"
#include "tinytwin/error.hpp"
#include "tinytwin/rng.hpp"

namespace tinytwin {

McsTable::McsTable(std::vector<McsRow> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw Error(Errc::InvalidArgument, "MCS table is empty");
  if (rows_.front().mcs != 0) throw Error(Errc::InvalidArgument, "MCS table must start at MCS 0");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (!std::isfinite(rows_[i].snr_threshold_db)) throw Error(Errc::InvalidArgument, "non-finite threshold");
    if (i == 0) continue;
    const auto& a = rows_[i - 1];
    const auto& b = rows_[i];
    if (!(b.snr_threshold_db > a.snr_threshold_db) || b.mcs <= a.mcs || b.bits_per_slot <= a.bits_per_slot)
      throw Error(Errc::InvalidArgument, "MCS table row " + std::to_string(i) + " is not strictly increasing");
  }
}

McsTable McsTable::nr_default() {
  // Spectral efficiency (bits/RE) of the NR 64QAM MCS index table.
  static constexpr std::array<double, 28> kSe = {
      0.2344, 0.3066, 0.3770, 0.4902, 0.6016, 0.7402, 0.8770, 1.0273, 1.1758, 1.3262,
      1.3281, 1.4766, 1.6953, 1.9141, 2.1602, 2.4063, 2.5703, 2.7305, 3.0293, 3.3223,
      3.6094, 3.9023, 4.2129, 4.5234, 4.8164, 5.1152, 5.3320, 5.5547};
  constexpr double kResourceElements = 106.0 * 12.0 * 12.0;
  std::vector<McsRow> rows;
  for (std::size_t i = 0; i < kSe.size(); ++i)
    rows.push_back({-4.0 + static_cast<double>(i), static_cast<int>(i),
                    static_cast<std::uint64_t>(std::floor(kSe[i] * kResourceElements))});
  return McsTable(std::move(rows));
}

McsTable McsTable::from_json(const nlohmann::json& doc) {
  std::vector<McsRow> rows;
  try {
    for (const auto& r : doc.at("rows"))
      rows.push_back({r.at("snr_threshold_db").get<double>(), r.at("mcs").get<int>(),
                      r.at("bits_per_slot").get<std::uint64_t>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("MCS table: ") + e.what());
  }
  return McsTable(std::move(rows));
}

McsTable McsTable::load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in, nullptr, true, true));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, path.string() + ": " + e.what());
  }
}

nlohmann::json McsTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rows_)
    rows.push_back({{"snr_threshold_db", r.snr_threshold_db}, {"mcs", r.mcs}, {"bits_per_slot", r.bits_per_slot}});
  return {{"rows", rows}};
}

const McsRow& McsTable::row_for(int mcs) const {
  auto it = std::lower_bound(rows_.begin(), rows_.end(), mcs, [](const McsRow& r, int m) { return r.mcs < m; });
  if (it == rows_.end() || it->mcs != mcs) throw Error(Errc::InvalidArgument, "MCS " + std::to_string(mcs) + " not in table");
  return *it;
}

int select_mcs(double snr_db, const McsTable& table) {
  const auto& rows = table.rows();
  // First row with threshold > snr; the one before it is the answer.
  auto it = std::upper_bound(rows.begin(), rows.end(), snr_db,
                             [](double s, const McsRow& r) { return s < r.snr_threshold_db; });
  if (it == rows.begin()) return 0;
  return std::prev(it)->mcs;
}

bool tb_outcome(double snr_db, int mcs, const McsTable& table, const TbModel& model, std::uint64_t slot,
                std::uint32_t ue_id) {
  const double threshold = table.row_for(mcs).snr_threshold_db - model.margin_db;
  if (!model.stochastic) return snr_db >= threshold;
  const double p_fail = 1.0 / (1.0 + std::exp(-(threshold - snr_db) / model.sigmoid_scale_db));
  Rng rng(derive_seed({model.seed, slot, ue_id, 0x7b}));
  return rng.uniform() >= p_fail;
}

LinkState update_link(const LinkState& state, const FrameOutcome& outcome, std::uint64_t offered_bits,
                      const McsTable& table) {
  LinkState next = state;
  next.slot_index = outcome.slot_index;
  next.snr_db = outcome.snr_db;
  next.mcs = outcome.mcs;
  next.offered_bits += offered_bits;
  next.buffer_bits += offered_bits;
  const std::uint64_t grant = std::min(next.buffer_bits, table.row_for(outcome.mcs).bits_per_slot);
  if (grant == 0) {
    next.tb_success = true;
    return next;
  }
  next.tb_success = outcome.tb_success;
  next.buffer_bits -= grant;
  if (outcome.tb_success) {
    next.bits_delivered += grant;
  } else {
    next.drops += 1;
    next.lost_bits += grant;
  }
  return next;
}

LinkAdapter::LinkAdapter(std::uint32_t ue_id, McsTable table, TbModel model)
    : table_(std::move(table)), model_(model) {
  state_.ue_id = ue_id;
}

const LinkState& LinkAdapter::step(std::uint64_t slot, double snr_db, std::uint64_t offered_bits) {
  const int mcs = select_mcs(snr_db, table_);
  const bool ok = tb_outcome(snr_db, mcs, table_, model_, slot, state_.ue_id);
  state_ = update_link(state_, FrameOutcome{slot, snr_db, mcs, ok}, offered_bits, table_);
  return state_;
}

std::vector<LinkState> simulate_link(const CirTrace& trace, const McsTable& table, const LinkSimConfig& cfg) {
  const std::uint64_t n = cfg.num_slots ? cfg.num_slots : trace.num_steps;
  LinkAdapter link(cfg.ue_id, table, cfg.tb);
  std::vector<LinkState> out;
  out.reserve(n);
  for (std::uint64_t s = 0; s < n; ++s) {
    const double snr = slot_snr_db(trace.step(s), cfg.signal_power, cfg.noise_power);
    out.push_back(link.step(s, snr, cfg.offered_bits_per_slot));
  }
  return out;
}

}  // namespace tinytwin
