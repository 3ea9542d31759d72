#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "uwbt/energy.hpp"
#include "uwbt/model.hpp"
#include "uwbt/ranging.hpp"
#include "uwbt/schedule.hpp"
#include "uwbt/selfloc.hpp"
#include "uwbt/uplink.hpp"

namespace uwbt {

inline constexpr const char* kReportStreamHeader = "UWBT-STREAM 1";
/// On-air duration assumed for every UWB frame when checking slot conformance.
inline constexpr std::int64_t kUwbFrameNs = 200'000;

class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

enum class TxKind : std::uint8_t { Sync, Poll, Response };

struct TxRecord {
  DeviceId node{};
  TxKind kind{TxKind::Sync};
  SimTime begin{};
  SimTime end{};
  DeviceId slot_owner{};                    // initiator for ranging traffic
  SyncLabel label{SyncLabel::S1};           // sync traffic only
};

struct Delivery {
  DeviceId from{};
  DeviceId to{};
  SimTime tx{};
  SimTime rx{};
  double distance_m{};
};

struct TagRange {
  DeviceId anchor{};
  std::optional<double> distance_m;  // nullopt when the exchange failed
  double true_distance_m{};
};

struct TagObservation {
  SimTime time{};          // first exchange of the slot
  Position2D truth{};      // scripted position at that time
  std::vector<TagRange> ranges;
};

struct NodeSyncSnapshot {
  SyncStatus status{SyncStatus::Unsynced};
  std::uint8_t labels_heard{};  // sync labels received this period
  std::uint32_t anomalies{};
};

struct PeriodRecord {
  std::int64_t index{};
  SimTime start{};  // master's S1 transmission, true time
  SimTime window_begin{};
  SimTime window_end{};
  DistanceMatrix anchor_distances;  // directed, valid samples only
  std::map<DeviceId, TagObservation> tags;
  std::vector<UplinkMessage> uplinks;  // by transmission time within the window
  std::vector<StateTrace> traces;
  std::map<DeviceId, NodeSyncSnapshot> sync;
  std::map<DeviceId, Position2D> anchor_truth;
};

struct SimReport {
  std::uint64_t seed{};
  std::uint64_t config_hash{};
  std::int64_t active_ms{};
  double period_s{};
  std::map<DeviceId, NodeClock> clocks;
  DeviceId master{};
  std::vector<PeriodRecord> periods;
  std::vector<TxRecord> tx_log;
  std::vector<Delivery> deliveries;
};

/// Runs `n_periods` localization periods. Throws SimulationError when the
/// config fails validation.
SimReport run(const DeploymentConfig& config, std::size_t n_periods);

/// Line-delimited report stream (see docs/formats.md).
std::string serialize(const SimReport& report);

/// True iff both reports serialize to identical bytes.
bool replay_check(const SimReport& a, const SimReport& b);

/// Transmissions that leave their owner's true-time window, as readable messages.
std::vector<std::string> check_slot_conformance(const SimReport& report, const DeploymentConfig& config);

/// Pairs of ranging exchanges from different initiators that overlap in true time.
std::vector<std::string> check_slot_exclusivity(const SimReport& report);

}  // namespace uwbt
