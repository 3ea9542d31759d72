#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "uwbt/model.hpp"

namespace uwbt {

using Bytes = std::vector<std::uint8_t>;

// Payload layout (all multi-byte fields big-endian):
//   [0]    version (high nibble, =1) | msg_type (low nibble)
//   [1-2]  device_id
//   [3]    seq (wraps)
//   [4]    record_count
//   [5..]  record_count x { peer_anchor_id u16, distance_cm u16 (0xFFFF = invalid) }
//   [last 2] battery_mv
inline constexpr std::uint8_t kUplinkVersion = 1;
inline constexpr std::size_t kUplinkFixedBytes = 7;
inline constexpr std::size_t kUplinkRecordBytes = 4;
inline constexpr std::size_t kMaxUplinkBytes = 51;  // EU868 SF12 application payload
inline constexpr std::size_t kMaxUplinkRecords = (kMaxUplinkBytes - kUplinkFixedBytes) / kUplinkRecordBytes;
inline constexpr std::uint16_t kInvalidDistanceCm = 0xFFFF;

enum class MsgType : std::uint8_t { AnchorSelfLoc = 0, TagLocalization = 1, Status = 2 };

struct UplinkRecord {
  DeviceId peer{};
  std::uint16_t distance_cm{kInvalidDistanceCm};

  bool valid() const { return distance_cm != kInvalidDistanceCm; }
  double meters() const { return distance_cm * 0.01; }
  friend bool operator==(const UplinkRecord&, const UplinkRecord&) = default;
};

struct UplinkFrame {
  std::uint8_t version{kUplinkVersion};
  MsgType msg_type{MsgType::Status};
  DeviceId device_id{};
  std::uint8_t seq{};
  std::vector<UplinkRecord> records;
  std::uint16_t battery_mv{};

  friend bool operator==(const UplinkFrame&, const UplinkFrame&) = default;
};

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::size_t offset, const std::string& what)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Rounds to the nearest centimeter; nullopt encodes as invalid. Throws EncodeError past 655.34 m.
UplinkRecord make_record(DeviceId peer, std::optional<double> meters);

Bytes encode(const UplinkFrame& frame);
UplinkFrame decode(std::span<const std::uint8_t> bytes);

struct PeerDistance {
  DeviceId peer{};
  std::optional<double> meters;
};

/// Partitions distances in order into frames of at most `max_records`, with
/// consecutive sequence numbers starting at `first_seq`. No distances yields a
/// single empty frame.
std::vector<UplinkFrame> split_report(DeviceId device, MsgType type, std::uint8_t first_seq,
                                      std::span<const PeerDistance> distances, std::uint16_t battery_mv,
                                      std::size_t max_records = kMaxUplinkRecords);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::optional<Bytes> from_hex(std::string_view hex);

/// A received payload and its reception time.
struct UplinkMessage {
  SimTime rx{};
  Bytes payload;
};

/// Ingest line shared by the simulator report stream, the replay path and the live socket:
///   U <rx_ns> <hex payload>
std::string format_ingest_line(const UplinkMessage& msg);
std::optional<UplinkMessage> parse_ingest_line(std::string_view line);

/// Single-producer/single-consumer handoff between a node and the collector.
class UplinkQueue {
 public:
  void push(UplinkMessage msg);
  std::optional<UplinkMessage> try_pop();
  /// Blocks until a message arrives or the queue is closed and drained.
  std::optional<UplinkMessage> pop();
  void close();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<UplinkMessage> q_;
  bool closed_{false};
};

}  // namespace uwbt
