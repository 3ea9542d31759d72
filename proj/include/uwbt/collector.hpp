#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "uwbt/model.hpp"
#include "uwbt/selfloc.hpp"
#include "uwbt/uplink.hpp"

namespace uwbt {

inline constexpr char kLogMagic[8] = {'U', 'W', 'B', 'T', 'L', 'O', 'G', '\0'};
inline constexpr std::uint16_t kLogVersion = 1;

/// Unreadable log header or a log written by another format version.
class LogFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoggedFrame {
  SimTime rx{};
  Bytes raw;
};

/// Append-only binary ingest log: 8-byte magic, u16 BE version, then records of
/// u32 BE payload length, i64 BE rx_ns and the raw payload.
class IngestLog {
 public:
  /// Creates the file with a header, or validates the header of an existing one.
  explicit IngestLog(const std::filesystem::path& path);
  void append(SimTime rx, std::span<const std::uint8_t> raw);

  static Bytes header();
  static std::vector<LoggedFrame> parse(std::span<const std::uint8_t> bytes);
  static std::vector<LoggedFrame> read_all(const std::filesystem::path& path);

 private:
  std::ofstream out_;
};

struct IngestRecord {
  std::uint64_t index{};
  SimTime rx{};
  Bytes raw;
  std::optional<UplinkFrame> decoded;
  std::string error;  // decode failure, empty otherwise
  bool duplicate{false};
};

struct PositionRecord {
  DeviceId node{};
  SimTime time{};  // estimated measurement time
  Position2D p{};
  double rms_residual{};
  std::size_t n_anchors_used{};
  std::uint64_t frame_version{};

  bool operator==(const PositionRecord&) const = default;
};

struct FrameUpdate {
  std::int64_t bucket{};
  std::uint64_t frame_version{};
  bool estimated{false};  // this period produced a usable anchor frame
  double rms_residual{};
  std::map<DeviceId, Position2D> positions;  // running medians in use after this period
  std::set<DeviceId> displaced;
};

struct PeriodResult {
  FrameUpdate frame;
  std::vector<PositionRecord> fixes;
};

struct CollectorOptions {
  std::vector<DeviceId> anchors;
  FrameAnchors frame{};
  double period_s{40.0};
  double uplink_airtime_s{4.17};
  double displacement_threshold_m{0.5};
  std::size_t window{10};
  double dedup_window_s{60.0};
  SelfLocOptions selfloc{};
  /// When set, tag fixes use these positions and self-localization is skipped.
  std::optional<std::map<DeviceId, Position2D>> fixed_anchor_positions;

  static CollectorOptions from(const DeploymentConfig& config);
};

/// Ingest, period bucketing, anchor frame maintenance and tag solving.
/// One writer thread may ingest while any number of readers query.
class Collector {
 public:
  explicit Collector(CollectorOptions opts, std::optional<std::filesystem::path> log_path = std::nullopt);

  /// Persists and routes one payload. Completes earlier buckets once a frame
  /// for a later bucket arrives.
  IngestRecord ingest(std::span<const std::uint8_t> raw, SimTime rx);
  /// Completes buckets whose timeout (1.5 periods past their end) elapsed by `now`.
  void advance_to(SimTime now);
  /// Completes every open bucket, then any reports still deferred.
  void flush();

  std::vector<PositionRecord> query(std::optional<DeviceId> node, SimTime from, SimTime to) const;
  std::vector<PositionRecord> positions() const;
  std::vector<PeriodResult> results() const;
  std::vector<IngestRecord> records() const;
  std::vector<std::string> events() const;
  std::map<DeviceId, Position2D> anchor_positions() const;
  std::uint64_t frame_version() const;

 private:
  struct PendingReport {
    SimTime rx{};
    UplinkFrame frame;
    int deferrals{0};
  };
  struct Bucket {
    std::int64_t index{};
    DistanceMatrix distances;
    std::vector<PendingReport> tag_reports;
  };

  std::int64_t bucket_of(SimTime rx) const;
  Bucket& open_bucket(std::int64_t index);
  void complete_before(std::int64_t index);
  void process(Bucket bucket);
  std::optional<PositionRecord> solve(const PendingReport& r, std::int64_t bucket);
  void log_event(std::string msg);
  void publish(const PeriodResult& result);

  CollectorOptions opts_;
  std::optional<IngestLog> log_;

  // Writer side, guarded by writer_mu_.
  mutable std::mutex writer_mu_;
  std::optional<std::int64_t> epoch_ns_;
  std::map<std::int64_t, Bucket> open_;
  std::vector<PendingReport> deferred_;
  std::map<std::pair<DeviceId, std::uint8_t>, std::int64_t> last_seen_;
  std::deque<DistanceMatrix> distance_history_;
  std::deque<std::map<DeviceId, Position2D>> position_history_;
  std::map<DeviceId, Position2D> current_positions_;
  std::uint64_t frame_version_{0};
  std::uint64_t next_index_{0};

  // Reader side: published snapshots, swapped under a short exclusive lock.
  mutable std::shared_mutex read_mu_;
  std::vector<IngestRecord> records_;
  std::shared_ptr<const std::vector<PositionRecord>> positions_;
  std::vector<PeriodResult> results_;
  std::vector<std::string> events_;
  std::map<DeviceId, Position2D> published_anchors_;
  std::uint64_t published_version_{0};
};

/// Columns: time,node,x,y,rms_residual,n_anchors,frame_version. Floats use
/// shortest round-trip formatting, so import_csv(export_csv(r)) == r.
void export_csv(std::span<const PositionRecord> records, std::ostream& out);
std::vector<PositionRecord> import_csv(std::istream& in);

/// Live ingest over TCP on the loopback interface: one "U <rx_ns> <hex>" line per payload.
class LineServer {
 public:
  /// Binds 127.0.0.1:port (0 picks a free port) and starts accepting.
  LineServer(Collector& collector, std::uint16_t port = 0);
  ~LineServer();
  LineServer(const LineServer&) = delete;
  LineServer& operator=(const LineServer&) = delete;

  std::uint16_t port() const { return port_; }
  std::size_t lines_accepted() const { return accepted_.load(); }
  std::size_t lines_rejected() const { return rejected_.load(); }
  /// Stops accepting and joins the server thread.
  void stop();

 private:
  void serve();

  Collector& collector_;
  int listen_fd_{-1};
  std::uint16_t port_{0};
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> accepted_{0};
  std::atomic<std::size_t> rejected_{0};
  std::thread thread_;
};

}  // namespace uwbt
