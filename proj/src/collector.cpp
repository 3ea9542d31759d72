#include "uwbt/collector.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "uwbt/ranging.hpp"
#include "uwbt/schedule.hpp"
#include "uwbt/solver.hpp"

namespace uwbt {

// ---------------------------------------------------------------- log

namespace {

void put_be(Bytes& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(std::span<const std::uint8_t> b, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
  return v;
}

constexpr std::size_t kLogHeaderBytes = sizeof(kLogMagic) + 2;
constexpr std::size_t kLogRecordHeaderBytes = 4 + 8;

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::filesystem::filesystem_error("cannot open log", path,
                                            std::make_error_code(std::errc::no_such_file_or_directory));
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

Bytes IngestLog::header() {
  Bytes h(std::begin(kLogMagic), std::end(kLogMagic));
  put_be(h, kLogVersion, 2);
  return h;
}

IngestLog::IngestLog(const std::filesystem::path& path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (!fresh) parse(read_file(path));  // validates the header and record framing
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_)
    throw std::filesystem::filesystem_error("cannot open log for append", path,
                                            std::make_error_code(std::errc::permission_denied));
  if (fresh) {
    const auto h = header();
    out_.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
    out_.flush();
  }
}

void IngestLog::append(SimTime rx, std::span<const std::uint8_t> raw) {
  Bytes rec;
  rec.reserve(kLogRecordHeaderBytes + raw.size());
  put_be(rec, raw.size(), 4);
  put_be(rec, static_cast<std::uint64_t>(rx.ns), 8);
  rec.insert(rec.end(), raw.begin(), raw.end());
  out_.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  out_.flush();
}

std::vector<LoggedFrame> IngestLog::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kLogHeaderBytes || !std::equal(std::begin(kLogMagic), std::end(kLogMagic), bytes.begin(),
                                                   [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
    throw LogFormatError("not an ingest log (bad magic)");
  const auto version = get_be(bytes, sizeof(kLogMagic), 2);
  if (version != kLogVersion)
    throw LogFormatError("ingest log version " + std::to_string(version) + " is not " + std::to_string(kLogVersion));

  std::vector<LoggedFrame> frames;
  std::size_t at = kLogHeaderBytes;
  while (at < bytes.size()) {
    if (bytes.size() - at < kLogRecordHeaderBytes)
      throw LogFormatError("truncated record header at byte " + std::to_string(at));
    const auto len = static_cast<std::size_t>(get_be(bytes, at, 4));
    const auto rx = static_cast<std::int64_t>(get_be(bytes, at + 4, 8));
    at += kLogRecordHeaderBytes;
    if (bytes.size() - at < len) throw LogFormatError("truncated record payload at byte " + std::to_string(at));
    frames.push_back({SimTime{rx}, Bytes(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                                         bytes.begin() + static_cast<std::ptrdiff_t>(at + len))});
    at += len;
  }
  return frames;
}

std::vector<LoggedFrame> IngestLog::read_all(const std::filesystem::path& path) { return parse(read_file(path)); }

// ---------------------------------------------------------------- collector

CollectorOptions CollectorOptions::from(const DeploymentConfig& config) {
  CollectorOptions o;
  o.anchors = config.anchor_ids();
  o.frame = config.frame_anchors();
  o.period_s = config.localization_period_s;
  o.uplink_airtime_s = config.uplink.airtime_s;
  o.displacement_threshold_m = config.collector.displacement_threshold_m;
  o.window = config.collector.window;
  // Three sigma of the per-distance ranging noise, floored at the quantization scale.
  o.selfloc.triangle_slack_m = std::max(0.05, 3.0 * kSpeedOfLight * config.channel.timestamp_noise_s);
  return o;
}

Collector::Collector(CollectorOptions opts, std::optional<std::filesystem::path> log_path)
    : opts_(std::move(opts)), positions_(std::make_shared<const std::vector<PositionRecord>>()) {
  std::sort(opts_.anchors.begin(), opts_.anchors.end());
  if (log_path) log_.emplace(*log_path);
  if (opts_.fixed_anchor_positions) {
    current_positions_ = *opts_.fixed_anchor_positions;
    published_anchors_ = current_positions_;
  }
}

std::int64_t Collector::bucket_of(SimTime rx) const {
  const double rel = static_cast<double>(rx.ns - *epoch_ns_) * 1e-9;
  return static_cast<std::int64_t>(std::floor(rel / opts_.period_s));
}

Collector::Bucket& Collector::open_bucket(std::int64_t index) {
  auto it = open_.find(index);
  if (it == open_.end()) it = open_.emplace(index, Bucket{index, DistanceMatrix(opts_.anchors), {}}).first;
  return it->second;
}

void Collector::complete_before(std::int64_t index) {
  while (!open_.empty() && open_.begin()->first < index) {
    Bucket b = std::move(open_.begin()->second);
    open_.erase(open_.begin());
    process(std::move(b));
  }
}

IngestRecord Collector::ingest(std::span<const std::uint8_t> raw, SimTime rx) {
  std::lock_guard wl(writer_mu_);
  if (log_) log_->append(rx, raw);

  IngestRecord rec;
  rec.index = next_index_++;
  rec.rx = rx;
  rec.raw.assign(raw.begin(), raw.end());
  try {
    rec.decoded = decode(raw);
  } catch (const DecodeError& e) {
    rec.error = e.what();
  }

  if (rec.decoded) {
    const auto& f = *rec.decoded;
    const auto key = std::make_pair(f.device_id, f.seq);
    const auto window_ns = static_cast<std::int64_t>(opts_.dedup_window_s * 1e9);
    if (auto it = last_seen_.find(key); it != last_seen_.end() && rx.ns - it->second < window_ns) {
      rec.duplicate = true;
    } else {
      last_seen_[key] = rx.ns;
    }
  }

  if (rec.decoded && !rec.duplicate) {
    // The first frame anchors the bucket grid a quarter period early so one
    // period's uplinks, which trail its start by seconds, share a bucket.
    if (!epoch_ns_) epoch_ns_ = rx.ns - static_cast<std::int64_t>(opts_.period_s * 0.25e9);
    const auto b = bucket_of(rx);
    complete_before(b);
    const auto& f = *rec.decoded;
    if (!open_.empty() && b < open_.begin()->first) {
      log_event("late frame from device " + std::to_string(f.device_id) + " ignored");
    } else {
      switch (f.msg_type) {
        case MsgType::AnchorSelfLoc: {
          auto& bucket = open_bucket(b);
          if (!bucket.distances.index_of(f.device_id)) {
            log_event("anchor report from unknown device " + std::to_string(f.device_id));
            break;
          }
          for (const auto& r : f.records)
            if (r.valid() && bucket.distances.index_of(r.peer))
              bucket.distances.add_measurement(f.device_id, r.peer, r.meters());
          break;
        }
        case MsgType::TagLocalization:
          open_bucket(b).tag_reports.push_back({rx, f, 0});
          break;
        case MsgType::Status:
          open_bucket(b);
          break;
      }
    }
  }

  std::unique_lock rl(read_mu_);
  records_.push_back(rec);
  return rec;
}

void Collector::advance_to(SimTime now) {
  std::lock_guard wl(writer_mu_);
  if (!epoch_ns_) return;
  while (!open_.empty()) {
    const auto idx = open_.begin()->first;
    const double deadline_s = (static_cast<double>(idx) + 1.5) * opts_.period_s;
    if (static_cast<double>(now.ns - *epoch_ns_) * 1e-9 < deadline_s) break;
    complete_before(idx + 1);
  }
}

void Collector::flush() {
  std::lock_guard wl(writer_mu_);
  complete_before(std::numeric_limits<std::int64_t>::max());
  for (const auto& r : deferred_)
    log_event("tag " + std::to_string(r.frame.device_id) + " seq " + std::to_string(r.frame.seq) +
              " dropped: no anchor frame");
  deferred_.clear();
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void Collector::process(Bucket bucket) {
  PeriodResult result;
  auto& fu = result.frame;
  fu.bucket = bucket.index;

  if (opts_.fixed_anchor_positions) {
    fu.estimated = true;
    if (frame_version_ == 0) frame_version_ = 1;
  } else {
    distance_history_.push_back(bucket.distances);
    while (distance_history_.size() > opts_.window) distance_history_.pop_front();
    const std::vector<DistanceMatrix> hist(distance_history_.begin(), distance_history_.end());
    fu.displaced = detect_displacement(hist, opts_.displacement_threshold_m);
    if (!fu.displaced.empty()) {
      ++frame_version_;
      position_history_.clear();
      while (distance_history_.size() > 3) distance_history_.pop_front();
      std::string ids;
      for (auto id : fu.displaced) ids += " " + std::to_string(id);
      log_event("period " + std::to_string(bucket.index) + ": displaced anchors" + ids + ", frame version " +
                std::to_string(frame_version_));
    }

    try {
      auto frame = fix_frame(bucket.distances, opts_.frame.origin, opts_.frame.x_axis, opts_.frame.orientation,
                             opts_.selfloc.triangle_slack_m);
      frame = estimate_all(bucket.distances, frame, opts_.selfloc);
      fu.estimated = true;
      fu.rms_residual = frame.rms_residual;
      if (frame.refinement_failed)
        log_event("period " + std::to_string(bucket.index) + ": refinement failed, incremental frame kept");
      position_history_.push_back(frame.positions);
      while (position_history_.size() > opts_.window) position_history_.pop_front();
      if (frame_version_ == 0) frame_version_ = 1;
    } catch (const FrameError& e) {
      log_event("period " + std::to_string(bucket.index) + ": no anchor frame (" + e.what() + ")");
    }

    std::map<DeviceId, std::vector<double>> xs, ys;
    for (const auto& snapshot : position_history_)
      for (const auto& [id, p] : snapshot) {
        xs[id].push_back(p.x);
        ys[id].push_back(p.y);
      }
    current_positions_.clear();
    for (const auto& [id, v] : xs) current_positions_[id] = {median(v), median(ys[id])};
  }
  fu.positions = current_positions_;
  fu.frame_version = frame_version_;

  std::vector<PendingReport> reports = std::move(deferred_);
  deferred_.clear();
  reports.insert(reports.end(), bucket.tag_reports.begin(), bucket.tag_reports.end());
  for (auto& r : reports) {
    if (current_positions_.size() < 3) {
      if (r.deferrals == 0) {
        ++r.deferrals;
        deferred_.push_back(r);
      } else {
        log_event("tag " + std::to_string(r.frame.device_id) + " seq " + std::to_string(r.frame.seq) +
                  " dropped: no anchor frame");
      }
      continue;
    }
    if (auto fix = solve(r, bucket.index)) result.fixes.push_back(*fix);
  }
  publish(result);
}

std::optional<PositionRecord> Collector::solve(const PendingReport& r, std::int64_t bucket) {
  RangeSet rs;
  for (const auto& rec : r.frame.records) {
    if (!rec.valid()) continue;
    if (auto it = current_positions_.find(rec.peer); it != current_positions_.end())
      rs.push_back({it->second, rec.meters()});
  }
  if (rs.size() < 3) {
    log_event("period " + std::to_string(bucket) + ": tag " + std::to_string(r.frame.device_id) +
              " insufficient ranges (" + std::to_string(rs.size()) + ")");
    return std::nullopt;
  }
  const auto fix = trilaterate(rs, std::nullopt, opts_.selfloc.solver);
  if (fix.condition != FixCondition::Ok)
    log_event("period " + std::to_string(bucket) + ": tag " + std::to_string(r.frame.device_id) + " fix " +
              to_string(fix.condition));
  // The first frame leaves right after the tag's slot; ranging started at the slot's lead-in.
  const auto back_ns = static_cast<std::int64_t>(std::llround((opts_.uplink_airtime_s + kTagSlotMs * 1e-3 - 1e-3) * 1e9));
  return PositionRecord{r.frame.device_id, SimTime{r.rx.ns - back_ns}, fix.p, fix.rms_residual, rs.size(),
                        frame_version_};
}

void Collector::log_event(std::string msg) {
  std::unique_lock rl(read_mu_);
  events_.push_back(std::move(msg));
}

void Collector::publish(const PeriodResult& result) {
  auto next = std::make_shared<std::vector<PositionRecord>>();
  {
    std::shared_lock rl(read_mu_);
    next->reserve(positions_->size() + result.fixes.size());
    *next = *positions_;
  }
  next->insert(next->end(), result.fixes.begin(), result.fixes.end());
  std::unique_lock rl(read_mu_);
  positions_ = std::move(next);
  results_.push_back(result);
  published_anchors_ = current_positions_;
  published_version_ = frame_version_;
}

std::vector<PositionRecord> Collector::query(std::optional<DeviceId> node, SimTime from, SimTime to) const {
  std::shared_ptr<const std::vector<PositionRecord>> snap;
  {
    std::shared_lock rl(read_mu_);
    snap = positions_;
  }
  std::vector<PositionRecord> out;
  for (const auto& r : *snap)
    if ((!node || r.node == *node) && r.time.ns >= from.ns && r.time.ns <= to.ns) out.push_back(r);
  std::stable_sort(out.begin(), out.end(), [](const PositionRecord& a, const PositionRecord& b) {
    return a.time.ns != b.time.ns ? a.time.ns < b.time.ns : a.node < b.node;
  });
  return out;
}

std::vector<PositionRecord> Collector::positions() const {
  return query(std::nullopt, SimTime{std::numeric_limits<std::int64_t>::min()},
               SimTime{std::numeric_limits<std::int64_t>::max()});
}

std::vector<PeriodResult> Collector::results() const {
  std::shared_lock rl(read_mu_);
  return results_;
}

std::vector<IngestRecord> Collector::records() const {
  std::shared_lock rl(read_mu_);
  return records_;
}

std::vector<std::string> Collector::events() const {
  std::shared_lock rl(read_mu_);
  return events_;
}

std::map<DeviceId, Position2D> Collector::anchor_positions() const {
  std::shared_lock rl(read_mu_);
  return published_anchors_;
}

std::uint64_t Collector::frame_version() const {
  std::shared_lock rl(read_mu_);
  return published_version_;
}

// ---------------------------------------------------------------- csv

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_field(std::string_view s, std::size_t line) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw std::runtime_error("csv line " + std::to_string(line) + ": bad field '" + std::string(s) + "'");
  return v;
}

constexpr const char* kCsvHeader = "time,node,x,y,rms_residual,n_anchors,frame_version";

}  // namespace

void export_csv(std::span<const PositionRecord> records, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : records)
    out << r.time.ns << ',' << r.node << ',' << shortest(r.p.x) << ',' << shortest(r.p.y) << ','
        << shortest(r.rms_residual) << ',' << r.n_anchors_used << ',' << r.frame_version << '\n';
}

std::vector<PositionRecord> import_csv(std::istream& in) {
  std::vector<PositionRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (n == 1) {
      if (line != kCsvHeader) throw std::runtime_error("csv header mismatch: '" + line + "'");
      continue;
    }
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1))
      f.push_back(rest.substr(0, pos));
    f.push_back(rest);
    if (f.size() != 7) throw std::runtime_error("csv line " + std::to_string(n) + ": expected 7 fields");
    PositionRecord r;
    r.time.ns = parse_field<std::int64_t>(f[0], n);
    r.node = parse_field<DeviceId>(f[1], n);
    r.p.x = parse_field<double>(f[2], n);
    r.p.y = parse_field<double>(f[3], n);
    r.rms_residual = parse_field<double>(f[4], n);
    r.n_anchors_used = parse_field<std::size_t>(f[5], n);
    r.frame_version = parse_field<std::uint64_t>(f[6], n);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------- socket

LineServer::LineServer(Collector& collector, std::uint16_t port) : collector_(collector) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 4) < 0) {
    const int err = errno;
    ::close(listen_fd_);
    throw std::system_error(err, std::generic_category(), "bind/listen");
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  thread_ = std::thread([this] { serve(); });
}

LineServer::~LineServer() { stop(); }

void LineServer::stop() {
  stopping_ = true;
  if (thread_.joinable()) thread_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

void LineServer::serve() {
  constexpr int kPollMs = 50;
  while (!stopping_) {
    pollfd lp{listen_fd_, POLLIN, 0};
    if (::poll(&lp, 1, kPollMs) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::string buf;
    char chunk[4096];
    bool open = true;
    while (open && !stopping_) {
      pollfd cp{fd, POLLIN, 0};
      if (::poll(&cp, 1, kPollMs) <= 0) continue;
      const auto n = ::read(fd, chunk, sizeof chunk);
      if (n <= 0) open = false;
      else buf.append(chunk, static_cast<std::size_t>(n));
      for (std::size_t nl; (nl = buf.find('\n')) != std::string::npos; buf.erase(0, nl + 1)) {
        const auto msg = parse_ingest_line(std::string_view(buf).substr(0, nl));
        if (msg) {
          collector_.ingest(msg->payload, msg->rx);
          ++accepted_;
        } else if (nl > 0) {
          ++rejected_;
        }
      }
    }
    ::close(fd);
  }
}

}  // namespace uwbt
