#include "uwbt/uplink.hpp"

#include <charconv>
#include <cmath>

namespace uwbt {

UplinkRecord make_record(DeviceId peer, std::optional<double> meters) {
  if (!meters) return {peer, kInvalidDistanceCm};
  if (!std::isfinite(*meters) || *meters < 0.0) throw EncodeError("distance must be finite and >= 0");
  const double cm = std::round(*meters * 100.0);
  if (cm >= kInvalidDistanceCm) throw EncodeError("distance " + std::to_string(*meters) + " m overflows u16 cm");
  return {peer, static_cast<std::uint16_t>(cm)};
}

namespace {

void put16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

}  // namespace

Bytes encode(const UplinkFrame& frame) {
  if (frame.version != kUplinkVersion) throw EncodeError("unsupported version " + std::to_string(frame.version));
  if (static_cast<std::uint8_t>(frame.msg_type) > 2) throw EncodeError("unknown msg_type");
  if (frame.records.size() > kMaxUplinkRecords)
    throw EncodeError(std::to_string(frame.records.size()) + " records exceed the " +
                      std::to_string(kMaxUplinkRecords) + "-record budget; split across frames");

  Bytes out;
  out.reserve(kUplinkFixedBytes + kUplinkRecordBytes * frame.records.size());
  out.push_back(static_cast<std::uint8_t>((frame.version << 4) | static_cast<std::uint8_t>(frame.msg_type)));
  put16(out, frame.device_id);
  out.push_back(frame.seq);
  out.push_back(static_cast<std::uint8_t>(frame.records.size()));
  for (const auto& r : frame.records) {
    put16(out, r.peer);
    put16(out, r.distance_cm);
  }
  put16(out, frame.battery_mv);
  return out;
}

UplinkFrame decode(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DecodeError(0, "empty payload");
  UplinkFrame f;
  f.version = bytes[0] >> 4;
  if (f.version != kUplinkVersion) throw DecodeError(0, "unsupported version " + std::to_string(f.version));
  const std::uint8_t type = bytes[0] & 0x0F;
  if (type > 2) throw DecodeError(0, "unknown msg_type " + std::to_string(type));
  f.msg_type = static_cast<MsgType>(type);
  if (bytes.size() < kUplinkFixedBytes) throw DecodeError(bytes.size(), "truncated frame");

  f.device_id = get16(bytes, 1);
  f.seq = bytes[3];
  const std::size_t count = bytes[4];
  const std::size_t expected = kUplinkFixedBytes + kUplinkRecordBytes * count;
  if (bytes.size() < expected) throw DecodeError(bytes.size(), "truncated frame");
  if (bytes.size() > expected) throw DecodeError(expected, "trailing bytes after frame");

  f.records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = 5 + kUplinkRecordBytes * i;
    f.records.push_back({get16(bytes, at), get16(bytes, at + 2)});
  }
  f.battery_mv = get16(bytes, expected - 2);
  return f;
}

std::vector<UplinkFrame> split_report(DeviceId device, MsgType type, std::uint8_t first_seq,
                                      std::span<const PeerDistance> distances, std::uint16_t battery_mv,
                                      std::size_t max_records) {
  if (max_records == 0 || max_records > kMaxUplinkRecords) max_records = kMaxUplinkRecords;
  std::vector<UplinkFrame> frames;
  std::uint8_t seq = first_seq;
  std::size_t i = 0;
  do {
    UplinkFrame f;
    f.msg_type = type;
    f.device_id = device;
    f.seq = seq++;
    f.battery_mv = battery_mv;
    for (std::size_t k = 0; k < max_records && i < distances.size(); ++k, ++i)
      f.records.push_back(make_record(distances[i].peer, distances[i].meters));
    frames.push_back(std::move(f));
  } while (i < distances.size());
  return frames;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

std::optional<Bytes> from_hex(std::string_view hex) {
  if (hex.size() % 2) return std::nullopt;
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = std::from_chars(hex.data() + 2 * i, hex.data() + 2 * i + 2, out[i], 16);
    if (r.ec != std::errc{} || r.ptr != hex.data() + 2 * i + 2) return std::nullopt;
  }
  return out;
}

std::string format_ingest_line(const UplinkMessage& msg) {
  return "U " + std::to_string(msg.rx.ns) + " " + to_hex(msg.payload);
}

std::optional<UplinkMessage> parse_ingest_line(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n' || line.back() == ' ')) line.remove_suffix(1);
  if (line.size() < 3 || line[0] != 'U' || line[1] != ' ') return std::nullopt;
  line.remove_prefix(2);
  const auto sp = line.find(' ');
  if (sp == std::string_view::npos) return std::nullopt;
  UplinkMessage msg;
  const auto r = std::from_chars(line.data(), line.data() + sp, msg.rx.ns);
  if (r.ec != std::errc{} || r.ptr != line.data() + sp) return std::nullopt;
  auto bytes = from_hex(line.substr(sp + 1));
  if (!bytes) return std::nullopt;
  msg.payload = std::move(*bytes);
  return msg;
}

void UplinkQueue::push(UplinkMessage msg) {
  {
    std::lock_guard lk(mu_);
    q_.push_back(std::move(msg));
  }
  cv_.notify_one();
}

std::optional<UplinkMessage> UplinkQueue::try_pop() {
  std::lock_guard lk(mu_);
  if (q_.empty()) return std::nullopt;
  auto m = std::move(q_.front());
  q_.pop_front();
  return m;
}

std::optional<UplinkMessage> UplinkQueue::pop() {
  std::unique_lock lk(mu_);
  cv_.wait(lk, [&] { return closed_ || !q_.empty(); });
  if (q_.empty()) return std::nullopt;
  auto m = std::move(q_.front());
  q_.pop_front();
  return m;
}

void UplinkQueue::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

}  // namespace uwbt
