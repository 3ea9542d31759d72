#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace uwbt {

using DeviceId = std::uint16_t;

enum class Role : std::uint8_t { MasterAnchor, RelayAnchor, PassiveAnchor, Tag };

struct NodeId {
  DeviceId id{};
  Role role{Role::PassiveAnchor};

  bool is_anchor() const { return role != Role::Tag; }
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

std::string to_string(Role role);
std::optional<Role> parse_role(const std::string& text);

struct Position2D {
  double x{};
  double y{};

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
  friend bool operator==(const Position2D&, const Position2D&) = default;
};

inline double distance(const Position2D& a, const Position2D& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Non-negative range in meters. Construction rejects NaN and negatives.
class Distance {
 public:
  constexpr Distance() = default;
  explicit Distance(double meters) : meters_(meters) {
    if (!(meters >= 0.0)) throw std::invalid_argument("Distance must be finite and >= 0");
  }
  double meters() const { return meters_; }
  friend auto operator<=>(const Distance&, const Distance&) = default;

 private:
  double meters_{0.0};
};

/// Global true time, integer nanoseconds since scenario start.
struct SimTime {
  std::int64_t ns{};

  static constexpr SimTime from_seconds(double s) {
    return SimTime{static_cast<std::int64_t>(std::llround(s * 1e9))};
  }
  static constexpr SimTime from_ms(std::int64_t ms) { return SimTime{ms * 1'000'000}; }
  double seconds() const { return static_cast<double>(ns) * 1e-9; }
  friend auto operator<=>(const SimTime&, const SimTime&) = default;
};

struct Waypoint {
  double t_s{};
  Position2D p{};
};

/// Piecewise-linear tag trajectory; clamps outside the scripted time span.
Position2D position_at(const std::vector<Waypoint>& script, double t_s);

/// An anchor relocation applied at a given true time (used to exercise displacement detection).
struct AnchorMove {
  double at_s{};
  Position2D to{};
};

struct AnchorSpec {
  NodeId node{};
  Position2D position{};
  std::vector<AnchorMove> moves;
  std::optional<double> clock_ppm;  // overrides the drawn offset when set
};

struct TagSpec {
  NodeId node{0, Role::Tag};
  std::vector<Waypoint> waypoints;
  std::optional<double> clock_ppm;
};

struct NlosLink {
  DeviceId a{};
  DeviceId b{};
  double bias_m{};
};

struct ChannelModel {
  double range_limit_m{150.0};
  double loss_prob{0.0};
  double timestamp_noise_s{0.3e-9};
  double cfo_noise_ppm{0.1};
  std::vector<NlosLink> nlos;

  double nlos_bias(DeviceId a, DeviceId b) const;
};

/// Anchors that pin the self-localization gauge.
struct FrameAnchors {
  DeviceId origin{};
  DeviceId x_axis{};
  DeviceId orientation{};
};

struct SyncConfig {
  double wake_guard_ms{20.0};
  double relay_offset_ms{10.0};
  double tolerance_ms{5.0};
};

struct UplinkConfig {
  bool anchor_lora{true};
  double airtime_s{4.17};
  std::uint16_t battery_mv{3700};
};

struct CollectorConfig {
  double displacement_threshold_m{0.5};
  std::size_t window{10};
};

struct DeploymentConfig {
  std::string name;
  std::vector<AnchorSpec> anchors;
  std::vector<TagSpec> tags;
  double localization_period_s{40.0};
  ChannelModel channel{};
  double drift_bound_ppm{20.0};
  double phase_spread_s{1.0};
  double reply_delay_s{1e-3};
  std::uint64_t seed{1};
  std::optional<FrameAnchors> frame;
  SyncConfig sync{};
  UplinkConfig uplink{};
  CollectorConfig collector{};

  /// Frame anchors from config, or the three lowest anchor ids.
  FrameAnchors frame_anchors() const;
  std::vector<DeviceId> anchor_ids() const;  // ascending
  std::vector<DeviceId> tag_ids() const;     // ascending
  const AnchorSpec* find_anchor(DeviceId id) const;
  const TagSpec* find_tag(DeviceId id) const;
};

/// Time one ranging exchange occupies inside a slot (reply delay plus turnaround margin).
double exchange_budget_s(const DeploymentConfig& config);

/// Returns one message per violated invariant, each naming its field. Empty means valid.
std::vector<std::string> validate(const DeploymentConfig& config);

}  // namespace uwbt
