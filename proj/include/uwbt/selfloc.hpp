#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "uwbt/model.hpp"
#include "uwbt/solver.hpp"

namespace uwbt {

/// Inter-anchor distances over a fixed id set. Directed measurements are kept
/// separately; reads return the mean of whichever directions exist.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::vector<DeviceId> ids);

  const std::vector<DeviceId>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  std::optional<std::size_t> index_of(DeviceId id) const;

  /// Records a measurement taken by `from` towards `to`. Repeats in the same direction are averaged.
  void add_measurement(DeviceId from, DeviceId to, double d);
  void set_directed(std::size_t i, std::size_t j, std::optional<double> d);

  std::optional<double> directed(std::size_t i, std::size_t j) const;
  std::optional<double> at(std::size_t i, std::size_t j) const;
  std::optional<double> between(DeviceId a, DeviceId b) const;

  /// Builds the exact matrix for known positions.
  static DistanceMatrix from_positions(const std::map<DeviceId, Position2D>& positions);

 private:
  std::vector<DeviceId> ids_;
  std::vector<double> sum_;
  std::vector<int> count_;
};

class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnchorFrame {
  DeviceId origin_id{};
  DeviceId x_axis_id{};
  DeviceId orientation_id{};
  std::map<DeviceId, Position2D> positions;
  std::vector<DeviceId> unplaced;
  double rms_residual{};
  bool degenerate{false};          // orientation anchor on the x axis
  bool refinement_failed{false};   // global pass diverged; incremental solution returned
};

struct SelfLocOptions {
  double triangle_slack_m{0.3};  // 3 sigma of ranging noise
  SolverOptions solver{};
  int refine_max_iterations{100};
};

/// Places origin, x-axis and orientation anchors from their pairwise distances.
AnchorFrame fix_frame(const DistanceMatrix& dm, DeviceId origin_id, DeviceId x_axis_id, DeviceId orientation_id,
                      double triangle_slack_m = 0.3);

/// Incrementally trilaterates the remaining anchors, then jointly refines all
/// placed anchors with the gauge held fixed.
AnchorFrame estimate_all(const DistanceMatrix& dm, const AnchorFrame& frame, const SelfLocOptions& opts = {});

/// Flags anchors whose distances to at least two peers moved by more than
/// `threshold_m`, comparing the median of the newest `recent` matrices with the
/// median of the older part of the window. Windows shorter than 5 flag nothing.
std::set<DeviceId> detect_displacement(std::span<const DistanceMatrix> history, double threshold_m = 0.5,
                                       std::size_t recent = 3);

/// Rigid motion (with optional reflection) taking true coordinates into the
/// self-localization gauge defined by three anchors.
class GaugeTransform {
 public:
  GaugeTransform(Position2D origin, Position2D x_axis, Position2D orientation);
  Position2D apply(Position2D p) const;

 private:
  Position2D origin_;
  double cos_{1.0};
  double sin_{0.0};
  double flip_{1.0};
};

}  // namespace uwbt
