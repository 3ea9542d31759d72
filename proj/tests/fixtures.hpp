#pragma once

#include <filesystem>

#include "uwbt/config.hpp"
#include "uwbt/model.hpp"

namespace fixture {

inline std::filesystem::path scenario(const char* name) { return std::filesystem::path(UWBT_SCENARIO_DIR) / name; }

/// Anchors on a ring of radius 12 m around (15, 10); tags parked inside it.
/// Anchor ids start at 1, tag ids at 101. Anchor 1 is the master, anchor 3 relays.
inline uwbt::DeploymentConfig ring(std::size_t n_anchors, std::size_t n_tags, double period_s = 40.0) {
  uwbt::DeploymentConfig c;
  c.name = "ring";
  c.localization_period_s = period_s;
  for (std::size_t i = 0; i < n_anchors; ++i) {
    const double a = 2.0 * 3.141592653589793 * static_cast<double>(i) / static_cast<double>(n_anchors);
    uwbt::AnchorSpec s;
    s.node.id = static_cast<uwbt::DeviceId>(i + 1);
    s.node.role = i == 0 ? uwbt::Role::MasterAnchor : (i == 2 ? uwbt::Role::RelayAnchor : uwbt::Role::PassiveAnchor);
    s.position = {15.0 + 12.0 * std::cos(a), 10.0 + 12.0 * std::sin(a)};
    c.anchors.push_back(s);
  }
  for (std::size_t i = 0; i < n_tags; ++i) {
    uwbt::TagSpec t;
    t.node.id = static_cast<uwbt::DeviceId>(101 + i);
    const double a = 0.7 * static_cast<double>(i);
    t.waypoints = {{0.0, {15.0 + 5.0 * std::cos(a), 10.0 + 5.0 * std::sin(a)}}};
    c.tags.push_back(t);
  }
  return c;
}

inline uwbt::DeploymentConfig noiseless(uwbt::DeploymentConfig c) {
  c.channel.timestamp_noise_s = 0.0;
  c.channel.cfo_noise_ppm = 0.0;
  return c;
}

}  // namespace fixture
