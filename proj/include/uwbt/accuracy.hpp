#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uwbt/model.hpp"

namespace uwbt {

enum class AnchorVariant : std::uint8_t { GroundTruthAnchors, SelfLocalizedAnchors };

std::string to_string(AnchorVariant v);

/// One tag fix compared with the scripted position. Errors are absolute, in cm.
struct ErrorSample {
  std::size_t trial{};
  DeviceId tag{};
  std::int64_t time_ns{};
  Position2D truth{};     // in the variant's coordinate frame
  Position2D estimate{};
  double error_x{};
  double error_y{};
  double error_2d{};
};

struct ColumnStats {
  double avg{};
  double median{};
  double sigma{};  // sample standard deviation
};

struct VariantStats {
  AnchorVariant variant{AnchorVariant::GroundTruthAnchors};
  std::vector<ErrorSample> samples;  // ordered by (trial, time, tag)
  ColumnStats x{}, y{}, d2{};
  std::size_t expected{};  // tag slots that should have produced a fix
};

struct AccuracyReport {
  std::uint64_t seed{};
  std::size_t trials{};
  std::size_t periods{};
  VariantStats ground_truth;
  VariantStats self_localized;
};

/// Periods needed to play every tag script once.
std::size_t script_periods(const DeploymentConfig& config);

ColumnStats column_stats(std::vector<double> values);

/// Monte Carlo over `trials` seeds derived from `seed`. Trials run in parallel;
/// the result is identical to run_accuracy_serial.
AccuracyReport run_accuracy(const DeploymentConfig& config, std::size_t trials, std::uint64_t seed,
                            std::size_t periods = 0);
AccuracyReport run_accuracy_serial(const DeploymentConfig& config, std::size_t trials, std::uint64_t seed,
                                   std::size_t periods = 0);

/// Plain-text table: avg, md and sigma for x, y and 2D per variant, in cm.
std::string format_accuracy(const AccuracyReport& report);

}  // namespace uwbt
