#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "uwbt/model.hpp"

namespace uwbt {

struct RangeEntry {
  Position2D anchor{};
  double d{};  // measured distance, meters
};

using RangeSet = std::vector<RangeEntry>;

enum class FixCondition : std::uint8_t { Ok, NearCollinear, MaxIterations };

std::string to_string(FixCondition c);

struct Fix2D {
  Position2D p{};
  double rms_residual{};
  int iterations{};
  FixCondition condition{FixCondition::Ok};
};

/// Damping and stopping constants for the Gauss-Newton solver.
struct SolverOptions {
  double lambda_initial{1e-3};
  double lambda_decrease{0.3};
  double lambda_increase{10.0};
  double step_tolerance_m{1e-6};
  int max_iterations{50};
  double collinear_ratio{1e-3};
};

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linearization failed because the anchors are (near) collinear. Carries the
/// least-squares solution restricted to the anchor line.
class InitError : public std::runtime_error {
 public:
  InitError(const std::string& what, Position2D best_on_line)
      : std::runtime_error(what), best_on_line_(best_on_line) {}
  Position2D best_on_line() const { return best_on_line_; }

 private:
  Position2D best_on_line_;
};

/// Closed-form start point from differencing squared-range equations against the first entry.
Position2D linear_init(std::span<const RangeEntry> rs, double collinear_ratio = 1e-3);

/// Minimizes sum (|p - a_i| - d_i)^2 with Levenberg-damped Gauss-Newton.
Fix2D trilaterate(std::span<const RangeEntry> rs, std::optional<Position2D> init = std::nullopt,
                  const SolverOptions& opts = {});

struct ResidualStats {
  std::vector<double> residuals;  // |p - a_i| - d_i, in entry order
  double mean{};
  double mean_abs{};
  double max_abs{};
};

ResidualStats residual_stats(const Fix2D& fix, std::span<const RangeEntry> rs);

/// Sum of squared residuals at p.
double range_cost(std::span<const RangeEntry> rs, Position2D p);

// Batch kernels. Instances with fewer than three entries yield nullopt.
std::vector<std::optional<Fix2D>> solve_batch_serial(std::span<const RangeSet> batch,
                                                     const SolverOptions& opts = {});
/// OpenMP-parallel over instances; results are bit-identical to solve_batch_serial.
std::vector<std::optional<Fix2D>> solve_batch(std::span<const RangeSet> batch, const SolverOptions& opts = {});

}  // namespace uwbt
