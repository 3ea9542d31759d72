#include "uwbt/accuracy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "uwbt/collector.hpp"
#include "uwbt/selfloc.hpp"
#include "uwbt/sim.hpp"

namespace uwbt {

std::string to_string(AnchorVariant v) {
  return v == AnchorVariant::GroundTruthAnchors ? "GT anchors" : "SL anchors";
}

std::size_t script_periods(const DeploymentConfig& config) {
  double last = 0.0;
  for (const auto& t : config.tags)
    for (const auto& w : t.waypoints) last = std::max(last, w.t_s);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(last / config.localization_period_s)));
}

ColumnStats column_stats(std::vector<double> v) {
  ColumnStats s;
  if (v.empty()) return s;
  const auto n = v.size();
  s.avg = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - s.avg) * (x - s.avg);
  s.sigma = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return s;
}

namespace {

struct TrialResult {
  std::vector<ErrorSample> gt, sl;
  std::size_t expected{};
};

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (trial + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

ErrorSample compare(std::size_t trial, const PositionRecord& r, Position2D truth) {
  ErrorSample s;
  s.trial = trial;
  s.tag = r.node;
  s.time_ns = r.time.ns;
  s.truth = truth;
  s.estimate = r.p;
  s.error_x = std::abs(r.p.x - truth.x) * 100.0;
  s.error_y = std::abs(r.p.y - truth.y) * 100.0;
  s.error_2d = std::hypot(s.error_x, s.error_y);
  return s;
}

TrialResult run_trial(const DeploymentConfig& base, std::size_t trial, std::uint64_t seed, std::size_t periods) {
  DeploymentConfig config = base;
  config.seed = trial_seed(seed, trial);
  const auto report = run(config, periods);

  std::map<DeviceId, Position2D> truth_anchors;
  for (const auto& a : config.anchors) truth_anchors[a.node.id] = a.position;
  auto gt_opts = CollectorOptions::from(config);
  gt_opts.fixed_anchor_positions = truth_anchors;
  Collector gt(gt_opts);
  Collector sl(CollectorOptions::from(config));
  for (const auto& p : report.periods)
    for (const auto& u : p.uplinks) {
      gt.ingest(u.payload, u.rx);
      sl.ingest(u.payload, u.rx);
    }
  gt.flush();
  sl.flush();

  const auto frame = config.frame_anchors();
  const GaugeTransform gauge(truth_anchors.at(frame.origin), truth_anchors.at(frame.x_axis),
                             truth_anchors.at(frame.orientation));
  TrialResult out;
  for (const auto& p : report.periods) out.expected += p.tags.size();
  auto truth_of = [&](const PositionRecord& r) { return position_at(config.find_tag(r.node)->waypoints, r.time.seconds()); };
  for (const auto& r : gt.positions()) out.gt.push_back(compare(trial, r, truth_of(r)));
  for (const auto& r : sl.positions()) out.sl.push_back(compare(trial, r, gauge.apply(truth_of(r))));
  return out;
}

void finish(VariantStats& v) {
  std::vector<double> xs, ys, ds;
  for (const auto& s : v.samples) {
    xs.push_back(s.error_x);
    ys.push_back(s.error_y);
    ds.push_back(s.error_2d);
  }
  v.x = column_stats(std::move(xs));
  v.y = column_stats(std::move(ys));
  v.d2 = column_stats(std::move(ds));
}

AccuracyReport assemble(const DeploymentConfig& config, std::vector<TrialResult>& results, std::uint64_t seed,
                        std::size_t periods) {
  AccuracyReport rep;
  rep.seed = seed;
  rep.trials = results.size();
  rep.periods = periods;
  rep.ground_truth.variant = AnchorVariant::GroundTruthAnchors;
  rep.self_localized.variant = AnchorVariant::SelfLocalizedAnchors;
  (void)config;
  for (auto& r : results) {
    rep.ground_truth.samples.insert(rep.ground_truth.samples.end(), r.gt.begin(), r.gt.end());
    rep.self_localized.samples.insert(rep.self_localized.samples.end(), r.sl.begin(), r.sl.end());
    rep.ground_truth.expected += r.expected;
    rep.self_localized.expected += r.expected;
  }
  finish(rep.ground_truth);
  finish(rep.self_localized);
  return rep;
}

void check_ground_truth(const DeploymentConfig& config) {
  if (config.tags.empty()) throw std::invalid_argument("accuracy needs at least one scripted tag");
  for (const auto& t : config.tags)
    if (t.waypoints.empty())
      throw std::invalid_argument("tag " + std::to_string(t.node.id) + " has no scripted ground truth");
}

}  // namespace

AccuracyReport run_accuracy_serial(const DeploymentConfig& config, std::size_t trials, std::uint64_t seed,
                                   std::size_t periods) {
  check_ground_truth(config);
  if (periods == 0) periods = script_periods(config);
  std::vector<TrialResult> results(trials);
  for (std::size_t i = 0; i < trials; ++i) results[i] = run_trial(config, i, seed, periods);
  return assemble(config, results, seed, periods);
}

AccuracyReport run_accuracy(const DeploymentConfig& config, std::size_t trials, std::uint64_t seed,
                            std::size_t periods) {
  check_ground_truth(config);
  if (periods == 0) periods = script_periods(config);
  std::vector<TrialResult> results(trials);
  const auto n = static_cast<std::int64_t>(trials);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i)
    results[static_cast<std::size_t>(i)] = run_trial(config, static_cast<std::size_t>(i), seed, periods);
  return assemble(config, results, seed, periods);
}

std::string format_accuracy(const AccuracyReport& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "accuracy: %zu trials x %zu periods, seed %llu (errors in cm)\n", r.trials, r.periods,
                static_cast<unsigned long long>(r.seed));
  out += buf;
  std::snprintf(buf, sizeof buf, "%-11s %6s | %8s %8s %8s | %8s %8s %8s | %8s %8s %8s\n", "variant", "fixes", "x avg",
                "x md", "x sd", "y avg", "y md", "y sd", "2D avg", "2D md", "2D sd");
  out += buf;
  for (const auto* v : {&r.ground_truth, &r.self_localized}) {
    std::snprintf(buf, sizeof buf, "%-11s %6zu | %8.2f %8.2f %8.2f | %8.2f %8.2f %8.2f | %8.2f %8.2f %8.2f\n",
                  to_string(v->variant).c_str(), v->samples.size(), v->x.avg, v->x.median, v->x.sigma, v->y.avg,
                  v->y.median, v->y.sigma, v->d2.avg, v->d2.median, v->d2.sigma);
    out += buf;
  }
  return out;
}

}  // namespace uwbt
