// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "uwbt/accuracy.hpp"
#include "uwbt/collector.hpp"
#include "uwbt/config.hpp"
#include "uwbt/energy.hpp"
#include "uwbt/ranging.hpp"
#include "uwbt/selfloc.hpp"
#include "uwbt/sim.hpp"
#include "uwbt/solver.hpp"
#include "uwbt/uplink.hpp"

using namespace uwbt;

namespace {

struct Outcome {
  bool pass{false};
  std::string detail;
};

bool within_rel(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome energy() {
  struct Row {
    const char* name;
    double got, want, rel;
  };
  const Row rows[] = {
      {"anchor@10s", average_power(canonical_anchor_trace(10.0)), 81.6, 0.005},
      {"tag@10s", average_power(canonical_tag_trace(10.0)), 28.6, 0.005},
      {"anchor@40s", average_power(canonical_anchor_trace(40.0)), 20.44, 0.005},
      {"tag@40s", average_power(canonical_tag_trace(40.0)), 7.19, 0.005},
      {"anchor@40s no LoRa", average_power(canonical_anchor_trace(40.0, false)), 13.38, 0.005},
      {"anchor life days", battery_lifetime_days({2600, 3.7}, average_power(canonical_anchor_trace(40.0, false))), 29.96,
       0.01},
      {"tag life days", battery_lifetime_days({1200, 3.7}, average_power(canonical_tag_trace(40.0))), 25.7, 0.01},
  };
  Outcome o{true, ""};
  for (const auto& r : rows) {
    o.pass &= within_rel(r.got, r.want, r.rel);
    o.detail += fmt("%s=%.3f ", r.name, r.got);
  }
  // Library and hand oracle agree to rounding.
  o.pass &= within_rel(average_power(canonical_anchor_trace(40.0)), oracle::anchor_avg_mw(40.0, true), 1e-12);
  o.pass &= within_rel(average_power(canonical_tag_trace(10.0)), oracle::tag_avg_mw(10.0), 1e-12);
  return o;
}

Outcome cfo() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ud(0.0, 200.0), ue(-50.0, 50.0), ur(0.1e-3, 5e-3);
  const double tick_m = kSpeedOfLight * kDefaultTick;
  double worst_corr = 0.0, worst_unc = 0.0;
  Rng exchange_rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double d = ud(rng), e = ue(rng), reply = ur(rng);
    const NodeClock init{0.0, 0.0};
    const NodeClock resp{e, 1e-4 * i};
    const auto s = sstwr_exchange(init, resp, Distance(d), reply, ExchangeNoise{}, exchange_rng, 1.0L + i);
    worst_corr = std::max(worst_corr, std::abs(s.distance.meters() - d));
    const double unc_err = std::abs(uncorrected_tof(s.t_round, s.t_reply) * kSpeedOfLight - d);
    const double predicted = kSpeedOfLight * std::abs(e) * 1e-6 * reply / 2.0;
    worst_unc = std::max(worst_unc, std::abs(unc_err - predicted));
  }
  return {worst_corr <= tick_m + 1e-3 && worst_unc <= tick_m,
          fmt("max corrected err %.4f m (limit %.4f), max |uncorrected - c*e*t_reply/2| %.4f m (limit %.4f)",
              worst_corr, tick_m + 1e-3, worst_unc, tick_m)};
}

Outcome solver() {
  struct Instance {
    RangeSet rs;
    Position2D truth;
    bool noiseless;
  };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ua(0.0, 12.0), ut(2.0, 10.0);
  std::uniform_int_distribution<int> count(4, 7);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<Instance> inst;
  while (inst.size() < 500) {
    Instance in;
    in.noiseless = inst.size() % 2 == 0;
    in.truth = {ut(rng), ut(rng)};
    const int n = count(rng);
    for (int k = 0; k < n; ++k) {
      const Position2D a{ua(rng), ua(rng)};
      const double d = distance(a, in.truth) + (in.noiseless ? 0.0 : noise(rng));
      in.rs.push_back({a, std::max(0.0, d)});
    }
    if (trilaterate(in.rs).condition == FixCondition::NearCollinear) continue;
    inst.push_back(std::move(in));
  }
  std::vector<double> err(inst.size());
  std::vector<double> exact_err(inst.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto fix = trilaterate(inst[i].rs);
    err[i] = distance(fix.p, oracle::grid_search(inst[i].rs, {-1.0, -1.0}, {13.0, 13.0}));
    if (inst[i].noiseless) exact_err[i] = distance(fix.p, inst[i].truth);
  }
  const double worst = *std::max_element(err.begin(), err.end());
  const double worst_exact = *std::max_element(exact_err.begin(), exact_err.end());
  return {worst <= 2e-3 && worst_exact <= 1e-6,
          fmt("max distance to grid oracle %.5f m (limit 0.002), noiseless max err %.2e m (limit 1e-6)", worst,
              worst_exact)};
}

Outcome selfloc() {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 3 + static_cast<std::size_t>(t % 10);
    const auto ps = oracle::random_layout(rng, n);
    std::map<DeviceId, Position2D> truth;
    for (std::size_t i = 0; i < n; ++i) truth[static_cast<DeviceId>(i + 1)] = ps[i];
    const auto dm = DistanceMatrix::from_positions(truth);
    const auto f = estimate_all(dm, fix_frame(dm, 1, 2, 3));
    const oracle::Gauge g(ps[0], ps[1], ps[2]);
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = f.positions.find(static_cast<DeviceId>(i + 1));
      worst = std::max(worst, it == f.positions.end() ? 1e9 : distance(it->second, g(ps[i])));
    }
  }
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<double> rms;
  for (int t = 0; t < 1000; ++t) {
    const auto ps = oracle::random_layout(rng, 5);
    DistanceMatrix dm(std::vector<DeviceId>{1, 2, 3, 4, 5});
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = i + 1; j < 5; ++j) dm.set_directed(i, j, std::max(0.0, distance(ps[i], ps[j]) + noise(rng)));
    try {
      rms.push_back(estimate_all(dm, fix_frame(dm, 1, 2, 3, 0.3)).rms_residual);
    } catch (const FrameError&) {
      rms.push_back(1e9);
    }
  }
  std::sort(rms.begin(), rms.end());
  const double p99 = rms[static_cast<std::size_t>(std::ceil(0.99 * rms.size())) - 1];
  return {worst <= 1e-6 && p99 <= 0.20,
          fmt("noiseless max err %.2e m (limit 1e-6), noisy p99 rms %.4f m (limit 0.20)", worst, p99)};
}

Outcome accuracy() {
  const auto c = load_config(fixture::scenario("field600.cfg"));
  const auto r = run_accuracy(c, 100, 42);
  std::fputs(format_accuracy(r).c_str(), stdout);
  const double gt = r.ground_truth.d2.avg, sl = r.self_localized.d2.avg;
  const bool in_band = gt >= 8.0 && gt <= 25.0 && sl >= 8.0 && sl <= 25.0;
  return {in_band, fmt("avg 2D error GT %.2f cm, SL %.2f cm (band [8, 25])", gt, sl)};
}

Outcome schedule() {
  auto c = fixture::ring(10, 10);
  c.channel.loss_prob = 0.01;
  for (std::size_t i = 0; i < c.anchors.size(); ++i) c.anchors[i].clock_ppm = i % 2 ? 20.0 : -20.0;
  for (std::size_t i = 0; i < c.tags.size(); ++i) c.tags[i].clock_ppm = i % 2 ? -20.0 : 20.0;
  const auto r = run(c, 100);
  const auto conformance = check_slot_conformance(r, c);
  const auto exclusivity = check_slot_exclusivity(r);

  std::size_t misses = 0, late = 0, never = 0, short_periods = 0;
  std::map<DeviceId, std::vector<SyncStatus>> status;
  for (const auto& p : r.periods)
    for (const auto& [id, s] : p.sync) {
      status[id].push_back(s.status);
      short_periods += s.labels_heard < 3 ? 1 : 0;
    }
  for (const auto& [id, seq] : status) {
    const auto first = std::find(seq.begin(), seq.end(), SyncStatus::Verified);
    if (first == seq.end()) {
      ++never;
      continue;
    }
    for (auto it = first; it != seq.end(); ++it) {
      if (*it == SyncStatus::Verified) continue;
      ++misses;
      const auto k = static_cast<std::size_t>(it - seq.begin());
      bool back = false;
      for (std::size_t j = k + 1; j <= k + 2 && j < seq.size(); ++j) back |= seq[j] == SyncStatus::Verified;
      if (!back && k + 2 < seq.size()) ++late;
    }
  }

  // Master S1 to master S3, converted to master-local time, must be the S3 offset of the layout.
  const double master_rate = 1.0 + r.clocks.at(r.master).freq_offset_ppm * 1e-6;
  std::vector<SimTime> s1, s3;
  for (const auto& t : r.tx_log)
    if (t.node == r.master && t.kind == TxKind::Sync) {
      if (t.label == SyncLabel::S1) s1.push_back(t.begin);
      if (t.label == SyncLabel::S3) s3.push_back(t.begin);
    }
  double worst_span_err = s1.size() == s3.size() && !s1.empty() ? 0.0 : 1e9;
  for (std::size_t k = 0; k < std::min(s1.size(), s3.size()); ++k) {
    const double local_ms = (s3[k].ns - s1[k].ns) * 1e-6 * master_rate;
    worst_span_err = std::max(worst_span_err, std::abs(local_ms + 100.0 - 3900.0));
  }

  const bool pass = conformance.empty() && exclusivity.empty() && late == 0 && never == 0 && r.active_ms == 3900 &&
                    worst_span_err < 1e-3;
  return {pass, fmt("%zu conformance, %zu overlap violations; %zu node-periods missing a sync label, %zu not verified, "
                    "%zu not re-verified within 2, %zu never verified; active %lld ms, master span err %.2e ms",
                    conformance.size(), exclusivity.size(), short_periods, misses, late, never,
                    static_cast<long long>(r.active_ms), worst_span_err)};
}

Outcome codec() {
  UplinkFrame g;
  g.msg_type = MsgType::TagLocalization;
  g.device_id = 7;
  g.seq = 3;
  g.records = {make_record(1, 5.23), make_record(2, 11.87)};
  g.battery_mv = 3700;
  const Bytes golden{0x11, 0x00, 0x07, 0x03, 0x02, 0x00, 0x01, 0x02, 0x0B, 0x00, 0x02, 0x04, 0xA3, 0x0E, 0x74};
  bool ok = encode(g) == golden && decode(golden) == g;

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> type(0, 2), n(0, static_cast<int>(kMaxUplinkRecords)), byte(0, 255);
  std::uniform_int_distribution<int> id(0, 65535), cm(0, 65534);
  std::size_t longest = 0, bad = 0;
  for (int i = 0; i < 10000; ++i) {
    UplinkFrame f;
    f.msg_type = static_cast<MsgType>(type(rng));
    f.device_id = static_cast<DeviceId>(id(rng));
    f.seq = static_cast<std::uint8_t>(byte(rng));
    f.battery_mv = static_cast<std::uint16_t>(id(rng));
    const int count = n(rng);
    for (int k = 0; k < count; ++k) {
      UplinkRecord rec;
      rec.peer = static_cast<DeviceId>(id(rng));
      rec.distance_cm = static_cast<std::uint16_t>(byte(rng) < 16 ? 0xFFFF : cm(rng));
      f.records.push_back(rec);
    }
    const auto b = encode(f);
    longest = std::max(longest, b.size());
    if (!(decode(b) == f) || b.size() != 7 + 4 * f.records.size()) ++bad;
  }
  ok &= bad == 0 && longest <= 51;
  return {ok, fmt("golden %s, %zu roundtrip mismatches in 10000, longest frame %zu bytes",
                  encode(g) == golden ? "match" : "MISMATCH", bad, longest)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome end_to_end() {
  const auto c = fixture::noiseless(load_config(fixture::scenario("zoo126.cfg")));
  const std::size_t periods = script_periods(c);
  const auto dir = std::filesystem::temp_directory_path() / ("uwbt_accept_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);

  struct Run {
    std::string stream, log, csv;
    std::vector<PositionRecord> fixes;
  };
  auto once = [&](int k) {
    Run out;
    const auto r = run(c, periods);
    out.stream = serialize(r);
    const auto log = dir / ("run" + std::to_string(k) + ".log");
    std::filesystem::remove(log);
    Collector col(CollectorOptions::from(c), log);
    for (const auto& p : r.periods)
      for (const auto& u : p.uplinks) col.ingest(u.payload, u.rx);
    col.flush();
    out.fixes = col.positions();
    std::ostringstream csv;
    export_csv(out.fixes, csv);
    out.csv = csv.str();
    out.log = slurp(log);
    return out;
  };
  const auto a = once(1), b = once(2);
  std::filesystem::remove_all(dir);

  const auto f = c.frame_anchors();
  const GaugeTransform gauge(c.find_anchor(f.origin)->position, c.find_anchor(f.x_axis)->position,
                             c.find_anchor(f.orientation)->position);
  double worst = 0.0;
  std::size_t expected = 0;
  for (const auto& fix : a.fixes) {
    const auto truth = gauge.apply(position_at(c.find_tag(fix.node)->waypoints, fix.time.seconds()));
    worst = std::max(worst, distance(truth, fix.p));
  }
  expected = c.tags.size() * (periods - 1);
  const bool same = a.stream == b.stream && a.log == b.log && a.csv == b.csv;
  const bool pass = same && !a.fixes.empty() && a.fixes.size() >= expected && worst <= 0.01;
  return {pass, fmt("%zu fixes over %zu periods, max error %.4f m (limit 0.01); stream/log/csv identical: %s",
                    a.fixes.size(), periods, worst, same ? "yes" : "NO")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"energy reconstruction", energy},   {"CFO correction", cfo},         {"solver oracle equivalence", solver},
      {"self-localization round trip", selfloc}, {"accuracy replication", accuracy}, {"schedule conformance", schedule},
      {"codec golden vector and roundtrip", codec}, {"end-to-end determinism", end_to_end},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
