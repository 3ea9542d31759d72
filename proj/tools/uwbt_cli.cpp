#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "uwbt/accuracy.hpp"
#include "uwbt/collector.hpp"
#include "uwbt/config.hpp"
#include "uwbt/energy.hpp"
#include "uwbt/sim.hpp"

namespace {

using namespace uwbt;

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kNotFound = 3,
  kVersionMismatch = 4,
  kInvalid = 5,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

DeploymentConfig load(const Globals& g) {
  if (g.config.empty()) throw UsageError("--config is required");
  auto c = load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  return c;
}

/// Writes to --out when given, stdout otherwise.
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::filesystem::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
  f << text;
}

Bytes read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::filesystem::filesystem_error("cannot open", path,
                                            std::make_error_code(std::errc::no_such_file_or_directory));
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Uplinks from either a report stream or a binary ingest log.
std::vector<LoggedFrame> read_uplinks(const std::string& path, std::optional<std::uint64_t>& stream_hash) {
  const auto bytes = read_bytes(path);
  if (bytes.empty()) return {};
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (text.starts_with(std::string_view(kLogMagic, 7))) return IngestLog::parse(bytes);

  std::istringstream in{std::string(text)};
  std::string line;
  std::getline(in, line);
  if (line != kReportStreamHeader) throw LogFormatError("unrecognized input header '" + line.substr(0, 32) + "'");
  std::vector<LoggedFrame> frames;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.starts_with("H ")) {
      if (auto at = line.find(" config="); at != std::string::npos)
        stream_hash = std::stoull(line.substr(at + 8, 16), nullptr, 16);
    } else if (line.starts_with("U ")) {
      auto msg = parse_ingest_line(line);
      if (!msg) throw LogFormatError("malformed uplink on line " + std::to_string(n));
      frames.push_back({msg->rx, std::move(msg->payload)});
    }
  }
  return frames;
}

int cmd_simulate(const Globals& g, std::size_t periods, const std::string& log_path) {
  const auto config = load(g);
  const auto report = run(config, periods);
  emit(g.out, serialize(report));
  if (!log_path.empty()) {
    std::filesystem::remove(log_path);
    IngestLog log(log_path);
    for (const auto& p : report.periods)
      for (const auto& u : p.uplinks) log.append(u.rx, u.payload);
  }
  std::size_t uplinks = 0;
  for (const auto& p : report.periods) uplinks += p.uplinks.size();
  const auto conformance = check_slot_conformance(report, config);
  std::fprintf(stderr, "simulated %zu periods, %zu uplinks, %zu slot violations\n", report.periods.size(), uplinks,
               conformance.size());
  return kOk;
}

int cmd_replay(const Globals& g, const std::string& input, const std::string& log_path, int listen_port) {
  const auto config = load(g);
  if (!log_path.empty()) std::filesystem::remove(log_path);
  Collector collector(CollectorOptions::from(config),
                      log_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(log_path));

  if (listen_port >= 0) {
    LineServer server(collector, static_cast<std::uint16_t>(listen_port));
    std::fprintf(stderr, "listening on 127.0.0.1:%u, close stdin to finish\n", server.port());
    std::string ignored;
    while (std::getline(std::cin, ignored)) {
    }
    server.stop();
  } else {
    if (input.empty()) throw UsageError("replay needs --in or --listen");
    std::optional<std::uint64_t> hash;
    for (const auto& f : read_uplinks(input, hash)) collector.ingest(f.raw, f.rx);
    if (hash && *hash != config_hash(config))
      std::fprintf(stderr, "warning: input was produced from a different scenario config\n");
  }
  collector.flush();

  const auto positions = collector.positions();
  std::ostringstream csv;
  export_csv(positions, csv);
  emit(g.out, csv.str());

  const auto records = collector.records();
  std::size_t bad = 0, dup = 0;
  for (const auto& r : records) {
    bad += r.decoded ? 0 : 1;
    dup += r.duplicate ? 1 : 0;
  }
  std::fprintf(stderr, "ingested %zu frames (%zu undecodable, %zu duplicate), %zu fixes, frame version %llu\n",
               records.size(), bad, dup, positions.size(), static_cast<unsigned long long>(collector.frame_version()));
  for (const auto& e : collector.events()) std::fprintf(stderr, "  %s\n", e.c_str());
  return kOk;
}

int cmd_report(const Globals& g, const std::string& input, std::optional<DeviceId> node, std::int64_t from,
               std::int64_t to) {
  if (input.empty()) throw UsageError("report needs --in <positions.csv>");
  std::ifstream in(input);
  if (!in)
    throw std::filesystem::filesystem_error("cannot open", input,
                                            std::make_error_code(std::errc::no_such_file_or_directory));
  std::vector<PositionRecord> rows;
  for (const auto& r : import_csv(in))
    if ((!node || r.node == *node) && r.time.ns >= from && r.time.ns <= to) rows.push_back(r);

  std::ostringstream csv;
  export_csv(rows, csv);
  if (!g.out.empty()) emit(g.out, csv.str());

  struct Track {
    std::size_t fixes{};
    std::int64_t first{}, last{};
    double rms_sum{}, path_m{};
    std::optional<Position2D> prev;
    std::uint64_t max_version{};
  };
  std::map<DeviceId, Track> tracks;
  for (const auto& r : rows) {
    auto& t = tracks[r.node];
    if (t.fixes == 0) t.first = r.time.ns;
    t.last = r.time.ns;
    ++t.fixes;
    t.rms_sum += r.rms_residual;
    if (t.prev) t.path_m += distance(*t.prev, r.p);
    t.prev = r.p;
    t.max_version = std::max(t.max_version, r.frame_version);
  }
  std::printf("%zu fixes, %zu nodes\n", rows.size(), tracks.size());
  std::printf("%6s %7s %12s %12s %10s %10s %8s\n", "node", "fixes", "first_s", "last_s", "mean_rms", "path_m",
              "frame_v");
  for (const auto& [id, t] : tracks)
    std::printf("%6u %7zu %12.3f %12.3f %10.4f %10.2f %8llu\n", static_cast<unsigned>(id), t.fixes, t.first * 1e-9,
                t.last * 1e-9, t.rms_sum / static_cast<double>(t.fixes), t.path_m,
                static_cast<unsigned long long>(t.max_version));
  return kOk;
}

int cmd_accuracy(const Globals& g, std::size_t trials, bool serial, double noise_scale) {
  auto config = load(g);
  config.channel.timestamp_noise_s *= noise_scale;
  config.channel.cfo_noise_ppm *= noise_scale;
  const auto rep = serial ? run_accuracy_serial(config, trials, config.seed) : run_accuracy(config, trials, config.seed);
  std::cout << format_accuracy(rep);
  if (!g.out.empty()) {
    std::ostringstream csv;
    csv << "variant,trial,tag,time,truth_x,truth_y,est_x,est_y,error_x_cm,error_y_cm,error_2d_cm\n";
    for (const auto* v : {&rep.ground_truth, &rep.self_localized})
      for (const auto& s : v->samples) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%zu,%u,%lld,%.4f,%.4f,%.6f,%.6f,%.4f,%.4f,%.4f\n",
                      v->variant == AnchorVariant::GroundTruthAnchors ? "GT" : "SL", s.trial,
                      static_cast<unsigned>(s.tag), static_cast<long long>(s.time_ns), s.truth.x, s.truth.y,
                      s.estimate.x, s.estimate.y, s.error_x, s.error_y, s.error_2d);
        csv << buf;
      }
    emit(g.out, csv.str());
  }
  return kOk;
}

int cmd_lifetime(double period_s, bool no_anchor_lora, double anchor_mah, double tag_mah, double voltage) {
  struct Row {
    const char* name;
    StateTrace trace;
    double mah;
  };
  const Row rows[] = {
      {"anchor", canonical_anchor_trace(period_s, !no_anchor_lora), anchor_mah},
      {"tag", canonical_tag_trace(period_s, true), tag_mah},
  };
  std::printf("period %.1f s, anchor LoRa %s\n", period_s, no_anchor_lora ? "off" : "on");
  std::printf("%-8s %12s %10s %12s %10s\n", "node", "avg_mW", "battery", "hours", "days");
  for (const auto& r : rows) {
    const double p = average_power(r.trace);
    const Battery b{r.mah, voltage};
    std::printf("%-8s %12.3f %7.0f mAh %12.1f %10.2f\n", r.name, p, r.mah, battery_lifetime_hours(b, p),
                battery_lifetime_days(b, p));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uwbt: UWB localization simulator, collector and reports"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Scenario file (uwbt-scenario/1 JSON)");
  app.add_option("--seed", g.seed, "Override the scenario seed");
  app.add_option("--out", g.out, "Output file (stdout when omitted)");

  std::size_t periods = 10;
  std::string log_path;
  auto* sim = app.add_subcommand("simulate", "Run the discrete-event simulation and write a report stream");
  sim->add_option("--periods", periods, "Localization periods to simulate")->check(CLI::PositiveNumber);
  sim->add_option("--log", log_path, "Also write the emitted uplinks as a binary ingest log");

  std::string input;
  int listen_port = -1;
  auto* replay = app.add_subcommand("replay", "Feed a report stream or ingest log through the collector; writes CSV");
  replay->add_option("--in", input, "Report stream or binary ingest log");
  replay->add_option("--log", log_path, "Persist ingested payloads to this ingest log");
  replay->add_option("--listen", listen_port, "Ingest live lines on 127.0.0.1:PORT until stdin closes")
      ->check(CLI::Range(0, 65535));

  std::optional<DeviceId> node;
  std::int64_t from = std::numeric_limits<std::int64_t>::min();
  std::int64_t to = std::numeric_limits<std::int64_t>::max();
  auto* report = app.add_subcommand("report", "Summarize a position CSV; --out writes the filtered CSV");
  report->add_option("--in", input, "Position CSV from replay")->required();
  report->add_option("--node", node, "Only this node");
  report->add_option("--from-ns", from, "Start of the time range, ns");
  report->add_option("--to-ns", to, "End of the time range, ns");

  std::size_t trials = 100;
  bool serial = false;
  double noise_scale = 1.0;
  auto* accuracy = app.add_subcommand("accuracy", "Monte Carlo accuracy with ground-truth and self-localized anchors");
  accuracy->add_option("--trials", trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
  accuracy->add_flag("--serial", serial, "Use the single-threaded reference runner");
  accuracy->add_option("--noise-scale", noise_scale, "Multiply timestamp and CFO noise")->check(CLI::NonNegativeNumber);

  double period_s = 40.0;
  bool no_anchor_lora = false;
  double anchor_mah = 2600.0, tag_mah = 1200.0, voltage = 3.7;
  auto* lifetime = app.add_subcommand("lifetime", "Average power and battery lifetime per node class");
  lifetime->add_option("--period", period_s, "Localization period, s")->check(CLI::PositiveNumber);
  lifetime->add_flag("--no-anchor-lora", no_anchor_lora, "Anchors stop uplinking after self-localization");
  lifetime->add_option("--anchor-mah", anchor_mah, "Anchor battery capacity")->check(CLI::PositiveNumber);
  lifetime->add_option("--tag-mah", tag_mah, "Tag battery capacity")->check(CLI::PositiveNumber);
  lifetime->add_option("--voltage", voltage, "Nominal battery voltage")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(g, periods, log_path);
    if (*replay) return cmd_replay(g, input, log_path, listen_port);
    if (*report) return cmd_report(g, input, node, from, to);
    if (*accuracy) return cmd_accuracy(g, trials, serial, noise_scale);
    if (*lifetime) return cmd_lifetime(period_s, no_anchor_lora, anchor_mah, tag_mah, voltage);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "file error: %s\n", e.what());
    return kNotFound;
  } catch (const SchemaVersionError& e) {
    std::fprintf(stderr, "version mismatch: %s\n", e.what());
    return kVersionMismatch;
  } catch (const LogFormatError& e) {
    std::fprintf(stderr, "version mismatch: %s\n", e.what());
    return kVersionMismatch;
  } catch (const ConfigParseError& e) {
    std::fprintf(stderr, "invalid scenario: %s\n", e.what());
    return kInvalid;
  } catch (const SimulationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kUsage;
}
