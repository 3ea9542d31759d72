#include "uwbt/config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace uwbt {

using nlohmann::ordered_json;

namespace {

template <typename T>
T get_or(const ordered_json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigParseError(std::string("field '") + key + "': " + e.what());
  }
}

NodeId parse_node(const ordered_json& j, Role fallback) {
  NodeId n;
  n.id = get_or<DeviceId>(j, "id", 0);
  const auto role = get_or<std::string>(j, "role", to_string(fallback));
  auto r = parse_role(role);
  if (!r) throw ConfigParseError("unknown role '" + role + "'");
  n.role = *r;
  return n;
}

Position2D parse_xy(const ordered_json& j) {
  if (!j.contains("x") || !j.contains("y")) throw ConfigParseError("position needs x and y");
  return {j.at("x").get<double>(), j.at("y").get<double>()};
}

}  // namespace

DeploymentConfig parse_config(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigParseError(std::string("scenario parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigParseError("scenario must be an object");
  const auto schema = get_or<std::string>(j, "schema", "");
  if (schema != kScenarioSchema)
    throw SchemaVersionError("scenario schema '" + schema + "' is not '" + kScenarioSchema + "'");

  DeploymentConfig c;
  try {
    c.name = get_or<std::string>(j, "name", "");
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.localization_period_s = get_or<double>(j, "localization_period_s", c.localization_period_s);

    if (j.contains("clock")) {
      const auto& k = j.at("clock");
      c.drift_bound_ppm = get_or<double>(k, "drift_bound_ppm", c.drift_bound_ppm);
      c.phase_spread_s = get_or<double>(k, "phase_spread_s", c.phase_spread_s);
    }
    if (j.contains("ranging")) c.reply_delay_s = get_or<double>(j.at("ranging"), "reply_delay_ms", 1.0) * 1e-3;

    for (const auto& a : j.value("anchors", ordered_json::array())) {
      AnchorSpec s;
      s.node = parse_node(a, Role::PassiveAnchor);
      s.position = parse_xy(a);
      if (a.contains("clock_ppm")) s.clock_ppm = a.at("clock_ppm").get<double>();
      for (const auto& m : a.value("moves", ordered_json::array()))
        s.moves.push_back({m.at("at_s").get<double>(), parse_xy(m)});
      c.anchors.push_back(std::move(s));
    }
    for (const auto& t : j.value("tags", ordered_json::array())) {
      TagSpec s;
      s.node = parse_node(t, Role::Tag);
      if (t.contains("clock_ppm")) s.clock_ppm = t.at("clock_ppm").get<double>();
      for (const auto& w : t.value("waypoints", ordered_json::array())) {
        if (!w.is_array() || w.size() != 3) throw ConfigParseError("waypoint must be [t_s, x, y]");
        s.waypoints.push_back({w[0].get<double>(), {w[1].get<double>(), w[2].get<double>()}});
      }
      c.tags.push_back(std::move(s));
    }

    if (j.contains("frame")) {
      const auto& f = j.at("frame");
      c.frame = FrameAnchors{f.at("origin").get<DeviceId>(), f.at("x_axis").get<DeviceId>(),
                             f.at("orientation").get<DeviceId>()};
    }

    if (j.contains("channel")) {
      const auto& ch = j.at("channel");
      c.channel.range_limit_m = get_or<double>(ch, "range_limit_m", c.channel.range_limit_m);
      c.channel.loss_prob = get_or<double>(ch, "loss_prob", c.channel.loss_prob);
      c.channel.timestamp_noise_s = get_or<double>(ch, "timestamp_noise_ns", c.channel.timestamp_noise_s * 1e9) * 1e-9;
      c.channel.cfo_noise_ppm = get_or<double>(ch, "cfo_noise_ppm", c.channel.cfo_noise_ppm);
      for (const auto& l : ch.value("nlos", ordered_json::array()))
        c.channel.nlos.push_back({l.at("a").get<DeviceId>(), l.at("b").get<DeviceId>(), l.at("bias_m").get<double>()});
    }
    if (j.contains("sync")) {
      const auto& s = j.at("sync");
      c.sync.wake_guard_ms = get_or<double>(s, "wake_guard_ms", c.sync.wake_guard_ms);
      c.sync.relay_offset_ms = get_or<double>(s, "relay_offset_ms", c.sync.relay_offset_ms);
      c.sync.tolerance_ms = get_or<double>(s, "tolerance_ms", c.sync.tolerance_ms);
    }
    if (j.contains("uplink")) {
      const auto& u = j.at("uplink");
      c.uplink.anchor_lora = get_or<bool>(u, "anchor_lora", c.uplink.anchor_lora);
      c.uplink.airtime_s = get_or<double>(u, "airtime_s", c.uplink.airtime_s);
      c.uplink.battery_mv = get_or<std::uint16_t>(u, "battery_mv", c.uplink.battery_mv);
    }
    if (j.contains("collector")) {
      const auto& k = j.at("collector");
      c.collector.displacement_threshold_m =
          get_or<double>(k, "displacement_threshold_m", c.collector.displacement_threshold_m);
      c.collector.window = get_or<std::size_t>(k, "window", c.collector.window);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigParseError(std::string("scenario field error: ") + e.what());
  }
  return c;
}

DeploymentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::filesystem::filesystem_error("cannot open scenario", path,
                                                   std::make_error_code(std::errc::no_such_file_or_directory));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const DeploymentConfig& c) {
  ordered_json j;
  j["schema"] = kScenarioSchema;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["localization_period_s"] = c.localization_period_s;
  j["clock"] = {{"drift_bound_ppm", c.drift_bound_ppm}, {"phase_spread_s", c.phase_spread_s}};
  j["ranging"] = {{"reply_delay_ms", c.reply_delay_s * 1e3}};
  j["anchors"] = ordered_json::array();
  for (const auto& a : c.anchors) {
    ordered_json e{{"id", a.node.id}, {"role", to_string(a.node.role)}, {"x", a.position.x}, {"y", a.position.y}};
    if (a.clock_ppm) e["clock_ppm"] = *a.clock_ppm;
    if (!a.moves.empty()) {
      e["moves"] = ordered_json::array();
      for (const auto& m : a.moves) e["moves"].push_back({{"at_s", m.at_s}, {"x", m.to.x}, {"y", m.to.y}});
    }
    j["anchors"].push_back(std::move(e));
  }
  j["tags"] = ordered_json::array();
  for (const auto& t : c.tags) {
    ordered_json e{{"id", t.node.id}};
    if (t.clock_ppm) e["clock_ppm"] = *t.clock_ppm;
    e["waypoints"] = ordered_json::array();
    for (const auto& w : t.waypoints) e["waypoints"].push_back({w.t_s, w.p.x, w.p.y});
    j["tags"].push_back(std::move(e));
  }
  if (c.frame) j["frame"] = {{"origin", c.frame->origin}, {"x_axis", c.frame->x_axis}, {"orientation", c.frame->orientation}};
  ordered_json ch{{"range_limit_m", c.channel.range_limit_m},
                  {"loss_prob", c.channel.loss_prob},
                  {"timestamp_noise_ns", c.channel.timestamp_noise_s * 1e9},
                  {"cfo_noise_ppm", c.channel.cfo_noise_ppm}};
  ch["nlos"] = ordered_json::array();
  for (const auto& l : c.channel.nlos) ch["nlos"].push_back({{"a", l.a}, {"b", l.b}, {"bias_m", l.bias_m}});
  j["channel"] = std::move(ch);
  j["sync"] = {{"wake_guard_ms", c.sync.wake_guard_ms},
               {"relay_offset_ms", c.sync.relay_offset_ms},
               {"tolerance_ms", c.sync.tolerance_ms}};
  j["uplink"] = {{"anchor_lora", c.uplink.anchor_lora},
                 {"airtime_s", c.uplink.airtime_s},
                 {"battery_mv", c.uplink.battery_mv}};
  j["collector"] = {{"displacement_threshold_m", c.collector.displacement_threshold_m},
                    {"window", c.collector.window}};
  return j.dump(2) + "\n";
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const DeploymentConfig& config) { return fnv1a64(dump_config(config)); }

}  // namespace uwbt
