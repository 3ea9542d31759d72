#include "uwbt/sim.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>

#include "uwbt/config.hpp"

namespace uwbt {

SimulationError::SimulationError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string s = "invalid scenario:";
        for (const auto& v : violations) s += "\n  " + v;
        return s;
      }()),
      violations_(std::move(violations)) {}

namespace {

constexpr double kDecisionOffsetS = 0.39;   // after SyncA, before the first anchor slot
constexpr double kSlotLeadInS = 1e-3;
constexpr double kWindowLeadS = 0.1;        // accounting window opens this long before S1
constexpr double kMasterStartS = 0.5;
constexpr std::uint8_t kMaxRelayHops = 2;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, const std::string& label) {
  return splitmix64(seed ^ fnv1a64(label));
}

enum class Ev : std::uint8_t {
  PeriodClose,
  Wake,
  MasterSync,
  SyncArrival,
  RelayTx,
  Decision,
  SlotBegin,
  SlotEnd,
  ActiveEnd,
  ListenOpen,
  ListenClose,
};

struct Event {
  std::int64_t t{};
  std::uint64_t seq{};
  Ev kind{Ev::Wake};
  DeviceId node{};
  std::uint64_t gen{};
  SyncMessage msg{};
  std::int64_t aux{};
};

struct Later {
  bool operator()(const Event& a, const Event& b) const { return a.t != b.t ? a.t > b.t : a.seq > b.seq; }
};

struct Node {
  NodeId id{};
  NodeClock clock{};
  Rng rng{};
  SyncState sync{};
  RelayState relay{};
  std::uint64_t gen{0};
  bool awake{false};
  std::int64_t awake_since{0};
  bool in_slot{false};
  std::int64_t slot_since{0};
  bool ranged{false};
  std::uint8_t seq{0};
  std::uint8_t labels_heard{0};
  std::vector<RangingSample> samples;
  std::vector<ActivityInterval> activity;

  bool is_master() const { return id.role == Role::MasterAnchor; }
  bool is_tag() const { return id.role == Role::Tag; }
  PowerState listen_state() const { return is_tag() ? PowerState::TagLocalization : PowerState::AnchorTransceiverOn; }
};

class Engine {
 public:
  Engine(const DeploymentConfig& config, std::size_t n_periods);
  SimReport run();

 private:
  Node& node(DeviceId id) { return nodes_.at(id); }
  void push(std::int64_t t, Ev kind, DeviceId id, std::uint64_t gen = 0, SyncMessage msg = {}, std::int64_t aux = 0) {
    queue_.push(Event{t, next_seq_++, kind, id, gen, msg, aux});
  }

  long double local_at(const Node& n, std::int64_t t_ns) const {
    return local_reading(n.clock, static_cast<long double>(t_ns) * 1e-9L);
  }
  std::int64_t true_ns(const Node& n, long double local) const {
    return static_cast<std::int64_t>(std::ceil(true_time_of(n.clock, local) * 1e9L));
  }

  Position2D position_of(DeviceId id, std::int64_t t_ns) const;
  std::optional<std::size_t> window_of(std::int64_t t_ns) const;

  void wake(Node& n);
  void sleep(Node& n);
  void plan_period(Node& n);
  void broadcast(Node& from, const SyncMessage& msg);
  void on_sync(Node& n, const SyncMessage& msg);
  void do_ranging(Node& n, const SlotWindow& slot);
  void emit_uplinks(Node& n, MsgType type, const std::vector<PeerDistance>& distances);
  void handle(const Event& e);

  const DeploymentConfig& cfg_;
  std::size_t n_periods_;
  Schedule schedule_;
  SyncParams sync_params_;
  WakeParams wake_params_;
  double period_s_;
  std::int64_t end_ns_{};
  std::vector<DeviceId> anchor_ids_;
  DeviceId master_id_{};
  std::map<DeviceId, Node> nodes_;
  Rng channel_rng_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_{0};
  std::int64_t now_{0};
  SimReport report_;
};

Engine::Engine(const DeploymentConfig& config, std::size_t n_periods)
    : cfg_(config),
      n_periods_(n_periods),
      schedule_(),
      period_s_(config.localization_period_s),
      channel_rng_(stream_seed(config.seed, "channel")) {
  anchor_ids_ = config.anchor_ids();
  const auto tag_ids = config.tag_ids();
  schedule_ = build_schedule(anchor_ids_, tag_ids, period_s_);
  sync_params_ = {schedule_.active_ms, config.sync.tolerance_ms * 1e-3, config.sync.relay_offset_ms * 1e-3};
  wake_params_ = {config.sync.wake_guard_ms * 1e-3, config.drift_bound_ppm};

  auto make_node = [&](NodeId id, std::optional<double> ppm) {
    Node n;
    n.id = id;
    n.rng.seed(stream_seed(config.seed, "node/" + std::to_string(id.id)));
    std::uniform_real_distribution<double> drift(-config.drift_bound_ppm, config.drift_bound_ppm);
    std::uniform_real_distribution<double> phase(0.0, config.phase_spread_s);
    const double drawn_ppm = config.drift_bound_ppm > 0.0 ? drift(n.rng) : 0.0;
    const double drawn_phase = config.phase_spread_s > 0.0 ? phase(n.rng) : 0.0;
    n.clock.freq_offset_ppm = ppm.value_or(drawn_ppm);
    n.clock.phase_offset_s = drawn_phase;
    nodes_.emplace(id.id, std::move(n));
  };
  for (const auto& a : config.anchors) {
    make_node(a.node, a.clock_ppm);
    if (a.node.role == Role::MasterAnchor) master_id_ = a.node.id;
  }
  for (const auto& t : config.tags) make_node(t.node, t.clock_ppm);

  report_.seed = config.seed;
  report_.config_hash = config_hash(config);
  report_.active_ms = schedule_.active_ms;
  report_.period_s = period_s_;
  report_.master = master_id_;
  for (const auto& [id, n] : nodes_) report_.clocks[id] = n.clock;

  // Period k starts when the master's clock reads O0 + k * period.
  const Node& master = nodes_.at(master_id_);
  const long double o0 = local_at(master, static_cast<std::int64_t>(kMasterStartS * 1e9));
  const auto lead = static_cast<std::int64_t>(kWindowLeadS * 1e9);
  for (std::size_t k = 0; k <= n_periods; ++k) {
    const std::int64_t start = true_ns(master, o0 + static_cast<long double>(k) * period_s_);
    if (k < n_periods) {
      PeriodRecord p;
      p.index = static_cast<std::int64_t>(k);
      p.start = SimTime{start};
      p.window_begin = SimTime{k == 0 ? 0 : start - lead};
      p.anchor_distances = DistanceMatrix(anchor_ids_);
      report_.periods.push_back(std::move(p));
    }
    if (k > 0) report_.periods[k - 1].window_end = SimTime{start - lead};
  }
  end_ns_ = report_.periods.empty() ? 0 : report_.periods.back().window_end.ns;

  for (auto& [id, n] : nodes_) {
    if (n.is_master()) {
      n.sync.status = SyncStatus::Verified;
      n.sync.origin_local = static_cast<double>(o0);
      n.sync.heard_this_period = true;
    } else {
      // Boot grid until the first sync message arrives; unsynced nodes listen continuously.
      n.sync.origin_local = static_cast<double>(local_at(n, 0));
    }
    wake(n);
    plan_period(n);
  }
  for (std::size_t k = 0; k < report_.periods.size(); ++k)
    push(report_.periods[k].window_end.ns - 1, Ev::PeriodClose, 0, 0, {}, static_cast<std::int64_t>(k));
}

Position2D Engine::position_of(DeviceId id, std::int64_t t_ns) const {
  const double t = static_cast<double>(t_ns) * 1e-9;
  if (const auto* a = cfg_.find_anchor(id)) {
    Position2D p = a->position;
    for (const auto& m : a->moves)
      if (m.at_s <= t) p = m.to;
    return p;
  }
  if (const auto* tag = cfg_.find_tag(id)) return position_at(tag->waypoints, t);
  return {};
}

std::optional<std::size_t> Engine::window_of(std::int64_t t_ns) const {
  for (std::size_t k = 0; k < report_.periods.size(); ++k) {
    const auto& p = report_.periods[k];
    if (t_ns >= p.window_begin.ns && t_ns < p.window_end.ns) return k;
  }
  return std::nullopt;
}

void Engine::wake(Node& n) {
  if (n.awake) return;
  n.awake = true;
  n.awake_since = now_;
}

void Engine::sleep(Node& n) {
  if (!n.awake || n.in_slot) return;
  if (n.sync.status == SyncStatus::Unsynced && !n.is_master()) return;  // keep listening
  n.awake = false;
  if (now_ > n.awake_since) n.activity.push_back({n.listen_state(), SimTime{n.awake_since}, SimTime{now_}});
}

void Engine::plan_period(Node& n) {
  const double origin = *n.sync.origin_local;
  ++n.gen;
  auto at = [&](double offset_s) { return true_ns(n, static_cast<long double>(origin) + offset_s); };
  auto push_future = [&](double offset_s, Ev kind, SyncMessage msg = {}) {
    const auto t = at(offset_s);
    if (t >= now_) push(t, kind, n.id.id, n.gen, msg);
  };

  if (n.is_master()) {
    for (auto label : {SyncLabel::S1, SyncLabel::S2, SyncLabel::S3})
      push_future(label_offset_s(label, schedule_.active_ms), Ev::MasterSync, SyncMessage{label, 0, master_id_});
  }
  push_future(kDecisionOffsetS, Ev::Decision);
  if (!n.is_tag()) push_future(static_cast<double>(schedule_.active_ms) * 1e-3, Ev::ActiveEnd);
  if (n.is_tag()) {
    const double before = sync_params_.tolerance_s;
    const double after = sync_params_.tolerance_s + kMaxRelayHops * sync_params_.relay_offset_s;
    for (auto label : {SyncLabel::S2, SyncLabel::S3}) {
      const double off = label_offset_s(label, schedule_.active_ms);
      push_future(off - before, Ev::ListenOpen, SyncMessage{label, 0, master_id_});
      push_future(off + after, Ev::ListenClose, SyncMessage{label, 0, master_id_});
    }
  }
  push_future(period_s_ - wake_margin_s(period_s_, wake_params_), Ev::Wake);
}

void Engine::broadcast(Node& from, const SyncMessage& msg) {
  report_.tx_log.push_back({from.id.id, TxKind::Sync, SimTime{now_}, SimTime{now_ + kUwbFrameNs}, master_id_, msg.label});
  const auto bytes = msg.encode();
  const Position2D src = position_of(from.id.id, now_);
  std::bernoulli_distribution lost(cfg_.channel.loss_prob);
  for (auto& [id, rx] : nodes_) {
    if (id == from.id.id) continue;
    const bool is_lost = lost(channel_rng_);
    const double d = distance(src, position_of(id, now_));
    if (d > cfg_.channel.range_limit_m || is_lost) continue;
    const auto arrival = now_ + static_cast<std::int64_t>(std::ceil(d / kSpeedOfLight * 1e9));
    auto decoded = SyncMessage::decode(bytes);
    push(arrival, Ev::SyncArrival, id, 0, *decoded);
    report_.deliveries.push_back({from.id.id, id, SimTime{now_}, SimTime{arrival}, d});
  }
}

void Engine::on_sync(Node& n, const SyncMessage& msg) {
  if (n.is_master() || !n.awake) return;
  const long double rx_local = local_at(n, now_);
  const double candidate = static_cast<double>(rx_local) - label_offset_s(msg.label, schedule_.active_ms) -
                           msg.hop * sync_params_.relay_offset_s;
  // A message implying an origin more than half a period away belongs to a new period.
  if (n.sync.origin_local && std::abs(candidate - *n.sync.origin_local) > period_s_ / 2.0) {
    n.sync = begin_period(n.sync, 0.0);
    n.relay = {};
    n.labels_heard = 0;
  }

  if (n.id.role == Role::RelayAnchor && msg.hop < kMaxRelayHops) {
    if (auto rt = relay_behavior(n.relay, msg, sync_params_))
      push(true_ns(n, rx_local + rt->delay_s), Ev::RelayTx, n.id.id, 0, rt->msg);
  }
  // A relayed copy of the label just handled carries no new information.
  if (n.sync.last_sync_label == msg.label) return;

  const auto before = n.sync.last_sync_label;
  const auto result = sync_step(n.sync, SyncReception{msg, static_cast<double>(rx_local)}, sync_params_);
  n.sync = result.state;
  if (n.sync.last_sync_label != before) ++n.labels_heard;

  if (std::abs(result.timer_adjustment) > 1e-6 || before == std::nullopt) plan_period(n);
  if (n.is_tag()) sleep(n);
}

void Engine::do_ranging(Node& n, const SlotWindow& slot) {
  const double origin = *n.sync.origin_local;
  const double budget = exchange_budget_s(cfg_);
  std::vector<DeviceId> peers;
  for (auto id : anchor_ids_)
    if (id != n.id.id) peers.push_back(id);

  const auto noise = noise_from(cfg_.channel);
  const auto window = window_of(now_);
  TagObservation obs;
  n.samples.clear();
  for (std::size_t i = 0; i < peers.size(); ++i) {
    Node& peer = node(peers[i]);
    const long double start_local =
        static_cast<long double>(origin) + slot.start_ms * 1e-3L + kSlotLeadInS + static_cast<long double>(i) * budget;
    const std::int64_t t = true_ns(n, start_local);
    const Position2D pi = position_of(n.id.id, t);
    const double true_d = distance(pi, position_of(peer.id.id, t));
    const double path = true_d + cfg_.channel.nlos_bias(n.id.id, peer.id.id);

    auto s = sstwr_exchange(n.clock, peer.clock, Distance{path}, cfg_.reply_delay_s, noise, n.rng,
                            static_cast<long double>(t) * 1e-9L);
    s.initiator = n.id.id;
    s.responder = peer.id.id;
    const bool reachable = peer.awake && true_d <= cfg_.channel.range_limit_m;
    if (!reachable) s.valid = false;

    report_.tx_log.push_back({n.id.id, TxKind::Poll, SimTime{t}, SimTime{t + kUwbFrameNs}, n.id.id, SyncLabel::S1});
    if (reachable) {
      const auto rtx = static_cast<std::int64_t>(std::llroundl(s.response_tx_s * 1e9L));
      report_.tx_log.push_back({peer.id.id, TxKind::Response, SimTime{rtx}, SimTime{rtx + kUwbFrameNs}, n.id.id,
                                SyncLabel::S1});
    }

    if (n.is_tag()) {
      if (i == 0) {
        obs.time = SimTime{t};
        obs.truth = pi;
      }
      obs.ranges.push_back({peer.id.id, s.valid ? std::optional<double>(s.distance.meters()) : std::nullopt, true_d});
    } else if (window && s.valid) {
      report_.periods[*window].anchor_distances.add_measurement(n.id.id, peer.id.id, s.distance.meters());
    }
    n.samples.push_back(s);
  }
  n.ranged = true;
  if (n.is_tag() && window) report_.periods[*window].tags[n.id.id] = std::move(obs);
}

void Engine::emit_uplinks(Node& n, MsgType type, const std::vector<PeerDistance>& distances) {
  const auto frames = split_report(n.id.id, type, n.seq, distances, cfg_.uplink.battery_mv);
  const auto airtime = static_cast<std::int64_t>(std::llround(cfg_.uplink.airtime_s * 1e9));
  std::int64_t tx = now_;
  for (const auto& f : frames) {
    ++n.seq;
    n.activity.push_back({PowerState::LoraTx, SimTime{tx}, SimTime{tx + airtime}});
    if (auto w = window_of(tx)) report_.periods[*w].uplinks.push_back({SimTime{tx + airtime}, encode(f)});
    tx += airtime;
  }
}

void Engine::handle(const Event& e) {
  if (e.kind == Ev::PeriodClose) {
    auto& p = report_.periods[static_cast<std::size_t>(e.aux)];
    for (auto& [id, n] : nodes_) p.sync[id] = {n.sync.status, n.labels_heard, n.sync.anomalies};
    for (const auto& a : cfg_.anchors) p.anchor_truth[a.node.id] = position_of(a.node.id, p.start.ns);
    return;
  }

  Node& n = node(e.node);
  const bool stale = e.gen != n.gen;

  switch (e.kind) {
    case Ev::MasterSync:
      if (!stale) broadcast(n, e.msg);
      break;
    case Ev::RelayTx:
      broadcast(n, e.msg);
      break;
    case Ev::SyncArrival:
      on_sync(n, e.msg);
      break;
    case Ev::Wake: {
      if (stale) break;
      if (!n.is_master()) {
        n.sync = sync_step(n.sync, SyncTimeout{}, sync_params_).state;
        n.sync = begin_period(n.sync, period_s_);
      } else {
        n.sync.origin_local = *n.sync.origin_local + period_s_;
        n.sync.heard_this_period = true;
      }
      n.relay = {};
      n.labels_heard = 0;
      n.ranged = false;
      n.samples.clear();
      wake(n);
      plan_period(n);
      break;
    }
    case Ev::Decision: {
      if (stale) break;
      const bool synced = n.is_master() || (n.sync.heard_this_period && n.sync.status != SyncStatus::Unsynced);
      if (synced) {
        if (const auto* slot = schedule_.slot_of(n.id.id)) {
          const double origin = *n.sync.origin_local;
          push(true_ns(n, static_cast<long double>(origin) + slot->start_ms * 1e-3L), Ev::SlotBegin, n.id.id, n.gen);
          push(true_ns(n, static_cast<long double>(origin) + slot->end_ms() * 1e-3L), Ev::SlotEnd, n.id.id, n.gen);
        }
      } else if (n.is_tag()) {
        sleep(n);
      }
      break;
    }
    case Ev::SlotBegin: {
      if (stale) break;
      wake(n);
      n.in_slot = true;
      n.slot_since = now_;
      if (const auto* slot = schedule_.slot_of(n.id.id)) do_ranging(n, *slot);
      break;
    }
    case Ev::SlotEnd: {
      if (stale) break;
      n.in_slot = false;
      if (n.is_tag()) {
        n.activity.push_back({PowerState::TagLocalization, SimTime{n.slot_since}, SimTime{now_}});
        sleep(n);
        std::vector<PeerDistance> d;
        for (const auto& s : n.samples)
          d.push_back({s.responder, s.valid ? std::optional<double>(s.distance.meters()) : std::nullopt});
        emit_uplinks(n, MsgType::TagLocalization, d);
      } else {
        n.activity.push_back({PowerState::AnchorSelfLoc, SimTime{n.slot_since}, SimTime{now_}});
      }
      break;
    }
    case Ev::ActiveEnd: {
      if (stale) break;
      sleep(n);
      if (cfg_.uplink.anchor_lora) {
        std::vector<PeerDistance> d;
        for (const auto& s : n.samples)
          d.push_back({s.responder, s.valid ? std::optional<double>(s.distance.meters()) : std::nullopt});
        emit_uplinks(n, MsgType::AnchorSelfLoc, d);
      }
      break;
    }
    case Ev::ListenOpen:
      if (stale) break;
      if (!n.sync.last_sync_label || static_cast<int>(*n.sync.last_sync_label) < static_cast<int>(e.msg.label)) wake(n);
      break;
    case Ev::ListenClose:
      if (!stale) sleep(n);
      break;
    case Ev::PeriodClose:
      break;
  }
}

SimReport Engine::run() {
  while (!queue_.empty()) {
    Event e = queue_.top();
    if (e.t >= end_ns_) break;
    queue_.pop();
    now_ = e.t;
    handle(e);
  }
  now_ = end_ns_;
  for (auto& [id, n] : nodes_) {
    if (n.awake && now_ > n.awake_since) n.activity.push_back({n.listen_state(), SimTime{n.awake_since}, SimTime{now_}});
    if (n.in_slot) {
      const auto s = n.is_tag() ? PowerState::TagLocalization : PowerState::AnchorSelfLoc;
      n.activity.push_back({s, SimTime{n.slot_since}, SimTime{now_}});
    }
  }
  for (auto& p : report_.periods) {
    for (const auto& [id, n] : nodes_)
      p.traces.push_back(trace_from_simulation(id, n.activity, p.window_begin, p.window_end));
    std::stable_sort(p.uplinks.begin(), p.uplinks.end(),
                     [](const UplinkMessage& a, const UplinkMessage& b) { return a.rx < b.rx; });
  }
  return std::move(report_);
}

void appendf(std::string& out, const char* fmt, ...) __attribute__((format(printf, 2, 3)));
void appendf(std::string& out, const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  const int n = std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  if (n > 0) out.append(buf, static_cast<std::size_t>(std::min<int>(n, sizeof buf - 1)));
}

}  // namespace

SimReport run(const DeploymentConfig& config, std::size_t n_periods) {
  auto violations = validate(config);
  if (!violations.empty()) throw SimulationError(std::move(violations));
  Engine engine(config, n_periods);
  return engine.run();
}

std::string serialize(const SimReport& r) {
  std::string out;
  out += kReportStreamHeader;
  out += '\n';
  appendf(out, "H seed=%" PRIu64 " config=%016" PRIx64 " active_ms=%" PRId64 " period_s=%.6f periods=%zu master=%u\n",
          r.seed, r.config_hash, r.active_ms, r.period_s, r.periods.size(), static_cast<unsigned>(r.master));
  for (const auto& [id, c] : r.clocks)
    appendf(out, "C %u ppm=%.6f phase=%.9f\n", static_cast<unsigned>(id), c.freq_offset_ppm, c.phase_offset_s);
  for (const auto& p : r.periods) {
    appendf(out, "P %" PRId64 " start_ns=%" PRId64 " begin_ns=%" PRId64 " end_ns=%" PRId64 "\n", p.index, p.start.ns,
            p.window_begin.ns, p.window_end.ns);
    for (const auto& [id, pos] : p.anchor_truth)
      appendf(out, "A %" PRId64 " %u %.4f %.4f\n", p.index, static_cast<unsigned>(id), pos.x, pos.y);
    const auto& dm = p.anchor_distances;
    for (std::size_t i = 0; i < dm.size(); ++i)
      for (std::size_t j = 0; j < dm.size(); ++j)
        if (auto d = dm.directed(i, j))
          appendf(out, "D %" PRId64 " %u %u %.6f\n", p.index, static_cast<unsigned>(dm.ids()[i]),
                  static_cast<unsigned>(dm.ids()[j]), *d);
    for (const auto& [tag, obs] : p.tags) {
      appendf(out, "X %" PRId64 " %u %" PRId64 " %.4f %.4f\n", p.index, static_cast<unsigned>(tag), obs.time.ns,
              obs.truth.x, obs.truth.y);
      for (const auto& rg : obs.ranges) {
        if (rg.distance_m)
          appendf(out, "R %" PRId64 " %u %u %.6f\n", p.index, static_cast<unsigned>(tag),
                  static_cast<unsigned>(rg.anchor), *rg.distance_m);
        else
          appendf(out, "R %" PRId64 " %u %u -\n", p.index, static_cast<unsigned>(tag), static_cast<unsigned>(rg.anchor));
      }
    }
    for (const auto& u : p.uplinks) out += format_ingest_line(u) + "\n";
    for (const auto& t : p.traces) {
      appendf(out, "S %" PRId64 " %u", p.index, static_cast<unsigned>(t.node));
      for (const auto& seg : t.segments) appendf(out, " %s=%.9f", to_string(seg.state).c_str(), seg.duration_s);
      out += '\n';
    }
    for (const auto& [id, s] : p.sync)
      appendf(out, "Y %" PRId64 " %u %s %u %u\n", p.index, static_cast<unsigned>(id), to_string(s.status).c_str(),
              static_cast<unsigned>(s.labels_heard), s.anomalies);
  }
  return out;
}

bool replay_check(const SimReport& a, const SimReport& b) { return serialize(a) == serialize(b); }

namespace {

struct TrueWindow {
  std::int64_t begin, end;
};

}  // namespace

std::vector<std::string> check_slot_conformance(const SimReport& report, const DeploymentConfig& config) {
  std::vector<std::string> issues;
  if (report.periods.empty()) return issues;
  const auto schedule = build_schedule(config.anchor_ids(), config.tag_ids(), report.period_s);
  const long double rate = report.clocks.at(report.master).rate();

  auto window_for = [&](std::size_t k, const SlotWindow& w) {
    const std::int64_t s = report.periods[k].start.ns;
    return TrueWindow{s + static_cast<std::int64_t>(std::floor(w.start_ms * 1e6L / rate)),
                      s + static_cast<std::int64_t>(std::floor(w.end_ms() * 1e6L / rate))};
  };

  for (const auto& tx : report.tx_log) {
    std::optional<std::size_t> k;
    for (std::size_t i = 0; i < report.periods.size(); ++i)
      if (report.periods[i].start.ns <= tx.begin.ns) k = i;
    if (!k) {
      issues.push_back("node " + std::to_string(tx.node) + " transmitted before the first sync at " +
                       std::to_string(tx.begin.ns) + " ns");
      continue;
    }
    const SlotWindow* w = nullptr;
    if (tx.kind == TxKind::Sync) {
      w = &schedule.window(tx.label == SyncLabel::S3 ? SlotKind::SyncD : SlotKind::SyncA);
    } else {
      w = schedule.slot_of(tx.slot_owner);
    }
    if (!w) {
      issues.push_back("node " + std::to_string(tx.node) + " has no slot");
      continue;
    }
    const auto tw = window_for(*k, *w);
    if (tx.begin.ns < tw.begin || tx.end.ns > tw.end) {
      issues.push_back("node " + std::to_string(tx.node) + " transmitted [" + std::to_string(tx.begin.ns) + ", " +
                       std::to_string(tx.end.ns) + "] outside " + to_string(w->kind) + " window [" +
                       std::to_string(tw.begin) + ", " + std::to_string(tw.end) + ") of period " + std::to_string(*k));
    }
  }
  return issues;
}

std::vector<std::string> check_slot_exclusivity(const SimReport& report) {
  struct Span {
    DeviceId owner;
    std::int64_t begin, end;
  };
  std::vector<Span> spans;
  for (const auto& tx : report.tx_log) {
    if (tx.kind == TxKind::Sync) continue;
    if (!spans.empty() && spans.back().owner == tx.slot_owner && tx.begin.ns - spans.back().end < 100'000'000) {
      spans.back().begin = std::min(spans.back().begin, tx.begin.ns);
      spans.back().end = std::max(spans.back().end, tx.end.ns);
    } else {
      spans.push_back({tx.slot_owner, tx.begin.ns, tx.end.ns});
    }
  }
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.begin < b.begin; });
  std::vector<std::string> issues;
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].owner != spans[i - 1].owner && spans[i].begin < spans[i - 1].end)
      issues.push_back("initiators " + std::to_string(spans[i - 1].owner) + " and " + std::to_string(spans[i].owner) +
                       " overlap at " + std::to_string(spans[i].begin) + " ns");
  }
  return issues;
}

}  // namespace uwbt
