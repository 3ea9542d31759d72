#include <doctest.h>

#include <algorithm>

#include "uwbt/config.hpp"
#include "uwbt/model.hpp"

using namespace uwbt;

namespace {

DeploymentConfig small_config() {
  DeploymentConfig c;
  c.anchors = {{{1, Role::MasterAnchor}, {0, 0}, {}, {}},
               {{2, Role::PassiveAnchor}, {10, 0}, {}, {}},
               {{3, Role::PassiveAnchor}, {0, 10}, {}, {}}};
  c.tags = {{{9, Role::Tag}, {{0, {5, 5}}}, {}}};
  return c;
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("Distance rejects negative and NaN") {
  CHECK_THROWS_AS(Distance(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(Distance(std::nan("")), std::invalid_argument);
  CHECK(Distance(0.0).meters() == 0.0);
}

TEST_CASE("waypoint interpolation clamps at both ends") {
  const std::vector<Waypoint> w{{10, {0, 0}}, {20, {10, 20}}};
  CHECK(position_at(w, 0).x == 0.0);
  CHECK(position_at(w, 15).x == doctest::Approx(5.0));
  CHECK(position_at(w, 15).y == doctest::Approx(10.0));
  CHECK(position_at(w, 99).y == 20.0);
}

TEST_CASE("validate accepts a minimal deployment") { CHECK(validate(small_config()).empty()); }

TEST_CASE("validate names the offending field") {
  auto c = small_config();
  c.anchors.pop_back();
  CHECK(mentions(validate(c), "anchors"));

  c = small_config();
  c.localization_period_s = 1.0;
  CHECK(mentions(validate(c), "localization_period"));

  c = small_config();
  c.anchors[1].node.role = Role::MasterAnchor;
  CHECK(mentions(validate(c), "master"));

  c = small_config();
  c.tags[0].node.id = 2;
  CHECK(mentions(validate(c), "duplicate"));

  c = small_config();
  c.channel.loss_prob = 1.5;
  CHECK(!validate(c).empty());
}

TEST_CASE("frame anchors default to the three lowest ids") {
  auto c = small_config();
  const auto f = c.frame_anchors();
  CHECK(f.origin == 1);
  CHECK(f.x_axis == 2);
  CHECK(f.orientation == 3);
}

TEST_CASE("scenario dump parses back to the same canonical form") {
  auto c = small_config();
  c.anchors[1].moves.push_back({100.0, {12, 1}});
  c.channel.nlos.push_back({1, 2, 0.4});
  c.frame = FrameAnchors{1, 2, 3};
  const auto text = dump_config(c);
  const auto back = parse_config(text);
  CHECK(dump_config(back) == text);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(back.anchors[1].moves.at(0).to.x == 12.0);
}

TEST_CASE("config hash changes with content") {
  auto a = small_config();
  auto b = small_config();
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("schema mismatch and malformed text are distinct errors") {
  CHECK_THROWS_AS(parse_config(R"({"schema":"uwbt-scenario/2"})"), SchemaVersionError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigParseError);
  CHECK_THROWS_AS(parse_config(R"({"schema":"uwbt-scenario/1","anchors":[{"id":1,"role":"boss","x":0,"y":0}]})"),
                  ConfigParseError);
  CHECK_THROWS_AS(load_config("/nonexistent/file.cfg"), std::filesystem::filesystem_error);
}

TEST_CASE("shipped scenarios validate") {
  for (const char* name : {"field600.cfg", "zoo126.cfg"}) {
    const auto c = load_config(std::string(UWBT_SCENARIO_DIR) + "/" + name);
    CAPTURE(name);
    CHECK(validate(c).empty());
  }
}
