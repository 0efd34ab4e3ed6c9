#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "p2p/scenario.hpp"

using namespace p2p;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("p2p_scenario_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ErrorCode parse_code(const json& doc, std::string* message = nullptr) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("config was accepted");
  return ErrorCode::InvalidParameter;
}

std::size_t count_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  return lines;
}

}  // namespace

TEST_CASE("bundled reference scenario") {
  const auto c = load_config(P2P_SCENARIO_DIR "/paper_s5.json");
  CHECK(c.n_evs == 50);
  CHECK(c.lane_range == PriceBounds{24.0, 28.0});
  CHECK(c.ev_upper == 15.0);
  CHECK(c.lane_lower == -700.0);
  REQUIRE(c.lane_params.has_value());
  CHECK(*c.lane_params == CostParams{0.0009, 30.0});
}

TEST_CASE("omitted fields take the reference defaults") {
  const auto c = parse_config(json::parse(R"({"n_evs": 5})"));
  ScenarioConfig expected;
  expected.n_evs = 5;
  CHECK(c == expected);
  CHECK(c.eps_range == 1e-6);
  CHECK(c.eps_price == 1e-10);
  CHECK(parse_config(json::object()) == ScenarioConfig{});
}

TEST_CASE("invariant violations name the key") {
  std::string msg;
  CHECK(parse_code(json::parse(R"({"lane_lower": 5})"), &msg) == ErrorCode::InvariantError);
  CHECK(msg.find("lane_lower") != std::string::npos);

  CHECK(parse_code(json::parse(R"({"n_evs": 0})"), &msg) == ErrorCode::InvariantError);
  CHECK(msg.find("n_evs") != std::string::npos);

  CHECK(parse_code(json::parse(R"({"lane_range": [28, 24]})"), &msg) == ErrorCode::InvariantError);
  CHECK(msg.find("lane_range") != std::string::npos);

  CHECK(parse_code(json::parse(R"({"ev_defaults": {"segments_passed": 31}})"), &msg) == ErrorCode::InvariantError);
  CHECK(msg.find("segments_passed") != std::string::npos);

  CHECK(parse_code(json::parse(R"({"evs": [{}, {"params": {"a": -1, "b": 2}}]})"), &msg) ==
        ErrorCode::InvariantError);
  CHECK(msg.find("evs[1].params.a") != std::string::npos);

  CHECK(parse_code(json::parse(R"({"n_evs": -3})"), &msg) == ErrorCode::InvariantError);
  CHECK(parse_code(json::parse(R"({"direction": "sideways"})"), &msg) == ErrorCode::InvariantError);
}

TEST_CASE("schema violations name the key") {
  std::string msg;
  CHECK(parse_code(json::parse(R"({"lane": {"rated_power": "high"}})"), &msg) == ErrorCode::SchemaError);
  CHECK(msg.find("lane.rated_power") != std::string::npos);

  CHECK(parse_code(json::parse(R"({"epsilon": 1e-6})"), &msg) == ErrorCode::SchemaError);
  CHECK(msg.find("epsilon") != std::string::npos);

  CHECK(parse_code(json::parse(R"({"max_iter": 2.5})"), &msg) == ErrorCode::SchemaError);
  CHECK(msg.find("max_iter") != std::string::npos);

  CHECK(parse_code(json::parse(R"({"lane_params": {"a": 1}})"), &msg) == ErrorCode::SchemaError);
  CHECK(parse_code(json::parse(R"([1, 2])"), &msg) == ErrorCode::SchemaError);
}

TEST_CASE("malformed files") {
  const auto dir = scratch("malformed");
  std::ofstream(dir / "bad.json") << "{\"n_evs\": 3,";
  try {
    load_config(dir / "bad.json");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
  }
  CHECK_THROWS_AS(load_config(dir / "missing.json"), Error);
}

TEST_CASE("config round trip") {
  ScenarioConfig c;
  c.n_evs = 3;
  c.seed = 18446744073709551615ull;
  c.direction = Direction::discharging;
  c.lane_lower = -123.456789012345678;
  c.eps_price = 3.3e-11;
  c.lane_params = CostParams{0.1 + 0.2, 30.0};
  EvOverride ov;
  ov.range = PriceBounds{26.1, 30.7};
  ov.ev_upper = 9.75;
  ov.wpt = EvWptSpec{0.9, 0.8, 40.0, 12};
  ov.params = CostParams{0.3, 27.0};
  c.evs = {ov, EvOverride{}};
  c.zero_noise = true;

  const auto once = parse_config(to_json(c));
  CHECK(once == c);
  CHECK(parse_config(json::parse(to_json(once).dump())) == c);

  const auto ref = load_config(P2P_SCENARIO_DIR "/paper_s5.json");
  CHECK(parse_config(json::parse(to_json(ref).dump())) == ref);
}

TEST_CASE("seed override from the environment") {
  ScenarioConfig c;
  ::setenv("P2P_SEED", "4242", 1);
  apply_env_overrides(c);
  CHECK(c.seed == 4242);
  ::setenv("P2P_SEED", "12abc", 1);
  CHECK_THROWS_AS(apply_env_overrides(c), Error);
  ::unsetenv("P2P_SEED");
  c.seed = 7;
  apply_env_overrides(c);
  CHECK(c.seed == 7);
}

TEST_CASE("generated EV ranges stay within the jitter") {
  ScenarioConfig c;
  c.n_evs = 200;
  EvOverride fixed;
  fixed.range = PriceBounds{20.0, 21.0};
  fixed.params = CostParams{1.0, 20.0};
  c.evs = {fixed};
  const auto s = make_session_config(c);
  REQUIRE(s.evs.size() == 200);
  CHECK(s.evs[0].initial_range == PriceBounds{20.0, 21.0});
  REQUIRE(s.ev_params.size() == 200);
  CHECK(s.ev_params[0] == CostParams{1.0, 20.0});
  CHECK_FALSE(s.ev_params[1].has_value());
  for (std::size_t i = 1; i < 200; ++i) {
    CHECK(std::abs(s.evs[i].initial_range.low - 27.0) <= 0.5);
    CHECK(std::abs(s.evs[i].initial_range.high - 31.0) <= 0.5);
  }
  CHECK(make_session_config(c).evs[5].initial_range == s.evs[5].initial_range);
}

TEST_CASE("scaled scenario keeps the per-EV selling limit") {
  const auto c = scaled_scenario(200, 9);
  CHECK(c.n_evs == 200);
  CHECK(c.seed == 9);
  CHECK(c.lane_lower == doctest::Approx(-2800.0).epsilon(1e-14));
}

TEST_CASE("run writes trace and result") {
  const auto dir = scratch("run");
  ScenarioConfig c;
  c.n_evs = 4;
  RunOptions opts;
  opts.out_dir = dir;
  opts.oracle_check = true;
  const auto out = run_scenario(c, opts);
  REQUIRE(out.exit_code == 0);
  const auto& r = out.result;

  CHECK(out.trace_rows == (r.range_iterations + r.price_iterations + 1) * 5);
  CHECK(count_lines(dir / "trace.csv") == out.trace_rows + 1);
  std::ifstream trace(dir / "trace.csv");
  std::string header;
  std::getline(trace, header);
  CHECK(header == kTraceHeader);

  std::ifstream in(dir / "result.json");
  const auto doc = json::parse(in);
  CHECK(doc["phase"] == "done");
  CHECK(doc["negotiated_range"][0].get<double>() <= doc["price"].get<double>());
  CHECK(doc["price"].get<double>() <= doc["negotiated_range"][1].get<double>());
  CHECK(doc["validation"]["ok"] == true);
  CHECK(doc["oracle"]["ran"] == true);
  CHECK(doc["oracle"]["price_deviation"].get<double>() <= 1e-6);
  CHECK(doc["oracle"]["energy_deviation"].get<double>() <= 1e-6);
  CHECK_FALSE(doc.contains("ev_params"));
  CHECK_FALSE(doc.contains("lane_params"));

  opts.export_params = true;
  run_scenario(c, opts);
  std::ifstream again(dir / "result.json");
  CHECK(json::parse(again).contains("ev_params"));
}

TEST_CASE("failed run exits with status two") {
  const auto dir = scratch("failed");
  ScenarioConfig c;
  c.n_evs = 3;
  c.max_iter = 1;
  EvOverride same;
  same.range = c.lane_range;
  c.evs = {same, same, same};
  RunOptions opts;
  opts.out_dir = dir;
  const auto out = run_scenario(c, opts);
  CHECK(out.exit_code == 2);
  std::ifstream in(dir / "result.json");
  const auto doc = json::parse(in);
  CHECK(doc["phase"] == "failed");
  CHECK(doc["failure"]["phase"] == "price");
  CHECK(doc["failure"]["code"] == "NotConverged");
}

TEST_CASE("benchmark rows") {
  const auto rows = run_benchmark({5}, 3, 1);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].samples_s.size() == 3);
  CHECK(rows[0].growth == 1.0);
  const auto dir = scratch("bench");
  write_bench_csv(rows, dir / "bench.csv");
  CHECK(count_lines(dir / "bench.csv") == 2);
  CHECK_THROWS_AS(run_benchmark({}, 1), Error);
}
