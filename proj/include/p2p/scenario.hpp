#pragma once

// Scenario files, run artifacts and the scaling benchmark behind the CLI.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "p2p/trading_protocol.hpp"

namespace p2p {

struct EvRangeGenerator {
  double low_center = 27.0;
  double high_center = 31.0;
  double jitter = 0.5;  // each bound drawn uniformly within +/- jitter of its center

  bool operator==(const EvRangeGenerator&) const = default;
};

/// Per-EV replacement for generated values. Index-aligned with EV 1..n.
struct EvOverride {
  std::optional<PriceBounds> range;
  std::optional<double> ev_upper;
  std::optional<EvWptSpec> wpt;
  std::optional<CostParams> params;

  bool operator==(const EvOverride&) const = default;
};

/// Defaults reproduce the 50-EV reference setup.
struct ScenarioConfig {
  std::size_t n_evs = 50;
  std::uint64_t seed = 2020;
  Direction direction = Direction::charging;
  LaneSpec lane{400.0, 0.9, 0.9, 30, 0.1, 50.0};
  EvWptSpec ev_wpt{0.95, 0.9, 50.0, 30};
  double ev_upper = 15.0;
  EvRangeGenerator ev_range;
  PriceBounds lane_range{24.0, 28.0};
  double lane_lower = -700.0;
  double eps_range = 1e-6;
  double eps_price = 1e-10;
  std::size_t max_iter = 100000;
  std::optional<CostParams> lane_params;
  std::vector<EvOverride> evs;
  bool zero_noise = false;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Throws SchemaError (unknown key, wrong type) or InvariantError (value out
/// of range); both messages name the offending key.
ScenarioConfig parse_config(const nlohmann::json& doc);

/// Throws ParseError for unreadable or malformed JSON, then as parse_config.
ScenarioConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ScenarioConfig& config);

/// Replaces the seed with $P2P_SEED when it is set. Throws InvariantError for
/// a non-numeric value.
void apply_env_overrides(ScenarioConfig& config);

/// Draws per-EV price ranges and assembles the session input.
SessionConfig make_session_config(const ScenarioConfig& config);

/// Reference setup resized to n EVs with the lane limit scaled alongside the
/// EV caps.
ScenarioConfig scaled_scenario(std::size_t n_evs, std::uint64_t seed = 2020);

inline constexpr const char* kTraceHeader = "phase,iteration,peer_id,c1,c2,lambda_est,energy";

class TraceCsvWriter {
 public:
  explicit TraceCsvWriter(const std::filesystem::path& path);

  void write(const TraceRecord& rec);
  std::size_t rows() const noexcept { return rows_; }
  TraceSink sink();

 private:
  std::ofstream out_;
  std::size_t rows_ = 0;
};

struct RunOptions {
  std::filesystem::path out_dir = ".";
  bool oracle_check = false;
  bool export_params = false;
};

struct OracleComparison {
  bool ran = false;
  std::string note;
  double price_deviation = 0.0;
  double energy_deviation = 0.0;
  bool active_set_empty = false;
};

struct RunOutcome {
  int exit_code = 0;  // 0 done, 2 failed
  SessionResult result;
  std::size_t trace_rows = 0;
  OracleComparison oracle;
};

OracleComparison compare_with_oracle(const SessionResult& result);

nlohmann::json result_to_json(const SessionResult& result, const OracleComparison& oracle, bool export_params);

/// Runs one session, writing trace.csv and result.json into out_dir.
RunOutcome run_scenario(const ScenarioConfig& config, const RunOptions& options);

struct BenchRow {
  std::size_t n_evs = 0;
  std::vector<double> samples_s;
  double median_s = 0.0;
  PhaseTimings median_phase;
  std::size_t range_iterations = 0;
  std::size_t price_iterations = 0;
  double growth = 1.0;       // median relative to the first size
  double growth_limit = 1.0; // (n / n_first)^1.5
  bool subquadratic = true;
};

/// Times the full session at each size (single thread, no trace).
std::vector<BenchRow> run_benchmark(const std::vector<std::size_t>& sizes, std::size_t repeats,
                                    std::uint64_t seed = 2020);

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

}  // namespace p2p
