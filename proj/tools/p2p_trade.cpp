#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "p2p/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFailed = 2;

int cmd_run(const std::string& path, const p2p::RunOptions& opts) {
  auto config = p2p::load_config(path);
  p2p::apply_env_overrides(config);
  const auto out = p2p::run_scenario(config, opts);
  const auto& r = out.result;

  if (!r.done()) {
    std::fprintf(stderr, "session failed in %s: [%s] %s\n", p2p::to_string(r.failure->phase),
                 p2p::to_string(r.failure->code), r.failure->message.c_str());
    std::printf("trace rows: %zu\nwrote %s\n", out.trace_rows, (opts.out_dir / "result.json").c_str());
    return kExitFailed;
  }
  std::printf("n_evs            %zu\n", r.n_evs);
  std::printf("negotiated range [%.6f, %.6f] after %zu rounds\n", r.negotiated_range->low,
              r.negotiated_range->high, r.range_iterations);
  std::printf("price            %.10f after %zu rounds (peer spread %.3g)\n", r.clearing->price,
              r.price_iterations, r.peer_price_spread());
  std::printf("lane energy      %.6f kWh\n", r.clearing->lane_energy);
  std::printf("imbalance        %.3g kWh\n", r.clearing->imbalance());
  std::printf("validation       %s\n", r.validation->summary().c_str());
  if (opts.oracle_check) {
    if (out.oracle.ran) {
      std::printf("oracle           price dev %.3g, energy dev %.3g, active set %s\n",
                  out.oracle.price_deviation, out.oracle.energy_deviation,
                  out.oracle.active_set_empty ? "empty" : "nonempty");
    } else {
      std::printf("oracle           skipped (%s)\n", out.oracle.note.c_str());
    }
  }
  std::printf("trace rows: %zu\nwrote %s\n", out.trace_rows, (opts.out_dir / "result.json").c_str());
  return kExitOk;
}

int cmd_bench(const std::vector<std::size_t>& sizes, std::size_t repeats, const std::filesystem::path& out_dir,
              std::uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  const auto rows = p2p::run_benchmark(sizes, repeats, seed);
  const auto csv = out_dir / "bench.csv";
  p2p::write_bench_csv(rows, csv);

  std::printf("%6s %12s %12s %12s %8s %8s %8s\n", "n", "median_s", "range_s", "price_s", "K_range", "K_price",
              "growth");
  for (const auto& r : rows) {
    std::printf("%6zu %12.6f %12.6f %12.6f %8zu %8zu %8.2f\n", r.n_evs, r.median_s, r.median_phase.range_s,
                r.median_phase.price_s, r.range_iterations, r.price_iterations, r.growth);
  }
  std::printf("wrote %s\n", csv.c_str());
  return kExitOk;
}

int cmd_validate(const std::string& path) {
  auto config = p2p::load_config(path);
  p2p::apply_env_overrides(config);
  std::printf("%s: ok (%zu EVs, seed %llu, %s)\n", path.c_str(), config.n_evs,
              static_cast<unsigned long long>(config.seed), p2p::to_string(config.direction));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peer-to-peer energy trading between a wireless charging lane and EVs"};
  app.require_subcommand(1);

  std::string config_path;
  p2p::RunOptions run_opts;
  std::string run_out = ".";
  auto* run = app.add_subcommand("run", "run one trading session");
  run->add_option("config", config_path, "scenario JSON")->required();
  run->add_flag("--oracle-check", run_opts.oracle_check, "compare the clearing with the active-set solver");
  run->add_option("--out", run_out, "directory for trace.csv and result.json");
  run->add_flag("--export-params", run_opts.export_params, "include private cost parameters in result.json");

  std::vector<std::size_t> sizes{50, 100, 150, 200};
  std::size_t repeats = 3;
  std::string bench_out = ".";
  std::uint64_t bench_seed = 2020;
  auto* bench = app.add_subcommand("bench", "time full sessions across system sizes");
  bench->add_option("--sizes", sizes, "EV counts")->delimiter(',')->check(CLI::PositiveNumber);
  bench->add_option("--repeats", repeats, "samples per size")->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "directory for bench.csv");
  bench->add_option("--seed", bench_seed, "master seed");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a scenario file without running it");
  validate->add_option("config", validate_path, "scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run) {
      run_opts.out_dir = run_out;
      return cmd_run(config_path, run_opts);
    }
    if (*bench) return cmd_bench(sizes, repeats, bench_out, bench_seed);
    return cmd_validate(validate_path);
  } catch (const p2p::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", p2p::to_string(e.code()), e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
}
