#include "p2p/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>

#include "p2p/kkt_oracle.hpp"
#include "p2p/rng.hpp"

namespace p2p {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::SchemaError, key + ": " + what);
}

[[noreturn]] void invariant_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::InvariantError, key + ": " + what);
}

// Reads one JSON object, remembering which keys were consumed so that
// anything left over can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) schema_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

  const json* find(const std::string& name) {
    seen_.insert(name);
    auto it = obj_.find(name);
    return it == obj_.end() ? nullptr : &*it;
  }

  void number(const std::string& name, double& out) {
    if (const json* v = find(name)) {
      if (!v->is_number()) schema_error(key(name), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) invariant_error(key(name), "must be finite");
    }
  }

  template <typename Int>
  void integer(const std::string& name, Int& out) {
    if (const json* v = find(name)) {
      if (!v->is_number_integer()) schema_error(key(name), "expected an integer");
      if (v->is_number_unsigned()) {
        const auto u = v->get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) {
          invariant_error(key(name), "out of range");
        }
        out = static_cast<Int>(u);
      } else {
        const auto s = v->get<std::int64_t>();
        if (std::is_unsigned_v<Int> && s < 0) invariant_error(key(name), "must not be negative");
        out = static_cast<Int>(s);
      }
    }
  }

  void boolean(const std::string& name, bool& out) {
    if (const json* v = find(name)) {
      if (!v->is_boolean()) schema_error(key(name), "expected true or false");
      out = v->get<bool>();
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) schema_error(key(it.key()), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

PriceBounds read_range(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    schema_error(key, "expected [low, high]");
  }
  PriceBounds r{v[0].get<double>(), v[1].get<double>()};
  if (!(std::isfinite(r.low) && std::isfinite(r.high) && r.low < r.high)) {
    invariant_error(key, "needs finite low < high");
  }
  return r;
}

CostParams read_params(const json& v, const std::string& key) {
  ObjectReader r(v, key);
  CostParams p{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  if (!r.find("a") || !r.find("b")) schema_error(key, "needs both a and b");
  r.number("a", p.a);
  r.number("b", p.b);
  r.finish();
  if (!(p.a > 0.0)) invariant_error(r.key("a"), "must be positive");
  if (!(p.b >= 0.0)) invariant_error(r.key("b"), "must not be negative");
  return p;
}

void read_wpt(ObjectReader& r, EvWptSpec& wpt) {
  r.number("charge_eff", wpt.charge_eff);
  r.number("discharge_eff", wpt.discharge_eff);
  r.number("discharge_power", wpt.discharge_power);
  r.integer("segments_passed", wpt.segments_passed);
}

void check_wpt(const EvWptSpec& wpt, const LaneSpec& lane, const std::string& key) {
  try {
    wpt.validate();
  } catch (const Error& e) {
    invariant_error(key, e.what());
  }
  if (wpt.segments_passed > lane.segment_count) {
    invariant_error(key + ".segments_passed", "exceeds lane.segment_count");
  }
}

void check(const ScenarioConfig& c) {
  if (c.n_evs < 1) invariant_error("n_evs", "must be at least 1");
  try {
    c.lane.validate();
  } catch (const Error& e) {
    invariant_error("lane", e.what());
  }
  check_wpt(c.ev_wpt, c.lane, "ev_defaults");
  if (!(c.ev_upper > 0.0)) invariant_error("ev_defaults.ev_upper", "must be positive");
  if (!(c.lane_lower < 0.0)) invariant_error("lane_lower", "must be negative");
  if (!(c.lane_range.low < c.lane_range.high)) invariant_error("lane_range", "needs low < high");
  const auto& g = c.ev_range;
  if (!(g.jitter >= 0.0)) invariant_error("ev_range.jitter", "must not be negative");
  if (!(g.low_center + g.jitter < g.high_center - g.jitter)) {
    invariant_error("ev_range", "jittered low and high bounds may cross");
  }
  if (!(c.eps_range > 0.0)) invariant_error("eps_range", "must be positive");
  if (!(c.eps_price > 0.0)) invariant_error("eps_price", "must be positive");
  if (c.max_iter < 1) invariant_error("max_iter", "must be at least 1");
  if (c.evs.size() > c.n_evs) invariant_error("evs", "more entries than n_evs");
  for (std::size_t i = 0; i < c.evs.size(); ++i) {
    const auto& ev = c.evs[i];
    const std::string key = "evs[" + std::to_string(i) + "]";
    if (ev.ev_upper && !(*ev.ev_upper > 0.0)) invariant_error(key + ".ev_upper", "must be positive");
    if (ev.wpt) check_wpt(*ev.wpt, c.lane, key + ".wpt");
  }
}

json wpt_json(const EvWptSpec& w) {
  return {{"charge_eff", w.charge_eff},
          {"discharge_eff", w.discharge_eff},
          {"discharge_power", w.discharge_power},
          {"segments_passed", w.segments_passed}};
}

json params_json(const CostParams& p) { return {{"a", p.a}, {"b", p.b}}; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

ScenarioConfig parse_config(const json& doc) {
  ScenarioConfig c;
  ObjectReader root(doc, "");

  root.integer("n_evs", c.n_evs);
  root.integer("seed", c.seed);
  if (const json* v = root.find("direction")) {
    if (!v->is_string()) schema_error("direction", "expected a string");
    const auto s = v->get<std::string>();
    if (s == "charging") {
      c.direction = Direction::charging;
    } else if (s == "discharging") {
      c.direction = Direction::discharging;
    } else {
      invariant_error("direction", "expected charging or discharging, got " + s);
    }
  }
  if (const json* v = root.find("lane")) {
    ObjectReader r(*v, "lane");
    r.number("rated_power", c.lane.rated_power);
    r.number("discharge_eff", c.lane.discharge_eff);
    r.number("charge_eff", c.lane.charge_eff);
    r.integer("segment_count", c.lane.segment_count);
    r.number("segment_length", c.lane.segment_length);
    r.number("design_speed", c.lane.design_speed);
    r.finish();
  }
  if (const json* v = root.find("ev_defaults")) {
    ObjectReader r(*v, "ev_defaults");
    read_wpt(r, c.ev_wpt);
    r.number("ev_upper", c.ev_upper);
    r.finish();
  }
  if (const json* v = root.find("ev_range")) {
    ObjectReader r(*v, "ev_range");
    r.number("low_center", c.ev_range.low_center);
    r.number("high_center", c.ev_range.high_center);
    r.number("jitter", c.ev_range.jitter);
    r.finish();
  }
  if (const json* v = root.find("lane_range")) c.lane_range = read_range(*v, "lane_range");
  root.number("lane_lower", c.lane_lower);
  root.number("eps_range", c.eps_range);
  root.number("eps_price", c.eps_price);
  root.integer("max_iter", c.max_iter);
  if (const json* v = root.find("lane_params")) c.lane_params = read_params(*v, "lane_params");
  if (const json* v = root.find("evs")) {
    if (!v->is_array()) schema_error("evs", "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string key = "evs[" + std::to_string(i) + "]";
      ObjectReader r((*v)[i], key);
      EvOverride ev;
      if (const json* range = r.find("range")) ev.range = read_range(*range, key + ".range");
      if (r.find("ev_upper")) {
        double upper = 0.0;
        r.number("ev_upper", upper);
        ev.ev_upper = upper;
      }
      if (const json* w = r.find("wpt")) {
        ObjectReader wr(*w, key + ".wpt");
        EvWptSpec wpt = c.ev_wpt;
        read_wpt(wr, wpt);
        wr.finish();
        ev.wpt = wpt;
      }
      if (const json* p = r.find("params")) ev.params = read_params(*p, key + ".params");
      r.finish();
      c.evs.push_back(ev);
    }
  }
  root.boolean("zero_noise", c.zero_noise);
  root.finish();

  check(c);
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ScenarioConfig& c) {
  json doc;
  doc["n_evs"] = c.n_evs;
  doc["seed"] = c.seed;
  doc["direction"] = to_string(c.direction);
  doc["lane"] = {{"rated_power", c.lane.rated_power},       {"discharge_eff", c.lane.discharge_eff},
                 {"charge_eff", c.lane.charge_eff},         {"segment_count", c.lane.segment_count},
                 {"segment_length", c.lane.segment_length}, {"design_speed", c.lane.design_speed}};
  doc["ev_defaults"] = wpt_json(c.ev_wpt);
  doc["ev_defaults"]["ev_upper"] = c.ev_upper;
  doc["ev_range"] = {{"low_center", c.ev_range.low_center},
                     {"high_center", c.ev_range.high_center},
                     {"jitter", c.ev_range.jitter}};
  doc["lane_range"] = {c.lane_range.low, c.lane_range.high};
  doc["lane_lower"] = c.lane_lower;
  doc["eps_range"] = c.eps_range;
  doc["eps_price"] = c.eps_price;
  doc["max_iter"] = c.max_iter;
  if (c.lane_params) doc["lane_params"] = params_json(*c.lane_params);
  if (!c.evs.empty()) {
    json evs = json::array();
    for (const auto& ev : c.evs) {
      json e = json::object();
      if (ev.range) e["range"] = {ev.range->low, ev.range->high};
      if (ev.ev_upper) e["ev_upper"] = *ev.ev_upper;
      if (ev.wpt) e["wpt"] = wpt_json(*ev.wpt);
      if (ev.params) e["params"] = params_json(*ev.params);
      evs.push_back(e);
    }
    doc["evs"] = evs;
  }
  doc["zero_noise"] = c.zero_noise;
  return doc;
}

void apply_env_overrides(ScenarioConfig& config) {
  const char* raw = std::getenv("P2P_SEED");
  if (!raw) return;
  const std::string s(raw);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || s.front() == '-') invariant_error("P2P_SEED", "not an unsigned integer: " + s);
  config.seed = v;
}

SessionConfig make_session_config(const ScenarioConfig& c) {
  SessionConfig s;
  s.lane = c.lane;
  s.lane_range = c.lane_range;
  s.lane_lower = c.lane_lower;
  s.direction = c.direction;
  s.eps_range = c.eps_range;
  s.eps_price = c.eps_price;
  s.max_iter = c.max_iter;
  s.seed = c.seed;
  s.lane_params = c.lane_params;
  s.zero_noise = c.zero_noise;

  bool any_forced = false;
  s.evs.reserve(c.n_evs);
  for (std::size_t i = 0; i < c.n_evs; ++i) {
    const PeerId id = i + 1;
    const EvOverride none;
    const EvOverride& ov = i < c.evs.size() ? c.evs[i] : none;

    auto rng = make_stream(c.seed, Stream::range_jitter, id);
    std::uniform_real_distribution<double> jitter(-c.ev_range.jitter, c.ev_range.jitter);
    const double low = c.ev_range.low_center + jitter(rng);
    const double high = c.ev_range.high_center + jitter(rng);

    EvSetup ev;
    ev.wpt = ov.wpt.value_or(c.ev_wpt);
    ev.initial_range = ov.range.value_or(PriceBounds{low, high});
    ev.max_energy = ov.ev_upper.value_or(c.ev_upper);
    s.evs.push_back(ev);
    any_forced = any_forced || ov.params.has_value();
  }
  if (any_forced) {
    s.ev_params.resize(c.n_evs);
    for (std::size_t i = 0; i < c.evs.size(); ++i) s.ev_params[i] = c.evs[i].params;
  }
  return s;
}

ScenarioConfig scaled_scenario(std::size_t n_evs, std::uint64_t seed) {
  ScenarioConfig c;
  const double per_ev_limit = c.lane_lower / static_cast<double>(c.n_evs);
  c.n_evs = n_evs;
  c.seed = seed;
  c.lane_lower = per_ev_limit * static_cast<double>(n_evs);
  return c;
}

TraceCsvWriter::TraceCsvWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  out_ << kTraceHeader << '\n' << std::setprecision(17);
}

void TraceCsvWriter::write(const TraceRecord& rec) {
  out_ << to_string(rec.phase) << ',' << rec.iteration << ',' << rec.peer << ',' << rec.c1 << ',' << rec.c2
       << ',';
  if (rec.lambda_est) out_ << *rec.lambda_est;
  out_ << ',';
  if (rec.energy) out_ << *rec.energy;
  out_ << '\n';
  ++rows_;
}

TraceSink TraceCsvWriter::sink() {
  return [this](const TraceRecord& rec) { write(rec); };
}

OracleComparison compare_with_oracle(const SessionResult& result) {
  OracleComparison cmp;
  if (!result.done() || !result.instance || !result.clearing) {
    cmp.note = "session did not clear";
    return cmp;
  }
  if (result.n_evs > kOracleMaxEvs) {
    cmp.note = "oracle limited to " + std::to_string(kOracleMaxEvs) + " EVs";
    return cmp;
  }
  const auto sol = solve_qp_activeset(*result.instance);
  cmp.ran = true;
  cmp.price_deviation = std::abs(sol.result.price - result.clearing->price);
  cmp.energy_deviation = std::abs(sol.result.lane_energy - result.clearing->lane_energy);
  for (std::size_t i = 0; i < result.n_evs; ++i) {
    cmp.energy_deviation =
        std::max(cmp.energy_deviation, std::abs(sol.result.ev_energies[i] - result.clearing->ev_energies[i]));
  }
  cmp.active_set_empty = sol.active_set.empty();
  return cmp;
}

json result_to_json(const SessionResult& r, const OracleComparison& oracle, bool export_params) {
  json doc;
  doc["phase"] = to_string(r.phase);
  if (r.failure) {
    doc["failure"] = {{"phase", to_string(r.failure->phase)},
                      {"code", to_string(r.failure->code)},
                      {"message", r.failure->message}};
  }
  json history = json::array();
  for (Phase p : r.phase_history) history.push_back(to_string(p));
  doc["phase_history"] = history;
  doc["n_evs"] = r.n_evs;
  doc["direction"] = to_string(r.direction);
  doc["sum_ev_upper"] = r.sum_ev_upper;
  doc["lane_lower"] = r.lane_lower;
  if (r.negotiated_range) doc["negotiated_range"] = {r.negotiated_range->low, r.negotiated_range->high};
  doc["range_iterations"] = r.range_iterations;
  doc["price_iterations"] = r.price_iterations;

  if (!r.ev_a_floor.empty()) {
    const auto [lo, hi] = std::minmax_element(r.ev_a_floor.begin(), r.ev_a_floor.end());
    doc["ev_a_floor"] = {{"min", *lo}, {"max", *hi}};
  }
  if (r.lane_a_window) {
    doc["lane_a_window"] = {{"raw_lower", r.lane_a_window->raw_lower},
                            {"lower", r.lane_a_window->lower},
                            {"upper", r.lane_a_window->upper}};
  }
  if (r.clearing) {
    doc["price"] = r.clearing->price;
    doc["ev_energies"] = r.clearing->ev_energies;
    doc["lane_energy"] = r.clearing->lane_energy;
    doc["imbalance"] = r.clearing->imbalance();
    doc["peer_price_spread"] = r.peer_price_spread();
    doc["lane_schedule_gap"] = r.lane_schedule_gap();
  }
  if (r.validation) {
    json failed = json::array();
    for (const auto& f : r.validation->failures()) {
      json item = {{"name", f.name}, {"value", f.value}};
      if (f.ev) item["ev"] = *f.ev;
      failed.push_back(item);
    }
    doc["validation"] = {{"ok", r.validation->ok()},
                         {"summary", r.validation->summary()},
                         {"failures", failed}};
  }
  if (r.lane_params && r.ev_params.size() == r.n_evs && r.price_iterations > 0) {
    const auto wire = inspect_wire_log(r);
    doc["wire"] = {{"messages", r.wire_log.size()},
                   {"max_energy_messages", wire.max_energy_messages},
                   {"range_deliveries", wire.range_deliveries},
                   {"price_deliveries", wire.price_deliveries},
                   {"counts_match", wire.counts_match()},
                   {"masks_hide_inits", wire.masks_hide_inits()},
                   {"coefficient_leaks", wire.coefficient_leaks}};
  } else {
    doc["wire"] = {{"messages", r.wire_log.size()}};
  }
  doc["timings_s"] = {{"max_energy", r.timings.max_energy_s}, {"range", r.timings.range_s},
                      {"selection", r.timings.selection_s},   {"price", r.timings.price_s},
                      {"clearing", r.timings.clearing_s},     {"total", r.timings.total_s()}};
  if (oracle.ran || !oracle.note.empty()) {
    json o = {{"ran", oracle.ran}};
    if (!oracle.note.empty()) o["note"] = oracle.note;
    if (oracle.ran) {
      o["price_deviation"] = oracle.price_deviation;
      o["energy_deviation"] = oracle.energy_deviation;
      o["active_set_empty"] = oracle.active_set_empty;
    }
    doc["oracle"] = o;
  }
  if (export_params) {
    if (r.lane_params) doc["lane_params"] = params_json(*r.lane_params);
    json evs = json::array();
    for (const auto& p : r.ev_params) evs.push_back(params_json(p));
    doc["ev_params"] = evs;
    doc["alphas"] = r.alphas;
  }
  return doc;
}

RunOutcome run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  std::filesystem::create_directories(options.out_dir);
  TraceCsvWriter trace(options.out_dir / "trace.csv");

  auto session = make_session_config(config);
  session.trace = trace.sink();

  RunOutcome out;
  out.result = run_trading_session(session);
  out.trace_rows = trace.rows();
  if (options.oracle_check) out.oracle = compare_with_oracle(out.result);
  out.exit_code = out.result.done() ? 0 : 2;

  std::ofstream json_out(options.out_dir / "result.json");
  if (!json_out) throw Error(ErrorCode::ParseError, "cannot write result.json in " + options.out_dir.string());
  json_out << result_to_json(out.result, out.oracle, options.export_params).dump(2) << '\n';
  return out;
}

std::vector<BenchRow> run_benchmark(const std::vector<std::size_t>& sizes, std::size_t repeats,
                                    std::uint64_t seed) {
  if (sizes.empty()) throw Error(ErrorCode::InvalidParameter, "benchmark needs at least one size");
  if (repeats < 1) throw Error(ErrorCode::InvalidParameter, "benchmark needs at least one repeat");

  std::vector<BenchRow> rows;
  for (std::size_t n : sizes) {
    const auto session = make_session_config(scaled_scenario(n, seed));
    BenchRow row;
    row.n_evs = n;
    std::vector<PhaseTimings> phases;
    for (std::size_t r = 0; r < repeats; ++r) {
      const auto result = run_trading_session(session);
      if (!result.done()) {
        throw Error(result.failure->code, "benchmark session at n=" + std::to_string(n) +
                                              " failed: " + result.failure->message);
      }
      row.samples_s.push_back(result.timings.total_s());
      phases.push_back(result.timings);
      row.range_iterations = result.range_iterations;
      row.price_iterations = result.price_iterations;
    }
    row.median_s = median(row.samples_s);
    auto phase_median = [&phases](double PhaseTimings::*slot) {
      std::vector<double> v;
      for (const auto& p : phases) v.push_back(p.*slot);
      return median(v);
    };
    row.median_phase.max_energy_s = phase_median(&PhaseTimings::max_energy_s);
    row.median_phase.range_s = phase_median(&PhaseTimings::range_s);
    row.median_phase.selection_s = phase_median(&PhaseTimings::selection_s);
    row.median_phase.price_s = phase_median(&PhaseTimings::price_s);
    row.median_phase.clearing_s = phase_median(&PhaseTimings::clearing_s);
    rows.push_back(std::move(row));
  }

  const auto& first = rows.front();
  for (auto& row : rows) {
    row.growth = row.median_s / first.median_s;
    row.growth_limit = std::pow(static_cast<double>(row.n_evs) / static_cast<double>(first.n_evs), 1.5);
    row.subquadratic = row.growth <= row.growth_limit;
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  out << "n_evs,repeats,median_s,max_energy_s,range_s,selection_s,price_s,clearing_s,"
         "range_iterations,price_iterations,growth,growth_limit,subquadratic\n"
      << std::setprecision(9);
  for (const auto& r : rows) {
    const auto& p = r.median_phase;
    out << r.n_evs << ',' << r.samples_s.size() << ',' << r.median_s << ',' << p.max_energy_s << ','
        << p.range_s << ',' << p.selection_s << ',' << p.price_s << ',' << p.clearing_s << ','
        << r.range_iterations << ',' << r.price_iterations << ',' << r.growth << ',' << r.growth_limit << ','
        << (r.subquadratic ? "pass" : "fail") << '\n';
  }
}

}  // namespace p2p
