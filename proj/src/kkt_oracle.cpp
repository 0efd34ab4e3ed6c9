#include "p2p/kkt_oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "p2p/errors.hpp"

namespace p2p {

std::size_t ActiveSet::size() const noexcept {
  const auto binding = static_cast<std::size_t>(
      std::count_if(ev.begin(), ev.end(), [](BoundState s) { return s != BoundState::free; }));
  return binding + (lane == BoundState::free ? 0 : 1);
}

namespace {

// After substituting each lane-pair energy by -E_V, the program lives in the
// EV energies x alone:
//   J(x) = sum(a_i x_i^2 + s b_i x_i) + a_L (sum x)^2 - s b_L sum x
// with x_i in its EV box and -sum x in the lane box.
struct ReducedProgram {
  const MarketInstance& m;
  double s;

  double sum_lower() const { return -m.bounds.lane.upper; }  // lane upper binds
  double sum_upper() const { return -m.bounds.lane.lower; }  // lane lower binds

  double gradient(std::size_t i, const std::vector<double>& x, double sum) const {
    return 2.0 * m.evs[i].a * x[i] + s * m.evs[i].b + 2.0 * m.wcdl.a * sum - s * m.wcdl.b;
  }
};

struct Candidate {
  std::vector<double> x;
  double lane_multiplier = 0.0;  // signed: +mu_lane_lower, -mu_lane_upper
  bool solved = false;
};

Candidate solve_candidate(const ReducedProgram& prog, const ActiveSet& set) {
  const auto& m = prog.m;
  const std::size_t n = m.size();
  Candidate c;
  c.x.assign(n, 0.0);

  std::vector<std::size_t> free_idx;
  double fixed_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    switch (set.ev[i]) {
      case BoundState::free: free_idx.push_back(i); break;
      case BoundState::lower: c.x[i] = m.bounds.ev[i].lower; fixed_sum += c.x[i]; break;
      case BoundState::upper: c.x[i] = m.bounds.ev[i].upper; fixed_sum += c.x[i]; break;
    }
  }

  const bool lane_active = set.lane != BoundState::free;
  const auto nf = static_cast<Eigen::Index>(free_idx.size());
  const Eigen::Index dim = nf + (lane_active ? 1 : 0);
  if (dim == 0) {
    c.solved = true;
    return c;
  }

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs(dim);
  const double two_al = 2.0 * m.wcdl.a;
  for (Eigen::Index r = 0; r < nf; ++r) {
    const std::size_t i = free_idx[static_cast<std::size_t>(r)];
    for (Eigen::Index col = 0; col < nf; ++col) kkt(r, col) = two_al;
    kkt(r, r) += 2.0 * m.evs[i].a;
    rhs(r) = -(prog.s * m.evs[i].b - prog.s * m.wcdl.b + two_al * fixed_sum);
    if (lane_active) kkt(r, nf) = 1.0;
  }
  if (lane_active) {
    for (Eigen::Index col = 0; col < nf; ++col) kkt(nf, col) = 1.0;
    const double target = set.lane == BoundState::lower ? prog.sum_upper() : prog.sum_lower();
    rhs(nf) = target - fixed_sum;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) return c;
  const Eigen::VectorXd sol = lu.solve(rhs);
  for (Eigen::Index r = 0; r < nf; ++r) c.x[free_idx[static_cast<std::size_t>(r)]] = sol(r);
  if (lane_active) c.lane_multiplier = sol(nf);
  c.solved = true;
  return c;
}

}  // namespace

OracleSolution solve_qp_activeset(const MarketInstance& instance, double tol) {
  instance.validate();
  const std::size_t n = instance.size();
  if (n > kOracleMaxEvs) {
    std::ostringstream os;
    os << "active-set enumeration supports at most " << kOracleMaxEvs << " EVs, got " << n;
    throw Error(ErrorCode::SizeExceeded, os.str());
  }

  const ReducedProgram prog{instance, instance.sign()};
  std::size_t candidates = 1;
  for (std::size_t i = 0; i <= n; ++i) candidates *= 3;

  std::optional<OracleSolution> best;
  ActiveSet set;
  set.ev.assign(n, BoundState::free);

  for (std::size_t code = 0; code < candidates; ++code) {
    std::size_t digits = code;
    for (std::size_t i = 0; i < n; ++i, digits /= 3) set.ev[i] = static_cast<BoundState>(digits % 3);
    set.lane = static_cast<BoundState>(digits % 3);

    const Candidate c = solve_candidate(prog, set);
    if (!c.solved) continue;

    const double sum = std::accumulate(c.x.begin(), c.x.end(), 0.0);
    bool feasible = sum >= prog.sum_lower() - tol && sum <= prog.sum_upper() + tol;
    for (std::size_t i = 0; i < n && feasible; ++i) {
      feasible = c.x[i] >= instance.bounds.ev[i].lower - tol &&
                 c.x[i] <= instance.bounds.ev[i].upper + tol;
    }
    if (!feasible) continue;

    KktMultipliers mult;
    mult.ev_lower.assign(n, 0.0);
    mult.ev_upper.assign(n, 0.0);
    if (set.lane == BoundState::lower) mult.lane_lower = c.lane_multiplier;
    if (set.lane == BoundState::upper) mult.lane_upper = -c.lane_multiplier;
    bool dual_ok = mult.lane_lower >= -tol && mult.lane_upper >= -tol;
    for (std::size_t i = 0; i < n && dual_ok; ++i) {
      // g_i + nu - mu_lower + mu_upper = 0
      const double g = prog.gradient(i, c.x, sum) + c.lane_multiplier;
      if (set.ev[i] == BoundState::lower) mult.ev_lower[i] = g;
      if (set.ev[i] == BoundState::upper) mult.ev_upper[i] = -g;
      dual_ok = mult.ev_lower[i] >= -tol && mult.ev_upper[i] >= -tol;
    }
    if (!dual_ok) continue;

    const double lane_energy = -sum;
    const double objective = total_cost(instance, c.x, lane_energy);
    if (best) {
      const double scale = tol * (1.0 + std::abs(best->objective));
      const bool better = objective < best->objective - scale;
      const bool tie_smaller =
          std::abs(objective - best->objective) <= scale && set.size() < best->active_set.size();
      if (!better && !tie_smaller) continue;
    }

    // Pair prices from lane-pair stationarity; identical for every pair.
    const double lane_marginal = 2.0 * instance.wcdl.a * lane_energy + prog.s * instance.wcdl.b;
    const double pair_price = lane_marginal - mult.lane_lower + mult.lane_upper;
    mult.pair_price.assign(n, pair_price);

    OracleSolution sol;
    sol.result.price = prog.s * pair_price;
    sol.result.ev_energies = c.x;
    sol.result.lane_energy = lane_energy;
    sol.multipliers = std::move(mult);
    sol.active_set = set;
    sol.objective = objective;
    best = std::move(sol);
  }

  if (!best) throw Error(ErrorCode::Infeasible, "no active-set candidate satisfies the KKT conditions");
  return *std::move(best);
}

OracleSolution from_closed_form(const ClearingResult& result, const MarketInstance& instance) {
  const std::size_t n = instance.size();
  OracleSolution sol;
  sol.result = result;
  sol.multipliers.pair_price.assign(n, instance.sign() * result.price);
  sol.multipliers.ev_lower.assign(n, 0.0);
  sol.multipliers.ev_upper.assign(n, 0.0);
  sol.active_set.ev.assign(n, BoundState::free);
  sol.objective = total_cost(instance, result.ev_energies, result.lane_energy);
  return sol;
}

double KktReport::worst() const noexcept {
  return std::max({stationarity, primal, dual, complementarity, price_spread, reduced.value_or(0.0)});
}

KktReport verify_kkt(const OracleSolution& solution, const MarketInstance& instance, double tol) {
  const auto& m = instance;
  const auto& r = solution.result;
  const auto& mu = solution.multipliers;
  const double s = m.sign();
  const std::size_t n = m.size();
  if (r.ev_energies.size() != n || mu.pair_price.size() != n || mu.ev_lower.size() != n ||
      mu.ev_upper.size() != n) {
    throw Error(ErrorCode::InvalidParameter, "solution does not match the instance size");
  }

  KktReport rep;
  auto bump = [](double& slot, double v) { slot = std::max(slot, std::abs(v)); };
  auto neg = [](double v) { return std::max(0.0, -v); };

  const double lane_marginal = 2.0 * m.wcdl.a * r.lane_energy + s * m.wcdl.b;
  for (std::size_t i = 0; i < n; ++i) {
    const double ev_marginal = 2.0 * m.evs[i].a * r.ev_energies[i] + s * m.evs[i].b;
    bump(rep.stationarity, ev_marginal - mu.pair_price[i] - mu.ev_lower[i] + mu.ev_upper[i]);
    bump(rep.stationarity, lane_marginal - mu.pair_price[i] - mu.lane_lower + mu.lane_upper);
  }

  bump(rep.primal, r.imbalance());
  for (std::size_t i = 0; i < n; ++i) {
    rep.primal = std::max({rep.primal, m.bounds.ev[i].lower - r.ev_energies[i],
                           r.ev_energies[i] - m.bounds.ev[i].upper});
  }
  rep.primal = std::max({rep.primal, m.bounds.lane.lower - r.lane_energy,
                         r.lane_energy - m.bounds.lane.upper});

  rep.dual = std::max(neg(mu.lane_lower), neg(mu.lane_upper));
  for (std::size_t i = 0; i < n; ++i) {
    rep.dual = std::max({rep.dual, neg(mu.ev_lower[i]), neg(mu.ev_upper[i])});
    bump(rep.complementarity, mu.ev_lower[i] * (r.ev_energies[i] - m.bounds.ev[i].lower));
    bump(rep.complementarity, mu.ev_upper[i] * (m.bounds.ev[i].upper - r.ev_energies[i]));
  }
  bump(rep.complementarity, mu.lane_lower * (r.lane_energy - m.bounds.lane.lower));
  bump(rep.complementarity, mu.lane_upper * (m.bounds.lane.upper - r.lane_energy));

  if (n > 0) {
    const auto [lo, hi] = std::minmax_element(mu.pair_price.begin(), mu.pair_price.end());
    rep.price_spread = *hi - *lo;
  }

  auto zero = [tol](double v) { return std::abs(v) <= tol; };
  bool interior = zero(mu.lane_lower) && zero(mu.lane_upper);
  for (std::size_t i = 0; i < n && interior; ++i) interior = zero(mu.ev_lower[i]) && zero(mu.ev_upper[i]);
  if (interior) {
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      bump(residual, 2.0 * m.evs[i].a * r.ev_energies[i] + s * m.evs[i].b - mu.pair_price[i]);
      bump(residual, lane_marginal - mu.pair_price[i]);
    }
    bump(residual, r.imbalance());
    rep.reduced = residual;
  }
  return rep;
}

}  // namespace p2p
