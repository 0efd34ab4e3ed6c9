#include "p2p/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace p2p {

Topology Topology::star(std::size_t n_evs) {
  Topology t;
  t.adjacency_.resize(n_evs + 1);
  for (PeerId ev = 1; ev <= n_evs; ++ev) {
    t.adjacency_[kLanePeer].push_back(ev);
    t.adjacency_[ev].push_back(kLanePeer);
  }
  return t;
}

std::size_t Topology::edge_count() const noexcept {
  std::size_t twice = 0;
  for (const auto& nbrs : adjacency_) twice += nbrs.size();
  return twice / 2;
}

double WeightMatrix::at(PeerId i, PeerId j) const {
  if (i == j) return self.at(i);
  for (const auto& e : neighbors.at(i)) {
    if (e.peer == j) return e.weight;
  }
  return 0.0;
}

WeightMatrix metropolis_weights(const Topology& topology) {
  const std::size_t n = topology.peer_count();
  WeightMatrix w;
  w.self.assign(n, 1.0);
  w.neighbors.resize(n);
  for (PeerId i = 0; i < n; ++i) {
    for (PeerId j : topology.neighbors(i)) {
      const double weight = 1.0 / (1.0 + static_cast<double>(std::max(topology.degree(i), topology.degree(j))));
      w.neighbors[i].push_back({j, weight});
      w.self[i] -= weight;
    }
  }
  return w;
}

void consensus_step(const WeightMatrix& weights, std::span<const Vec2> sent, std::span<Vec2> out) {
  const std::size_t n = weights.size();
  for (PeerId i = 0; i < n; ++i) {
    Vec2 acc{weights.self[i] * sent[i][0], weights.self[i] * sent[i][1]};
    for (const auto& e : weights.neighbors[i]) {
      acc[0] += e.weight * sent[e.peer][0];
      acc[1] += e.weight * sent[e.peer][1];
    }
    out[i] = acc;
  }
}

namespace {

void check_run_args(std::size_t peers, const WeightMatrix& weights, double eps, std::size_t max_iter) {
  if (peers != weights.size()) throw Error(ErrorCode::InvalidParameter, "state and weight sizes differ");
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidParameter, "eps must be positive");
  if (max_iter < 1) throw Error(ErrorCode::InvalidParameter, "max_iter must be at least 1");
}

}  // namespace

ConsensusRun run_consensus(const ConsensusState& init, const WeightMatrix& weights, double eps,
                           std::size_t max_iter, const RoundObserver& observer) {
  check_run_args(init.x.size(), weights, eps, max_iter);
  std::vector<Vec2> current = init.x;
  std::vector<Vec2> next(current.size());
  double change = 0.0;

  for (std::size_t k = 1; k <= max_iter; ++k) {
    consensus_step(weights, current, next);
    if (observer) observer(init.iteration + k, current, next);
    change = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      change = std::max({change, std::abs(next[i][0] - current[i][0]), std::abs(next[i][1] - current[i][1])});
    }
    current.swap(next);
    if (change <= eps) {
      return {{std::move(current), init.iteration + k}, k};
    }
  }

  std::ostringstream os;
  os << "consensus did not converge within " << max_iter << " iterations (last change " << change << ")";
  throw NotConvergedError(os.str(), {std::move(current), init.iteration + max_iter}, change);
}

Vec2 average_target(const ConsensusState& init) {
  Vec2 sum{0.0, 0.0};
  for (const auto& v : init.x) {
    sum[0] += v[0];
    sum[1] += v[1];
  }
  const auto count = static_cast<double>(init.x.size());
  return {sum[0] / count, sum[1] / count};
}

double price_from_state(const Vec2& x) {
  if (!(x[1] > 0.0)) {
    std::ostringstream os;
    os << "second consensus channel must be positive to extract a price (got " << x[1] << ")";
    throw Error(ErrorCode::DegenerateState, os.str());
  }
  return x[0] / x[1];
}

RangeConsensusRun price_range_consensus(std::span<const PriceBounds> ranges, const WeightMatrix& weights,
                                        double eps, std::size_t max_iter, const RoundObserver& observer) {
  ConsensusState init;
  init.x.reserve(ranges.size());
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (ranges[i].low > ranges[i].high) {
      std::ostringstream os;
      os << "peer " << i << " submitted inverted price range [" << ranges[i].low << ", " << ranges[i].high << "]";
      throw Error(ErrorCode::InvertedRange, os.str());
    }
    init.x.push_back({ranges[i].low, ranges[i].high});
  }

  auto run = run_consensus(init, weights, eps, max_iter, observer);
  const Vec2& lane = run.state.x.at(kLanePeer);
  RangeConsensusRun out{{lane[0], lane[1]}, run.iterations, std::move(run.state)};
  if (out.common.low > out.common.high) {
    throw Error(ErrorCode::InvertedRange, "negotiated price range is inverted");
  }
  return out;
}

}  // namespace p2p
