#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "p2p/errors.hpp"
#include "p2p/types.hpp"

namespace p2p {

/// Undirected communication graph over peers 0..peer_count()-1.
class Topology {
 public:
  /// Lane at peer 0, every EV linked only to it.
  static Topology star(std::size_t n_evs);

  std::size_t peer_count() const noexcept { return adjacency_.size(); }
  std::span<const PeerId> neighbors(PeerId peer) const { return adjacency_.at(peer); }
  std::size_t degree(PeerId peer) const { return adjacency_.at(peer).size(); }
  std::size_t edge_count() const noexcept;

 private:
  std::vector<std::vector<PeerId>> adjacency_;
};

/// Sparse averaging weights: a_ii plus one entry per neighbor.
struct WeightMatrix {
  struct Entry {
    PeerId peer;
    double weight;
  };

  std::vector<double> self;
  std::vector<std::vector<Entry>> neighbors;

  std::size_t size() const noexcept { return self.size(); }
  double at(PeerId i, PeerId j) const;
};

/// a_ij = 1 / (1 + max(d_i, d_j)) on edges, residual on the diagonal.
WeightMatrix metropolis_weights(const Topology& topology);

struct ConsensusState {
  std::vector<Vec2> x;
  std::size_t iteration = 0;
};

struct ConsensusRun {
  ConsensusState state;
  std::size_t iterations = 0;
};

/// Called once per synchronous round with the values every peer exchanged
/// in that round and the states they hold afterwards.
using RoundObserver =
    std::function<void(std::size_t iteration, std::span<const Vec2> sent, std::span<const Vec2> updated)>;

class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& what, ConsensusState partial, double last_change)
      : Error(ErrorCode::NotConverged, what), partial_(std::move(partial)), last_change_(last_change) {}

  const ConsensusState& partial() const noexcept { return partial_; }
  double last_change() const noexcept { return last_change_; }

 private:
  ConsensusState partial_;
  double last_change_;
};

/// One synchronous step x_i <- a_ii v_i + sum_j a_ij v_j. Each peer sums its
/// neighbor list in stored order, so the result does not depend on which
/// peer is evaluated first.
void consensus_step(const WeightMatrix& weights, std::span<const Vec2> sent, std::span<Vec2> out);

/// Repeats consensus_step until every peer moves by at most `eps` (max norm)
/// in one round. Throws NotConvergedError after max_iter rounds.
ConsensusRun run_consensus(const ConsensusState& init, const WeightMatrix& weights, double eps,
                           std::size_t max_iter, const RoundObserver& observer = {});

/// Arithmetic mean of the initial states, i.e. the consensus limit.
Vec2 average_target(const ConsensusState& init);

/// Clearing price carried by a consensus value: x[0] / x[1].
double price_from_state(const Vec2& x);

struct PriceBounds {
  double low = 0.0;
  double high = 0.0;

  bool operator==(const PriceBounds&) const = default;
};

struct RangeConsensusRun {
  PriceBounds common;  // the lane's converged range
  std::size_t iterations = 0;
  ConsensusState state;
};

/// Averages lower and upper price bounds as two independent channels.
RangeConsensusRun price_range_consensus(std::span<const PriceBounds> ranges, const WeightMatrix& weights,
                                        double eps, std::size_t max_iter,
                                        const RoundObserver& observer = {});

}  // namespace p2p
