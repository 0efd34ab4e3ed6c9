#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "p2p/consensus.hpp"
#include "p2p/types.hpp"

namespace p2p {

/// Mask levels alpha^k * zeta(k) are rounded to multiples of 2^-kMaskGridExponent.
/// On that grid every emitted noise term and every partial sum of them is
/// exact in double precision, so the emitted noise telescopes bit-for-bit.
inline constexpr int kMaskGridExponent = 44;

/// Per-peer telescoping noise
///   w(0) = zeta(0),  w(k) = alpha^k zeta(k) - alpha^(k-1) zeta(k-1),
/// with zeta i.i.d. standard normal on each channel. Strictly sequential.
class NoiseGenerator {
 public:
  NoiseGenerator(double alpha, std::uint64_t seed);

  /// Replays `zetas` in order, then zeros. For tests and worked examples.
  static NoiseGenerator scripted(double alpha, std::vector<Vec2> zetas);
  /// Never masks; every draw is zero.
  static NoiseGenerator silent(double alpha);

  /// Noise for round k; throws OutOfOrder unless k == next_round().
  Vec2 sample(std::size_t k);

  double alpha() const noexcept { return alpha_; }
  std::size_t next_round() const noexcept { return next_; }
  /// alpha^K zeta(K) for the last sampled round K, on the mask grid. Equals
  /// the sum of everything emitted so far.
  const Vec2& mask_level() const noexcept { return level_; }
  const Vec2& last_zeta() const noexcept { return zeta_; }

 private:
  enum class Source { gaussian, scripted, silent };

  NoiseGenerator(double alpha, Source source);
  Vec2 draw();

  double alpha_;
  Source source_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::vector<Vec2> script_;
  std::size_t next_ = 0;
  Vec2 zeta_{0.0, 0.0};
  Vec2 level_{0.0, 0.0};
};

Vec2 noise_sample(NoiseGenerator& gen, std::size_t k);

/// `count` distinct decay constants drawn uniformly from [lo, hi].
std::vector<double> draw_distinct_alphas(std::size_t count, std::uint64_t seed, double lo = 0.3,
                                         double hi = 0.9);

/// The only value a peer exposes during price negotiation.
struct MaskedMessage {
  PeerId sender = 0;
  std::size_t round = 0;
  Vec2 value{0.0, 0.0};
};

struct SecureConsensusRun {
  ConsensusState state;  // true (unmasked) states after the last round
  std::size_t iterations = 0;
  std::vector<MaskedMessage> wire_log;  // one broadcast per peer per round
};

/// Masked average consensus. Every round each peer broadcasts x_i + w_i and
/// updates from the masked values it receives. Stops once every peer's
/// masked state moves by at most eps (2-norm) between rounds. Throws
/// DegenerateTopology for fewer than two peers, InvalidParameter when the
/// decay constants are not distinct, NotConvergedError after max_iter.
SecureConsensusRun run_secure_consensus(const ConsensusState& init, const WeightMatrix& weights,
                                        std::span<NoiseGenerator> gens, double eps, std::size_t max_iter,
                                        const RoundObserver& observer = {});

}  // namespace p2p
