#include "p2p/privacy_mask.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "p2p/errors.hpp"

namespace p2p {

namespace {

double to_grid(double v) {
  return std::ldexp(std::nearbyint(std::ldexp(v, kMaskGridExponent)), -kMaskGridExponent);
}

}  // namespace

NoiseGenerator::NoiseGenerator(double alpha, Source source) : alpha_(alpha), source_(source) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::InvalidParameter, "noise decay constant must lie in (0, 1)");
  }
}

NoiseGenerator::NoiseGenerator(double alpha, std::uint64_t seed) : NoiseGenerator(alpha, Source::gaussian) {
  engine_.seed(seed);
}

NoiseGenerator NoiseGenerator::scripted(double alpha, std::vector<Vec2> zetas) {
  NoiseGenerator gen(alpha, Source::scripted);
  gen.script_ = std::move(zetas);
  return gen;
}

NoiseGenerator NoiseGenerator::silent(double alpha) { return NoiseGenerator(alpha, Source::silent); }

Vec2 NoiseGenerator::draw() {
  switch (source_) {
    case Source::gaussian: {
      const double first = normal_(engine_);
      return {first, normal_(engine_)};
    }
    case Source::scripted:
      return next_ < script_.size() ? script_[next_] : Vec2{0.0, 0.0};
    case Source::silent:
      break;
  }
  return {0.0, 0.0};
}

Vec2 NoiseGenerator::sample(std::size_t k) {
  if (k != next_) {
    std::ostringstream os;
    os << "noise requested for round " << k << " but generator is at round " << next_;
    throw Error(ErrorCode::OutOfOrder, os.str());
  }
  zeta_ = draw();
  const double decay = std::pow(alpha_, static_cast<double>(k));
  const Vec2 level{to_grid(decay * zeta_[0]), to_grid(decay * zeta_[1])};
  const Vec2 w = k == 0 ? level : Vec2{level[0] - level_[0], level[1] - level_[1]};
  level_ = level;
  ++next_;
  return w;
}

Vec2 noise_sample(NoiseGenerator& gen, std::size_t k) { return gen.sample(k); }

std::vector<double> draw_distinct_alphas(std::size_t count, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out;
  out.reserve(count);
  while (out.size() < count) {
    const double candidate = dist(engine);
    if (candidate <= 0.0 || candidate >= 1.0) continue;
    if (std::find(out.begin(), out.end(), candidate) == out.end()) out.push_back(candidate);
  }
  return out;
}

SecureConsensusRun run_secure_consensus(const ConsensusState& init, const WeightMatrix& weights,
                                        std::span<NoiseGenerator> gens, double eps, std::size_t max_iter,
                                        const RoundObserver& observer) {
  const std::size_t n = init.x.size();
  if (n < 2) throw Error(ErrorCode::DegenerateTopology, "masked consensus needs at least two peers");
  if (n != weights.size() || n != gens.size()) {
    throw Error(ErrorCode::InvalidParameter, "state, weight and generator counts differ");
  }
  if (!(eps > 0.0) || max_iter < 1) throw Error(ErrorCode::InvalidParameter, "eps and max_iter must be positive");
  std::vector<double> alphas;
  for (const auto& g : gens) alphas.push_back(g.alpha());
  std::sort(alphas.begin(), alphas.end());
  if (std::adjacent_find(alphas.begin(), alphas.end()) != alphas.end()) {
    throw Error(ErrorCode::InvalidParameter, "noise decay constants must be distinct across peers");
  }

  SecureConsensusRun run;
  run.wire_log.reserve(n * std::min<std::size_t>(max_iter, 4096));

  std::vector<Vec2> masked(n), masked_next(n), state(n);
  auto mask = [&](std::size_t round, std::span<const Vec2> x, std::vector<Vec2>& out) {
    for (PeerId i = 0; i < n; ++i) {
      const Vec2 w = gens[i].sample(round);
      out[i] = {x[i][0] + w[0], x[i][1] + w[1]};
    }
  };
  auto broadcast = [&](std::size_t round, const std::vector<Vec2>& values) {
    for (PeerId i = 0; i < n; ++i) run.wire_log.push_back({i, round, values[i]});
  };

  mask(init.iteration, init.x, masked);
  broadcast(init.iteration, masked);

  double change = 0.0;
  for (std::size_t k = 1; k <= max_iter; ++k) {
    const std::size_t round = init.iteration + k;
    consensus_step(weights, masked, state);
    if (observer) observer(round, masked, state);
    mask(round, state, masked_next);
    change = 0.0;
    for (PeerId i = 0; i < n; ++i) {
      change = std::max(change, std::hypot(masked_next[i][0] - masked[i][0], masked_next[i][1] - masked[i][1]));
    }
    if (change <= eps) {
      run.state = {std::move(state), round};
      run.iterations = k;
      return run;
    }
    broadcast(round, masked_next);
    masked.swap(masked_next);
  }

  std::ostringstream os;
  os << "masked consensus did not converge within " << max_iter << " iterations (last change " << change << ")";
  throw NotConvergedError(os.str(), {std::move(state), init.iteration + max_iter}, change);
}

}  // namespace p2p
