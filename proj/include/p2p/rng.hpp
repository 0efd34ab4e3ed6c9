#pragma once

#include <cstdint>
#include <random>

#include "p2p/types.hpp"

namespace p2p {

/// Independent random streams a session draws from. Each (master seed,
/// purpose, peer) triple seeds its own engine.
enum class Stream : std::uint32_t {
  range_jitter = 1,
  cost_selection = 2,
  noise = 3,
  alpha = 4,
};

std::uint64_t derive_seed(std::uint64_t master, Stream stream, PeerId peer);

inline std::mt19937_64 make_stream(std::uint64_t master, Stream stream, PeerId peer) {
  return std::mt19937_64(derive_seed(master, stream, peer));
}

}  // namespace p2p
