#pragma once

#include <array>
#include <cstddef>

namespace p2p {

// Peer 0 is the lane (WCDL); peers 1..n are the EVs.
using PeerId = std::size_t;
inline constexpr PeerId kLanePeer = 0;

// Two-channel consensus value: [b/a, 1/a] for price negotiation,
// [low, high] for range negotiation.
using Vec2 = std::array<double, 2>;

}  // namespace p2p
