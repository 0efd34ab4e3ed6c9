#include "p2p/rng.hpp"

namespace p2p {

std::uint64_t derive_seed(std::uint64_t master, Stream stream, PeerId peer) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(peer),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(peer) >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace p2p
