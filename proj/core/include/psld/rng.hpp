#pragma once

#include <cstddef>
#include <cstdint>

#include "psld/linalg2.hpp"

namespace psld {

// Counter-based Gaussian noise: every (chain, step, substep) key owns an
// independent stream, so schemes that share a prefix draw the same numbers
// regardless of how many evaluations they make in between.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  // x-part first, then m-part
  State normal_state(std::uint64_t chain, std::uint64_t step, std::uint64_t substep, std::size_t d) const;
  std::uint64_t key(std::uint64_t chain, std::uint64_t step, std::uint64_t substep) const;

 private:
  std::uint64_t seed_;
};

}  // namespace psld
