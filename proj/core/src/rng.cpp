#include "psld/rng.hpp"

#include <random>

namespace psld {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t NoiseStream::key(std::uint64_t chain, std::uint64_t step, std::uint64_t substep) const {
  std::uint64_t h = splitmix64(seed_);
  h = splitmix64(h ^ chain);
  h = splitmix64(h ^ step);
  return splitmix64(h ^ substep);
}

State NoiseStream::normal_state(std::uint64_t chain, std::uint64_t step, std::uint64_t substep,
                                std::size_t d) const {
  std::mt19937_64 gen(key(chain, step, substep));
  std::normal_distribution<double> nd(0.0, 1.0);
  State z(d);
  for (auto& v : z.x) v = nd(gen);
  for (auto& v : z.m) v = nd(gen);
  return z;
}

}  // namespace psld
