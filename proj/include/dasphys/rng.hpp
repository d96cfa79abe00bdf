#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace dasphys {

// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t value);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Seeded generator with portable transforms. std::mt19937_64 output is fully
// specified by the standard; the std:: distributions are not, so uniform and
// normal variates are produced here to keep streams identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }
  std::size_t index(std::size_t n);

  // Child generator for a named stream; does not advance this generator.
  Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dasphys
