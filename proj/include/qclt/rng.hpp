#pragma once

#include <cstdint>
#include <random>

namespace qclt::rng {

// 64-bit finalizer with full avalanche (the splitmix64 mixer).  Used to
// spread master seed + path index into independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stream seed for one path.  Pure function of (master_seed, path_index),
// so the ensemble is reproducible no matter how paths are partitioned
// across worker threads.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed,
                                    std::uint64_t path_index) {
  return mix64(mix64(master_seed) ^ mix64(path_index * 0xD1B54A32D192ED03ull +
                                          0x8BB84B93962EACC9ull));
}

// Per-path generator.  Wraps the standard Mersenne engine (bit-exact by
// the language standard) behind the two draws the simulator needs.
class PathRng {
 public:
  explicit PathRng(std::uint64_t stream_seed) : gen_(stream_seed) {}
  PathRng(std::uint64_t master_seed, std::uint64_t path_index)
      : gen_(derive_seed(master_seed, path_index)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on (0, 1] with 53-bit resolution.  The left-open interval
  // makes inverse-CDF sampling skip zero-probability states and gives
  // the "ties resolve to the lower index" rule a clean meaning.
  double next_unit() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace qclt::rng
