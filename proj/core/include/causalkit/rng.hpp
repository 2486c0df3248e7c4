#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace causalkit {

// Every random quantity in the toolkit is drawn from a stream derived from
// (seed, row index, name). Streams are independent by construction, so adding
// a node to a model, or a column to a dataset, never perturbs the draws of
// anything that already existed. The generator is our own fixed algorithm
// (SplitMix64 walk, Box-Muller normals) rather than std::* distributions,
// whose output is implementation-defined; bit-identical reproduction across
// builds is part of the contract.

inline constexpr std::uint64_t kDefaultSeed = 1729;
inline constexpr const char* kRngAlgorithmId = "splitmix64/v1";

struct RngSpec {
  std::uint64_t seed = kDefaultSeed;
  std::string algorithm = kRngAlgorithmId;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_name(std::string_view s) {
  // FNV-1a, 64 bit.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

class StreamRng {
 public:
  explicit StreamRng(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return detail::mix64(state_);
  }

  // Uniform on [0, 1).
  double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; used where log() must stay finite.
  double u01_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. Always consumes exactly two draws.
  double normal() {
    double u1 = u01_open();
    double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return u01() < p; }

  // Index uniform over {0, ..., k-1}.
  std::size_t choice(std::size_t k) {
    if (k == 0) throw std::invalid_argument("choice over empty set");
    auto idx = static_cast<std::size_t>(u01() * static_cast<double>(k));
    return idx >= k ? k - 1 : idx;
  }

 private:
  std::uint64_t state_;
};

inline void check_algorithm(const RngSpec& spec) {
  if (spec.algorithm != kRngAlgorithmId) {
    throw std::invalid_argument("unknown rng algorithm '" + spec.algorithm +
                                "'; this build implements '" +
                                kRngAlgorithmId + "'");
  }
}

inline StreamRng derive_stream(const RngSpec& spec, std::uint64_t row,
                               std::string_view name) {
  check_algorithm(spec);
  std::uint64_t k = detail::mix64(spec.seed ^ 0x6a09e667f3bcc909ull);
  k = detail::mix64(k ^ (row + 0x9e3779b97f4a7c15ull));
  k = detail::mix64(k ^ detail::hash_name(name));
  return StreamRng(k);
}

// Seed for an independent child spec (bootstrap replicates, matching draws).
inline RngSpec derive_spec(const RngSpec& spec, std::uint64_t index,
                           std::string_view purpose) {
  check_algorithm(spec);
  std::uint64_t k = detail::mix64(spec.seed ^ detail::hash_name(purpose));
  k = detail::mix64(k ^ (index + 0x9e3779b97f4a7c15ull));
  return RngSpec{k, spec.algorithm};
}

}  // namespace causalkit
