#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace diffuse {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed, a role tag and up to
// two indices. Streams with different tags never share state.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(Rng& rng);

// Unbiased uniform integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                    std::size_t k);

}  // namespace diffuse
