#pragma once

// Hypergeometric tail by exact integer enumeration. Binomials up to 64 come
// from Pascal's triangle in 128-bit integers, so every term and the
// normalizer are exact; only the final division rounds.

#include <array>
#include <cstdint>

namespace reference {

using u128 = unsigned __int128;

inline const std::array<std::array<u128, 65>, 65>& pascal() {
  static const auto table = [] {
    std::array<std::array<u128, 65>, 65> t{};
    for (int n = 0; n <= 64; ++n) {
      t[n][0] = 1;
      for (int k = 1; k <= n; ++k) t[n][k] = t[n - 1][k - 1] + t[n - 1][k];
    }
    return t;
  }();
  return table;
}

inline u128 choose(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  return pascal()[n][k];
}

// P(X > k) for X ~ Hypergeom(N, K, n), N <= 64.
inline long double exact_sf(int k, int N, int K, int n) {
  u128 tail = 0;
  for (int i = k + 1; i <= n; ++i) tail += choose(K, i) * choose(N - K, n - i);
  return static_cast<long double>(tail) / static_cast<long double>(choose(N, n));
}

}  // namespace reference
