#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace diffuse {

enum class PreferenceLabel { kA, kB, kTie };

std::string_view to_string(PreferenceLabel label);
PreferenceLabel parse_label(std::string_view name);
PreferenceLabel mirror(PreferenceLabel label);

struct LabelCounts {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t tie = 0;

  std::size_t total() const { return a + b + tie; }
  void add(PreferenceLabel label);
  friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

LabelCounts count_labels(std::span<const PreferenceLabel> labels);

// Winning probabilities over a labeled set. `winner` is kTie exactly when
// the two models won equally often.
struct WinStats {
  LabelCounts counts;
  double p_a = 0.0;
  double p_b = 0.0;
  double p_tie = 0.0;
  PreferenceLabel winner = PreferenceLabel::kTie;
  double distance = 0.0;
};

WinStats winning_stats(const LabelCounts& counts);
WinStats winning_stats(std::span<const PreferenceLabel> labels);

// P(X >= k_minus_1 + 1) for X ~ Hypergeometric(population, successes, draws).
// Summed in log space; valid for -1 <= k_minus_1 <= draws.
double hypergeom_sf(std::int64_t k_minus_1, std::int64_t population,
                    std::int64_t successes, std::int64_t draws);

// Chance of seeing the leader's vote count or more if the leader only won
// half of a pool of `pool_size` examples. Ties count as draws but never as
// successes. Returns 1.0 when the two models are level; throws when every
// label is a tie.
double risk(const LabelCounts& counts, std::size_t pool_size);
double risk(std::span<const PreferenceLabel> labels, std::size_t pool_size);

}  // namespace diffuse
