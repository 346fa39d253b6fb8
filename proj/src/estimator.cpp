#include "diffuse/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffuse {
namespace {

// Extended precision keeps the cancellation between large log-gamma values
// below 1e-12 for populations up to 10^6.
long double log_choose(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<long double>(n) + 1.0L) -
         std::lgamma(static_cast<long double>(k) + 1.0L) -
         std::lgamma(static_cast<long double>(n - k) + 1.0L);
}

}  // namespace

std::string_view to_string(PreferenceLabel label) {
  switch (label) {
    case PreferenceLabel::kA: return "A";
    case PreferenceLabel::kB: return "B";
    case PreferenceLabel::kTie: return "Tie";
  }
  return "Tie";
}

PreferenceLabel parse_label(std::string_view name) {
  if (name == "A" || name == "a") return PreferenceLabel::kA;
  if (name == "B" || name == "b") return PreferenceLabel::kB;
  if (name == "Tie" || name == "tie" || name == "T") return PreferenceLabel::kTie;
  throw std::invalid_argument("unknown preference label '" + std::string(name) +
                              "'");
}

PreferenceLabel mirror(PreferenceLabel label) {
  switch (label) {
    case PreferenceLabel::kA: return PreferenceLabel::kB;
    case PreferenceLabel::kB: return PreferenceLabel::kA;
    case PreferenceLabel::kTie: return PreferenceLabel::kTie;
  }
  return label;
}

void LabelCounts::add(PreferenceLabel label) {
  switch (label) {
    case PreferenceLabel::kA: ++a; break;
    case PreferenceLabel::kB: ++b; break;
    case PreferenceLabel::kTie: ++tie; break;
  }
}

LabelCounts count_labels(std::span<const PreferenceLabel> labels) {
  LabelCounts c;
  for (auto l : labels) c.add(l);
  return c;
}

WinStats winning_stats(const LabelCounts& counts) {
  const std::size_t total = counts.total();
  if (total == 0) throw std::invalid_argument("winning_stats: no labels");
  WinStats s;
  s.counts = counts;
  const double t = static_cast<double>(total);
  s.p_a = static_cast<double>(counts.a) / t;
  s.p_b = static_cast<double>(counts.b) / t;
  s.p_tie = static_cast<double>(counts.tie) / t;
  if (counts.a > counts.b) {
    s.winner = PreferenceLabel::kA;
  } else if (counts.b > counts.a) {
    s.winner = PreferenceLabel::kB;
  } else {
    s.winner = PreferenceLabel::kTie;
  }
  // Difference of counts first so that equal counts give exactly 0.
  const double gap = counts.a >= counts.b
                         ? static_cast<double>(counts.a - counts.b)
                         : static_cast<double>(counts.b - counts.a);
  s.distance = gap / t;
  return s;
}

WinStats winning_stats(std::span<const PreferenceLabel> labels) {
  return winning_stats(count_labels(labels));
}

double hypergeom_sf(std::int64_t k_minus_1, std::int64_t population,
                    std::int64_t successes, std::int64_t draws) {
  if (population < 0 || successes < 0 || successes > population || draws < 0 ||
      draws > population || k_minus_1 < -1 || k_minus_1 > draws) {
    throw std::invalid_argument(
        "hypergeom_sf: need 0 <= n <= N, 0 <= K <= N, -1 <= k-1 <= n");
  }
  const std::int64_t lo = std::max<std::int64_t>(0, draws - (population - successes));
  const std::int64_t hi = std::min(successes, draws);
  const std::int64_t start = std::max(k_minus_1 + 1, lo);
  if (k_minus_1 + 1 <= lo) return 1.0;
  if (start > hi) return 0.0;

  const long double log_total = log_choose(population, draws);
  std::vector<long double> terms;
  terms.reserve(static_cast<std::size_t>(hi - start + 1));
  long double max_term = -std::numeric_limits<long double>::infinity();
  for (std::int64_t x = start; x <= hi; ++x) {
    long double t = log_choose(successes, x) +
                    log_choose(population - successes, draws - x) - log_total;
    terms.push_back(t);
    max_term = std::max(max_term, t);
  }
  long double sum = 0.0L;
  for (long double t : terms) sum += std::exp(t - max_term);
  const double sf = static_cast<double>(std::exp(max_term + std::log(sum)));
  return std::clamp(sf, 0.0, 1.0);
}

double risk(const LabelCounts& counts, std::size_t pool_size) {
  if (counts.a == 0 && counts.b == 0) {
    throw std::invalid_argument("risk: every label is a tie");
  }
  if (counts.a == counts.b) return 1.0;
  const auto n = static_cast<std::int64_t>(counts.total());
  const auto pool = static_cast<std::int64_t>(pool_size);
  if (n > pool) throw std::invalid_argument("risk: more labels than pool size");
  const auto k = static_cast<std::int64_t>(std::max(counts.a, counts.b));
  return hypergeom_sf(k - 1, pool, pool / 2, n);
}

double risk(std::span<const PreferenceLabel> labels, std::size_t pool_size) {
  return risk(count_labels(labels), pool_size);
}

}  // namespace diffuse
