#pragma once

// Client population state for age-aware selection. A client's age counts
// rounds since it was last selected, saturating at m_prime; selection resets
// it to zero. Ages are the only state a scheduling policy may read.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace aoifl {

using ClientId = std::uint32_t;

struct ClientPopulation {
  std::vector<std::uint64_t> sizes;  // d_i >= 1
  std::vector<std::uint32_t> ages;   // 0 <= A_i <= m_prime
  std::uint32_t m_prime = 0;

  std::size_t n() const { return sizes.size(); }

  // Data-proportional importances q_i = d_i / sum d_j.
  std::vector<double> importances() const {
    double total = 0.0;
    for (auto d : sizes) total += static_cast<double>(d);
    std::vector<double> q(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) q[i] = static_cast<double>(sizes[i]) / total;
    return q;
  }
};

inline void validate_population(const ClientPopulation& pop) {
  if (pop.sizes.empty()) throw std::invalid_argument("population: n must be at least 1");
  if (pop.ages.size() != pop.sizes.size())
    throw std::invalid_argument("population: ages and sizes must have equal length");
  for (std::size_t i = 0; i < pop.sizes.size(); ++i) {
    if (pop.sizes[i] == 0)
      throw std::invalid_argument("population: size of client " + std::to_string(i) + " must be >= 1");
    if (pop.ages[i] > pop.m_prime)
      throw std::invalid_argument("population: age of client " + std::to_string(i) + " exceeds the cap");
  }
}

// Fresh population: all ages zero.
inline ClientPopulation make_population(std::vector<std::uint64_t> sizes, std::uint32_t m_prime) {
  ClientPopulation pop;
  pop.sizes = std::move(sizes);
  pop.ages.assign(pop.sizes.size(), 0);
  pop.m_prime = m_prime;
  validate_population(pop);
  return pop;
}

// One scheduling round: who was picked and with what aggregation weight.
// selected is sorted ascending and weights is index-aligned with it.
struct RoundOutcome {
  std::int64_t round = 0;
  std::vector<ClientId> selected;
  std::vector<double> weights;
  bool forced = false;  // empty draw resolved by forcing one uniform client
};

inline void validate_outcome(const RoundOutcome& out, std::size_t n) {
  if (out.selected.size() != out.weights.size())
    throw std::invalid_argument("round outcome: selected and weights must be aligned");
  if (out.selected.empty()) throw std::invalid_argument("round outcome: selection is empty");
  double sum = 0.0;
  for (std::size_t k = 0; k < out.selected.size(); ++k) {
    if (out.selected[k] >= n) throw std::invalid_argument("round outcome: client id out of range");
    if (k > 0 && out.selected[k] <= out.selected[k - 1])
      throw std::invalid_argument("round outcome: selected ids must be strictly increasing");
    if (out.weights[k] < 0.0) throw std::invalid_argument("round outcome: negative weight");
    sum += out.weights[k];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("round outcome: weights must sum to 1");
}

// A_i <- 0 if selected this round, else min(A_i + 1, m_prime).
inline void step_ages(ClientPopulation& pop, const RoundOutcome& out) {
  for (auto& a : pop.ages) a = std::min(a + 1, pop.m_prime);
  for (auto id : out.selected) pop.ages[id] = 0;
}

struct SelectionTrace {
  std::size_t n = 0;
  std::uint32_t burn_in = 0;          // rounds discarded before recording began
  std::uint64_t forced_rounds = 0;    // rounds where the empty-set fallback fired
  std::vector<RoundOutcome> rounds;   // recorded rounds, round index starts at 0
};

// Zipf(a) sizes on the truncated support {1, ..., 1e6} via inverse CDF,
// clipped below at d_min.
inline std::vector<std::uint64_t> zipf_dataset_sizes(std::size_t n, double a, std::uint64_t d_min,
                                                     Rng& rng) {
  if (n == 0) throw std::invalid_argument("zipf sizes: n must be at least 1");
  if (!(a > 0.0)) throw std::invalid_argument("zipf sizes: exponent must be positive");
  if (d_min == 0) throw std::invalid_argument("zipf sizes: d_min must be >= 1");
  constexpr std::size_t kSupport = 1000000;
  static thread_local std::vector<double> cdf;
  static thread_local double cached_a = -1.0;
  if (cached_a != a) {
    cdf.resize(kSupport);
    double acc = 0.0;
    for (std::size_t k = 1; k <= kSupport; ++k) {
      acc += std::pow(static_cast<double>(k), -a);
      cdf[k - 1] = acc;
    }
    for (auto& c : cdf) c /= acc;
    cached_a = a;
  }
  std::vector<std::uint64_t> sizes(n);
  for (auto& d : sizes) {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::uint64_t k = static_cast<std::uint64_t>(it - cdf.begin()) + 1;
    d = std::max(k, d_min);
  }
  return sizes;
}

}  // namespace aoifl
