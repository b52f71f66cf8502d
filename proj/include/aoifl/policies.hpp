#pragma once

// The four client-selection policies. All of them emit a RoundOutcome whose
// weights sum to 1; only the Markov policies read client ages. Each round
// draws from its own derived substream, so outcome t never depends on how
// many draws earlier rounds consumed.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "markov.hpp"

namespace aoifl {

enum class PolicyKind {
  random_weighted,   // uniform m-subset, data-size weights
  probabilistic,     // m size-biased draws with replacement, multiplicity weights
  markov_optimal,    // per-client age chain from the minimum-variance construction
  markov_monotone,   // per-client age chain from the calibrated monotone ramp
};

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::random_weighted: return "random_weighted";
    case PolicyKind::probabilistic: return "probabilistic";
    case PolicyKind::markov_optimal: return "markov_optimal";
    case PolicyKind::markov_monotone: return "markov_monotone";
  }
  return "?";
}

// What to do when a Markov round selects more or fewer than m clients.
// off keeps the random set; trim drops uniform extras; pad adds the oldest
// unselected clients (ties broken uniformly).
enum class ExactM { off, trim, pad };

inline const char* to_string(ExactM e) {
  switch (e) {
    case ExactM::off: return "off";
    case ExactM::trim: return "trim";
    case ExactM::pad: return "pad";
  }
  return "?";
}

struct PolicySpec {
  PolicyKind kind = PolicyKind::random_weighted;
  std::uint32_t m = 1;
  std::optional<MarkovChainSpec> chain;  // required for the markov kinds
  ExactM exact_m = ExactM::off;
};

inline bool is_markov(PolicyKind k) {
  return k == PolicyKind::markov_optimal || k == PolicyKind::markov_monotone;
}

inline void validate_policy(const PolicySpec& spec, const ClientPopulation& pop) {
  if (spec.m == 0 || spec.m > pop.n())
    throw std::invalid_argument("policy: need 1 <= m <= n");
  if (is_markov(spec.kind)) {
    if (!spec.chain) throw std::invalid_argument("policy: markov kinds require a chain");
    validate_chain(*spec.chain);
    if (spec.chain->m_prime != pop.m_prime)
      throw std::invalid_argument("policy: chain age cap must match the population age cap");
    const double pi0 = stationary_distribution(*spec.chain).pi[0];
    const double rate = static_cast<double>(spec.m) / static_cast<double>(pop.n());
    if (std::abs(pi0 - rate) > 1e-9)
      throw std::invalid_argument("policy: chain stationary rate must equal m/n");
  }
}

// Convenience constructor: builds the matching chain for markov kinds.
inline PolicySpec make_policy(PolicyKind kind, std::uint64_t n, std::uint32_t m,
                              std::uint32_t m_prime, ExactM exact_m = ExactM::off) {
  PolicySpec spec;
  spec.kind = kind;
  spec.m = m;
  spec.exact_m = exact_m;
  if (kind == PolicyKind::markov_optimal)
    spec.chain = optimal_markov_chain(n, m, m_prime).chain;
  else if (kind == PolicyKind::markov_monotone)
    spec.chain = calibrate_monotone_chain(n, m, m_prime);
  return spec;
}

// Uniform m-subset; omega_i = d_i / sum of selected sizes.
inline RoundOutcome select_random_weighted(const ClientPopulation& pop, std::uint32_t m,
                                           Rng& rng) {
  const std::size_t n = pop.n();
  std::vector<ClientId> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<ClientId>(i);
  for (std::uint32_t k = 0; k < m; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
    std::swap(idx[k], idx[j]);
  }
  RoundOutcome out;
  out.selected.assign(idx.begin(), idx.begin() + m);
  std::sort(out.selected.begin(), out.selected.end());
  double total = 0.0;
  for (auto id : out.selected) total += static_cast<double>(pop.sizes[id]);
  out.weights.resize(m);
  for (std::uint32_t k = 0; k < m; ++k)
    out.weights[k] = static_cast<double>(pop.sizes[out.selected[k]]) / total;
  return out;
}

// m draws with replacement, client i with probability q_i = d_i / sum d;
// omega_i = (times drawn) / m.
inline RoundOutcome select_probabilistic(const ClientPopulation& pop, std::uint32_t m, Rng& rng) {
  const std::size_t n = pop.n();
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += static_cast<double>(pop.sizes[i]);
    cdf[i] = acc;
  }
  std::vector<std::uint32_t> count(n, 0);
  for (std::uint32_t k = 0; k < m; ++k) {
    const double u = rng.uniform() * acc;
    const std::size_t i = static_cast<std::size_t>(
        std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    count[std::min(i, n - 1)] += 1;
  }
  RoundOutcome out;
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] == 0) continue;
    out.selected.push_back(static_cast<ClientId>(i));
    out.weights.push_back(static_cast<double>(count[i]) / static_cast<double>(m));
  }
  return out;
}

// Independent Bernoulli(p[A_i]) per client; an empty draw forces one client
// chosen uniformly from the whole population. Weights are uniform over the
// selected set.
inline RoundOutcome select_markov(const ClientPopulation& pop, const MarkovChainSpec& chain,
                                  std::uint32_t m, ExactM exact_m, Rng& rng) {
  const std::size_t n = pop.n();
  RoundOutcome out;
  for (std::size_t i = 0; i < n; ++i)
    if (rng.bernoulli(chain.p[pop.ages[i]])) out.selected.push_back(static_cast<ClientId>(i));
  if (out.selected.empty()) {
    out.selected.push_back(static_cast<ClientId>(rng.below(n)));
    out.forced = true;
  }
  if (exact_m == ExactM::trim) {
    while (out.selected.size() > m)
      out.selected.erase(out.selected.begin() +
                         static_cast<std::ptrdiff_t>(rng.below(out.selected.size())));
  } else if (exact_m == ExactM::pad) {
    std::vector<char> in(n, 0);
    for (auto id : out.selected) in[id] = 1;
    while (out.selected.size() < m) {
      std::uint32_t best_age = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (!in[i]) best_age = std::max(best_age, pop.ages[i]);
      std::vector<ClientId> ties;
      for (std::size_t i = 0; i < n; ++i)
        if (!in[i] && pop.ages[i] == best_age) ties.push_back(static_cast<ClientId>(i));
      const ClientId pick = ties[rng.below(ties.size())];
      in[pick] = 1;
      out.selected.push_back(pick);
    }
    std::sort(out.selected.begin(), out.selected.end());
  }
  out.weights.assign(out.selected.size(), 1.0 / static_cast<double>(out.selected.size()));
  return out;
}

inline RoundOutcome select_round(const ClientPopulation& pop, const PolicySpec& spec, Rng& rng) {
  switch (spec.kind) {
    case PolicyKind::random_weighted: return select_random_weighted(pop, spec.m, rng);
    case PolicyKind::probabilistic: return select_probabilistic(pop, spec.m, rng);
    case PolicyKind::markov_optimal:
    case PolicyKind::markov_monotone:
      return select_markov(pop, *spec.chain, spec.m, spec.exact_m, rng);
  }
  throw std::invalid_argument("policy: unknown kind");
}

inline constexpr std::uint32_t kBurnInDefaultFactor = 10;

inline std::uint32_t default_burn_in(const ClientPopulation& pop) {
  return kBurnInDefaultFactor * (pop.m_prime + 1);
}

// Run a policy for burn_in + rounds rounds, recording the last `rounds`.
// Recorded round indices restart at 0. Ages advance after every round,
// including discarded ones.
inline SelectionTrace run_selection(const ClientPopulation& pop0, const PolicySpec& spec,
                                    std::uint64_t rounds, std::uint32_t burn_in, RngSeed base) {
  validate_population(pop0);
  validate_policy(spec, pop0);
  if (rounds == 0) throw std::invalid_argument("run selection: rounds must be >= 1");
  ClientPopulation pop = pop0;
  SelectionTrace trace;
  trace.n = pop.n();
  trace.burn_in = burn_in;
  trace.rounds.reserve(rounds);
  const std::uint64_t total = rounds + burn_in;
  for (std::uint64_t t = 0; t < total; ++t) {
    Rng rng(derive(base, t));
    RoundOutcome out = select_round(pop, spec, rng);
    step_ages(pop, out);
    if (t < burn_in) continue;
    out.round = static_cast<std::int64_t>(t - burn_in);
    if (out.forced) trace.forced_rounds += 1;
    validate_outcome(out, pop.n());
    trace.rounds.push_back(std::move(out));
  }
  return trace;
}

}  // namespace aoifl
