#pragma once

// Age process of a single client under probabilistic selection: from age a
// the client is selected with probability p[a], which resets the age to 0;
// otherwise the age grows and saturates at m_prime (self-loop). The gap X
// between consecutive selections is the "peak age"; its mean is pinned by
// the stationary rate (E[X] = 1/pi_0) and its variance measures how uneven
// the per-client selection load is.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace aoifl {

struct MarkovChainSpec {
  std::uint32_t m_prime = 0;
  std::vector<double> p;  // p[a] for a = 0..m_prime, p[m_prime] > 0
};

inline void validate_chain(const MarkovChainSpec& chain) {
  if (chain.p.size() != static_cast<std::size_t>(chain.m_prime) + 1)
    throw std::invalid_argument("chain: p must have m_prime + 1 entries");
  for (double v : chain.p)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("chain: p entries must lie in [0, 1]");
  if (!(chain.p[chain.m_prime] > 0.0))
    throw std::invalid_argument(
        "chain: p at the age cap must be positive, otherwise the age never renews");
}

struct StationaryDistribution {
  std::vector<double> pi;  // pi[a], a = 0..m_prime
};

// Closed form: pi_i proportional to prod_{j<i}(1-p_j), with the capped state
// absorbing the geometric dwell 1/p_{m'}. For m_prime = 0 the age is pinned
// at 0 regardless of selection, so pi = [1].
inline StationaryDistribution stationary_distribution(const MarkovChainSpec& chain) {
  validate_chain(chain);
  const std::uint32_t mp = chain.m_prime;
  if (mp == 0) return StationaryDistribution{{1.0}};
  std::vector<double> pi(mp + 1, 0.0);
  double prod = 1.0;  // prod_{j<i}(1-p_j)
  double denom = 1.0;
  for (std::uint32_t i = 1; i < mp; ++i) {
    prod *= 1.0 - chain.p[i - 1];
    pi[i] = prod;
    denom += prod;
  }
  prod *= 1.0 - chain.p[mp - 1];
  pi[mp] = prod / chain.p[mp];
  denom += pi[mp];
  pi[0] = 1.0;
  for (auto& v : pi) v /= denom;
  return StationaryDistribution{std::move(pi)};
}

namespace detail {

// Exact mean/variance of the selection gap X. Head: P(X=k) = p_{k-1} *
// prod_{j<k-1}(1-p_j) for k <= m'+1. Past the cap the gap is geometric with
// rate r = p_{m'}: P(m'+1+j) = C2 (1-r)^{j-1} r, C2 = prod_{j<=m'}(1-p_j).
inline void peak_moments_raw(const double* p, std::uint32_t mp, double& mean, double& var) {
  const double r = p[mp];
  double prod = 1.0;  // prod_{j<k-1}(1-p_j)
  double m1 = 0.0, m2 = 0.0;
  for (std::uint32_t k = 1; k <= mp + 1; ++k) {
    const double pk = p[k - 1] * prod;
    const double kd = static_cast<double>(k);
    m1 += kd * pk;
    m2 += kd * kd * pk;
    prod *= 1.0 - p[k - 1];
  }
  const double c2 = prod;  // mass surviving the first trial at the cap
  const double base = static_cast<double>(mp) + 1.0;
  m1 += c2 * (base + 1.0 / r);
  m2 += c2 * (base * base + 2.0 * base / r + (2.0 - r) / (r * r));
  mean = m1;
  var = m2 - m1 * m1;
}

}  // namespace detail

// Distribution of the selection gap X, stored as an explicit head over
// k = 1..m_prime+1 plus a parametric geometric tail (never truncated).
struct PeakAgeDistribution {
  std::uint32_t m_prime = 0;
  std::vector<double> head;      // head[k-1] = P(X = k), k = 1..m_prime+1
  std::vector<double> head_cdf;  // head_cdf[k-1] = P(X <= k)
  double tail_coeff = 0.0;       // C2: mass entering the geometric tail
  double tail_rate = 0.0;        // p_{m'}
  double mean = 0.0;
  double variance = 0.0;

  double pmf(std::int64_t k) const {
    if (k < 1) return 0.0;
    if (k <= static_cast<std::int64_t>(m_prime) + 1) return head[static_cast<std::size_t>(k - 1)];
    return tail_coeff * std::pow(1.0 - tail_rate, static_cast<double>(k - m_prime - 2)) * tail_rate;
  }

  double cdf(std::int64_t k) const {
    if (k < 1) return 0.0;
    if (k <= static_cast<std::int64_t>(m_prime) + 1) return head_cdf[static_cast<std::size_t>(k - 1)];
    return 1.0 - tail_coeff * std::pow(1.0 - tail_rate, static_cast<double>(k - m_prime - 1));
  }
};

inline PeakAgeDistribution peak_age_distribution(const MarkovChainSpec& chain) {
  validate_chain(chain);
  PeakAgeDistribution dist;
  dist.m_prime = chain.m_prime;
  dist.tail_rate = chain.p[chain.m_prime];
  dist.head.resize(chain.m_prime + 1);
  dist.head_cdf.resize(chain.m_prime + 1);
  double prod = 1.0, acc = 0.0;
  for (std::uint32_t k = 1; k <= chain.m_prime + 1; ++k) {
    dist.head[k - 1] = chain.p[k - 1] * prod;
    acc += dist.head[k - 1];
    dist.head_cdf[k - 1] = acc;
    prod *= 1.0 - chain.p[k - 1];
  }
  dist.tail_coeff = prod;
  detail::peak_moments_raw(chain.p.data(), chain.m_prime, dist.mean, dist.variance);
  return dist;
}

struct PeakAgeMoments {
  double mean = 0.0;
  double variance = 0.0;
};

inline PeakAgeMoments peak_age_moments(const MarkovChainSpec& chain) {
  validate_chain(chain);
  PeakAgeMoments m;
  detail::peak_moments_raw(chain.p.data(), chain.m_prime, m.mean, m.variance);
  return m;
}

enum class ChainRegime {
  geometric_tail,  // wait deterministically, then renew at a geometric rate
  two_point,       // gap supported on {i, i+1}
};

inline const char* to_string(ChainRegime r) {
  return r == ChainRegime::geometric_tail ? "geometric_tail" : "two_point";
}

struct OptimalMarkovResult {
  MarkovChainSpec chain;
  double variance = 0.0;
  ChainRegime regime = ChainRegime::geometric_tail;
};

// Minimum-variance chain with selection rate pi_0 = m/n. With a short age
// cap (m' <= floor(n/m) - 1) the best achievable gap is m' deterministic
// rounds plus a geometric(m/(n - m'm)) wait; with a long cap the gap can be
// pinned to {i, i+1} around n/m, reaching variance c(1-c), c = n/m - i.
inline OptimalMarkovResult optimal_markov_chain(std::uint64_t n, std::uint64_t m,
                                                std::uint32_t m_prime) {
  if (m == 0 || m > n) throw std::invalid_argument("optimal chain: need 1 <= m <= n");
  if (m_prime == 0) throw std::invalid_argument("optimal chain: m_prime must be >= 1");
  const double ratio = static_cast<double>(n) / static_cast<double>(m);
  const std::uint64_t i = n / m;  // floor(n/m)
  OptimalMarkovResult res;
  res.chain.m_prime = m_prime;
  res.chain.p.assign(m_prime + 1, 0.0);
  if (m_prime + 1 <= i) {
    res.regime = ChainRegime::geometric_tail;
    res.chain.p[m_prime] =
        static_cast<double>(m) / static_cast<double>(n - static_cast<std::uint64_t>(m_prime) * m);
    res.variance = (ratio - static_cast<double>(m_prime)) * (ratio - static_cast<double>(m_prime) - 1.0);
  } else {
    res.regime = ChainRegime::two_point;
    const double c = static_cast<double>(n % m) / static_cast<double>(m);  // n/m - i
    res.chain.p[i - 1] = 1.0 - c;
    for (std::uint32_t a = static_cast<std::uint32_t>(i); a <= m_prime; ++a) res.chain.p[a] = 1.0;
    res.variance = c * (1.0 - c);
  }
  return res;
}

// Raised when no member of a calibration family reaches the requested rate.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& msg, double lo, double hi)
      : std::runtime_error(msg), achievable_lo(lo), achievable_hi(hi) {}
  double achievable_lo;
  double achievable_hi;
};

namespace detail {

inline double ramp_pi0(double beta, std::uint32_t mp) {
  // E[X] = sum_{k=0}^{m'-1} prod_k + prod_{m'} / p_{m'} with the linear ramp
  // p_a = beta (a+1)/(m'+1); pi_0 = 1/E[X].
  double prod = 1.0, ex = 0.0;
  for (std::uint32_t a = 0; a < mp; ++a) {
    ex += prod;
    prod *= 1.0 - beta * static_cast<double>(a + 1) / static_cast<double>(mp + 1);
  }
  ex += prod / beta;  // p_{m'} = beta
  return 1.0 / ex;
}

}  // namespace detail

// Strictly increasing family p_a = beta (a+1)/(m'+1), with beta chosen by
// bisection so the stationary selection rate equals m/n. beta <= 1 keeps
// every entry a probability; rates above ramp_pi0(1) are unreachable.
inline MarkovChainSpec calibrate_monotone_chain(std::uint64_t n, std::uint64_t m,
                                                std::uint32_t m_prime, double tol = 1e-9,
                                                int max_iter = 200) {
  if (m == 0 || m > n) throw std::invalid_argument("calibrate chain: need 1 <= m <= n");
  if (m_prime == 0) throw std::invalid_argument("calibrate chain: m_prime must be >= 1");
  const double target = static_cast<double>(m) / static_cast<double>(n);
  const double reach = detail::ramp_pi0(1.0, m_prime);
  if (target > reach + tol)
    throw CalibrationError("calibrate chain: the monotone ramp peaks at rate " +
                               std::to_string(reach) + ", below the requested " +
                               std::to_string(target),
                           0.0, reach);
  double lo = 0.0, hi = 1.0, beta = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    beta = 0.5 * (lo + hi);
    const double v = detail::ramp_pi0(beta, m_prime);
    if (std::abs(v - target) <= 0.25 * tol) break;  // leave headroom for downstream checks at tol
    (v < target ? lo : hi) = beta;
  }
  if (std::abs(detail::ramp_pi0(beta, m_prime) - target) > tol) {
    if (std::abs(reach - target) <= tol) {
      beta = 1.0;
    } else {
      throw CalibrationError("calibrate chain: bisection did not reach the requested rate", 0.0,
                             reach);
    }
  }
  MarkovChainSpec chain;
  chain.m_prime = m_prime;
  chain.p.resize(m_prime + 1);
  for (std::uint32_t a = 0; a <= m_prime; ++a)
    chain.p[a] = beta * static_cast<double>(a + 1) / static_cast<double>(m_prime + 1);
  return chain;
}

struct GridOracleResult {
  MarkovChainSpec chain;
  double variance = 0.0;
  std::uint64_t feasible = 0;   // chains satisfying the rate constraint
  std::uint64_t evaluated = 0;  // prefix vectors visited
};

// Exhaustive check of the optimal-chain construction, used only by tests.
// p_0..p_{m'-1} sweep a uniform grid; p_{m'} is then solved analytically
// from E[X] = A + C/p_{m'} = n/m, so every candidate satisfies the rate
// constraint to machine precision instead of a loose grid tolerance.
inline GridOracleResult variance_grid_oracle(std::uint64_t n, std::uint64_t m,
                                             std::uint32_t m_prime, double grid_step) {
  if (m == 0 || m > n) throw std::invalid_argument("grid oracle: need 1 <= m <= n");
  if (m_prime == 0 || m_prime > 4)
    throw std::invalid_argument("grid oracle: supported range is 1 <= m_prime <= 4");
  int steps = 0;
  for (int s : {100, 50, 20})
    if (std::abs(grid_step - 1.0 / s) < 1e-12) steps = s;
  if (steps == 0) throw std::invalid_argument("grid oracle: grid_step must be 0.01, 0.02 or 0.05");

  const double target = static_cast<double>(n) / static_cast<double>(m);
  GridOracleResult res;
  res.variance = std::numeric_limits<double>::infinity();
  double p[5] = {0, 0, 0, 0, 0};

  // depth d holds prod = prod_{j<d}(1-p_j) and head = sum_{k<d} prod_k
  auto consider = [&](double head, double prod) {
    res.evaluated += 1;
    double r;
    if (prod < 1e-15) {
      if (std::abs(head - target) > 1e-9) return;
      r = 1.0;
    } else {
      const double denom = target - head;
      if (denom <= 0.0) return;
      r = prod / denom;
      if (r > 1.0 + 1e-12) return;
      if (r > 1.0) r = 1.0;
    }
    p[m_prime] = r;
    res.feasible += 1;
    double mean, var;
    detail::peak_moments_raw(p, m_prime, mean, var);
    if (var < res.variance) {
      res.variance = var;
      res.chain.m_prime = m_prime;
      res.chain.p.assign(p, p + m_prime + 1);
    }
  };

  auto sweep = [&](auto&& self, std::uint32_t d, double prod, double head) -> void {
    if (d == m_prime) {
      consider(head, prod);
      return;
    }
    for (int k = 0; k <= steps; ++k) {
      const double v = static_cast<double>(k) / static_cast<double>(steps);
      p[d] = v;
      self(self, d + 1, prod * (1.0 - v), head + prod);
    }
  };
  sweep(sweep, 0, 1.0, 0.0);

  if (res.feasible == 0)
    throw std::runtime_error("grid oracle: no chain on this grid meets the rate constraint");
  return res;
}

struct ChainSimStats {
  double mean_gap = 0.0;
  double var_gap = 0.0;         // sample variance over renewals
  std::vector<double> pi_hat;   // empirical state occupancy per round
  std::uint64_t renewals = 0;
  std::uint64_t rounds = 0;
};

// Monte Carlo renewal simulation of a single client's age process.
inline ChainSimStats simulate_chain(const MarkovChainSpec& chain, std::uint64_t renewals,
                                    Rng& rng) {
  validate_chain(chain);
  if (renewals < 2) throw std::invalid_argument("simulate chain: need at least 2 renewals");
  ChainSimStats st;
  st.renewals = renewals;
  st.pi_hat.assign(chain.m_prime + 1, 0.0);
  std::vector<std::uint64_t> visits(chain.m_prime + 1, 0);
  double sum = 0.0, sum2 = 0.0;
  for (std::uint64_t rep = 0; rep < renewals; ++rep) {
    std::uint32_t age = 0;
    std::uint64_t k = 0;
    for (;;) {
      k += 1;
      visits[age] += 1;
      st.rounds += 1;
      if (rng.bernoulli(chain.p[age])) break;
      age = std::min(age + 1, chain.m_prime);
    }
    const double kd = static_cast<double>(k);
    sum += kd;
    sum2 += kd * kd;
  }
  const double r = static_cast<double>(renewals);
  st.mean_gap = sum / r;
  st.var_gap = (sum2 - sum * sum / r) / (r - 1.0);
  for (std::uint32_t a = 0; a <= chain.m_prime; ++a)
    st.pi_hat[a] = static_cast<double>(visits[a]) / static_cast<double>(st.rounds);
  return st;
}

}  // namespace aoifl
