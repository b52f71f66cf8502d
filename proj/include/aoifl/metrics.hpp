#pragma once

// Load-balance analytics over selection traces, exact counterparts for the
// weight variance Sigma, selection-skew estimation, and the convergence
// bound. Exact formulas and the Monte Carlo estimator are kept as two
// independent routes on purpose; tests confront them with each other.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "fedsim.hpp"
#include "markov.hpp"

namespace aoifl {

struct SigmaEstimate {
  double sigma = 0.0;
  double stderr_ = 0.0;                  // batch-means standard error
  std::uint64_t rounds_used = 0;
  std::vector<double> per_client_var;    // Var[omega_i]; sigma is their sum
  std::vector<double> per_client_gamma;  // gamma_i = E[omega_i^2]
};

// Sigma = sum_i Var[omega_i] from a recorded trace, with omega_i = 0 on
// rounds where client i is unselected. The stderr comes from 20 batch means
// (fewer when the trace is short).
inline SigmaEstimate sigma_monte_carlo(const SelectionTrace& trace) {
  const std::uint64_t T = trace.rounds.size();
  if (T < 2) throw std::invalid_argument("sigma: need at least 2 recorded rounds");
  const std::size_t n = trace.n;
  std::vector<double> sumw(n, 0.0), sumw2(n, 0.0);
  for (const auto& out : trace.rounds) {
    for (std::size_t k = 0; k < out.selected.size(); ++k) {
      const double w = out.weights[k];
      sumw[out.selected[k]] += w;
      sumw2[out.selected[k]] += w * w;
    }
  }
  SigmaEstimate est;
  est.rounds_used = T;
  est.per_client_var.resize(n);
  est.per_client_gamma.resize(n);
  const double Td = static_cast<double>(T);
  for (std::size_t i = 0; i < n; ++i) {
    est.per_client_gamma[i] = sumw2[i] / Td;
    est.per_client_var[i] = (sumw2[i] - sumw[i] * sumw[i] / Td) / (Td - 1.0);
    est.sigma += est.per_client_var[i];
  }

  const std::uint64_t B = T >= 40 ? 20 : 2;
  std::vector<double> batch_sigma(B, 0.0);
  std::vector<double> bw(n), bw2(n);
  for (std::uint64_t b = 0; b < B; ++b) {
    const std::uint64_t lo = b * T / B, hi = (b + 1) * T / B;
    const double len = static_cast<double>(hi - lo);
    std::fill(bw.begin(), bw.end(), 0.0);
    std::fill(bw2.begin(), bw2.end(), 0.0);
    for (std::uint64_t t = lo; t < hi; ++t) {
      const auto& out = trace.rounds[t];
      for (std::size_t k = 0; k < out.selected.size(); ++k) {
        bw[out.selected[k]] += out.weights[k];
        bw2[out.selected[k]] += out.weights[k] * out.weights[k];
      }
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (bw2[i] - bw[i] * bw[i] / len) / (len - 1.0);
    batch_sigma[b] = s;
  }
  double mean = 0.0;
  for (double v : batch_sigma) mean += v;
  mean /= static_cast<double>(B);
  double var = 0.0;
  for (double v : batch_sigma) var += (v - mean) * (v - mean);
  var /= static_cast<double>(B - 1);
  est.stderr_ = std::sqrt(var / static_cast<double>(B));
  return est;
}

// Exact Sigma for the uniform m-subset policy with data-size weights.
// Homogeneous sizes collapse to 1/m - 1/n for any n; heterogeneous sizes
// are enumerated over all C(n, m) subsets, which caps n at 20.
inline double sigma_random_weighted_exact(const std::vector<std::uint64_t>& sizes,
                                          std::uint32_t m) {
  const std::size_t n = sizes.size();
  if (n == 0 || m == 0 || m > n)
    throw std::invalid_argument("sigma exact: need 1 <= m <= n");
  bool homogeneous = true;
  for (std::size_t i = 1; i < n; ++i) homogeneous = homogeneous && sizes[i] == sizes[0];
  if (homogeneous)
    return 1.0 / static_cast<double>(m) - 1.0 / static_cast<double>(n);
  if (n > 20)
    throw std::invalid_argument(
        "sigma exact: subset enumeration is limited to n <= 20; use the Monte Carlo estimator");
  std::vector<double> ew(n, 0.0), ew2(n, 0.0);
  std::vector<std::uint32_t> idx(m);
  for (std::uint32_t k = 0; k < m; ++k) idx[k] = k;
  std::uint64_t count = 0;
  for (;;) {
    double total = 0.0;
    for (auto i : idx) total += static_cast<double>(sizes[i]);
    for (auto i : idx) {
      const double w = static_cast<double>(sizes[i]) / total;
      ew[i] += w;
      ew2[i] += w * w;
    }
    count += 1;
    // next m-combination of {0..n-1} in lexicographic order
    std::size_t k = m;
    while (k > 0 && idx[k - 1] == n - m + k - 1) --k;
    if (k == 0) break;
    idx[k - 1] += 1;
    for (std::size_t j = k; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
  double sigma = 0.0;
  const double c = static_cast<double>(count);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = ew[i] / c;
    sigma += ew2[i] / c - mean * mean;
  }
  return sigma;
}

// Exact Sigma for size-biased sampling with replacement: sum q_i(1-q_i)/m.
inline double sigma_probabilistic_exact(const std::vector<std::uint64_t>& sizes,
                                        std::uint32_t m) {
  const std::size_t n = sizes.size();
  if (n == 0 || m == 0) throw std::invalid_argument("sigma exact: need n >= 1 and m >= 1");
  double total = 0.0;
  for (auto d : sizes) total += static_cast<double>(d);
  double sigma = 0.0;
  for (auto d : sizes) {
    const double q = static_cast<double>(d) / total;
    sigma += q * (1.0 - q) / static_cast<double>(m);
  }
  return sigma;
}

// E[1/|S|] when |S| ~ Binomial(n, rate), with the empty outcome forced to a
// single client (its mass counts as |S| = 1).
inline double expected_inverse_selected(double rate, std::uint64_t n) {
  if (!(rate > 0.0 && rate <= 1.0))
    throw std::invalid_argument("expected inverse: rate must lie in (0, 1]");
  if (n == 0) throw std::invalid_argument("expected inverse: n must be >= 1");
  if (rate >= 1.0) return 1.0 / static_cast<double>(n);
  const double lp = std::log(rate), lq = std::log1p(-rate);
  const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
  double acc = std::exp(static_cast<double>(n) * lq);  // P(|S| = 0), forced to 1 client
  for (std::uint64_t s = 1; s <= n; ++s) {
    const double sd = static_cast<double>(s);
    const double logp = lgn - std::lgamma(sd + 1.0) - std::lgamma(static_cast<double>(n - s) + 1.0) +
                        sd * lp + static_cast<double>(n - s) * lq;
    acc += std::exp(logp) / sd;
  }
  return acc;
}

// Exact Sigma for the age-chain policy with uniform weights: every client is
// independently selected at the steady-state rate p_avg = sum_a pi_a p_a, so
// Sigma = E[1/|S|] - 1/n.
inline double sigma_markov_exact(const MarkovChainSpec& chain, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("sigma exact: n must be >= 1");
  const auto st = stationary_distribution(chain);
  double p_avg = 0.0;
  for (std::size_t a = 0; a < st.pi.size(); ++a) p_avg += st.pi[a] * chain.p[a];
  return expected_inverse_selected(p_avg, n) - 1.0 / static_cast<double>(n);
}

struct IntervalHistogram {
  std::map<std::uint32_t, std::uint64_t> counts;  // gap -> occurrences, pooled over clients
  std::uint64_t censored = 0;                     // clients selected fewer than twice

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& [gap, c] : counts) t += c;
    return t;
  }
  double mean() const {
    double s = 0.0;
    const auto t = total();
    if (t == 0) throw std::invalid_argument("interval histogram: no uncensored gaps");
    for (const auto& [gap, c] : counts) s += static_cast<double>(gap) * static_cast<double>(c);
    return s / static_cast<double>(t);
  }
};

// Gaps between consecutive selection rounds of the same client, pooled.
// Clients with fewer than two selections only contribute a right-censored
// observation, counted separately.
inline IntervalHistogram inter_selection_histogram(const SelectionTrace& trace) {
  std::vector<std::int64_t> last(trace.n, -1);
  std::vector<std::uint32_t> times(trace.n, 0);
  IntervalHistogram hist;
  for (const auto& out : trace.rounds) {
    for (auto id : out.selected) {
      if (last[id] >= 0)
        hist.counts[static_cast<std::uint32_t>(out.round - last[id])] += 1;
      last[id] = out.round;
      times[id] += 1;
    }
  }
  for (auto c : times)
    if (c < 2) hist.censored += 1;
  return hist;
}

// sqrt(Var Y) / W where Y counts per-client selections inside disjoint
// windows of W rounds; the variance pools all (client, window) pairs.
inline double windowed_selection_stability(const SelectionTrace& trace, std::uint32_t window) {
  if (window == 0) throw std::invalid_argument("stability: window must be >= 1");
  const std::uint64_t T = trace.rounds.size();
  const std::uint64_t W = T / window;
  if (W == 0) throw std::invalid_argument("stability: trace shorter than one window");
  if (trace.n * W < 2) throw std::invalid_argument("stability: need at least 2 (client, window) pairs");
  std::vector<double> y(trace.n * W, 0.0);
  for (std::uint64_t t = 0; t < W * window; ++t) {
    const std::uint64_t w = t / window;
    for (auto id : trace.rounds[t].selected) y[w * trace.n + id] += 1.0;
  }
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size() - 1);
  return std::sqrt(var) / static_cast<double>(window);
}

struct SkewEstimate {
  double rho_under = 0.0;                // min over rounds of rho(S^t; theta^t)
  std::optional<double> rho_over;        // max over rounds of rho(S^t; theta*)
  std::uint64_t rounds_used = 0;
  std::uint64_t skipped_rounds = 0;      // rounds whose denominator vanished
};

// rho(S; theta') = sum_{k in S} omega_k (F_k(theta') - F_k*) over
// (F(theta') - sum_k q_k F_k*), evaluated per recorded round.
inline SkewEstimate estimate_selection_skew(const FLTask& task, const TrainingTrace& trace) {
  if (trace.outcomes.empty()) throw std::invalid_argument("skew: empty training trace");
  double qf_star = 0.0;
  std::vector<double> f_min(task.n);
  for (std::size_t k = 0; k < task.n; ++k) {
    f_min[k] = task.client_loss(k, task.centers[k]);  // exactly 0 for quadratics
    qf_star += task.q[k] * f_min[k];
  }
  const double gamma_denom = task.global_loss(task.theta_star) - qf_star;
  std::vector<double> f_at_star(task.n);
  for (std::size_t k = 0; k < task.n; ++k) f_at_star[k] = task.client_loss(k, task.theta_star);

  SkewEstimate est;
  est.rho_under = std::numeric_limits<double>::infinity();
  double over = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trace.outcomes.size(); ++t) {
    const auto& out = trace.outcomes[t];
    const auto& theta = trace.thetas[t];
    const double denom = task.global_loss(theta) - qf_star;
    if (std::abs(denom) < 1e-12) {
      est.skipped_rounds += 1;
      continue;
    }
    double num = 0.0, num_star = 0.0;
    for (std::size_t k = 0; k < out.selected.size(); ++k) {
      const auto id = out.selected[k];
      num += out.weights[k] * (task.client_loss(id, theta) - f_min[id]);
      num_star += out.weights[k] * (f_at_star[id] - f_min[id]);
    }
    est.rho_under = std::min(est.rho_under, num / denom);
    if (gamma_denom >= 1e-12) over = std::max(over, num_star / gamma_denom);
    est.rounds_used += 1;
  }
  if (est.rounds_used == 0)
    throw std::runtime_error("skew: every round had a vanishing denominator");
  if (gamma_denom >= 1e-12) est.rho_over = over;
  return est;
}

enum class BoundVariant {
  statement,  // 16 G^2 K m^2 (K+1) (Sigma+1)
  appendix,   // 16 G^2 K^3 m^2 (Sigma+1), the constant the proof's last step carries
};

struct BoundInputs {
  double L = 0.0;
  double mu = 0.0;
  double G2 = 0.0;
  double sigma2 = 0.0;
  double Gamma = 0.0;
  double Sigma = 0.0;
  double rho_under = 0.0;
  double rho_over = 0.0;
  std::uint32_t K = 0;  // local steps, >= 2 (the bound divides by K-1)
  std::uint32_t m = 0;
  std::uint64_t T = 0;
  double theta0_dist2 = 0.0;  // ||theta^0 - theta*||^2
};

inline void validate_bound_inputs(const BoundInputs& in) {
  if (!(in.mu > 0.0) || !(in.L >= in.mu))
    throw std::invalid_argument("bound: need 0 < mu <= L");
  if (in.K < 2) throw std::invalid_argument("bound: K must be >= 2");
  if (in.m == 0) throw std::invalid_argument("bound: m must be >= 1");
  if (in.T == 0) throw std::invalid_argument("bound: T must be >= 1");
  if (!(in.rho_under > 0.0) || !(in.rho_over >= in.rho_under))
    throw std::invalid_argument("bound: need rho_over >= rho_under > 0");
  if (in.Sigma < 0.0 || in.G2 < 0.0 || in.sigma2 < 0.0 || in.Gamma < 0.0 || in.theta0_dist2 < 0.0)
    throw std::invalid_argument("bound: Sigma, G2, sigma2, Gamma and theta0_dist2 must be >= 0");
}

// Learning-rate offset the bound's schedule eta_t = 1/(mu (t + gamma)) uses.
inline double bound_gamma(double L, double mu, std::uint32_t K) {
  return 4.0 * static_cast<double>(K) * (static_cast<double>(K) + 1.0) * L / mu;
}

// Expected optimality gap after T rounds:
//   (L/2)/(T+gamma) [ gamma ||theta0-theta*||^2
//                     + (16 G^2 K m^2 (K+1)(Sigma+1) + m K sigma^2)
//                       / (rho_under (K-1) mu^2)
//                     + 6 L Gamma / ((K-1) mu^2) ]
//   + K L Gamma (rho_over/rho_under - 1) / ((K-1) mu).
// The 16 G^2 ... coefficient is exposed via `variant` because the derivation
// carries K^3 m^2 where the final statement reads K m^2 (K+1).
inline double convergence_bound(const BoundInputs& in, BoundVariant variant = BoundVariant::statement) {
  validate_bound_inputs(in);
  const double K = static_cast<double>(in.K);
  const double m = static_cast<double>(in.m);
  const double gamma = bound_gamma(in.L, in.mu, in.K);
  const double gsq = variant == BoundVariant::statement ? 16.0 * in.G2 * K * m * m * (K + 1.0)
                                                        : 16.0 * in.G2 * K * K * K * m * m;
  const double mid = (gsq * (in.Sigma + 1.0) + m * K * in.sigma2) /
                     (in.rho_under * (K - 1.0) * in.mu * in.mu);
  const double tail = 6.0 * in.L * in.Gamma / ((K - 1.0) * in.mu * in.mu);
  const double bias = K * in.L / ((K - 1.0) * in.mu) * in.Gamma * (in.rho_over / in.rho_under - 1.0);
  return (in.L / 2.0) * (gamma * in.theta0_dist2 + mid + tail) / (static_cast<double>(in.T) + gamma) +
         bias;
}

}  // namespace aoifl
