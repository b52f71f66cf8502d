// Acceptance checks for the selection/analytics/training stack. Each
// criterion prints exactly one [PASS]/[FAIL] line with its measured numbers;
// the exit code is the number of failed criteria. Tolerances are pinned here
// on purpose so a regression cannot hide behind a config change.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aoifl/config.hpp"
#include "aoifl/fedsim.hpp"
#include "aoifl/markov.hpp"
#include "aoifl/metrics.hpp"
#include "aoifl/policies.hpp"
#include "aoifl/runner.hpp"

using namespace aoifl;

namespace {

int g_failures = 0;

void report(int idx, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", idx, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1
// Closed-form gap variance vs a long renewal simulation.
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream msg;
  struct Case {
    std::uint32_t m_prime;
    double tol;
  };
  for (const Case c : {Case{10, 0.002}, Case{5, 0.01}}) {
    const auto res = optimal_markov_chain(100, 15, c.m_prime);
    Rng rng(RngSeed{101, c.m_prime});
    const auto t1 = std::chrono::steady_clock::now();
    const auto stats = simulate_chain(res.chain, 1000000, rng);
    const double dt = seconds_since(t1);
    const bool close = std::abs(stats.var_gap - res.variance) <= c.tol;
    const bool fast = dt < 5.0;
    ok = ok && close && fast;
    msg << "m'=" << c.m_prime << " closed " << fmt(res.variance) << " sim "
        << fmt(stats.var_gap) << " (tol " << c.tol << ", " << fmt(dt) << "s) ";
  }
  msg << "total " << fmt(seconds_since(t0)) << "s";
  report(1, ok, "gap variance closed form vs 1e6-renewal simulation: " + msg.str());
}

// ---------------------------------------------------------------- criterion 2
// No grid-feasible chain beats the closed-form minimum by more than the
// 2% slack the 0.01 grid is allowed.
void criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream msg;
  for (const auto& [n, m] :
       std::vector<std::pair<std::uint64_t, std::uint64_t>>{{10, 3}, {10, 5}, {12, 4}}) {
    for (std::uint32_t mp : {1u, 2u, 3u}) {
      const double closed = optimal_markov_chain(n, m, mp).variance;
      const auto oracle = variance_grid_oracle(n, m, mp, 0.01);
      const bool fine = oracle.variance >= closed * 0.98 - 1e-12;
      ok = ok && fine;
      if (!fine)
        msg << " VIOLATION (" << n << "," << m << ",m'=" << mp << "): oracle "
            << fmt(oracle.variance) << " < closed " << fmt(closed);
    }
  }
  const double dt = seconds_since(t0);
  ok = ok && dt < 120.0;
  report(2, ok,
         "0.01-grid oracle never undercuts the closed form on 9 configs" + msg.str() +
             " (" + fmt(dt) + "s)");
}

// ---------------------------------------------------------------- criterion 3
// Calibration: closed-form pi_0 = m/n to 1e-9 and the empirical per-client
// selection rate over 1e5 steady-state rounds inside 0.15 +- 0.005.
void criterion_3() {
  bool ok = true;
  std::ostringstream msg;
  const auto pop = make_population(std::vector<std::uint64_t>(100, 3), 10);
  std::uint64_t stream = 0;
  for (const bool monotone : {false, true}) {
    const MarkovChainSpec chain = monotone ? calibrate_monotone_chain(100, 15, 10)
                                           : optimal_markov_chain(100, 15, 10).chain;
    const double pi0 = stationary_distribution(chain).pi[0];
    const bool exact_ok = std::abs(pi0 - 0.15) <= 1e-9;

    PolicySpec spec;
    spec.kind = monotone ? PolicyKind::markov_monotone : PolicyKind::markov_optimal;
    spec.m = 15;
    spec.chain = chain;
    const auto trace = run_selection(pop, spec, 100000, 110, RngSeed{103, stream++});
    std::vector<std::uint64_t> counts(100, 0);
    for (const auto& out : trace.rounds)
      for (auto id : out.selected) ++counts[id];
    double worst = 0.0;
    for (auto c : counts)
      worst = std::max(worst, std::abs(double(c) / double(trace.rounds.size()) - 0.15));
    const bool rate_ok = worst <= 0.005;
    ok = ok && exact_ok && rate_ok;
    msg << (monotone ? "monotone" : "optimal") << ": pi0 err " << fmt(std::abs(pi0 - 0.15))
        << ", worst client rate err " << fmt(worst) << "; ";
  }
  report(3, ok, "pi_0 calibration and empirical selection rate: " + msg.str());
}

// ---------------------------------------------------------------- criterion 4
// Monte-Carlo Sigma vs the closed forms, homogeneous sizes.
void criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream msg;
  const auto pop = make_population(std::vector<std::uint64_t>(100, 3), 10);
  const auto chain = optimal_markov_chain(100, 15, 10).chain;
  struct Case {
    PolicyKind kind;
    double exact;
  };
  const std::vector<Case> cases = {
      {PolicyKind::random_weighted, 1.0 / 15.0 - 1.0 / 100.0},
      {PolicyKind::probabilistic, sigma_probabilistic_exact(pop.sizes, 15)},
      {PolicyKind::markov_optimal, sigma_markov_exact(chain, 100)},
  };
  std::uint64_t stream = 0;
  for (const auto& c : cases) {
    const auto spec = make_policy(c.kind, 100, 15, 10);
    const auto trace = run_selection(pop, spec, 100000, 110, RngSeed{104, stream++});
    const auto est = sigma_monte_carlo(trace);
    const double err = std::abs(est.sigma - c.exact);
    const double tol = std::max(3.0 * est.stderr_, 5e-3);
    ok = ok && err <= tol;
    msg << to_string(c.kind) << " exact " << fmt(c.exact) << " mc " << fmt(est.sigma)
        << " (err " << fmt(err) << " tol " << fmt(tol) << "); ";
  }
  const double dt = seconds_since(t0);
  ok = ok && dt < 30.0;
  report(4, ok, "Sigma closed forms vs Monte Carlo, T=1e5: " + msg.str() + fmt(dt) + "s");
}

// ---------------------------------------------------------------- criterion 5
// Measured Sigma ordering across the four policies on Zipf(2.0) sizes,
// T=1000, 10 seeds, plus mean ranges for the two markov policies.
void criterion_5() {
  const std::vector<PolicyKind> kinds = {PolicyKind::markov_optimal, PolicyKind::markov_monotone,
                                         PolicyKind::probabilistic, PolicyKind::random_weighted};
  int ordered_seeds = 0;
  std::vector<double> means(4, 0.0);
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng pop_rng(derive(RngSeed{105, seed}, 0));
    const auto sizes = zipf_dataset_sizes(100, 2.0, 1, pop_rng);
    const auto pop = make_population(sizes, 10);
    std::vector<double> sigma(4, 0.0);
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      const auto spec = make_policy(kinds[k], 100, 15, 10);
      const auto trace = run_selection(pop, spec, 1000, 110, RngSeed{seed, 200 + k});
      sigma[k] = sigma_monte_carlo(trace).sigma;
      means[k] += sigma[k] / 10.0;
    }
    const bool ordered = sigma[0] < sigma[1] && sigma[1] < sigma[2] && sigma[2] < sigma[3];
    ordered_seeds += ordered ? 1 : 0;
    per_seed << " s" << seed << (ordered ? "+" : "-");
  }
  const bool order_ok = ordered_seeds >= 9;
  const bool mo_ok = means[0] >= 0.045 && means[0] <= 0.075;
  const bool mm_ok = means[1] >= 0.05 && means[1] <= 0.08;
  std::ostringstream msg;
  msg << "strict order opt<mono<prob<rand in " << ordered_seeds
      << "/10 seeds (need >=9);" << per_seed.str() << "; means opt " << fmt(means[0])
      << " mono " << fmt(means[1]) << " prob " << fmt(means[2]) << " rand " << fmt(means[3])
      << "; opt in [0.045,0.075] " << (mo_ok ? "yes" : "NO") << ", mono in [0.05,0.08] "
      << (mm_ok ? "yes" : "NO");
  report(5, order_ok && mo_ok && mm_ok, "Sigma ordering, Zipf sizes, T=1000: " + msg.str());
}

// ---------------------------------------------------------------- criterion 6
// Inter-selection law: two-point gaps for the optimal chain, geometric mean
// for uniform random selection.
void criterion_6() {
  const auto pop = make_population(std::vector<std::uint64_t>(100, 3), 10);

  const auto mo = make_policy(PolicyKind::markov_optimal, 100, 15, 10);
  const auto mo_trace = run_selection(pop, mo, 100000, 110, RngSeed{106, 0});
  const auto mo_hist = inter_selection_histogram(mo_trace);
  std::uint64_t on_support = 0, total = mo_hist.total();
  const std::uint64_t six = mo_hist.counts.count(6) ? mo_hist.counts.at(6) : 0;
  for (const auto& [gap, c] : mo_hist.counts)
    if (gap == 6 || gap == 7) on_support += c;
  const double p6 = double(six) / double(total);
  const bool support_ok = on_support == total;
  const bool p6_ok = std::abs(p6 - 1.0 / 3.0) <= 0.01;

  const auto rw = make_policy(PolicyKind::random_weighted, 100, 15, 10);
  const auto rw_trace = run_selection(pop, rw, 100000, 0, RngSeed{106, 1});
  const double rw_mean = inter_selection_histogram(rw_trace).mean();
  const bool mean_ok = std::abs(rw_mean - 20.0 / 3.0) <= 0.05;

  std::ostringstream msg;
  msg << "optimal gaps on {6,7}: " << on_support << "/" << total << ", P(6) " << fmt(p6)
      << " (want 1/3 +- 0.01); random gap mean " << fmt(rw_mean) << " (want 6.667 +- 0.05)";
  report(6, support_ok && p6_ok && mean_ok, "inter-selection laws: " + msg.str());
}

// ---------------------------------------------------------------- criterion 7
// Windowed stability: the optimal markov policy has the lowest metric at
// every window size, averaged over 10 seeds.
void criterion_7() {
  const std::vector<PolicyKind> kinds = {PolicyKind::markov_optimal, PolicyKind::markov_monotone,
                                         PolicyKind::probabilistic, PolicyKind::random_weighted};
  const std::vector<std::uint32_t> windows = {10, 20, 50, 100};
  std::vector<std::vector<double>> metric(kinds.size(), std::vector<double>(windows.size(), 0.0));
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng pop_rng(derive(RngSeed{107, seed}, 0));
    const auto sizes = zipf_dataset_sizes(100, 2.0, 1, pop_rng);
    const auto pop = make_population(sizes, 10);
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      const auto spec = make_policy(kinds[k], 100, 15, 10);
      const auto trace = run_selection(pop, spec, 1000, 110, RngSeed{seed, 300 + k});
      for (std::size_t w = 0; w < windows.size(); ++w)
        metric[k][w] += windowed_selection_stability(trace, windows[w]) / 10.0;
    }
  }
  bool ok = true;
  std::ostringstream msg;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    bool lowest = true;
    for (std::size_t k = 1; k < kinds.size(); ++k)
      lowest = lowest && metric[0][w] < metric[k][w];
    ok = ok && lowest;
    msg << "W=" << windows[w] << ": opt " << fmt(metric[0][w]) << " mono " << fmt(metric[1][w])
        << " prob " << fmt(metric[2][w]) << " rand " << fmt(metric[3][w])
        << (lowest ? " (opt lowest)" : " (opt NOT lowest)") << "; ";
  }
  report(7, ok, "stability metric sqrt(Var Y)/W over 10 seeds: " + msg.str());
}

// ---------------------------------------------------------------- criterion 8
// Aggregation second-moment bound on random small configurations: the
// measured (1/m) E||sum omega_i x_i||^2 never exceeds sum gamma_i ||x_i||^2
// by more than 3 standard errors. gamma_i is exact per policy.
void criterion_8() {
  Rng meta(RngSeed{108, 0});
  int violations = 0;
  double worst_margin = -1e300;
  for (int cfg = 0; cfg < 100; ++cfg) {
    const std::size_t n = 2 + meta.below(19);  // 2..20
    std::uint32_t m = 1 + std::uint32_t(meta.below(std::min<std::uint64_t>(n, 8)));
    const PolicyKind kind = cfg % 3 == 0   ? PolicyKind::random_weighted
                            : cfg % 3 == 1 ? PolicyKind::probabilistic
                                           : PolicyKind::markov_optimal;
    // The markov inequality needs E[1/|S|] >= 1/m, which the binomial spread
    // of |S| delivers for every m >= 2 but which cannot hold at m = 1: there
    // 1/m is the pathwise maximum of 1/|S| yet P(|S| >= 2) > 0 (identical
    // x_i realize the counterexample). The other two policies keep m = 1.
    if (kind == PolicyKind::markov_optimal && m == 1 && n >= 2)
      m = 2 + std::uint32_t(meta.below(std::min<std::uint64_t>(n, 8) - 1));
    const std::size_t dim = 1 + meta.below(8);  // 1..8
    std::vector<std::uint64_t> sizes(n);
    for (auto& d : sizes) d = 1 + meta.below(9);
    const std::uint32_t m_prime = 1 + std::uint32_t(meta.below(4));
    const auto pop = make_population(sizes, m_prime);
    const auto q = pop.importances();

    std::vector<std::vector<double>> x(n, std::vector<double>(dim));
    std::vector<double> xnorm2(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (auto& v : x[i]) {
        v = 3.0 * meta.normal();
        xnorm2[i] += v * v;
      }

    // gamma_i = E[omega_i^2]: exact for the subset and multinomial policies.
    // The markov policy gets the sampled gamma from the same trace: its
    // binomial |S| model assumes mixing, which fails for the degenerate
    // two-point chains (integral n/m) where the population phase-locks.
    std::vector<double> gamma(n, 0.0);
    if (kind == PolicyKind::random_weighted) {
      std::vector<std::uint32_t> comb(m);
      for (std::uint32_t k = 0; k < m; ++k) comb[k] = k;
      std::uint64_t count = 0;
      for (;;) {
        double tot = 0.0;
        for (auto i : comb) tot += double(sizes[i]);
        for (auto i : comb) {
          const double w = double(sizes[i]) / tot;
          gamma[i] += w * w;
        }
        ++count;
        // next lexicographic m-combination of {0..n-1}
        std::int64_t j = std::int64_t(m) - 1;
        while (j >= 0 && comb[std::size_t(j)] == n - m + std::size_t(j)) --j;
        if (j < 0) break;
        ++comb[std::size_t(j)];
        for (std::size_t k = std::size_t(j) + 1; k < m; ++k) comb[k] = comb[k - 1] + 1;
      }
      for (auto& g : gamma) g /= double(count);
    } else if (kind == PolicyKind::probabilistic) {
      for (std::size_t i = 0; i < n; ++i)
        gamma[i] = q[i] * (1.0 - q[i]) / double(m) + q[i] * q[i];
    }

    const auto spec = make_policy(kind, n, m, m_prime);
    const std::uint64_t T = 10000;
    const auto trace =
        run_selection(pop, spec, T, default_burn_in(pop), RngSeed{108, std::uint64_t(10 + cfg)});
    if (kind == PolicyKind::markov_optimal) gamma = sigma_monte_carlo(trace).per_client_gamma;
    double rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) rhs += gamma[i] * xnorm2[i];
    double sum = 0.0, sum2 = 0.0;
    std::vector<double> avg(dim);
    for (const auto& out : trace.rounds) {
      std::fill(avg.begin(), avg.end(), 0.0);
      for (std::size_t k = 0; k < out.selected.size(); ++k)
        for (std::size_t jj = 0; jj < dim; ++jj)
          avg[jj] += out.weights[k] * x[out.selected[k]][jj];
      double norm2 = 0.0;
      for (double v : avg) norm2 += v * v;
      sum += norm2;
      sum2 += norm2 * norm2;
    }
    const double mean = sum / double(T);
    const double se = std::sqrt(std::max(sum2 / double(T) - mean * mean, 0.0) / double(T));
    const double lhs = mean / double(m);
    const double margin = lhs - (rhs + 3.0 * se / double(m));
    worst_margin = std::max(worst_margin, margin);
    if (margin > 0.0) ++violations;
  }
  std::ostringstream msg;
  msg << violations << "/100 configs violate by more than 3 se; worst margin "
      << fmt(worst_margin);
  report(8, violations == 0, "weighted-average second-moment bound: " + msg.str());
}

// ---------------------------------------------------------------- criterion 9
// Rounds to a 1e-3 loss gap on a heterogeneous quadratic task: the optimal
// markov policy beats uniform random selection under a paired one-sided
// sign test at the 5% level. Runs that never reach the target inside the
// budget are scored as budget+1 (right-censored).
double sign_test_tail(int n, int wins) {
  // P(Bin(n, 1/2) >= wins)
  double tail = 0.0;
  for (int k = wins; k <= n; ++k) {
    double logc = 0.0;
    for (int i = 0; i < k; ++i) logc += std::log(double(n - i)) - std::log(double(i + 1));
    tail += std::exp(logc - double(n) * std::log(2.0));
  }
  return tail;
}

void criterion_9() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t T = 2000;
  const int seeds = 20;
  int mo_wins = 0, rw_wins = 0;
  double mo_mean = 0.0, rw_mean = 0.0;
  // Homogeneous sizes keep every policy's fixed point at theta*, so the race
  // is decided by selection noise alone, not by aggregation bias.
  const auto pop = make_population(std::vector<std::uint64_t>(100, 3), 10);
  for (int seed = 1; seed <= seeds; ++seed) {
    Rng task_rng(derive(RngSeed{std::uint64_t(seed), 901}, 0));
    const auto task = make_synthetic_task(100, 20, Heterogeneity::Dirichlet(0.3), 1.0, task_rng);
    TrainingConfig cfg;
    cfg.K = 5;
    cfg.batch_size = 50;
    cfg.noise_sigma = 0.5;
    cfg.T = T;
    cfg.loss_gap_target = 1e-3;
    cfg.lr = LrSchedule::Decay(0.06, 0.995);
    const auto run = [&](PolicyKind kind, std::uint64_t stream) {
      const auto spec = make_policy(kind, 100, 15, 10);
      const auto trace = run_federated(task, pop, spec, cfg, RngSeed{std::uint64_t(seed), stream});
      return trace.rounds_to_target ? double(*trace.rounds_to_target) : double(T + 1);
    };
    const double mo = run(PolicyKind::markov_optimal, 902);
    const double rw = run(PolicyKind::random_weighted, 903);
    mo_mean += mo / seeds;
    rw_mean += rw / seeds;
    if (mo < rw) ++mo_wins;
    else if (rw < mo) ++rw_wins;
  }
  const int decided = mo_wins + rw_wins;
  const double p = decided == 0 ? 1.0 : sign_test_tail(decided, mo_wins);
  const double dt = seconds_since(t0);
  const bool ok = mo_mean <= rw_mean && p <= 0.05 && dt < 120.0;
  std::ostringstream msg;
  msg << "mean rounds-to-1e-3: optimal " << fmt(mo_mean) << " vs random " << fmt(rw_mean)
      << "; optimal faster in " << mo_wins << "/" << decided
      << " decided seeds, sign-test p " << fmt(p) << " (need <= 0.05); " << fmt(dt) << "s";
  report(9, ok, "convergence ordering on dirichlet(0.3): " + msg.str());
}

// --------------------------------------------------------------- criterion 10
// The measured optimality gap stays below the analytic bound (exact task
// constants, exact Sigma, empirical rho range) for T in {100, 1000}, and the
// bound is exactly monotone in Sigma and rho_under.
void criterion_10() {
  bool ok = true;
  std::ostringstream msg;

  const auto pop = make_population(std::vector<std::uint64_t>(100, 3), 10);
  const auto spec = make_policy(PolicyKind::markov_optimal, 100, 15, 10);
  const double sigma_exact = sigma_markov_exact(*spec.chain, 100);

  for (const std::uint64_t T : {std::uint64_t(100), std::uint64_t(1000)}) {
    Rng task_rng(derive(RngSeed{110, T}, 0));
    const auto task = make_synthetic_task(100, 10, Heterogeneity::Dirichlet(0.3), 1.0, task_rng);
    TrainingConfig cfg;
    cfg.K = 5;
    cfg.batch_size = 50;
    cfg.noise_sigma = 1.0;
    cfg.T = T;
    cfg.lr = LrSchedule::Inverse(task.mu, bound_gamma(task.L, task.mu, cfg.K));

    double gap_mean = 0.0, gap_sq = 0.0;
    double rho_under = 1e300, rho_over = -1e300;
    const int seeds = 10;
    for (int seed = 1; seed <= seeds; ++seed) {
      const auto trace = run_federated(task, pop, spec, cfg, RngSeed{std::uint64_t(seed), 910 + T});
      const double gap = trace.loss_gap.back();
      gap_mean += gap / seeds;
      gap_sq += gap * gap / seeds;
      const auto skew = estimate_selection_skew(task, trace);
      rho_under = std::min(rho_under, skew.rho_under);
      if (skew.rho_over) rho_over = std::max(rho_over, *skew.rho_over);
    }
    const double gap_se = std::sqrt(std::max(gap_sq - gap_mean * gap_mean, 0.0) / seeds);

    BoundInputs in;
    in.L = task.L;
    in.mu = task.mu;
    in.G2 = task.G2;
    in.sigma2 = double(task.dim) * effective_noise_std(cfg) * effective_noise_std(cfg);
    in.Gamma = task.Gamma;
    in.Sigma = sigma_exact;
    in.rho_under = rho_under;
    in.rho_over = std::max(rho_over, rho_under);
    in.K = cfg.K;
    in.m = 15;
    in.T = T;
    for (double v : task.theta_star) in.theta0_dist2 += v * v;
    const double bound = convergence_bound(in);
    const bool holds = gap_mean <= bound + 3.0 * gap_se;
    ok = ok && holds;
    msg << "T=" << T << ": gap " << fmt(gap_mean) << " (se " << fmt(gap_se) << ") vs bound "
        << fmt(bound) << " rho[" << fmt(rho_under) << "," << fmt(in.rho_over) << "]"
        << (holds ? " ok" : " VIOLATED") << "; ";
  }

  // Exact monotonicity of the bound in Sigma and rho_under.
  BoundInputs base;
  base.L = 2.0;
  base.mu = 0.5;
  base.G2 = 50.0;
  base.sigma2 = 1.0;
  base.Gamma = 0.5;
  base.Sigma = 0.05;
  base.rho_under = 0.9;
  base.rho_over = 1.2;
  base.K = 5;
  base.m = 15;
  base.T = 1000;
  base.theta0_dist2 = 4.0;
  bool mono = true;
  double prev = -1e300;
  for (double s : {0.0, 0.05, 0.1, 0.2, 0.4}) {
    BoundInputs in = base;
    in.Sigma = s;
    const double b = convergence_bound(in);
    mono = mono && b > prev;
    prev = b;
  }
  prev = 1e300;
  for (double r : {0.3, 0.6, 0.9, 1.2}) {
    BoundInputs in = base;
    in.rho_under = r;
    in.rho_over = std::max(base.rho_over, r);
    const double b = convergence_bound(in);
    mono = mono && b < prev;
    prev = b;
  }
  ok = ok && mono;
  msg << "monotone in Sigma and rho_under: " << (mono ? "yes" : "NO");
  report(10, ok, "convergence bound validity: " + msg.str());
}

// --------------------------------------------------------------- criterion 11
// Byte-identical CSV bodies across repeated runs of the same config.
void criterion_11() {
  namespace fs = std::filesystem;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  bool ok = true;
  std::ostringstream msg;

  auto j = nlohmann::json::parse(R"({
    "experiment": "sigma",
    "population": {"n": 50, "size_model": {"kind": "zipf", "a": 2.0, "d_min": 1}},
    "m": 8, "markov": {"m_prime": 5}, "rounds": 300,
    "policies": ["random_weighted", "probabilistic",
                 {"kind": "markov_optimal"}, {"kind": "markov_monotone"}],
    "seeds": [11, 12, 13], "output_dir": "unused"
  })");

  for (const std::string exp : {"sigma", "intervals", "train"}) {
    j["experiment"] = exp;
    if (exp == "train") {
      j["rounds"] = 40;
      j["task"] = {{"dim", 4}, {"spread", 1.0},
                   {"heterogeneity", {{"kind", "dirichlet"}, {"alpha", 0.3}}}};
      j["training"] = {{"K", 3}, {"batch_size", 20}, {"noise_sigma", 0.5},
                       {"lr", {{"kind", "decay"}, {"eta0", 0.05}, {"rate", 0.999}}},
                       {"loss_gap_target", 1e-4}};
    }
    const auto cfg = parse_config(j);
    const fs::path dir_a = fs::temp_directory_path() / ("aoifl_acc_" + exp + "_a");
    const fs::path dir_b = fs::temp_directory_path() / ("aoifl_acc_" + exp + "_b");
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    RunOptions opt;
    opt.out_dir_override = dir_a.string();
    const auto res_a = run_experiment(cfg, opt);
    opt.out_dir_override = dir_b.string();
    opt.threads = 3;
    run_experiment(cfg, opt);
    const std::string csv = res_a.files.front();
    const bool same = slurp(dir_a / csv) == slurp(dir_b / csv);
    ok = ok && same;
    msg << exp << "/" << csv << (same ? " identical; " : " DIFFERS; ");
  }
  report(11, ok, "repeated runs produce byte-identical CSV bodies: " + msg.str());
}

}  // namespace

int main() {
  std::printf("acceptance: selection policies, load analytics, training bound\n");
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  std::printf("%d of 11 criteria failed\n", g_failures);
  return g_failures;
}
