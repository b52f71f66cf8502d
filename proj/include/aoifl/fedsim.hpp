#pragma once

// Desk-scale federated averaging on synthetic quadratic tasks. Each client
// objective is F_i(theta) = 1/2 (theta - c_i)' H_i (theta - c_i) with a
// diagonal H_i, so every constant the convergence analysis needs (L, mu,
// Gamma, theta*, per-client minima) is exact rather than estimated.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "policies.hpp"

namespace aoifl {

struct FLTask {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> centers;  // c_i: per-client minimizer
  std::vector<std::vector<double>> hdiag;    // diagonal of H_i, entries in [mu, L]
  std::vector<double> q;                     // importances, sum to 1
  std::vector<double> theta_star;            // minimizer of sum q_i F_i
  double L = 0.0;                            // max curvature over all clients
  double mu = 0.0;                           // min curvature over all clients
  double Gamma = 0.0;                        // F(theta*) - sum q_i F_i(c_i)
  double G2 = 0.0;                           // gradient-norm^2 bound on the trust region
  double sigma2 = 0.0;                       // gradient-noise variance used by bound checks
  double trust_radius = 0.0;                 // R = 10 ||theta*|| + 10; runs must stay inside

  double client_loss(std::size_t i, const std::vector<double>& theta) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = theta[j] - centers[i][j];
      acc += hdiag[i][j] * d * d;
    }
    return 0.5 * acc;
  }

  double global_loss(const std::vector<double>& theta) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += q[i] * client_loss(i, theta);
    return acc;
  }

  void client_grad(std::size_t i, const std::vector<double>& theta, std::vector<double>& g) const {
    for (std::size_t j = 0; j < dim; ++j) g[j] = hdiag[i][j] * (theta[j] - centers[i][j]);
  }
};

struct Heterogeneity {
  enum class Kind { iid, dirichlet } kind = Kind::iid;
  double alpha = 0.3;  // dirichlet concentration; smaller = more dispersed

  static Heterogeneity IID() { return {Kind::iid, 0.0}; }
  static Heterogeneity Dirichlet(double a) { return {Kind::dirichlet, a}; }
};

struct TaskOptions {
  double mu_target = 0.5;  // curvature entries drawn uniformly from [mu_target, L_target]
  double L_target = 2.0;
  std::vector<double> importances;  // optional; uniform when empty
};

// Centers are isotropic Gaussians; in dirichlet mode each client's offset is
// scaled by n * w_i with w ~ Dirichlet(alpha 1_n), so small alpha spreads a
// few clients far from the rest. spread = 0 collapses all centers to zero.
inline FLTask make_synthetic_task(std::size_t n, std::size_t dim, Heterogeneity het, double spread,
                                  Rng& rng, TaskOptions opts = {}) {
  if (n == 0 || dim == 0) throw std::invalid_argument("task: need n >= 1 and dim >= 1");
  if (!(opts.mu_target > 0.0) || !(opts.L_target >= opts.mu_target))
    throw std::invalid_argument("task: need 0 < mu_target <= L_target");
  if (het.kind == Heterogeneity::Kind::dirichlet && !(het.alpha > 0.0))
    throw std::invalid_argument("task: dirichlet alpha must be positive");
  FLTask task;
  task.n = n;
  task.dim = dim;

  if (opts.importances.empty()) {
    task.q.assign(n, 1.0 / static_cast<double>(n));
  } else {
    if (opts.importances.size() != n)
      throw std::invalid_argument("task: importances must have one entry per client");
    double total = 0.0;
    for (double v : opts.importances) {
      if (!(v > 0.0)) throw std::invalid_argument("task: importances must be positive");
      total += v;
    }
    task.q.resize(n);
    for (std::size_t i = 0; i < n; ++i) task.q[i] = opts.importances[i] / total;
  }

  std::vector<double> scale(n, 1.0);
  if (het.kind == Heterogeneity::Kind::dirichlet) {
    double total = 0.0;
    for (auto& s : scale) {
      s = rng.gamma(het.alpha);
      total += s;
    }
    for (auto& s : scale) s = s / total * static_cast<double>(n);
  }

  task.centers.assign(n, std::vector<double>(dim));
  task.hdiag.assign(n, std::vector<double>(dim));
  task.L = 0.0;
  task.mu = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      task.centers[i][j] = spread * scale[i] * rng.normal();
      const double h = opts.mu_target + (opts.L_target - opts.mu_target) * rng.uniform();
      task.hdiag[i][j] = h;
      task.L = std::max(task.L, h);
      task.mu = std::min(task.mu, h);
    }
  }

  task.theta_star.assign(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += task.q[i] * task.hdiag[i][j] * task.centers[i][j];
      den += task.q[i] * task.hdiag[i][j];
    }
    task.theta_star[j] = num / den;
  }
  // stationarity of theta*: the weighted gradient must vanish
  for (std::size_t j = 0; j < dim; ++j) {
    double g = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      g += task.q[i] * task.hdiag[i][j] * (task.theta_star[j] - task.centers[i][j]);
    if (std::abs(g) > 1e-10) throw std::runtime_error("task: theta* residual exceeds 1e-10");
  }

  task.Gamma = task.global_loss(task.theta_star);  // each F_i(c_i) = 0

  double norm2 = 0.0;
  for (double v : task.theta_star) norm2 += v * v;
  task.trust_radius = 10.0 * std::sqrt(norm2) + 10.0;
  double gmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double cn = 0.0, hmax = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      cn += task.centers[i][j] * task.centers[i][j];
      hmax = std::max(hmax, task.hdiag[i][j]);
    }
    gmax = std::max(gmax, hmax * (task.trust_radius + std::sqrt(cn)));
  }
  task.G2 = gmax * gmax;
  return task;
}

struct LrSchedule {
  enum class Kind { decay, inverse } kind = Kind::decay;
  double eta0 = 0.1;        // decay: eta_t = eta0 * rate^t
  double rate = 0.998;
  double mu = 1.0;          // inverse: eta_t = 1 / (mu (t + gamma_shift))
  double gamma_shift = 1.0;

  static LrSchedule Decay(double eta0, double rate) {
    LrSchedule s;
    s.kind = Kind::decay;
    s.eta0 = eta0;
    s.rate = rate;
    return s;
  }
  static LrSchedule Inverse(double mu, double gamma_shift) {
    LrSchedule s;
    s.kind = Kind::inverse;
    s.mu = mu;
    s.gamma_shift = gamma_shift;
    return s;
  }

  double eta(std::uint64_t t) const {
    if (kind == Kind::decay) return eta0 * std::pow(rate, static_cast<double>(t));
    return 1.0 / (mu * (static_cast<double>(t) + gamma_shift));
  }
};

struct TrainingConfig {
  std::uint32_t K = 5;          // local gradient steps per round, >= 1
  std::uint32_t batch_size = 50;
  double noise_sigma = 0.0;     // per-coordinate noise std at batch size 1
  LrSchedule lr;
  std::uint64_t T = 100;
  double loss_gap_target = 1e-3;
};

inline void validate_training(const TrainingConfig& cfg) {
  if (cfg.K == 0) throw std::invalid_argument("training: K must be >= 1");
  if (cfg.batch_size == 0) throw std::invalid_argument("training: batch_size must be >= 1");
  if (cfg.T == 0) throw std::invalid_argument("training: T must be >= 1");
  if (cfg.noise_sigma < 0.0) throw std::invalid_argument("training: noise_sigma must be >= 0");
}

// Mini-batching enters only through the noise: a batch of size B averages B
// unit-noise gradients, so the injected std is noise_sigma / sqrt(B).
inline double effective_noise_std(const TrainingConfig& cfg) {
  return cfg.noise_sigma / std::sqrt(static_cast<double>(cfg.batch_size));
}

// K local SGD steps from the global model; returns
//   theta - eta * K * d,  d = (1/K) sum of the K stochastic gradients,
// which retraces the local path y_{k+1} = y_k - eta g(y_k).
inline std::vector<double> local_update(const FLTask& task, std::size_t client,
                                        const std::vector<double>& theta, double eta,
                                        std::uint32_t K, double noise_std, Rng& rng) {
  std::vector<double> y = theta;
  std::vector<double> g(task.dim), dsum(task.dim, 0.0);
  for (std::uint32_t k = 0; k < K; ++k) {
    task.client_grad(client, y, g);
    if (noise_std > 0.0)
      for (auto& v : g) v += noise_std * rng.normal();
    for (std::size_t j = 0; j < task.dim; ++j) {
      dsum[j] += g[j];
      y[j] -= eta * g[j];
    }
  }
  std::vector<double> out(task.dim);
  const double step = eta * static_cast<double>(K);
  for (std::size_t j = 0; j < task.dim; ++j)
    out[j] = theta[j] - step * (dsum[j] / static_cast<double>(K));
  return out;
}

// Weighted sum of local models in ascending client order; locals is aligned
// with outcome.selected.
inline std::vector<double> aggregate(const RoundOutcome& outcome,
                                     const std::vector<std::vector<double>>& locals,
                                     std::size_t dim) {
  if (locals.size() != outcome.selected.size())
    throw std::invalid_argument("aggregate: locals must align with the selected set");
  std::vector<double> theta(dim, 0.0);
  for (std::size_t k = 0; k < locals.size(); ++k)
    for (std::size_t j = 0; j < dim; ++j) theta[j] += outcome.weights[k] * locals[k][j];
  return theta;
}

struct TrainingTrace {
  std::vector<double> loss_gap;               // F(theta^t) - F(theta*), post-aggregation
  std::vector<double> dist2;                  // ||theta^t - theta*||^2
  std::vector<std::uint32_t> selected_count;
  std::vector<RoundOutcome> outcomes;
  std::vector<std::vector<double>> thetas;    // global model after each round
  std::optional<std::uint64_t> rounds_to_target;
  std::uint64_t forced_rounds = 0;
};

// Federated averaging from theta^0 = 0: select, run local SGD on the selected
// clients only, aggregate, then advance ages. Round t's stochasticity comes
// from substreams keyed by (t) for selection and (t, client) for noise.
inline TrainingTrace run_federated(const FLTask& task, ClientPopulation pop,
                                   const PolicySpec& policy, const TrainingConfig& cfg,
                                   RngSeed base) {
  if (pop.n() != task.n) throw std::invalid_argument("train: population size must match the task");
  validate_population(pop);
  validate_policy(policy, pop);
  validate_training(cfg);
  const double noise_std = effective_noise_std(cfg);
  const double f_star = task.global_loss(task.theta_star);
  TrainingTrace trace;
  trace.loss_gap.reserve(cfg.T);
  std::vector<double> theta(task.dim, 0.0);
  std::vector<std::vector<double>> locals;
  for (std::uint64_t t = 0; t < cfg.T; ++t) {
    Rng sel_rng(derive(base, t, 0));
    RoundOutcome out = select_round(pop, policy, sel_rng);
    const double eta = cfg.lr.eta(t);
    locals.clear();
    for (auto id : out.selected) {
      Rng noise_rng(derive(base, t, 1 + static_cast<std::uint64_t>(id)));
      locals.push_back(local_update(task, id, theta, eta, cfg.K, noise_std, noise_rng));
    }
    theta = aggregate(out, locals, task.dim);
    step_ages(pop, out);
    if (out.forced) trace.forced_rounds += 1;

    double n2 = 0.0, d2 = 0.0;
    for (std::size_t j = 0; j < task.dim; ++j) {
      n2 += theta[j] * theta[j];
      const double d = theta[j] - task.theta_star[j];
      d2 += d * d;
    }
    if (std::sqrt(n2) > task.trust_radius)
      throw std::runtime_error("train: model left the trust region the gradient bound assumes");
    const double gap = task.global_loss(theta) - f_star;
    if (!trace.rounds_to_target && gap <= cfg.loss_gap_target) trace.rounds_to_target = t;
    out.round = static_cast<std::int64_t>(t);
    trace.loss_gap.push_back(gap);
    trace.dist2.push_back(d2);
    trace.selected_count.push_back(static_cast<std::uint32_t>(out.selected.size()));
    trace.outcomes.push_back(std::move(out));
    trace.thetas.push_back(theta);
  }
  return trace;
}

}  // namespace aoifl
