#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "aoifl/fedsim.hpp"
#include "aoifl/policies.hpp"

using namespace aoifl;

namespace {

ClientPopulation uniform_pop(std::size_t n, std::uint32_t m_prime) {
  return make_population(std::vector<std::uint64_t>(n, 3), m_prime);
}

}  // namespace

TEST_CASE("synthetic task: exact optimum and constants") {
  Rng rng(RngSeed{81, 0});
  const auto task = make_synthetic_task(50, 6, Heterogeneity::Dirichlet(0.5), 1.5, rng);
  REQUIRE(task.n == 50);
  REQUIRE(task.dim == 6);
  REQUIRE(task.mu >= 0.5 - 1e-12);
  REQUIRE(task.L <= 2.0 + 1e-12);
  REQUIRE(task.mu <= task.L);
  REQUIRE(task.Gamma > 0.0);
  REQUIRE(task.G2 > 0.0);

  // theta* must beat any perturbation of itself.
  const double f_star = task.global_loss(task.theta_star);
  Rng pert(RngSeed{81, 1});
  for (int trial = 0; trial < 20; ++trial) {
    auto theta = task.theta_star;
    for (auto& v : theta) v += 0.1 * pert.normal();
    REQUIRE(task.global_loss(theta) >= f_star - 1e-12);
  }

  // Per-client minima sit at the centers, with value zero.
  for (std::size_t k = 0; k < task.n; ++k)
    REQUIRE(task.client_loss(k, task.centers[k]) == Catch::Approx(0.0).margin(1e-15));

  // Gamma = F(theta*) - sum q_k F_k(c_k) collapses to F(theta*) here.
  REQUIRE(task.Gamma == Catch::Approx(f_star).margin(1e-12));
}

TEST_CASE("synthetic task: spread zero collapses to a shared optimum at 0") {
  Rng rng(RngSeed{82, 0});
  const auto task = make_synthetic_task(10, 3, Heterogeneity::IID(), 0.0, rng);
  for (double v : task.theta_star) REQUIRE(v == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(task.Gamma == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("synthetic task: smaller dirichlet alpha means more heterogeneity") {
  Rng r1(RngSeed{83, 0});
  const auto spreadout = make_synthetic_task(100, 8, Heterogeneity::Dirichlet(0.3), 1.0, r1);
  Rng r2(RngSeed{83, 0});
  const auto packed = make_synthetic_task(100, 8, Heterogeneity::Dirichlet(10.0), 1.0, r2);
  REQUIRE(spreadout.Gamma > packed.Gamma);
}

TEST_CASE("synthetic task: gradient matches a finite difference") {
  Rng rng(RngSeed{84, 0});
  const auto task = make_synthetic_task(5, 3, Heterogeneity::IID(), 1.0, rng);
  std::vector<double> theta = {0.3, -0.7, 1.1};
  std::vector<double> g(3);
  task.client_grad(2, theta, g);
  for (std::size_t j = 0; j < 3; ++j) {
    auto up = theta, dn = theta;
    const double h = 1e-6;
    up[j] += h;
    dn[j] -= h;
    const double fd = (task.client_loss(2, up) - task.client_loss(2, dn)) / (2.0 * h);
    REQUIRE(g[j] == Catch::Approx(fd).margin(1e-5));
  }
}

TEST_CASE("local update equals the sequential SGD endpoint") {
  Rng rng(RngSeed{85, 0});
  const auto task = make_synthetic_task(4, 2, Heterogeneity::IID(), 1.0, rng);
  const std::vector<double> theta = {0.5, -0.25};
  const double eta = 0.1;

  // Reference: walk the K steps explicitly with the same noise stream.
  Rng noise_a(RngSeed{85, 7});
  auto y = theta;
  std::vector<double> g(2);
  for (int k = 0; k < 3; ++k) {
    task.client_grad(1, y, g);
    for (auto& v : g) v += 0.2 * noise_a.normal();
    for (std::size_t j = 0; j < 2; ++j) y[j] -= eta * g[j];
  }

  Rng noise_b(RngSeed{85, 7});
  const auto got = local_update(task, 1, theta, eta, 3, 0.2, noise_b);
  REQUIRE(got[0] == Catch::Approx(y[0]).margin(1e-15));
  REQUIRE(got[1] == Catch::Approx(y[1]).margin(1e-15));
}

TEST_CASE("aggregate: weighted mean in ascending client order") {
  RoundOutcome out;
  out.selected = {1, 3};
  out.weights = {0.5, 0.5};
  const std::vector<std::vector<double>> locals = {{0.0}, {2.0}};
  REQUIRE(aggregate(out, locals, 1)[0] == Catch::Approx(1.0));
  REQUIRE_THROWS_AS(aggregate(out, {{0.0}}, 1), std::invalid_argument);
}

TEST_CASE("full participation, one local step, no noise: plain gradient descent") {
  Rng rng(RngSeed{86, 0});
  const auto task = make_synthetic_task(12, 4, Heterogeneity::Dirichlet(0.5), 1.0, rng);
  const auto pop = uniform_pop(12, 2);
  const auto spec = make_policy(PolicyKind::random_weighted, 12, 12, 2);
  TrainingConfig cfg;
  cfg.K = 1;
  cfg.noise_sigma = 0.0;
  cfg.T = 200;
  cfg.lr = LrSchedule::Decay(0.4, 1.0);  // constant 0.4 <= 1/L
  const auto trace = run_federated(task, pop, spec, cfg, RngSeed{86, 1});

  // Homogeneous sizes make the aggregation weights exactly q_i = 1/n, so the
  // loss gap must contract monotonically and converge to machine precision.
  for (std::size_t t = 1; t < trace.loss_gap.size(); ++t)
    REQUIRE(trace.loss_gap[t] <= trace.loss_gap[t - 1] + 1e-14);
  REQUIRE(trace.loss_gap.back() < 1e-12);
  REQUIRE(trace.dist2.back() < 1e-12);
  REQUIRE(trace.rounds_to_target.has_value());
}

TEST_CASE("training trace is bit-identical across reruns") {
  Rng rng(RngSeed{87, 0});
  const auto task = make_synthetic_task(30, 5, Heterogeneity::Dirichlet(0.3), 1.0, rng);
  const auto pop = uniform_pop(30, 4);
  const auto spec = make_policy(PolicyKind::markov_optimal, 30, 6, 4);
  TrainingConfig cfg;
  cfg.K = 4;
  cfg.noise_sigma = 0.5;
  cfg.T = 60;
  cfg.lr = LrSchedule::Decay(0.05, 0.99);
  const auto a = run_federated(task, pop, spec, cfg, RngSeed{87, 1});
  const auto b = run_federated(task, pop, spec, cfg, RngSeed{87, 1});
  REQUIRE(a.loss_gap == b.loss_gap);
  REQUIRE(a.dist2 == b.dist2);
  REQUIRE(a.selected_count == b.selected_count);
  const auto c = run_federated(task, pop, spec, cfg, RngSeed{87, 2});
  REQUIRE(a.loss_gap != c.loss_gap);
}

TEST_CASE("aggregation keeps the model inside the selected hull") {
  Rng rng(RngSeed{88, 0});
  const auto task = make_synthetic_task(20, 3, Heterogeneity::Dirichlet(0.5), 1.0, rng);
  const auto pop = uniform_pop(20, 4);
  const auto spec = make_policy(PolicyKind::probabilistic, 20, 5, 4);
  TrainingConfig cfg;
  cfg.K = 2;
  cfg.T = 30;
  cfg.lr = LrSchedule::Decay(0.1, 1.0);
  const auto trace = run_federated(task, pop, spec, cfg, RngSeed{88, 1});
  REQUIRE(trace.outcomes.size() == 30);
  REQUIRE(trace.thetas.size() == 30);
  for (const auto& out : trace.outcomes) {
    double wsum = 0.0;
    for (double w : out.weights) wsum += w;
    REQUIRE(wsum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("learning-rate schedules") {
  const auto decay = LrSchedule::Decay(0.2, 0.5);
  REQUIRE(decay.eta(0) == Catch::Approx(0.2));
  REQUIRE(decay.eta(2) == Catch::Approx(0.05));
  const auto inv = LrSchedule::Inverse(0.5, 4.0);
  REQUIRE(inv.eta(0) == Catch::Approx(1.0 / 2.0));
  REQUIRE(inv.eta(6) == Catch::Approx(1.0 / 5.0));
}

TEST_CASE("training validation") {
  TrainingConfig cfg;
  cfg.K = 0;
  REQUIRE_THROWS_AS(validate_training(cfg), std::invalid_argument);
  cfg.K = 2;
  cfg.T = 0;
  REQUIRE_THROWS_AS(validate_training(cfg), std::invalid_argument);
  cfg.T = 10;
  cfg.noise_sigma = -1.0;
  REQUIRE_THROWS_AS(validate_training(cfg), std::invalid_argument);
  cfg.noise_sigma = 1.0;
  cfg.batch_size = 25;
  REQUIRE(effective_noise_std(cfg) == Catch::Approx(0.2));
}

TEST_CASE("noise accelerates nothing: noiseless run dominates a noisy one") {
  Rng rng(RngSeed{89, 0});
  const auto task = make_synthetic_task(25, 4, Heterogeneity::IID(), 1.0, rng);
  const auto pop = uniform_pop(25, 4);
  const auto spec = make_policy(PolicyKind::random_weighted, 25, 25, 4);
  TrainingConfig cfg;
  cfg.K = 2;
  cfg.T = 150;
  cfg.lr = LrSchedule::Decay(0.2, 1.0);
  const auto clean = run_federated(task, pop, spec, cfg, RngSeed{89, 1});
  cfg.noise_sigma = 3.0;
  cfg.batch_size = 1;
  const auto noisy = run_federated(task, pop, spec, cfg, RngSeed{89, 1});
  // With full participation the noiseless run reaches the floor; the noisy
  // one stalls at a plateau set by the injected variance.
  REQUIRE(clean.loss_gap.back() < noisy.loss_gap.back());
}
