#pragma once

// Turns a validated ExperimentConfig into artifact files. Every (policy,
// seed) cell is independent; cells may run on a thread pool, but artifact
// rows are emitted in (policy, seed, round) order by a single writer, so the
// bytes on disk never depend on scheduling.

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "fedsim.hpp"
#include "metrics.hpp"
#include "version.hpp"

namespace aoifl {

struct RunOptions {
  std::string out_dir_override;  // empty = use config's output_dir
  unsigned threads = 1;
  std::optional<std::uint64_t> seed_override;
};

namespace detail {

// Shortest round-trip decimal form; CSV cells must be bit-stable.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%" PRIu64, v);
  return buf;
}

// Substream layout: population and task depend on the seed only (all
// policies face the same data); selection/training streams differ per policy.
inline RngSeed population_stream(std::uint64_t seed) { return RngSeed{seed, 1000001}; }
inline RngSeed task_stream(std::uint64_t seed) { return RngSeed{seed, 1000002}; }
inline RngSeed cell_stream(std::uint64_t seed, std::size_t policy_index) {
  return RngSeed{seed, static_cast<std::uint64_t>(policy_index) + 1};
}

inline std::vector<std::uint64_t> draw_sizes(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.size_model.kind == SizeModelConfig::Kind::homogeneous)
    return std::vector<std::uint64_t>(cfg.n, cfg.size_model.d_value);
  Rng rng(derive(population_stream(seed), 0));
  return zipf_dataset_sizes(cfg.n, cfg.size_model.a, cfg.size_model.d_min, rng);
}

inline void run_cells(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mu;
  const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(count));
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << body;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Exact Sigma for a policy on this population, when a closed form exists.
inline std::optional<double> sigma_exact_for(const PolicySpec& spec,
                                             const ClientPopulation& pop) {
  switch (spec.kind) {
    case PolicyKind::random_weighted: {
      bool homogeneous = true;
      for (std::size_t i = 1; i < pop.sizes.size(); ++i)
        homogeneous = homogeneous && pop.sizes[i] == pop.sizes[0];
      if (homogeneous || pop.n() <= 20)
        return sigma_random_weighted_exact(pop.sizes, spec.m);
      return std::nullopt;
    }
    case PolicyKind::probabilistic:
      return sigma_probabilistic_exact(pop.sizes, spec.m);
    case PolicyKind::markov_optimal:
    case PolicyKind::markov_monotone:
      // The closed form models the raw random-|S| policy; trimming or
      // padding changes the weight law, so no exact value is claimed.
      if (spec.exact_m != ExactM::off) return std::nullopt;
      return sigma_markov_exact(*spec.chain, pop.n());
  }
  return std::nullopt;
}

inline nlohmann::ordered_json chain_json(const MarkovChainSpec& chain, const std::string& regime) {
  const auto pi = stationary_distribution(chain).pi;
  const auto dist = peak_age_distribution(chain);
  nlohmann::ordered_json j;
  j["chain"] = {{"m_prime", chain.m_prime}, {"p", chain.p}};
  j["pi"] = pi;
  j["peak_age"] = {{"head", dist.head},
                   {"tail_coeff", dist.tail_coeff},
                   {"tail_rate", dist.tail_rate},
                   {"mean", dist.mean},
                   {"variance", dist.variance}};
  j["regime"] = regime;
  return j;
}

}  // namespace detail

// Chain analysis for one policy/parameter triple, as printed by the `markov`
// subcommand and written per markov policy by the markov-analyze experiment.
inline nlohmann::ordered_json markov_analysis_json(std::uint64_t n, std::uint32_t m,
                                                   std::uint32_t m_prime, bool monotone) {
  nlohmann::ordered_json j;
  j["policy"] = monotone ? "markov_monotone" : "markov_optimal";
  j["n"] = n;
  j["m"] = m;
  j["m_prime"] = m_prime;
  if (monotone) {
    const auto chain = calibrate_monotone_chain(n, m, m_prime);
    j.update(detail::chain_json(chain, "monotone"));
  } else {
    const auto res = optimal_markov_chain(n, m, m_prime);
    j.update(detail::chain_json(res.chain, to_string(res.regime)));
  }
  return j;
}

struct RunResult {
  std::filesystem::path out_dir;
  std::vector<std::string> files;  // artifact names written, manifest last
};

// Executes the configured experiment and writes its artifacts. Throws
// ConfigError for semantic problems and std::runtime_error for runtime or
// I/O failures; the CLI maps these to exit codes 2 and 3.
inline RunResult run_experiment(ExperimentConfig cfg, const RunOptions& opt = {}) {
  if (!opt.out_dir_override.empty()) cfg.output_dir = opt.out_dir_override;
  if (opt.seed_override) cfg.seeds = {*opt.seed_override};
  validate_config(cfg);

  const std::filesystem::path out_dir(cfg.output_dir);
  std::filesystem::create_directories(out_dir);
  RunResult result;
  result.out_dir = out_dir;

  const std::uint64_t burn_in = cfg.resolved_burn_in();
  const std::size_t n_pol = cfg.policies.size();
  const std::size_t n_seed = cfg.seeds.size();

  // Policy specs are seed-independent; build them once up front so an
  // infeasible calibration fails before any work is scheduled.
  std::vector<PolicySpec> specs;
  specs.reserve(n_pol);
  for (const auto& pc : cfg.policies)
    specs.push_back(make_policy(pc.kind, cfg.n, cfg.m, cfg.m_prime, pc.exact_m));

  const bool needs_selection = cfg.experiment == ExperimentKind::sigma ||
                               cfg.experiment == ExperimentKind::intervals ||
                               cfg.experiment == ExperimentKind::stability;

  if (needs_selection) {
    struct Cell {
      std::vector<std::pair<std::uint64_t, double>> sigma_rows;  // (round, running sigma)
      IntervalHistogram hist;
      std::vector<double> stability;  // aligned with cfg.windows
    };
    std::vector<Cell> cells(n_pol * n_seed);
    detail::run_cells(cells.size(), opt.threads, [&](std::size_t idx) {
      const std::size_t p = idx / n_seed, s = idx % n_seed;
      const auto sizes = detail::draw_sizes(cfg, cfg.seeds[s]);
      const auto pop = make_population(sizes, cfg.m_prime);
      const auto trace = run_selection(pop, specs[p], cfg.rounds,
                                       static_cast<std::uint32_t>(burn_in),
                                       detail::cell_stream(cfg.seeds[s], p));
      Cell& cell = cells[idx];
      if (cfg.experiment == ExperimentKind::sigma) {
        // Running Sigma after each round: per-client Bessel variances reduce
        // to (S1 - S2/c) / (c - 1) with S1 = sum w^2, S2 = sum (sum w)^2.
        std::vector<double> sumw(trace.n, 0.0);
        double s1 = 0.0, s2 = 0.0;
        cell.sigma_rows.reserve(trace.rounds.size());
        for (const auto& out : trace.rounds) {
          for (std::size_t k = 0; k < out.selected.size(); ++k) {
            const double w = out.weights[k];
            double& acc = sumw[out.selected[k]];
            s1 += w * w;
            s2 += (acc + w) * (acc + w) - acc * acc;
            acc += w;
          }
          const double c = static_cast<double>(out.round + 1);
          const double sigma = c >= 2.0 ? (s1 - s2 / c) / (c - 1.0) : 0.0;
          cell.sigma_rows.emplace_back(static_cast<std::uint64_t>(out.round), sigma);
        }
      } else if (cfg.experiment == ExperimentKind::intervals) {
        cell.hist = inter_selection_histogram(trace);
      } else {
        cell.stability.reserve(cfg.windows.size());
        for (auto w : cfg.windows)
          cell.stability.push_back(
              windowed_selection_stability(trace, static_cast<std::uint32_t>(w)));
      }
    });

    if (cfg.experiment == ExperimentKind::sigma) {
      std::string body = "round,policy,seed,sigma_running,sigma_exact\n";
      for (std::size_t p = 0; p < n_pol; ++p) {
        // The exact value depends on the population, hence on the seed.
        for (std::size_t s = 0; s < n_seed; ++s) {
          const auto sizes = detail::draw_sizes(cfg, cfg.seeds[s]);
          const auto pop = make_population(sizes, cfg.m_prime);
          const auto exact = detail::sigma_exact_for(specs[p], pop);
          const std::string exact_str = exact ? detail::fmt(*exact) : std::string();
          for (const auto& [round, sigma] : cells[p * n_seed + s].sigma_rows) {
            body += detail::fmt(round);
            body += ',';
            body += to_string(specs[p].kind);
            body += ',';
            body += detail::fmt(cfg.seeds[s]);
            body += ',';
            body += detail::fmt(sigma);
            body += ',';
            body += exact_str;
            body += '\n';
          }
        }
      }
      detail::write_file(out_dir / "sigma.csv", body);
      result.files.push_back("sigma.csv");
    } else if (cfg.experiment == ExperimentKind::intervals) {
      std::string body = "policy,gap,count,censored_count\n";
      for (std::size_t p = 0; p < n_pol; ++p) {
        std::map<std::uint32_t, std::uint64_t> pooled;
        std::uint64_t censored = 0;
        for (std::size_t s = 0; s < n_seed; ++s) {
          for (const auto& [gap, count] : cells[p * n_seed + s].hist.counts)
            pooled[gap] += count;
          censored += cells[p * n_seed + s].hist.censored;
        }
        for (const auto& [gap, count] : pooled) {
          body += to_string(specs[p].kind);
          body += ',';
          body += detail::fmt(static_cast<std::uint64_t>(gap));
          body += ',';
          body += detail::fmt(count);
          body += ',';
          body += detail::fmt(censored);
          body += '\n';
        }
      }
      detail::write_file(out_dir / "intervals.csv", body);
      result.files.push_back("intervals.csv");
    } else {
      std::string body = "policy,T_window,metric\n";
      for (std::size_t p = 0; p < n_pol; ++p) {
        for (std::size_t w = 0; w < cfg.windows.size(); ++w) {
          double mean = 0.0;
          for (std::size_t s = 0; s < n_seed; ++s) mean += cells[p * n_seed + s].stability[w];
          mean /= static_cast<double>(n_seed);
          body += to_string(specs[p].kind);
          body += ',';
          body += detail::fmt(cfg.windows[w]);
          body += ',';
          body += detail::fmt(mean);
          body += '\n';
        }
      }
      detail::write_file(out_dir / "stability.csv", body);
      result.files.push_back("stability.csv");
    }
  } else if (cfg.experiment == ExperimentKind::train) {
    struct Cell {
      std::vector<double> loss_gap, dist2;
      std::vector<std::uint32_t> selected;
    };
    std::vector<Cell> cells(n_pol * n_seed);
    detail::run_cells(cells.size(), opt.threads, [&](std::size_t idx) {
      const std::size_t p = idx / n_seed, s = idx % n_seed;
      const auto sizes = detail::draw_sizes(cfg, cfg.seeds[s]);
      const auto pop = make_population(sizes, cfg.m_prime);
      Rng task_rng(derive(detail::task_stream(cfg.seeds[s]), 0));
      TaskOptions topt;
      topt.mu_target = cfg.task.mu_target;
      topt.L_target = cfg.task.L_target;
      topt.importances = pop.importances();
      const FLTask task = make_synthetic_task(cfg.n, cfg.task.dim, cfg.task.heterogeneity,
                                              cfg.task.spread, task_rng, topt);
      TrainingConfig tc;
      tc.K = cfg.training.K;
      tc.batch_size = cfg.training.batch_size;
      tc.noise_sigma = cfg.training.noise_sigma;
      tc.T = cfg.rounds;
      tc.loss_gap_target = cfg.training.loss_gap_target;
      if (cfg.training.lr.kind == LrConfig::Kind::decay) {
        tc.lr = LrSchedule::Decay(cfg.training.lr.eta0, cfg.training.lr.rate);
      } else {
        const double shift = cfg.training.lr.gamma_shift >= 0.0
                                 ? cfg.training.lr.gamma_shift
                                 : bound_gamma(task.L, task.mu, tc.K);
        tc.lr = LrSchedule::Inverse(task.mu, shift);
      }
      const auto trace = run_federated(task, pop, specs[p], tc,
                                       detail::cell_stream(cfg.seeds[s], p));
      cells[idx] = {trace.loss_gap, trace.dist2, trace.selected_count};
    });

    std::string body = "round,policy,seed,loss_gap,dist2,selected_count\n";
    for (std::size_t p = 0; p < n_pol; ++p) {
      for (std::size_t s = 0; s < n_seed; ++s) {
        const Cell& cell = cells[p * n_seed + s];
        for (std::size_t t = 0; t < cell.loss_gap.size(); ++t) {
          body += detail::fmt(static_cast<std::uint64_t>(t));
          body += ',';
          body += to_string(specs[p].kind);
          body += ',';
          body += detail::fmt(cfg.seeds[s]);
          body += ',';
          body += detail::fmt(cell.loss_gap[t]);
          body += ',';
          body += detail::fmt(cell.dist2[t]);
          body += ',';
          body += detail::fmt(static_cast<std::uint64_t>(cell.selected[t]));
          body += '\n';
        }
      }
    }
    detail::write_file(out_dir / "train.csv", body);
    result.files.push_back("train.csv");
  } else {  // markov-analyze
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < n_pol; ++p) {
      if (!is_markov(cfg.policies[p].kind)) continue;
      arr.push_back(markov_analysis_json(cfg.n, cfg.m, cfg.m_prime,
                                         cfg.policies[p].kind == PolicyKind::markov_monotone));
    }
    if (arr.empty())
      throw ConfigError({"policies: markov-analyze needs at least one markov policy"});
    detail::write_file(out_dir / "markov.json", arr.dump(2) + "\n");
    result.files.push_back("markov.json");
  }

  nlohmann::ordered_json manifest;
  manifest["tool"] = "aoifl";
  manifest["version"] = kVersion;
  manifest["schema_version"] = 1;
  manifest["generated_at"] = detail::utc_timestamp();
  manifest["config"] = resolved_config_json(cfg);
  detail::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  result.files.push_back("manifest.json");
  return result;
}

}  // namespace aoifl
