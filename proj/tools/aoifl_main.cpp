// aoifl: config-driven experiment runner for age-based client selection.
//
// Subcommands:
//   run      --config <path> [--out <dir>] [--threads N] [--seed-override K]
//   validate --config <path>
//   markov   --n N --m M --mprime P [--monotone]   (prints chain JSON)
//
// Exit codes: 0 success, 2 invalid config or arguments, 3 runtime failure.
// AOIFL_LOG selects stderr verbosity: error (default), warn, info, debug.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aoifl/config.hpp"
#include "aoifl/runner.hpp"
#include "aoifl/version.hpp"

namespace {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level() {
  const char* env = std::getenv("AOIFL_LOG");
  if (!env) return LogLevel::error;
  if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
  if (std::strcmp(env, "info") == 0) return LogLevel::info;
  if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
  return LogLevel::error;
}

void log(LogLevel lvl, const std::string& msg) {
  static const LogLevel active = log_level();
  if (lvl > active) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(lvl)], msg.c_str());
}

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"age-based client selection experiments"};
  app.set_version_flag("--version", std::string("aoifl ") + aoifl::kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir;
  unsigned threads = 1;
  std::uint64_t seed_override = 0;
  bool have_seed_override = false;

  auto* run = app.add_subcommand("run", "execute the experiment in a config file");
  run->add_option("--config", config_path, "config JSON path")->required();
  run->add_option("--out", out_dir, "override the config's output_dir");
  run->add_option("--threads", threads, "parallel (policy, seed) cells")
      ->check(CLI::Range(1u, 256u));
  run->add_option("--seed-override", seed_override, "run only this seed")
      ->each([&](const std::string&) { have_seed_override = true; });

  auto* validate = app.add_subcommand("validate", "check a config file and exit");
  validate->add_option("--config", config_path, "config JSON path")->required();

  std::uint64_t mk_n = 0, mk_m = 0;
  std::uint32_t mk_mprime = 0;
  bool mk_monotone = false;
  auto* markov = app.add_subcommand("markov", "print chain analysis JSON to stdout");
  markov->add_option("--n", mk_n, "client count")->required();
  markov->add_option("--m", mk_m, "selection budget per round")->required();
  markov->add_option("--mprime", mk_mprime, "maximum client age")->required();
  markov->add_flag("--monotone", mk_monotone, "calibrated monotone chain instead of optimal");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) {
      log(LogLevel::info, "loading config " + config_path);
      const aoifl::ExperimentConfig cfg = aoifl::load_config(config_path);
      aoifl::RunOptions opt;
      opt.out_dir_override = out_dir;
      opt.threads = threads;
      if (have_seed_override) opt.seed_override = seed_override;
      log(LogLevel::info, std::string("running experiment ") + aoifl::to_string(cfg.experiment));
      const auto result = aoifl::run_experiment(cfg, opt);
      for (const auto& f : result.files)
        log(LogLevel::info, "wrote " + (result.out_dir / f).string());
      std::cout << result.out_dir.string() << "\n";
      return kExitOk;
    }
    if (validate->parsed()) {
      aoifl::load_config(config_path);
      std::cout << "ok\n";
      return kExitOk;
    }
    // markov subcommand
    if (mk_n < 1 || mk_m < 1 || mk_m > mk_n || mk_mprime < 1) {
      log(LogLevel::error, "markov: need 1 <= m <= n and mprime >= 1");
      return kExitConfig;
    }
    std::cout << aoifl::markov_analysis_json(mk_n, static_cast<std::uint32_t>(mk_m), mk_mprime,
                                             mk_monotone)
                     .dump(2)
              << "\n";
    return kExitOk;
  } catch (const aoifl::ConfigError& e) {
    log(LogLevel::error, e.what());
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const aoifl::CalibrationError& e) {
    std::cerr << "calibration infeasible: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  }
}
