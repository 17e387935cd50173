// SPDX-License-Identifier: Apache-2.0
//
// Command line front end. Subcommands:
//   simulate  run a Monte-Carlo gain sweep from a config file or preset
//   presets   list the built-in experiment presets
//   verify    run the structural self-checks
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cpscm/cpscm.hpp"

namespace {

int cmd_simulate(const std::string& config_path, const std::string& preset_name,
                 bool have_seed, std::uint64_t seed, int trials, int threads,
                 const std::string& mode, const std::string& out_path) {
  std::vector<cpscm::SimConfig> runs;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file '" << config_path << "'\n";
      return 1;
    }
    runs.push_back(cpscm::parse_config_text(in, config_path));
  } else {
    const cpscm::Preset* p = cpscm::find_preset(preset_name);
    if (p == nullptr) {
      std::cerr << "error: unknown preset '" << preset_name
                << "' (run `cpscm-sim presets` for the list)\n";
      return 1;
    }
    runs = p->runs;
  }

  for (auto& r : runs) {
    if (have_seed) r.seed = seed;
    if (trials > 0) r.trials = trials;
    if (threads >= 0) r.threads = threads;
    if (!mode.empty()) r.mode = cpscm::parse_mode(mode);
    if (!out_path.empty()) r.out_path = out_path;
    r.validate();
  }

  const std::string& target = runs.front().out_path;
  std::ofstream file;
  if (!target.empty()) {
    file.open(target);
    if (!file) {
      std::cerr << "error: cannot open output file '" << target << "'\n";
      return 1;
    }
  }
  std::ostream& os = target.empty() ? std::cout : file;

  const auto reports = cpscm::run_batch(runs, &os);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& rep = reports[i];
    std::fprintf(stderr, "run %zu/%zu: %s done in %.1f s\n", i + 1, reports.size(),
                 rep.curve.meta.mode.c_str(), rep.wall_seconds);
  }
  if (!target.empty())
    std::fprintf(stderr, "wrote %s\n", target.c_str());
  return 0;
}

int cmd_presets() {
  for (const auto& p : cpscm::builtin_presets()) {
    std::cout << p.name << "\n  " << p.summary << "\n";
    for (std::size_t i = 0; i < p.runs.size(); ++i)
      std::cout << "  run " << (i + 1) << ": " << p.runs[i].echo() << "\n";
  }
  return 0;
}

int cmd_verify() { return cpscm::print_verification(std::cout) ? 0 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CP-SCM massive MIMO uplink link-level simulator"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_path, mode;
  std::uint64_t seed = 0;
  int trials = 0;
  int threads = -1;

  CLI::App* sim = app.add_subcommand("simulate", "Run a gain sweep and emit CSV");
  auto* opt_config = sim->add_option("--config", config_path, "key=value config file");
  auto* opt_preset = sim->add_option("--preset", preset_name, "built-in preset name");
  opt_config->excludes(opt_preset);
  auto* opt_seed = sim->add_option("--seed", seed, "master random seed override");
  sim->add_option("--trials", trials, "Monte-Carlo frames per point override")
      ->check(CLI::PositiveNumber);
  sim->add_option("--threads", threads, "worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--mode", mode, "scm-single, scm-multi or ofdm-baseline");
  sim->add_option("--out", out_path, "output CSV path (default stdout)");

  CLI::App* presets = app.add_subcommand("presets", "List built-in presets");
  CLI::App* verify = app.add_subcommand("verify", "Run structural self-checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      if (config_path.empty() && preset_name.empty()) {
        std::cerr << "error: simulate needs --config or --preset\n";
        return 1;
      }
      return cmd_simulate(config_path, preset_name, opt_seed->count() > 0, seed,
                          trials, threads, mode, out_path);
    }
    if (presets->parsed()) return cmd_presets();
    if (verify->parsed()) return cmd_verify();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
