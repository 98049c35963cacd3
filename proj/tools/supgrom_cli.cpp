// Command-line benchmark driver.
//
//   supgrom-bench run --preset graetz-steady [overrides...]
//   supgrom-bench run --config experiment.json [overrides...]
//   supgrom-bench inspect --offline results/offline
//
// Exit codes: 0 success, 2 invalid configuration or arguments, 3 solver
// failure during the experiment.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "supgrom/bench.hpp"

namespace {

constexpr int kExitInvalidConfig = 2;
constexpr int kExitSolverFailure = 3;

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const std::string& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

supgrom::ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::invalid_argument("cannot read config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config file " + path + " is not valid JSON: " + e.what());
  }
  return supgrom::config_from_json(j);
}

void print_run_summary(const supgrom::ExperimentReport& rep) {
  std::printf("\nbasis size N = %d, offline %.3f s, high-fidelity avg %.4f s/solve\n",
              rep.n_max_effective, rep.offline_seconds, rep.hf_avg_seconds);
  for (const supgrom::ModeSeries& ms : rep.modes) {
    if (ms.e_y.empty()) continue;
    std::size_t last = ms.e_y.size() - 1;
    std::printf("%-15s  e_y %.3e  e_u %.3e  e_p %.3e  speedup %.1f/%.1f/%.1f (min/avg/max) at N=%zu\n",
                supgrom::rom_mode_name(ms.mode).c_str(), ms.e_y[last], ms.e_u[last],
                ms.e_p[last], ms.speedup_min[last], ms.speedup_avg[last], ms.speedup_max[last],
                last + 1);
  }
}

int cmd_run(const std::string& preset, const std::string& config_path,
            const CLI::Option* nmax, int nmax_v, const CLI::Option* ntrain, int ntrain_v,
            const CLI::Option* ntest, int ntest_v, const CLI::Option* mode,
            const std::string& mode_v, const CLI::Option* delta, double delta_v,
            const CLI::Option* seed_train, std::uint64_t seed_train_v,
            const CLI::Option* seed_test, std::uint64_t seed_test_v,
            const CLI::Option* mesh_nx, int mesh_nx_v, const CLI::Option* mesh_ny,
            int mesh_ny_v, const CLI::Option* out, const std::string& out_v) {
  supgrom::ExperimentConfig cfg =
      preset.empty() ? load_config_file(config_path) : supgrom::preset_config(preset);
  if (nmax->count()) cfg.n_max = nmax_v;
  if (ntrain->count()) cfg.n_train = ntrain_v;
  if (ntest->count()) cfg.n_test = ntest_v;
  if (delta->count()) cfg.stab_delta = delta_v;
  if (seed_train->count()) cfg.seed_train = seed_train_v;
  if (seed_test->count()) cfg.seed_test = seed_test_v;
  if (mesh_nx->count()) cfg.mesh_nx = mesh_nx_v;
  if (mesh_ny->count()) cfg.mesh_ny = mesh_ny_v;
  if (out->count()) cfg.out_dir = out_v;
  if (mode->count()) {
    if (mode_v == "both")
      cfg.modes = {supgrom::RomMode::OnlyOffline, supgrom::RomMode::OnlineOffline};
    else
      cfg.modes = {supgrom::rom_mode_from_name(mode_v)};
  }
  if (cfg.out_dir.empty()) cfg.out_dir = "results";
  supgrom::validate_config(cfg);

  supgrom::ExperimentReport rep =
      supgrom::run_experiment(cfg, [](const std::string& s) { std::cout << s << std::endl; });
  supgrom::emit_report(rep, cfg.out_dir);
  std::cout << "report written to " << cfg.out_dir << std::endl;
  if (!rep.valid) {
    std::cerr << "experiment aborted: " << rep.failure << std::endl;
    return kExitSolverFailure;
  }
  print_run_summary(rep);
  return 0;
}

int cmd_inspect(const std::string& offline_dir) {
  supgrom::OfflineArtifacts art = [&] {
    try {
      return supgrom::load_offline(offline_dir);
    } catch (const std::runtime_error& e) {  // unreadable/foreign artifacts
      throw std::invalid_argument(e.what());
    }
  }();
  const supgrom::ProblemDef& p = art.model.problem;
  std::printf("problem       %s\n", supgrom::problem_name(p.id).c_str());
  std::printf("mesh          %dx%d\n", art.model.mesh_nx, art.model.mesh_ny);
  if (p.time_dependent)
    std::printf("time grid     T=%g, %d steps\n", p.t_final, p.n_time_steps);
  std::printf("training      %d samples, seed %llu\n", art.n_train,
              static_cast<unsigned long long>(art.train_seed));
  std::printf("basis size    %d per variable (state+adjoint aggregated to %d)\n",
              art.model.n_max, 2 * art.model.n_max);
  std::printf("\n%-6s %-14s %-14s %-14s %-12s\n", "n", "state", "control", "adjoint",
              "state decay");
  std::size_t rows = std::max({art.eigenvalues[0].size(), art.eigenvalues[1].size(),
                               art.eigenvalues[2].size()});
  const std::size_t shown = std::min<std::size_t>(rows, 30);
  for (std::size_t i = 0; i < shown; ++i) {
    auto cell = [&](int v) {
      return i < art.eigenvalues[v].size() ? art.eigenvalues[v][i] : 0.0;
    };
    double lead = art.eigenvalues[0].empty() ? 1.0 : art.eigenvalues[0][0];
    std::printf("%-6zu %-14.6e %-14.6e %-14.6e %-12.3e\n", i + 1, cell(0), cell(1), cell(2),
                lead > 0.0 ? cell(0) / lead : 0.0);
  }
  if (rows > shown) std::printf("... (%zu more)\n", rows - shown);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SUPG-stabilized optimal-control benchmark: high-fidelity vs reduced solves"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "run an experiment and emit CSV/JSON reports");
  std::string preset, config_path;
  CLI::Option* preset_opt =
      run->add_option("--preset", preset,
                      "named experiment preset (" + join_names(supgrom::preset_names()) + ")");
  CLI::Option* config_opt =
      run->add_option("--config", config_path, "experiment config JSON file");
  preset_opt->excludes(config_opt);
  config_opt->excludes(preset_opt);

  int nmax_v = 0, ntrain_v = 0, ntest_v = 0, mesh_nx_v = 0, mesh_ny_v = 0;
  double delta_v = 1.0;
  std::uint64_t seed_train_v = 0, seed_test_v = 0;
  std::string mode_v, out_v;
  CLI::Option* nmax = run->add_option("--nmax", nmax_v, "largest reduced basis size");
  CLI::Option* ntrain = run->add_option("--ntrain", ntrain_v, "training set size");
  CLI::Option* ntest = run->add_option("--ntest", ntest_v, "test set size");
  CLI::Option* mode =
      run->add_option("--mode", mode_v, "reduction mode: online-offline, only-offline, or both")
          ->check(CLI::IsMember({"online-offline", "only-offline", "both"}));
  CLI::Option* delta = run->add_option("--stab-delta", delta_v, "SUPG stabilization constant");
  CLI::Option* seed_train = run->add_option("--seed-train", seed_train_v, "training draw seed");
  CLI::Option* seed_test = run->add_option("--seed-test", seed_test_v, "test draw seed");
  CLI::Option* mesh_nx = run->add_option("--mesh-nx", mesh_nx_v, "cells along x");
  CLI::Option* mesh_ny = run->add_option("--mesh-ny", mesh_ny_v, "cells along y");
  CLI::Option* out = run->add_option("--out", out_v, "output directory");

  CLI::App* inspect =
      app.add_subcommand("inspect", "print the eigenvalue decay of saved offline artifacts");
  std::string offline_dir;
  inspect->add_option("--offline", offline_dir, "offline artifact directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalidConfig;
  }

  try {
    if (run->parsed()) {
      if (preset.empty() && config_path.empty())
        throw std::invalid_argument("run needs --preset or --config");
      return cmd_run(preset, config_path, nmax, nmax_v, ntrain, ntrain_v, ntest, ntest_v, mode,
                     mode_v, delta, delta_v, seed_train, seed_train_v, seed_test, seed_test_v,
                     mesh_nx, mesh_nx_v, mesh_ny, mesh_ny_v, out, out_v);
    }
    return cmd_inspect(offline_dir);
  } catch (const supgrom::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << std::endl;
    return kExitSolverFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << std::endl;
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
