#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "klpc/commands.hpp"

namespace {

// Config resolution order: preset (if any), then config file overrides,
// then command-line --seed/--threads.
klpc::ExperimentConfig resolve_config(const std::string& preset,
                                      const std::string& config_path,
                                      bool has_seed, std::uint64_t seed,
                                      int threads) {
  klpc::ExperimentConfig cfg =
      preset.empty() ? klpc::ExperimentConfig{} : klpc::preset_config(preset);
  if (!config_path.empty()) cfg = klpc::load_config_over(cfg, config_path);
  if (has_seed) cfg.seed = seed;
  if (threads >= 0) cfg.threads = threads;
  klpc::validate(cfg);
  if (klpc::multi_index_count(cfg.K, cfg.pc_order) > 100000)
    std::fprintf(stderr,
                 "warning: K=%d, o=%d is a nominal-scale configuration "
                 "(P+1 = %llu) well beyond desk scale\n",
                 cfg.K, cfg.pc_order,
                 static_cast<unsigned long long>(
                     klpc::multi_index_count(cfg.K, cfg.pc_order)));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KL + polynomial-chaos Bayesian inference of log-diffusivity "
               "fields with uncertain covariance hyper-parameters"};
  app.require_subcommand(1);

  std::string preset, config_path, out_dir = "out";
  std::uint64_t seed = 0;
  bool has_seed = false;
  int threads = -1;
  app.add_option("--preset", preset, "named preset (desk-sin, paper-ran, ...)")
      ->check(CLI::IsMember(klpc::preset_names()));
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "master seed override")
      ->each([&](const std::string&) { has_seed = true; });
  app.add_option("--threads", threads, "worker threads (0 = hardware)");

  auto* build = app.add_subcommand("build-surrogate",
                                   "offline step: train and save the PC "
                                   "surrogate artifact");
  auto* gen = app.add_subcommand("generate-data",
                                 "synthesize noisy observations on the fine "
                                 "solver");
  auto* infer = app.add_subcommand("infer",
                                   "online step: run the adaptive MCMC "
                                   "against a dataset");
  std::string dataset_path, surrogate_path;
  infer->add_option("--data", dataset_path, "dataset CSV path")->required();
  infer->add_option("--surrogate", surrogate_path, "surrogate artifact path")
      ->required();
  auto* study = app.add_subcommand("error-study",
                                   "Monte-Carlo error and stretching sweeps");
  std::string study_name;
  study
      ->add_option("--study", study_name,
                   "eps_M_vs_K | eps_M_vs_l | eps_U_vs_o | eps_U_vs_K | "
                   "stretching_vs_l")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const klpc::ExperimentConfig cfg =
        resolve_config(preset, config_path, has_seed, seed, threads);
    if (build->parsed()) {
      const auto outcome = klpc::cmd_build_surrogate(cfg, out_dir);
      std::printf("surrogate: %s\nheld-out error: %.3e\nresidual: %.3e\n",
                  outcome.artifact_path.c_str(), outcome.held_out_error,
                  outcome.rel_residual);
    } else if (gen->parsed()) {
      const auto outcome = klpc::cmd_generate_data(cfg, out_dir);
      std::printf("dataset: %s\n", outcome.dataset_path.c_str());
    } else if (infer->parsed()) {
      const auto outcome =
          klpc::cmd_infer(cfg, dataset_path, surrogate_path, out_dir);
      std::printf("chain: %s\ndiagnostics: %s\nacceptance rate: %.3f\n",
                  outcome.chain_path.c_str(), outcome.diagnostics_path.c_str(),
                  outcome.acceptance_rate);
    } else if (study->parsed()) {
      const std::string csv = klpc::cmd_error_study(cfg, study_name, out_dir);
      std::printf("study table: %s\n", csv.c_str());
    }
  } catch (const klpc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const klpc::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const klpc::StaleArtifactError& e) {
    std::fprintf(stderr, "stale artifact: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
