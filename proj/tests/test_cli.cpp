#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "klpc/commands.hpp"
#include "klpc/inference.hpp"

using namespace klpc;
namespace fs = std::filesystem;

namespace {

// Small enough to run every command in well under a second.
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.grid_n = 32;
  cfg.K = 2;
  cfg.pc_order = 1;
  cfg.n_x = 5;
  cfg.n_t = 4;
  cfg.surrogate_solver.n_elems = 16;
  cfg.surrogate_solver.dt = 1.25e-3;  // snaps to 10 steps per observation
  cfg.data_solver.n_elems = 64;
  cfg.data_solver.dt = 2.5e-4;
  cfg.mcmc_steps = 1500;
  cfg.adapt_start = 300;
  cfg.study_n_mc_M = 50;
  cfg.study_n_mc_U = 20;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("presets") {
  for (const std::string& name : preset_names()) {
    const ExperimentConfig cfg = preset_config(name);
    CHECK_NOTHROW(validate(cfg));
  }
  CHECK(preset_config("desk-sin").K == 6);
  CHECK(preset_config("desk-sin").sample_hyperparams);
  CHECK_FALSE(preset_config("desk-step-fixed").sample_hyperparams);
  CHECK(preset_config("desk-ran-fixed").reference_type == "fixed");
  CHECK(preset_config("paper-ran").K == 15);
  CHECK(preset_config("paper-ran").pc_order == 10);
  CHECK(preset_config("paper-sin").mcmc_steps == 250000);
  CHECK_THROWS_AS(preset_config("desk-spiral"), ConfigError);
}

TEST_CASE("config serialization, overlay and validation") {
  TempDir dir("klpc_cfg_test");
  const ExperimentConfig base = tiny_config();

  const std::string path = dir.str() + "/override.json";
  {
    std::ofstream out(path);
    out << R"({"kl": {"K": 3}, "mcmc": {"steps": 100}})";
  }
  const ExperimentConfig merged = load_config_over(base, path);
  CHECK(merged.K == 3);
  CHECK(merged.mcmc_steps == 100);
  CHECK(merged.grid_n == base.grid_n);  // untouched keys survive

  {
    std::ofstream out(path);
    out << R"({"kl": {"k_modes": 3}})";  // typo
  }
  CHECK_THROWS_AS(load_config_over(base, path), ConfigError);

  {
    std::ofstream out(path);
    out << R"({"kl": {"K": 0}})";
  }
  CHECK_THROWS_AS(load_config_over(base, path), ConfigError);

  ExperimentConfig bad = base;
  bad.burn_in_fraction = 1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = base;
  bad.reference_type = "mean";
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("fingerprints isolate the surrogate-relevant config") {
  const ExperimentConfig base = tiny_config();
  const std::uint64_t fp = surrogate_fingerprint(base);

  ExperimentConfig changed = base;
  changed.mcmc_steps *= 2;
  changed.profile = "step";
  changed.sigma_eps2 = 0.5;
  changed.seed += 1;
  CHECK(surrogate_fingerprint(changed) == fp);
  CHECK(config_fingerprint(changed) != config_fingerprint(base));

  changed = base;
  changed.pc_order += 1;
  CHECK(surrogate_fingerprint(changed) != fp);
  changed = base;
  changed.K += 1;
  CHECK(surrogate_fingerprint(changed) != fp);
  changed = base;
  changed.reference_type = "fixed";
  CHECK(surrogate_fingerprint(changed) != fp);
  changed = base;
  changed.surrogate_solver.n_elems = 20;
  CHECK(surrogate_fingerprint(changed) != fp);
}

TEST_CASE("build, generate, infer round-trip") {
  TempDir dir("klpc_cmd_test");
  ExperimentConfig cfg = tiny_config();
  cfg.sample_hyperparams = false;
  cfg.reference_type = "fixed";

  const BuildOutcome build = cmd_build_surrogate(cfg, dir.str());
  CHECK(fs::exists(build.artifact_path));
  CHECK(fs::exists(dir.str() + "/surrogate.run.json"));
  CHECK(build.fingerprint == surrogate_fingerprint(cfg));

  // idempotent per config: identical fingerprint and coefficients
  const BuildOutcome again = cmd_build_surrogate(cfg, dir.str());
  CHECK(again.fingerprint == build.fingerprint);
  CHECK(again.held_out_error == build.held_out_error);

  const DataOutcome data = cmd_generate_data(cfg, dir.str());
  CHECK(fs::exists(data.dataset_path));
  CHECK(fs::exists(data.dataset_path + ".meta.json"));
  CHECK(fs::exists(data.profile_path));

  const InferOutcome infer =
      cmd_infer(cfg, data.dataset_path, build.artifact_path, dir.str());
  CHECK(fs::exists(infer.chain_path));
  CHECK(fs::exists(infer.diagnostics_path));
  CHECK(fs::exists(infer.profile_path));
  CHECK(infer.acceptance_rate > 0.0);
  CHECK(infer.acceptance_rate < 1.0);

  SUBCASE("chain CSV schema and pinned hyper-parameters") {
    std::ifstream in(infer.chain_path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,accepted,log_post,eta_1,eta_2,l,sigma_f2,sigma_o2");
    // q columns stay at the reference values in fixed mode
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      const auto last3 = line.rfind(",0.5,0.5,");
      CHECK(last3 != std::string::npos);
    }
    CHECK(rows == cfg.mcmc_steps);
  }

  SUBCASE("diagnostics JSON carries KLD for every coordinate") {
    std::ifstream in(infer.diagnostics_path);
    nlohmann::json diag;
    in >> diag;
    CHECK(diag.at("eta_kld").size() == 2);
    CHECK(diag.contains("acceptance_rate"));
    CHECK(diag.contains("map"));
    CHECK(diag.at("profile").at("median").size() == 32);
  }

  SUBCASE("stale surrogate artifacts are refused") {
    ExperimentConfig other = cfg;
    other.pc_order += 1;
    CHECK_THROWS_AS(
        cmd_infer(other, data.dataset_path, build.artifact_path, dir.str()),
        StaleArtifactError);
  }

  SUBCASE("mismatched dataset layout is refused") {
    ExperimentConfig other = cfg;
    other.n_x = 7;
    CHECK_THROWS_AS(
        cmd_infer(other, data.dataset_path, build.artifact_path, dir.str()),
        ConfigError);
  }
}

TEST_CASE("zero-order surrogate evaluates to a constant") {
  TempDir dir("klpc_o0_test");
  ExperimentConfig cfg = tiny_config();
  cfg.pc_order = 0;
  const BuildOutcome build = cmd_build_surrogate(cfg, dir.str());
  const LoadedSurrogate loaded = load_surrogate(build.artifact_path);
  const Eigen::VectorXd a =
      eval_surrogate(loaded.surrogate, Eigen::VectorXd::Zero(2));
  const Eigen::VectorXd b =
      eval_surrogate(loaded.surrogate, Eigen::VectorXd::Constant(2, 1.7));
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("inverse-crime guard cannot be bypassed through the config") {
  TempDir dir("klpc_guard_test");
  ExperimentConfig cfg = tiny_config();
  cfg.data_solver = cfg.surrogate_solver;  // same discretization
  CHECK_THROWS_AS(cmd_generate_data(cfg, dir.str()), ConfigError);
}

TEST_CASE("zero-observation inference recovers the prior") {
  TempDir dir("klpc_zero_obs");
  ExperimentConfig cfg = tiny_config();
  cfg.n_x = 0;
  cfg.n_t = 0;
  cfg.sample_hyperparams = false;
  cfg.reference_type = "fixed";
  cfg.mcmc_steps = 30000;

  const BuildOutcome build = cmd_build_surrogate(cfg, dir.str());
  const DataOutcome data = cmd_generate_data(cfg, dir.str());
  const InferOutcome infer =
      cmd_infer(cfg, data.dataset_path, build.artifact_path, dir.str());

  // eta marginal moments match the standard normal prior
  std::ifstream in(infer.chain_path);
  std::string line;
  std::getline(in, line);
  std::vector<double> eta1;
  int row = 0;
  const int burn = cfg.mcmc_steps / 5;
  while (std::getline(in, line)) {
    if (row++ < burn) continue;
    std::size_t at = 0;
    for (int comma = 0; comma < 3; ++comma) at = line.find(',', at) + 1;
    eta1.push_back(std::stod(line.substr(at, line.find(',', at) - at)));
  }
  double mean = 0.0;
  for (double v : eta1) mean += v;
  mean /= eta1.size();
  double var = 0.0;
  for (double v : eta1) var += (v - mean) * (v - mean);
  var /= (eta1.size() - 1);
  const double ess = effective_sample_size(eta1);
  CHECK(std::abs(mean) < 4.0 / std::sqrt(ess));
  CHECK(var > 0.85);
  CHECK(var < 1.15);
}

TEST_CASE("error studies write the declared tables") {
  TempDir dir("klpc_study_test");
  ExperimentConfig cfg = tiny_config();
  cfg.K = 3;
  cfg.pc_order = 2;

  SUBCASE("unknown study name") {
    CHECK_THROWS_AS(cmd_error_study(cfg, "eps_Q_vs_K", dir.str()),
                    ConfigError);
  }

  SUBCASE("stretching at the reference length-scale is one") {
    ExperimentConfig fixed = cfg;
    fixed.reference_type = "fixed";
    fixed.reference_q = {0.5, 0.5};
    const std::string csv =
        cmd_error_study(fixed, "stretching_vs_l", dir.str());
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "l,reference,sqrt_beta_max,se,n_mc,seed");
    bool saw_reference_row = false;
    while (std::getline(in, line)) {
      if (line.rfind("0.5,", 0) == 0) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const auto c3 = line.find(',', c2 + 1);
        const double value = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
        CHECK(value == doctest::Approx(1.0).epsilon(1e-6));
        saw_reference_row = true;
      }
    }
    CHECK(saw_reference_row);
  }

  SUBCASE("eps_M_vs_K errors descend for the averaged reference") {
    cfg.study_n_mc_M = 200;
    const std::string csv = cmd_error_study(cfg, "eps_M_vs_K", dir.str());
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    std::vector<double> avg_errors, avg_ses;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string k, ref, err, se;
      std::getline(ss, k, ',');
      std::getline(ss, ref, ',');
      std::getline(ss, err, ',');
      std::getline(ss, se, ',');
      if (ref == "averaged") {
        avg_errors.push_back(std::stod(err));
        avg_ses.push_back(std::stod(se));
      }
    }
    REQUIRE(avg_errors.size() >= 2);
    for (std::size_t i = 0; i + 1 < avg_errors.size(); ++i) {
      const double band = 2 * std::sqrt(avg_ses[i] * avg_ses[i] +
                                        avg_ses[i + 1] * avg_ses[i + 1]);
      CHECK(avg_errors[i + 1] <= avg_errors[i] + band);
    }
  }

  SUBCASE("eps_U_vs_o runs at reduced scale") {
    const std::string csv = cmd_error_study(cfg, "eps_U_vs_o", dir.str());
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "o,reference,error,se,n_mc,seed");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == cfg.pc_order);
  }
}

TEST_CASE("run sidecars embed the reproducing config") {
  TempDir dir("klpc_sidecar_test");
  ExperimentConfig cfg = tiny_config();
  cmd_generate_data(cfg, dir.str());
  std::ifstream in(dir.str() + "/dataset.run.json");
  nlohmann::json sidecar;
  in >> sidecar;
  CHECK(sidecar.at("command") == "generate-data");
  CHECK(sidecar.at("config_fingerprint") == config_fingerprint(cfg));
  CHECK(sidecar.at("seed") == cfg.seed);
  CHECK(sidecar.contains("config"));
  // the embedded config reproduces the fingerprint
  const std::string dumped = sidecar.at("config").dump();
  CHECK(fnv1a64(dumped) == config_fingerprint(cfg));
}
