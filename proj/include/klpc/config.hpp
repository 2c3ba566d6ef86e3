#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "klpc/forward.hpp"
#include "klpc/inference.hpp"
#include "klpc/kernels.hpp"
#include "klpc/pce.hpp"

namespace klpc {

// Everything a run needs; every default is either a paper value or a
// documented choice. Loadable from JSON, merge-able with named presets.
struct ExperimentConfig {
  // kernel + hyper-parameter prior
  std::string kernel_type = "squared_exponential";  // or "composite"
  CompositeKernel composite;                        // used when composite
  HyperPrior prior;

  // reference covariance: q-averaged C-bar or a fixed C(q^r)
  std::string reference_type = "averaged";  // or "fixed"
  HyperParams reference_q{0.5, 0.5};
  int grid_n = 128;
  int K = 6;
  int pc_order = 5;
  double kappa = 0.0;        // inference-time threshold
  double study_kappa = 1e-12;  // error/stretching studies
  int quad_l_nodes = 64;

  // solvers: surrogate/inference scale and the finer data-generation scale
  DiffusionConfig surrogate_solver{0.1, 56, 1e-4, 0.05, -1.0, 1.0};
  DiffusionConfig data_solver{0.1, 224, 2.5e-5, 0.05, -1.0, 1.0};

  // observation layout and synthetic noise
  int n_x = 19;
  int n_t = 13;
  double sigma_eps2 = 0.01;
  std::string profile = "sin";

  // surrogate training
  std::string fit_method = "regression";  // or "projection"
  double oversampling = 3.0;
  int train_samples = 0;  // explicit override
  int held_out_samples = 100;

  // MCMC
  int mcmc_steps = 50000;
  double burn_in_fraction = 0.2;
  bool sample_hyperparams = true;
  int adapt_start = 2000;
  double adapt_eps = 1e-8;
  double init_l = 0.5;
  double init_sigma_f2 = 0.5;
  double init_sigma_o2 = 0.01;

  // error studies
  int study_n_mc_M = 2000;
  int study_n_mc_U = 200;

  std::uint64_t seed = 20240801;
  int threads = 1;
};

ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

ExperimentConfig load_config(const std::string& path);
// Overlays the JSON file onto base (typically a preset).
ExperimentConfig load_config_over(const ExperimentConfig& base,
                                  const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

void validate(const ExperimentConfig& cfg);

// Hash of the canonical JSON form of the whole config.
std::uint64_t config_fingerprint(const ExperimentConfig& cfg);
// Hash of the sub-config that determines the surrogate artifact.
std::uint64_t surrogate_fingerprint(const ExperimentConfig& cfg);

Kernel make_kernel(const ExperimentConfig& cfg);
std::string reference_label(const ExperimentConfig& cfg);

}  // namespace klpc
