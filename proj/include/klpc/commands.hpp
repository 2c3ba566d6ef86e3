#pragma once

#include <string>

#include "klpc/config.hpp"
#include "klpc/data.hpp"
#include "klpc/errors.hpp"

namespace klpc {

// Seed channels derived from the master seed, one per consumer.
namespace seed_channel {
constexpr std::uint64_t kTraining = 1001;
constexpr std::uint64_t kHeldOut = 1002;
constexpr std::uint64_t kChain = 2001;
constexpr std::uint64_t kNoise = 3002;
constexpr std::uint64_t kStudyM = 4001;
constexpr std::uint64_t kStudyU = 4003;
}  // namespace seed_channel

// Reference covariance basis on the working grid: q-averaged C-bar or the
// fixed C(q^r), canonically oriented. K_override widens the truncation for
// error studies.
KLBasis build_reference(const ExperimentConfig& cfg, int K_override = 0);

struct BuildOutcome {
  std::string artifact_path;
  std::uint64_t fingerprint = 0;
  double held_out_error = 0.0;
  double rel_residual = 0.0;
};
BuildOutcome cmd_build_surrogate(const ExperimentConfig& cfg,
                                 const std::string& out_dir);

struct DataOutcome {
  std::string dataset_path;
  std::string profile_path;
};
DataOutcome cmd_generate_data(const ExperimentConfig& cfg,
                              const std::string& out_dir);

struct InferOutcome {
  std::string chain_path;
  std::string diagnostics_path;
  std::string profile_path;
  double acceptance_rate = 0.0;
};
InferOutcome cmd_infer(const ExperimentConfig& cfg,
                       const std::string& dataset_path,
                       const std::string& surrogate_path,
                       const std::string& out_dir);

// study: eps_M_vs_K | eps_M_vs_l | eps_U_vs_o | eps_U_vs_K | stretching_vs_l
std::string cmd_error_study(const ExperimentConfig& cfg,
                            const std::string& study,
                            const std::string& out_dir);

}  // namespace klpc
