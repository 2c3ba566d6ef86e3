#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "klpc/pce.hpp"
#include "klpc/transform.hpp"

namespace klpc {

struct ErrorEstimate {
  double value = 0.0;
  double se = 0.0;
  int n_mc = 0;
};

struct ErrorCurve {
  std::string reference_label;
  std::vector<double> abscissa;
  std::vector<double> values;
  std::vector<double> ses;
  int n_mc = 0;
  std::uint64_t seed = 0;
};

void write_error_curve_csv(const std::vector<ErrorCurve>& curves,
                           const std::string& abscissa_name,
                           const std::string& value_name,
                           const std::string& path);

// Relative process-approximation error eps_M(K, q): full-spectrum draws of
// M(q), projected on the K-dominant subspace of C(q), transformed to the
// reference basis; norm of the residual over sigma_f.
ErrorEstimate eps_M(const Kernel& kernel, const HyperParams& q, int K,
                    const KLBasis& reference, int n_mc, std::uint64_t seed);

// q-averaged error E_M for several truncations at once; the same (q, z)
// draws drive every K (paired Monte Carlo). reference must carry at least
// max(Ks) modes.
std::vector<ErrorEstimate> E_M(const Kernel& kernel, const HyperPrior& prior,
                               const std::vector<int>& Ks,
                               const KLBasis& reference, int n_mc,
                               std::uint64_t seed, int threads = 1);

// Setup shared by the surrogate-error estimators; the surrogate(s) must
// carry a full space-time field block trained with this solver config.
struct SurrogateErrorSetup {
  Kernel kernel;
  KLBasis reference;
  DiffusionConfig solver;
  double kappa = 1e-12;
  int threads = 1;
};

// Relative solution error of one or more surrogates (paired across them):
// per sample, exact M(q) is drawn and solved, then each surrogate is
// evaluated at xi(eta, q). fixed_q pins q (eps_U); otherwise q follows the
// prior (E_U).
std::vector<ErrorEstimate> surrogate_solution_error(
    const SurrogateErrorSetup& setup,
    const std::vector<const PCSurrogate*>& surrogates,
    const HyperPrior& prior, const std::optional<HyperParams>& fixed_q,
    int n_mc, std::uint64_t seed);

ErrorEstimate eps_U(const SurrogateErrorSetup& setup, const PCSurrogate& s,
                    const HyperParams& q, int n_mc, std::uint64_t seed);

ErrorEstimate E_U(const SurrogateErrorSetup& setup, const PCSurrogate& s,
                  const HyperPrior& prior, int n_mc, std::uint64_t seed);

}  // namespace klpc
