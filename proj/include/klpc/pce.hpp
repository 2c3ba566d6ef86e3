#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "klpc/forward.hpp"
#include "klpc/kl.hpp"

namespace klpc {

// All multi-indices alpha in N^dim with |alpha| <= order, graded order
// (total degree ascending, lexicographic within a degree); the zero index
// comes first.
struct MultiIndexSet {
  int dim = 0;
  int order = 0;
  std::vector<std::vector<int>> indices;

  std::size_t size() const { return indices.size(); }
};

// Number of terms (dim + order choose order), checked against overflow.
std::uint64_t multi_index_count(int dim, int order);

MultiIndexSet enumerate_multi_indices(int dim, int order);

// Product of orthonormal probabilists' Hermite values He_n / sqrt(n!).
double hermite_eval(const std::vector<int>& alpha, const Eigen::VectorXd& xi);

// Row of all basis values at xi for the given index set.
Eigen::VectorXd hermite_basis_row(const MultiIndexSet& set,
                                  const Eigen::VectorXd& xi);

enum class FitMethod { Regression, Projection };

struct TrainingSpec {
  int order = 5;
  FitMethod method = FitMethod::Regression;
  double oversampling = 3.0;  // regression sample count = ceil(os * (P+1))
  int n_samples = 0;          // explicit override when > 0
  int quad_level = 0;         // projection nodes per dim (0 -> order + 1)
  std::uint64_t seed = 1;
  int threads = 1;
  bool store_full_field = false;
  int field_stride = 10;  // keep every k-th time level in the field block
};

struct TrainingDiagnostics {
  double rel_residual = 0.0;
  int n_samples = 0;
};

// Model adapter: maps a field on the reference grid to a stacked output
// vector (observation block first, optional space-time field block after).
struct ModelSpec {
  std::function<Eigen::VectorXd(const FieldSample&)> fn;
  int n_obs = 0;
  int field_nodes = 0;
  std::vector<double> field_times;
};

ModelSpec make_diffusion_model(const DiffusionConfig& cfg,
                               const ObservationOperator& op,
                               bool store_full_field = false,
                               int field_stride = 10);

struct PCSurrogate {
  MultiIndexSet indices;
  Eigen::MatrixXd coeffs;  // (P+1) x n_outputs
  int n_obs = 0;
  int field_nodes = 0;
  std::vector<double> field_times;
  std::uint64_t reference_fingerprint = 0;
  double kappa = 0.0;
  TrainingDiagnostics diag;
};

// Non-intrusive fit of the reference model at xi draws (regression) or at
// tensor Gauss-Hermite nodes (projection). Training fields follow Eq. (37):
// M(xi) = sum_k sqrt(lambda_k^r) phi_k^r xi_k.
PCSurrogate build_surrogate(const ModelSpec& model, const KLBasis& reference,
                            const TrainingSpec& spec);

// Observation block only.
Eigen::VectorXd eval_surrogate(const PCSurrogate& s, const Eigen::VectorXd& xi);

// Full output vector (observations + field block).
Eigen::VectorXd eval_surrogate_all(const PCSurrogate& s,
                                   const Eigen::VectorXd& xi);

// Versioned JSON artifact (index set metadata, coefficients, reference
// basis, fingerprints).
void save_surrogate(const PCSurrogate& s, const KLBasis& reference,
                    std::uint64_t config_fingerprint, const std::string& path);

struct LoadedSurrogate {
  PCSurrogate surrogate;
  KLBasis reference;
  std::uint64_t config_fingerprint = 0;
};

LoadedSurrogate load_surrogate(const std::string& path);

}  // namespace klpc
