#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rtd/rtd.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

struct Svd {
  Matrix U;
  Vector S;
  Matrix V;
};

/// Top-k singular triplets by block subspace iteration (oversampling 5,
/// Householder re-orthonormalisation) until the top-k singular values move by
/// at most tol relative. Small problems go straight to a dense SVD.
/// Deterministic in `seed`. Throws std::invalid_argument if k > min(rows, cols).
Svd truncated_svd(const Matrix& m, std::size_t k, std::uint64_t seed = 0, double tol = 1e-10,
                  int max_iters = 500);

struct MatrixRpcaConfig {
  std::size_t rank = 1;
  ThresholdMode threshold_mode = ThresholdMode::practical;
  /// Unset: 4 mu^2 r / sqrt(rows * cols).
  std::optional<double> beta;
  double mu = 1.0;
  double delta = 1e-3;
  std::optional<int> max_iters_per_stage;
  /// Same meaning as RtdConfig::stage_tol.
  double stage_tol = 0.0;
  /// Same meaning as RtdConfig::zeta_floor, relative to max |M_ij|.
  double zeta_floor = 1e-10;
  /// Stop once beta sigma_{l+1}(M - S) < delta / (2 sqrt(rows * cols)).
  bool early_stop = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MatrixRpcaResult {
  Matrix L;
  /// Dense storage, exact zeros off the support.
  Matrix S;
  int iterations = 0;
  int stages_run = 0;
  bool converged = false;
};

/// Alternating rank-l truncated SVD and hard thresholding in stages
/// l = 1..rank, with the same threshold schedule as ncralgo using matrix
/// singular values and n_eff = sqrt(rows * cols) in place of n^1.5.
MatrixRpcaResult matrix_rpca(const Matrix& m, const MatrixRpcaConfig& cfg);

struct TensorSplit {
  Tensor3 L;
  Tensor3 S;
  int iterations = 0;
  bool converged = true;
};

/// matrix_rpca on every mode-3 slice T(:, :, l).
TensorSplit rpca_slices(const Tensor3& t, const MatrixRpcaConfig& cfg);
/// matrix_rpca on the mode-`mode` flattening.
TensorSplit rpca_flatten(const Tensor3& t, int mode, const MatrixRpcaConfig& cfg);

struct Whitened {
  /// T(W, W, W), k x k x k.
  Tensor3 tensor;
  /// n x k, W = U_k D_k^{-1/2}.
  Matrix W;
  /// n x k, U_k D_k^{1/2}; maps whitened directions back.
  Matrix unwhiten;
};

/// Whitening from the top-k eigenpairs of the symmetric PSD matrix m2.
/// Throws std::invalid_argument if the k-th eigenvalue is <= 1e-12.
Whitened whiten(const Tensor3& t, const Matrix& m2, std::size_t k);

/// Each whitened pair (lambda, v) becomes weight 1 / lambda^2 on the
/// component lambda * unwhiten * v, returned as a unit-vector model.
FactorModel unwhiten(const FactorModel& whitened, const Whitened& w);

/// Symmetric PSD surrogate |A| (eigenvalues replaced by magnitudes) of the
/// symmetric part of a.
Matrix psd_abs(const Matrix& a);

}  // namespace rtd
