#pragma once

#include <cstdint>
#include <vector>

#include "rtd/random.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

struct EigConfig {
  /// Restarts per deflation round; 0 selects max(20, 4n) capped at 2000.
  int n_restarts = 0;
  int n_power_iters = 30;
  double ascent_tol = 1e-10;
  int ascent_max_iters = 500;
  std::uint64_t seed = 0;
  /// Gradient-ascent refinement against the input tensor. Off gives the plain
  /// deflated power method.
  bool refine = true;
  /// Keep the per-step ||v_{t+1} - v_t|| history of each refinement.
  bool record_ascent = false;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
  [[nodiscard]] int restarts_for(std::size_t n) const;
};

struct EigenPair {
  double lambda = 0.0;
  Vector v;
  int iterations_power = 0;
  int iterations_ascent = 0;
  /// ||T(I, v, v) - lambda v|| for the returned (unit) v.
  double residual = 0.0;
  bool converged = false;
  /// The power phase hit a numerically zero tensor.
  bool degenerate = false;
  std::vector<double> ascent_steps;
};

struct PowerResult {
  Vector v;
  double lambda = 0.0;
  int iterations = 0;
  bool degenerate = false;
  /// Winning restart for best_of_restarts, -1 otherwise.
  int restart = -1;
};

/// Top left singular vector of T(I, I, theta) for a standard normal theta,
/// signed so that T(u, u, u) >= 0. Falls back to a random unit vector when
/// that matrix is numerically zero.
Vector svd_init(const Tensor3& t, Rng& rng);

/// Exactly `iters` updates v <- T(I, v, v) / ||T(I, v, v)||, stopping early
/// (flagged degenerate) if the image norm drops below 1e-14.
PowerResult power_iterate(const Tensor3& t, const Vector& v0, int iters);

/// N1 independent svd_init + power_iterate runs; restart i draws from
/// make_rng(cfg.seed, {round, i}). Returns the run with the largest
/// T(v, v, v), lowest index on ties. `lambdas`, when given, receives every
/// restart's value.
PowerResult best_of_restarts(const Tensor3& t, const EigConfig& cfg, std::uint64_t round,
                             std::vector<double>* lambdas = nullptr);

/// f(v) = T(v, v, v) - 3/4 lambda ||v||^4 and its derivatives.
double objective_f(const Tensor3& t, const Vector& v, double lambda);
Vector grad_f(const Tensor3& t, const Vector& v, double lambda);
/// H w with H = 6 T(I, I, v) - 6 lambda v v^T - 3 lambda ||v||^2 I.
Vector hessian_apply(const Tensor3& t, const Vector& v, double lambda, const Vector& w);

/// Fixed-step ascent v <- v + (T(I, v, v) - lambda0 ||v||^2 v) / (4 lambda0 (1 + lambda0 / sqrt(n)))
/// with lambda0 frozen. Stops once the step is below ascent_tol and the
/// normalised iterate is an eigenvector to ascent_tol * max(1, lambda).
/// Returns the best iterate seen, renormalised, with lambda = T(v, v, v).
EigenPair grad_ascent_refine(const Tensor3& t, const Vector& v0, double lambda0, const EigConfig& cfg);

/// ||T(I, v, v) - T(v, v, v) v|| for unit v.
double eigen_residual(const Tensor3& t, const Vector& v);

struct EigenResult {
  /// Candidates sorted by non-increasing lambda.
  std::vector<EigenPair> pairs;
  /// The top l pairs.
  FactorModel top;
  /// lambda of pair l + 1, or 0 when l = r.
  double sigma_next = 0.0;
  int replaced_duplicates = 0;
  [[nodiscard]] bool any_degenerate(std::size_t count) const;
};

/// r deflation rounds of best_of_restarts, then (when cfg.refine) refinement
/// of every candidate against the undeflated t. Near-duplicate directions
/// (|<v_i, v_j>| > 0.99) keep the larger lambda and trigger an extra deflation
/// round. `stream` separates the random streams of independent calls.
EigenResult top_r_eigenpairs(const Tensor3& t, std::size_t l, std::size_t r, const EigConfig& cfg,
                             std::uint64_t stream = 0);

}  // namespace rtd
