#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rtd/eig.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

enum class ThresholdMode { theoretical, practical };

/// End-of-stage test.
///   proof:         beta * sigma_{l+1}(T - S) < delta / (2 n^1.5)
///   algorithm_box: beta * sigma_{l+1}(L) < delta / (2 n)
///   none:          always run all r stages
enum class StopRule { proof, algorithm_box, none };

std::string to_string(ThresholdMode m);
std::string to_string(StopRule s);
ThresholdMode parse_threshold_mode(const std::string& s);
StopRule parse_stop_rule(const std::string& s);

struct RtdConfig {
  std::size_t rank = 1;
  double delta = 1e-3;
  /// Unset: 4 mu^3 r / n^1.5.
  std::optional<double> beta;
  ThresholdMode threshold_mode = ThresholdMode::theoretical;
  double mu = 1.0;
  /// Replaces the computed per-stage iteration count.
  std::optional<int> max_iters_per_stage;
  StopRule stop_rule = StopRule::proof;
  /// > 0 ends a stage early once the support is unchanged and no entry of S
  /// moved by more than stage_tol.
  double stage_tol = 0.0;
  /// Thresholds never drop below zeta_floor * inf_norm(T), so roundoff in
  /// T - L is not mistaken for corruption once the schedule has decayed.
  double zeta_floor = 1e-10;
  /// Restarts / iterations of the spectral norm estimate used for tau.
  int norm_restarts = 10;
  int norm_iters = 30;
  EigConfig eig;

  void validate() const;
  [[nodiscard]] double beta_for(std::size_t n) const;
};

struct IterationRecord {
  int stage = 0;
  int t = 0;
  double zeta = 0.0;
  double sigma_l = 0.0;
  double sigma_next = 0.0;
  /// Norms of T - materialize(L) - S after the iteration.
  double residual_inf = 0.0;
  double residual_fro = 0.0;
  std::size_t support = 0;
  bool eig_converged = true;
  /// Filled by an observer that knows the ground truth; NaN otherwise.
  double rel_error = std::numeric_limits<double>::quiet_NaN();
  double sparse_error = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct StageRecord {
  int stage = 0;
  int tau = 0;
  int iterations = 0;
  /// Left-hand side and bound of the stop test (NaN for StopRule::none).
  double stop_value = std::numeric_limits<double>::quiet_NaN();
  double stop_bound = std::numeric_limits<double>::quiet_NaN();
  bool stopped = false;
};

struct Decomposition {
  FactorModel L_hat;
  SparseTensor3 S_hat;
  std::vector<IterationRecord> trace;
  std::vector<StageRecord> stages;
  bool converged = false;
  int stages_run = 0;
  double beta = 0.0;
  double seconds = 0.0;
  std::string status;
};

/// Called after every iteration with the current (L, S). May fill the
/// ground-truth fields of the record.
using IterationObserver = std::function<void(IterationRecord&, const FactorModel&, const SparseTensor3&)>;

/// Staged alternation of rank-l projection and hard thresholding for a
/// symmetric T. Throws std::invalid_argument for asymmetric or non-finite
/// input and invalid configurations; eigensolver degeneracy ends the run with
/// converged = false and a status message.
Decomposition ncralgo(const Tensor3& t, const RtdConfig& cfg, const IterationObserver& observer = {});

/// beta * (sigma_l1 + 2^-t sigma_l)
double threshold_schedule(int t, double sigma_l, double sigma_l1, double beta);
/// mu * sigma_l1 / n^1.5
double practical_threshold(double sigma_l1, double mu, std::size_t n);
/// max(1, ceil(10 ln(n beta norm / delta)))
int stage_iterations(std::size_t n, double beta, double norm, double delta);

struct Metrics {
  double rel_error = 0.0;
  double sparse_inf_error = std::numeric_limits<double>::quiet_NaN();
  double support_precision = 1.0;
  double seconds = 0.0;
};

/// ||a - b||_F / ||a||_F (||b||_F when a is zero).
double relative_error(const Tensor3& a, const Tensor3& b);
/// |supp(s_hat) & supp(s_star)| / |supp(s_hat)|, 1 when s_hat is empty.
double support_precision(const SparseTensor3& s_hat, const SparseTensor3& s_star);

Metrics evaluate(const FactorModel& L_star, const Decomposition& dec, const SparseTensor3* S_star = nullptr);

/// Observer filling rel_error and sparse_error against known (L*, S*).
IterationObserver truth_observer(const FactorModel& L_star, const SparseTensor3& S_star);

/// One row per iteration; header
/// stage,t,zeta,sigma_l,sigma_next,residual_inf,residual_fro,support,rel_error,sparse_error,seconds
void write_trace_csv(std::ostream& out, const Decomposition& dec, bool with_seconds = true);

}  // namespace rtd
