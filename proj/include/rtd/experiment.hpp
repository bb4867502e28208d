#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rtd/baselines.hpp"
#include "rtd/io.hpp"
#include "rtd/rtd.hpp"
#include "rtd/synth.hpp"

namespace rtd {

enum class Method { rtd, rtd_w_true, rtd_w_slice, mrpca_slice, mrpca_flat };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct ExperimentConfig {
  SynthSpec instance;
  std::vector<Method> methods;
  /// Spec key varied across sweep points (e.g. "d"); empty for a single point.
  std::string sweep_key;
  std::vector<std::string> sweep_values;
  int repetitions = 1;
  std::uint64_t seed = 0;
  RtdConfig rtd;
  MatrixRpcaConfig mrpca;
  int flatten_mode = 1;
  /// Raw CSV path; the mean table goes next to it with a "_mean" suffix.
  std::string out;

  void validate() const;
  [[nodiscard]] std::size_t points() const { return sweep_values.empty() ? 1 : sweep_values.size(); }
};

/// Keys: method (repeatable), sweep_key, sweep_value (repeatable), reps,
/// seed, out, flatten_mode, any SynthSpec key, and rtd.* / mrpca.* solver
/// keys (see apply_rtd_key / apply_mrpca_key).
ExperimentConfig parse_experiment(const KeyValues& kv);

/// Solver keys without prefix: mode, mu, beta, delta, max_iters, stage_tol,
/// and for rtd also stop_rule, restarts, power_iters, ascent_tol,
/// ascent_max_iters, norm_restarts. False for unknown keys.
bool apply_rtd_key(RtdConfig& cfg, const std::string& key, const std::string& value);
bool apply_mrpca_key(MatrixRpcaConfig& cfg, const std::string& key, const std::string& value);

struct BenchRow {
  Method method = Method::rtd;
  std::size_t point = 0;
  int rep = 0;
  std::size_t n = 0, r = 0, d = 0, B = 0;
  std::uint64_t seed = 0;
  double rel_error = 0.0;
  double support_precision = 0.0;
  double seconds = 0.0;
  int iterations = 0;
  /// ok, not_converged or error.
  std::string status;
  std::string error;
};

struct MethodOutcome {
  Tensor3 L;
  SparseTensor3 S;
  int iterations = 0;
  bool converged = false;
  FactorModel factors;
  Decomposition decomposition;
};

/// Runs one method on an instance. Symmetric-tensor methods see the
/// symmetric part of inst.tensor. The ground truth is only consulted by
/// rtd_w_true (for its second moment).
MethodOutcome run_method(Method m, const Instance& inst, const ExperimentConfig& cfg);

/// Seed of the instance for sweep point `point`, repetition `rep`.
std::uint64_t instance_seed(std::uint64_t seed, std::size_t point, int rep);

using BenchProgress = std::function<void(const BenchRow&)>;

/// All (method, point, rep) rows, ordered by method (config order), point, rep.
/// Method failures become rows with status "error".
std::vector<BenchRow> run_bench(const ExperimentConfig& cfg, const BenchProgress& progress = {});

/// schema,method,n,r,d,B,seed,rep,rel_error,support_precision,seconds,iterations,status,error
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool with_seconds = true);
/// schema,method,n,r,d,B,reps,failures,mean_rel_error,mean_support_precision,mean_seconds,mean_iterations
/// Means over rows without status "error".
void write_mean_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace rtd
