#include "rtd/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace rtd {

namespace {

std::size_t nonneg(const std::string& value, const std::string& key) {
  const long long v = parse_int(value, key);
  if (v < 0) throw std::invalid_argument(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

int positive_int(const std::string& value, const std::string& key) {
  const long long v = parse_int(value, key);
  if (v < 1 || v > 1000000000) throw std::invalid_argument(key + " must be a positive integer");
  return static_cast<int>(v);
}

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

const Tensor3& symmetric_view(const Tensor3& t, Tensor3& storage) {
  if (t.is_symmetric(1e-12)) return t;
  storage = symmetric_part(t);
  return storage;
}

MethodOutcome run_whitened(const Tensor3& t, const Matrix& m2, std::size_t r, std::uint64_t seed,
                           const ExperimentConfig& cfg) {
  const Whitened w = whiten(t, m2, r);
  RtdConfig c = cfg.rtd;
  c.rank = r;
  c.eig.seed = seed;
  MethodOutcome out;
  out.decomposition = ncralgo(symmetric_part(w.tensor), c);
  out.factors = unwhiten(out.decomposition.L_hat, w);
  out.L = out.factors.materialize();
  const Tensor3 resid = t - out.L;
  const double zeta =
      practical_threshold(spectral_norm_estimate(resid, c.norm_restarts, c.norm_iters, seed), c.mu, t.n());
  out.S = zeta > 0.0 ? hard_threshold(resid, zeta) : SparseTensor3(t.n());
  out.iterations = static_cast<int>(out.decomposition.trace.size());
  out.converged = out.decomposition.converged;
  return out;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::rtd: return "rtd";
    case Method::rtd_w_true: return "rtd-w-true";
    case Method::rtd_w_slice: return "rtd-w-slice";
    case Method::mrpca_slice: return "mrpca-slice";
    case Method::mrpca_flat: return "mrpca-flat";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::rtd, Method::rtd_w_true, Method::rtd_w_slice, Method::mrpca_slice, Method::mrpca_flat})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown method '" + s + "'");
}

bool apply_rtd_key(RtdConfig& c, const std::string& key, const std::string& value) {
  const std::string what = "rtd." + key;
  if (key == "mode") c.threshold_mode = parse_threshold_mode(value);
  else if (key == "mu") c.mu = parse_double(value, what);
  else if (key == "beta") c.beta = parse_double(value, what);
  else if (key == "delta") c.delta = parse_double(value, what);
  else if (key == "max_iters") c.max_iters_per_stage = positive_int(value, what);
  else if (key == "stage_tol") c.stage_tol = parse_double(value, what);
  else if (key == "zeta_floor") c.zeta_floor = parse_double(value, what);
  else if (key == "stop_rule") c.stop_rule = parse_stop_rule(value);
  else if (key == "restarts") c.eig.n_restarts = positive_int(value, what);
  else if (key == "power_iters") c.eig.n_power_iters = positive_int(value, what);
  else if (key == "ascent_tol") c.eig.ascent_tol = parse_double(value, what);
  else if (key == "ascent_max_iters") c.eig.ascent_max_iters = positive_int(value, what);
  else if (key == "norm_restarts") c.norm_restarts = positive_int(value, what);
  else return false;
  return true;
}

bool apply_mrpca_key(MatrixRpcaConfig& c, const std::string& key, const std::string& value) {
  const std::string what = "mrpca." + key;
  if (key == "mode") c.threshold_mode = parse_threshold_mode(value);
  else if (key == "mu") c.mu = parse_double(value, what);
  else if (key == "beta") c.beta = parse_double(value, what);
  else if (key == "delta") c.delta = parse_double(value, what);
  else if (key == "max_iters") c.max_iters_per_stage = positive_int(value, what);
  else if (key == "stage_tol") c.stage_tol = parse_double(value, what);
  else if (key == "zeta_floor") c.zeta_floor = parse_double(value, what);
  else if (key == "early_stop") c.early_stop = parse_bool(value, what);
  else return false;
  return true;
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw std::invalid_argument("experiment: at least one method is required");
  if (repetitions < 1) throw std::invalid_argument("experiment: reps must be >= 1");
  if (!sweep_values.empty() && sweep_key.empty())
    throw std::invalid_argument("experiment: sweep_value given without sweep_key");
  if (flatten_mode < 1 || flatten_mode > 3) throw std::invalid_argument("experiment: flatten_mode must be 1, 2 or 3");
  SynthSpec probe = instance;
  for (const auto& v : sweep_values) {
    if (!set_spec_field(probe, sweep_key, v))
      throw std::invalid_argument("experiment: sweep_key '" + sweep_key + "' is not an instance key");
    probe.validate();
  }
  instance.validate();
  rtd.validate();
  mrpca.validate();
}

ExperimentConfig parse_experiment(const KeyValues& kv) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "method") cfg.methods.push_back(parse_method(value));
    else if (key == "sweep_key") cfg.sweep_key = value;
    else if (key == "sweep_value") cfg.sweep_values.push_back(value);
    else if (key == "reps") cfg.repetitions = positive_int(value, key);
    else if (key == "seed") cfg.seed = nonneg(value, key);
    else if (key == "out") cfg.out = value;
    else if (key == "flatten_mode") cfg.flatten_mode = positive_int(value, key);
    else if (key.rfind("rtd.", 0) == 0) {
      if (!apply_rtd_key(cfg.rtd, key.substr(4), value)) throw std::invalid_argument("unknown key '" + key + "'");
    } else if (key.rfind("mrpca.", 0) == 0) {
      if (!apply_mrpca_key(cfg.mrpca, key.substr(6), value)) throw std::invalid_argument("unknown key '" + key + "'");
    } else if (!set_spec_field(cfg.instance, key, value)) {
      throw std::invalid_argument("unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::uint64_t instance_seed(std::uint64_t seed, std::size_t point, int rep) {
  Rng rng = make_rng(seed, {0xbe7c, static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(rep)});
  return rng() & 0xffffffffffffULL;
}

MethodOutcome run_method(Method m, const Instance& inst, const ExperimentConfig& cfg) {
  Tensor3 storage;
  const Tensor3& t = symmetric_view(inst.tensor, storage);
  const std::size_t r = inst.spec.r;
  const std::uint64_t seed = inst.spec.seed;
  MatrixRpcaConfig mc = cfg.mrpca;
  mc.rank = r;
  mc.seed = seed;
  switch (m) {
    case Method::rtd: {
      RtdConfig c = cfg.rtd;
      c.rank = r;
      c.eig.seed = seed;
      MethodOutcome out;
      out.decomposition = ncralgo(t, c);
      out.factors = out.decomposition.L_hat;
      out.L = out.factors.materialize();
      out.S = out.decomposition.S_hat;
      out.iterations = static_cast<int>(out.decomposition.trace.size());
      out.converged = out.decomposition.converged;
      return out;
    }
    case Method::rtd_w_true: {
      const Matrix f = inst.low_rank.factors();
      const Matrix m2 = f * inst.low_rank.lambdas().asDiagonal() * f.transpose();
      return run_whitened(t, m2, r, seed, cfg);
    }
    case Method::rtd_w_slice: {
      const std::size_t index = seed % t.n();
      const MatrixRpcaResult part = matrix_rpca(slice(t, 3, index), mc);
      return run_whitened(t, psd_abs(part.L), r, seed, cfg);
    }
    case Method::mrpca_slice:
    case Method::mrpca_flat: {
      const TensorSplit split = m == Method::mrpca_slice ? rpca_slices(t, mc) : rpca_flatten(t, cfg.flatten_mode, mc);
      MethodOutcome out;
      out.L = split.L;
      out.S = SparseTensor3::from_dense(split.S);
      out.iterations = split.iterations;
      out.converged = split.converged;
      return out;
    }
  }
  throw std::logic_error("run_method: unhandled method");
}

std::vector<BenchRow> run_bench(const ExperimentConfig& cfg, const BenchProgress& progress) {
  cfg.validate();
  std::vector<BenchRow> rows;
  for (std::size_t point = 0; point < cfg.points(); ++point) {
    SynthSpec spec = cfg.instance;
    if (!cfg.sweep_values.empty()) set_spec_field(spec, cfg.sweep_key, cfg.sweep_values[point]);
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      spec.seed = instance_seed(cfg.seed, point, rep);
      BenchRow base;
      base.point = point;
      base.rep = rep;
      base.n = spec.n;
      base.r = spec.r;
      base.d = spec.d;
      base.B = spec.B;
      base.seed = spec.seed;
      std::optional<Instance> inst;
      std::string instance_error;
      try {
        inst = make_instance(spec);
      } catch (const std::exception& e) {
        instance_error = e.what();
      }
      for (Method m : cfg.methods) {
        BenchRow row = base;
        row.method = m;
        const auto start = std::chrono::steady_clock::now();
        try {
          if (!inst) throw std::runtime_error("instance generation failed: " + instance_error);
          const MethodOutcome out = run_method(m, *inst, cfg);
          row.rel_error = relative_error(inst->low_rank_tensor, out.L);
          row.support_precision = support_precision(out.S, inst->sparse);
          row.iterations = out.iterations;
          row.status = out.converged ? "ok" : "not_converged";
        } catch (const std::exception& e) {
          row.status = "error";
          row.error = csv_safe(e.what());
          row.rel_error = std::numeric_limits<double>::quiet_NaN();
          row.support_precision = std::numeric_limits<double>::quiet_NaN();
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (progress) progress(row);
        rows.push_back(std::move(row));
      }
    }
  }
  auto order = [&cfg](const BenchRow& a) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), a.method) - cfg.methods.begin();
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const BenchRow& a, const BenchRow& b) {
    if (order(a) != order(b)) return order(a) < order(b);
    if (a.point != b.point) return a.point < b.point;
    return a.rep < b.rep;
  });
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool with_seconds) {
  out << "schema,method,n,r,d,B,seed,rep,rel_error,support_precision";
  if (with_seconds) out << ",seconds";
  out << ",iterations,status,error\n";
  for (const auto& r : rows) {
    out << 1 << ',' << to_string(r.method) << ',' << r.n << ',' << r.r << ',' << r.d << ',' << r.B << ',' << r.seed
        << ',' << r.rep << ',' << format_double(r.rel_error) << ',' << format_double(r.support_precision);
    if (with_seconds) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
      out << ',' << buf;
    }
    out << ',' << r.iterations << ',' << r.status << ',' << r.error << "\n";
  }
}

void write_mean_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  struct Acc {
    const BenchRow* first = nullptr;
    int reps = 0, failures = 0, ok = 0;
    double err = 0.0, prec = 0.0, secs = 0.0, iters = 0.0;
  };
  std::vector<std::pair<std::pair<Method, std::size_t>, Acc>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.method, r.point);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) {
      groups.push_back({key, Acc{}});
      it = groups.end() - 1;
      it->second.first = &r;
    }
    Acc& a = it->second;
    ++a.reps;
    if (r.status == "error") {
      ++a.failures;
      continue;
    }
    ++a.ok;
    a.err += r.rel_error;
    a.prec += r.support_precision;
    a.secs += r.seconds;
    a.iters += r.iterations;
  }
  out << "schema,method,n,r,d,B,reps,failures,mean_rel_error,mean_support_precision,mean_seconds,mean_iterations\n";
  for (const auto& [key, a] : groups) {
    const double k = a.ok > 0 ? static_cast<double>(a.ok) : std::numeric_limits<double>::quiet_NaN();
    const BenchRow& f = *a.first;
    out << 1 << ',' << to_string(f.method) << ',' << f.n << ',' << f.r << ',' << f.d << ',' << f.B << ',' << a.reps
        << ',' << a.failures << ',' << format_double(a.err / k) << ',' << format_double(a.prec / k) << ','
        << format_double(a.secs / k) << ',' << format_double(a.iters / k) << "\n";
  }
}

}  // namespace rtd
