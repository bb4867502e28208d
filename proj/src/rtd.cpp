#include "rtd/rtd.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "rtd/io.hpp"

namespace rtd {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double pow15(std::size_t n) { return std::pow(static_cast<double>(n), 1.5); }

// Largest eigenvalue left after deflating `model` from `t`, from one
// unrefined round of restarts. Clamped at zero.
double next_sigma(const Tensor3& t, const FactorModel& model, const EigConfig& eig, std::uint64_t round) {
  Tensor3 rest = t;
  for (const auto& term : model.terms()) add_rank1(rest, -term.lambda, term.u);
  const PowerResult p = best_of_restarts(rest, eig, round);
  return p.degenerate ? 0.0 : std::max(p.lambda, 0.0);
}

bool same_support_within(const SparseTensor3& a, const SparseTensor3& b, double tol) {
  if (a.nnz() != b.nnz()) return false;
  auto x = a.entries();
  auto y = b.entries();
  for (std::size_t p = 0; p < x.size(); ++p) {
    if (x[p].i != y[p].i || x[p].j != y[p].j || x[p].k != y[p].k) return false;
    if (std::abs(x[p].value - y[p].value) > tol) return false;
  }
  return true;
}

}  // namespace

std::string to_string(ThresholdMode m) { return m == ThresholdMode::theoretical ? "theoretical" : "practical"; }

std::string to_string(StopRule s) {
  switch (s) {
    case StopRule::proof: return "proof";
    case StopRule::algorithm_box: return "algorithm_box";
    case StopRule::none: return "none";
  }
  return "?";
}

ThresholdMode parse_threshold_mode(const std::string& s) {
  if (s == "theoretical") return ThresholdMode::theoretical;
  if (s == "practical") return ThresholdMode::practical;
  throw std::invalid_argument("unknown threshold mode '" + s + "'");
}

StopRule parse_stop_rule(const std::string& s) {
  if (s == "proof") return StopRule::proof;
  if (s == "algorithm_box") return StopRule::algorithm_box;
  if (s == "none") return StopRule::none;
  throw std::invalid_argument("unknown stop rule '" + s + "'");
}

void RtdConfig::validate() const {
  if (rank < 1) throw std::invalid_argument("RtdConfig: rank must be >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("RtdConfig: delta must be positive");
  if (beta && !(*beta > 0.0)) throw std::invalid_argument("RtdConfig: beta must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("RtdConfig: mu must be positive");
  if (max_iters_per_stage && *max_iters_per_stage < 1)
    throw std::invalid_argument("RtdConfig: max_iters_per_stage must be >= 1");
  if (stage_tol < 0.0) throw std::invalid_argument("RtdConfig: stage_tol must be >= 0");
  if (!(zeta_floor >= 0.0)) throw std::invalid_argument("RtdConfig: zeta_floor must be >= 0");
  if (norm_restarts < 1 || norm_iters < 1) throw std::invalid_argument("RtdConfig: norm estimate needs >= 1 restart/iter");
  eig.validate();
}

double RtdConfig::beta_for(std::size_t n) const {
  if (beta) return *beta;
  return 4.0 * mu * mu * mu * static_cast<double>(rank) / pow15(n);
}

double threshold_schedule(int t, double sigma_l, double sigma_l1, double beta) {
  if (t < 0) throw std::invalid_argument("threshold_schedule: t must be >= 0");
  if (!(beta > 0.0)) throw std::invalid_argument("threshold_schedule: beta must be positive");
  if (sigma_l < 0.0 || sigma_l1 < 0.0) throw std::invalid_argument("threshold_schedule: sigmas must be >= 0");
  return beta * (sigma_l1 + std::ldexp(sigma_l, -t));
}

double practical_threshold(double sigma_l1, double mu, std::size_t n) {
  if (sigma_l1 < 0.0) throw std::invalid_argument("practical_threshold: sigma must be >= 0");
  if (!(mu > 0.0)) throw std::invalid_argument("practical_threshold: mu must be positive");
  return mu * sigma_l1 / pow15(n);
}

int stage_iterations(std::size_t n, double beta, double norm, double delta) {
  const double arg = static_cast<double>(n) * beta * norm / delta;
  if (!(arg > 1.0)) return 1;
  return std::max(1, static_cast<int>(std::ceil(10.0 * std::log(arg))));
}

Decomposition ncralgo(const Tensor3& t, const RtdConfig& cfg, const IterationObserver& observer) {
  cfg.validate();
  if (!t.is_cubic()) throw std::invalid_argument("ncralgo: tensor must be cubic");
  if (!t.all_finite()) throw std::invalid_argument("ncralgo: tensor has non-finite entries");
  if (!t.is_symmetric(1e-12)) throw std::invalid_argument("ncralgo: tensor is not symmetric");
  const std::size_t n = t.n();
  if (cfg.rank > n) throw std::invalid_argument("ncralgo: rank exceeds dimension");

  const auto start = Clock::now();
  Decomposition dec;
  dec.beta = cfg.beta_for(n);
  dec.L_hat = FactorModel(n);
  dec.S_hat = SparseTensor3(n);
  if (fro_norm(t) == 0.0) {
    dec.converged = true;
    dec.status = "zero input";
    return dec;
  }
  const double beta = dec.beta;
  const double floor = cfg.zeta_floor * inf_norm(t);
  std::uint64_t stream = 0;

  // L^(0) = 0, so the first threshold acts on T itself.
  const EigenResult first = top_r_eigenpairs(t, 1, 1, cfg.eig, stream++);
  double zeta = beta * first.pairs[0].lambda;
  SparseTensor3 s = zeta > 0.0 ? hard_threshold(t, zeta) : SparseTensor3(n);
  Tensor3 rest = t;
  s.add_to(rest, -1.0);
  const double norm = spectral_norm_estimate(rest, cfg.norm_restarts, cfg.norm_iters, cfg.eig.seed);
  const int tau = cfg.max_iters_per_stage ? *cfg.max_iters_per_stage : stage_iterations(n, beta, norm, cfg.delta);

  FactorModel L(n);
  for (std::size_t l = 1; l <= cfg.rank; ++l) {
    StageRecord stage;
    stage.stage = static_cast<int>(l);
    stage.tau = tau;
    dec.stages_run = static_cast<int>(l);
    for (int it = 0; it < tau; ++it) {
      // rest = T - S^(t)
      rest = t;
      s.add_to(rest, -1.0);
      const std::uint64_t id = stream++;
      EigenResult eig = top_r_eigenpairs(rest, l, l, cfg.eig, id);
      if (eig.any_degenerate(l)) {
        dec.L_hat = L;
        dec.S_hat = s;
        dec.status = "degenerate eigenpair at stage " + std::to_string(l) + ", iteration " + std::to_string(it);
        dec.stages.push_back(stage);
        dec.seconds = since(start);
        return dec;
      }
      L = std::move(eig.top);
      IterationRecord rec;
      rec.stage = static_cast<int>(l);
      rec.t = it;
      rec.sigma_l = eig.pairs[l - 1].lambda;
      rec.sigma_next = next_sigma(rest, L, cfg.eig, (id << 20) + (1u << 19));
      for (std::size_t j = 0; j < l; ++j) rec.eig_converged = rec.eig_converged && eig.pairs[j].converged;

      if (cfg.threshold_mode == ThresholdMode::practical)
        zeta = practical_threshold(rec.sigma_next, cfg.mu, n);
      else if (it > 0)
        zeta = threshold_schedule(it - 1, rec.sigma_l, rec.sigma_next, beta);
      zeta = std::max(zeta, floor);
      rec.zeta = zeta;

      // residual = T - L^(t+1)
      Tensor3 residual = t;
      for (const auto& term : L.terms()) add_rank1(residual, -term.lambda, term.u);
      SparseTensor3 s_next = zeta > 0.0 ? hard_threshold(residual, zeta) : s;
      s_next.add_to(residual, -1.0);
      rec.residual_inf = inf_norm(residual);
      rec.residual_fro = fro_norm(residual);
      rec.support = s_next.nnz();

      const bool settled = cfg.stage_tol > 0.0 && same_support_within(s, s_next, cfg.stage_tol);
      s = std::move(s_next);
      rec.seconds = since(start);
      if (observer) observer(rec, L, s);
      dec.trace.push_back(rec);
      ++stage.iterations;
      if (settled) break;
    }

    if (cfg.stop_rule != StopRule::none) {
      double sigma = 0.0;
      if (cfg.stop_rule == StopRule::proof) {
        rest = t;
        s.add_to(rest, -1.0);
        const std::uint64_t id = stream++;
        const EigenResult eig = top_r_eigenpairs(rest, l, l, cfg.eig, id);
        sigma = next_sigma(rest, eig.top, cfg.eig, (id << 20) + (1u << 19));
        stage.stop_bound = cfg.delta / (2.0 * pow15(n));
      } else {
        sigma = next_sigma(L.materialize(), L, cfg.eig, (stream++ << 20) + (1u << 19));
        stage.stop_bound = cfg.delta / (2.0 * static_cast<double>(n));
      }
      stage.stop_value = beta * sigma;
      stage.stopped = stage.stop_value < stage.stop_bound;
    }
    dec.stages.push_back(stage);
    if (stage.stopped) {
      dec.converged = true;
      break;
    }
  }

  dec.L_hat = std::move(L);
  dec.S_hat = std::move(s);
  dec.seconds = since(start);
  if (dec.status.empty()) dec.status = dec.converged ? "converged" : "stop test not met after final stage";
  return dec;
}

double relative_error(const Tensor3& a, const Tensor3& b) {
  const double denom = fro_norm(a);
  const double diff = fro_norm(a - b);
  return denom > 0.0 ? diff / denom : diff;
}

double support_precision(const SparseTensor3& s_hat, const SparseTensor3& s_star) {
  if (s_hat.empty()) return 1.0;
  return static_cast<double>(support_overlap(s_hat, s_star)) / static_cast<double>(s_hat.nnz());
}

Metrics evaluate(const FactorModel& L_star, const Decomposition& dec, const SparseTensor3* S_star) {
  if (dec.L_hat.n() != L_star.n()) throw std::invalid_argument("evaluate: dimension mismatch");
  Metrics m;
  m.rel_error = relative_error(L_star.materialize(), dec.L_hat.materialize());
  m.seconds = dec.seconds;
  if (S_star) {
    if (S_star->n() != dec.S_hat.n()) throw std::invalid_argument("evaluate: sparse dimension mismatch");
    m.sparse_inf_error = inf_norm(difference(dec.S_hat, *S_star));
    m.support_precision = support_precision(dec.S_hat, *S_star);
  }
  return m;
}

IterationObserver truth_observer(const FactorModel& L_star, const SparseTensor3& S_star) {
  return [L_tensor = L_star.materialize(), S_star](IterationRecord& rec, const FactorModel& L,
                                                    const SparseTensor3& s) {
    rec.rel_error = relative_error(L_tensor, L.materialize());
    rec.sparse_error = inf_norm(difference(s, S_star));
  };
}

void write_trace_csv(std::ostream& out, const Decomposition& dec, bool with_seconds) {
  out << "stage,t,zeta,sigma_l,sigma_next,residual_inf,residual_fro,support,rel_error,sparse_error";
  if (with_seconds) out << ",seconds";
  out << "\n";
  auto opt = [](double x) { return std::isnan(x) ? std::string() : format_double(x); };
  for (const auto& r : dec.trace) {
    out << r.stage << ',' << r.t << ',' << format_double(r.zeta) << ',' << format_double(r.sigma_l) << ','
        << format_double(r.sigma_next) << ',' << format_double(r.residual_inf) << ',' << format_double(r.residual_fro)
        << ',' << r.support << ',' << opt(r.rel_error) << ',' << opt(r.sparse_error);
    if (with_seconds) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace rtd
