#include "rtd/eig.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rtd {

namespace {

constexpr double kTiny = 1e-14;
constexpr double kDuplicateCosine = 0.99;

std::uint64_t round_id(std::uint64_t stream, std::uint64_t k) { return (stream << 20) + k; }

}  // namespace

void EigConfig::validate() const {
  if (n_restarts < 0) throw std::invalid_argument("EigConfig: n_restarts must be >= 1 (or 0 for auto)");
  if (n_power_iters < 1) throw std::invalid_argument("EigConfig: n_power_iters must be >= 1");
  if (!(ascent_tol > 0.0)) throw std::invalid_argument("EigConfig: ascent_tol must be positive");
  if (ascent_max_iters < 1) throw std::invalid_argument("EigConfig: ascent_max_iters must be >= 1");
}

int EigConfig::restarts_for(std::size_t n) const {
  if (n_restarts > 0) return n_restarts;
  return static_cast<int>(std::min<std::size_t>(2000, std::max<std::size_t>(20, 4 * n)));
}

Vector svd_init(const Tensor3& t, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(t.n());
  const Vector theta = standard_normal(rng, n);
  const Matrix m = contract_1(t, theta);
  if (m.norm() < kTiny) return random_unit(rng, n);
  Vector u;
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym <= 1e-12 * m.cwiseAbs().maxCoeff()) {
    // Symmetric slice: the top singular vector is the eigenvector of the
    // eigenvalue with largest magnitude.
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
    Eigen::Index top = 0;
    es.eigenvalues().cwiseAbs().maxCoeff(&top);
    u = es.eigenvectors().col(top);
  } else {
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
    u = svd.matrixU().col(0);
  }
  u.normalize();
  if (contract_3(t, u, u, u) < 0.0) u = -u;
  return u;
}

PowerResult power_iterate(const Tensor3& t, const Vector& v0, int iters) {
  PowerResult out;
  out.v = v0;
  for (int it = 0; it < iters; ++it) {
    Vector g = contract_2(t, out.v, out.v);
    const double gn = g.norm();
    if (gn < kTiny) {
      out.degenerate = true;
      break;
    }
    out.v = g / gn;
    ++out.iterations;
  }
  out.lambda = contract_3(t, out.v, out.v, out.v);
  return out;
}

PowerResult best_of_restarts(const Tensor3& t, const EigConfig& cfg, std::uint64_t round,
                             std::vector<double>* lambdas) {
  cfg.validate();
  const int restarts = cfg.restarts_for(t.n());
  std::vector<PowerResult> runs(static_cast<std::size_t>(restarts));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < restarts; ++i) {
    Rng rng = make_rng(cfg.seed, {round, static_cast<std::uint64_t>(i)});
    const Vector u = svd_init(t, rng);
    runs[static_cast<std::size_t>(i)] = power_iterate(t, u, cfg.n_power_iters);
  }
  std::size_t best = 0;
  bool all_degenerate = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    all_degenerate = all_degenerate && runs[i].degenerate;
    if (runs[i].lambda > runs[best].lambda) best = i;
  }
  if (lambdas) {
    lambdas->clear();
    for (const auto& run : runs) lambdas->push_back(run.lambda);
  }
  PowerResult out = std::move(runs[best]);
  out.restart = static_cast<int>(best);
  out.degenerate = all_degenerate;
  if (out.lambda < 0.0) {
    out.lambda = -out.lambda;
    out.v = -out.v;
  }
  return out;
}

double objective_f(const Tensor3& t, const Vector& v, double lambda) {
  const double s = v.squaredNorm();
  return contract_3(t, v, v, v) - 0.75 * lambda * s * s;
}

Vector grad_f(const Tensor3& t, const Vector& v, double lambda) {
  return 3.0 * contract_2(t, v, v) - 3.0 * lambda * v.squaredNorm() * v;
}

Vector hessian_apply(const Tensor3& t, const Vector& v, double lambda, const Vector& w) {
  return 6.0 * contract_2(t, w, v) - 6.0 * lambda * v.dot(w) * v - 3.0 * lambda * v.squaredNorm() * w;
}

double eigen_residual(const Tensor3& t, const Vector& v) {
  const Vector g = contract_2(t, v, v);
  return (g - v.dot(g) * v).norm();
}

EigenPair grad_ascent_refine(const Tensor3& t, const Vector& v0, double lambda0, const EigConfig& cfg) {
  cfg.validate();
  if (!(lambda0 > 0.0))
    throw std::invalid_argument("grad_ascent_refine: lambda0 must be positive, got " + std::to_string(lambda0));
  const double n = static_cast<double>(t.n());
  const double eta = 1.0 / (4.0 * lambda0 * (1.0 + lambda0 / std::sqrt(n)));

  EigenPair out;
  Vector v = v0;
  Vector best_v = v0;
  double best_res = std::numeric_limits<double>::infinity();
  bool stopped = false;
  for (int it = 0; it <= cfg.ascent_max_iters; ++it) {
    const Vector g = contract_2(t, v, v);
    const double s = v.squaredNorm();
    const double norm = std::sqrt(s);
    const double lam = v.dot(g) / (s * norm);
    const double res = (g / s - lam * v / norm).norm();
    if (res < best_res) {
      best_res = res;
      best_v = v;
    }
    const Vector step = eta * (g - lambda0 * s * v);
    const double step_norm = step.norm();
    if (step_norm <= cfg.ascent_tol && res <= cfg.ascent_tol * std::max(1.0, lam)) {
      best_v = v;
      stopped = true;
      break;
    }
    if (it == cfg.ascent_max_iters) break;
    v += step;
    ++out.iterations_ascent;
    if (cfg.record_ascent) out.ascent_steps.push_back(step_norm);
    const double s_next = v.squaredNorm();
    if (!v.allFinite() || s_next < 0.01 || s_next > 100.0) break;
  }

  out.v = best_v.normalized();
  out.lambda = contract_3(t, out.v, out.v, out.v);
  if (out.lambda < 0.0) {
    out.lambda = -out.lambda;
    out.v = -out.v;
  }
  out.residual = eigen_residual(t, out.v);
  out.converged = stopped && out.residual <= cfg.ascent_tol * std::max(1.0, out.lambda);
  return out;
}

bool EigenResult::any_degenerate(std::size_t count) const {
  for (std::size_t i = 0; i < std::min(count, pairs.size()); ++i)
    if (pairs[i].degenerate) return true;
  return false;
}

namespace {

EigenPair finish_candidate(const Tensor3& t, const PowerResult& cand, double scale, const EigConfig& cfg) {
  const bool degenerate = cand.degenerate || !(cand.lambda > 1e-12 * scale);
  EigenPair pair;
  if (cfg.refine && !degenerate) {
    pair = grad_ascent_refine(t, cand.v, cand.lambda, cfg);
  } else {
    pair.v = cand.v;
    pair.lambda = std::max(cand.lambda, 0.0);
    pair.residual = eigen_residual(t, cand.v);
    pair.converged = !degenerate && pair.residual <= cfg.ascent_tol * std::max(1.0, pair.lambda);
  }
  pair.iterations_power = cand.iterations;
  pair.degenerate = degenerate;
  return pair;
}

bool by_lambda_desc(const EigenPair& a, const EigenPair& b) { return a.lambda > b.lambda; }

}  // namespace

EigenResult top_r_eigenpairs(const Tensor3& t, std::size_t l, std::size_t r, const EigConfig& cfg,
                             std::uint64_t stream) {
  cfg.validate();
  const std::size_t n = t.n();
  if (l < 1 || l > r || r > n)
    throw std::invalid_argument("top_r_eigenpairs: need 1 <= l <= r <= n, got l=" + std::to_string(l) +
                                " r=" + std::to_string(r) + " n=" + std::to_string(n));
  const double scale = fro_norm(t);
  std::uint64_t round = 0;

  std::vector<PowerResult> cands;
  Tensor3 deflated = t;
  for (std::size_t j = 0; j < r; ++j) {
    cands.push_back(best_of_restarts(deflated, cfg, round_id(stream, round++)));
    if (j + 1 < r) add_rank1(deflated, -cands.back().lambda, cands.back().v);
  }

  EigenResult out;
  out.pairs.resize(r);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < r; ++j) out.pairs[j] = finish_candidate(t, cands[j], scale, cfg);
  std::stable_sort(out.pairs.begin(), out.pairs.end(), by_lambda_desc);

  // Duplicate-basin guard: at most r replacement rounds.
  for (std::size_t extra = 0; extra < r; ++extra) {
    std::size_t dup = r;
    for (std::size_t i = 0; i < out.pairs.size() && dup == r; ++i)
      for (std::size_t j = i + 1; j < out.pairs.size(); ++j)
        if (!out.pairs[j].degenerate && std::abs(out.pairs[i].v.dot(out.pairs[j].v)) > kDuplicateCosine) {
          dup = j;
          break;
        }
    if (dup == r) break;
    out.pairs.erase(out.pairs.begin() + static_cast<std::ptrdiff_t>(dup));
    Tensor3 rest = t;
    for (const auto& p : out.pairs) add_rank1(rest, -p.lambda, p.v);
    const PowerResult cand = best_of_restarts(rest, cfg, round_id(stream, round++));
    out.pairs.push_back(finish_candidate(t, cand, scale, cfg));
    std::stable_sort(out.pairs.begin(), out.pairs.end(), by_lambda_desc);
    ++out.replaced_duplicates;
  }

  out.top = FactorModel(n);
  for (std::size_t j = 0; j < l; ++j) out.top.add(out.pairs[j].lambda, out.pairs[j].v);
  out.sigma_next = l < r ? out.pairs[l].lambda : 0.0;
  return out;
}

}  // namespace rtd
