// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (capped at 1).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rtd/baselines.hpp"
#include "rtd/eig.hpp"
#include "rtd/experiment.hpp"
#include "rtd/random.hpp"
#include "rtd/rtd.hpp"
#include "rtd/synth.hpp"
#include "rtd/tensor.hpp"

using namespace rtd;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(Clock::time_point s) { return std::chrono::duration<double>(Clock::now() - s).count(); }

Matrix random_orthonormal(Rng& rng, std::size_t n, std::size_t r) {
  Matrix g(n, r);
  for (std::size_t j = 0; j < r; ++j) g.col(static_cast<Eigen::Index>(j)) = standard_normal(rng, static_cast<Eigen::Index>(n));
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
}

FactorModel orthogonal_model(Rng& rng, std::size_t n, const std::vector<double>& sigma) {
  const Matrix u = random_orthonormal(rng, n, sigma.size());
  FactorModel f(n);
  for (std::size_t j = 0; j < sigma.size(); ++j) f.add(sigma[j], u.col(static_cast<Eigen::Index>(j)));
  return f;
}

// Sign-aligned distance between estimate and truth.
double aligned_distance(const Vector& est, const Vector& truth) {
  return std::min((est - truth).norm(), (est + truth).norm());
}

void criterion1() {
  const std::size_t n = 30;
  Rng rng = make_rng(101);
  const FactorModel truth = orthogonal_model(rng, n, {3.0, 2.0, 1.0});
  const Tensor3 t = truth.materialize();
  EigConfig cfg;
  cfg.n_restarts = 60;
  cfg.n_power_iters = 30;
  cfg.seed = 1;
  const auto start = Clock::now();
  const EigenResult res = top_r_eigenpairs(t, 3, 3, cfg);
  const double secs = seconds_since(start);
  double lam_err = 0.0, vec_err = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    lam_err = std::max(lam_err, std::abs(res.pairs[j].lambda - truth[j].lambda));
    vec_err = std::max(vec_err, aligned_distance(res.pairs[j].v, truth[j].u));
  }
  const bool ok = lam_err <= 1e-8 && vec_err <= 1e-7 && secs < 5.0;
  report(1, "noiseless eigendecomposition", ok,
         "max|lambda-sigma|=" + fmt("%.2e", lam_err) + " (<=1e-8), max|u-u*|=" + fmt("%.2e", vec_err) +
             " (<=1e-7), time=" + fmt("%.2fs", secs) + " (<5s)");
}

void criterion2() {
  const std::size_t n = 30;
  const int seeds = 10;
  int refined_ok = 0, plain_fail = 0;
  double worst_refined = 0.0;
  for (int s = 0; s < seeds; ++s) {
    Rng rng = make_rng(202, {static_cast<std::uint64_t>(s)});
    const FactorModel truth = orthogonal_model(rng, n, {3.0, 2.0, 1.0});
    Tensor3 noise(n);
    for (double& x : noise.values()) x = std::normal_distribution<double>()(rng);
    noise = symmetric_part(noise);
    const double target = 0.05 * 1.0 / std::sqrt(static_cast<double>(n));
    noise *= target / spectral_norm_estimate(noise, 20, 50, static_cast<std::uint64_t>(s));
    const Tensor3 t = truth.materialize() + noise;

    EigConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    double worst = 0.0;
    for (const auto& p : top_r_eigenpairs(t, 3, 3, cfg).pairs) worst = std::max(worst, eigen_residual(t, p.v));
    worst_refined = std::max(worst_refined, worst);
    if (worst <= 1e-8) ++refined_ok;

    cfg.refine = false;
    double worst_plain = 0.0;
    for (const auto& p : top_r_eigenpairs(t, 3, 3, cfg).pairs) worst_plain = std::max(worst_plain, eigen_residual(t, p.v));
    if (worst_plain > 1e-8) ++plain_fail;
  }
  const bool ok = refined_ok == seeds && plain_fail >= 8;
  report(2, "eigenpair-of-input property", ok,
         "refined within 1e-8 on " + std::to_string(refined_ok) + "/10 seeds (worst " + fmt("%.2e", worst_refined) +
             "), plain power method fails on " + std::to_string(plain_fail) + "/10 (need >=8)");
}

void criterion3() {
  const std::size_t n = 8;
  Rng rng = make_rng(303);
  Tensor3 t(n);
  for (double& x : t.values()) x = std::normal_distribution<double>()(rng);
  t = symmetric_part(t);
  const double lambda = 1.3;
  const double h = 1e-5;
  double grad_err = 0.0, hess_err = 0.0;
  for (int p = 0; p < 20; ++p) {
    const Vector v = standard_normal(rng, static_cast<Eigen::Index>(n));
    const Vector g = grad_f(t, v, lambda);
    Vector fd(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < fd.size(); ++i) {
      Vector e = Vector::Zero(fd.size());
      e(i) = h;
      fd(i) = (objective_f(t, v + e, lambda) - objective_f(t, v - e, lambda)) / (2.0 * h);
    }
    grad_err = std::max(grad_err, (g - fd).norm() / g.norm());
    const Vector w = standard_normal(rng, static_cast<Eigen::Index>(n));
    const Vector hw = hessian_apply(t, v, lambda, w);
    const Vector hfd = (grad_f(t, v + h * w, lambda) - grad_f(t, v - h * w, lambda)) / (2.0 * h);
    hess_err = std::max(hess_err, (hw - hfd).norm() / hw.norm());
  }
  report(3, "gradient/Hessian finite differences", grad_err <= 1e-6 && hess_err <= 1e-5,
         "grad rel err=" + fmt("%.2e", grad_err) + " (<=1e-6), Hessian rel err=" + fmt("%.2e", hess_err) +
             " (<=1e-5)");
}

struct RecoveryRun {
  Instance inst;
  Decomposition dec;
  double seconds = 0.0;
  bool contained_every_iteration = true;
  int iterations_checked = 0;
  std::string trace_csv;
};

SynthSpec recovery_spec() {
  SynthSpec s;
  s.n = 50;
  s.r = 3;
  s.sparsity = SparsityModel::block;
  s.B = 5;
  s.d = 5;
  s.factor_dist = FactorDist::rademacher;
  s.mu_target = 3.0;
  s.seed = 1;
  return s;
}

RecoveryRun recovery_run() {
  RecoveryRun run;
  run.inst = make_instance(recovery_spec());
  RtdConfig cfg;
  cfg.rank = 3;
  cfg.delta = 1e-3;
  cfg.threshold_mode = ThresholdMode::theoretical;
  cfg.eig.n_restarts = 20;
  cfg.eig.seed = 7;
  const IterationObserver truth = truth_observer(run.inst.low_rank, run.inst.sparse);
  const SparseTensor3& s_star = run.inst.sparse;
  auto observer = [&](IterationRecord& rec, const FactorModel& l, const SparseTensor3& s) {
    truth(rec, l, s);
    run.contained_every_iteration = run.contained_every_iteration && support_subset(s, s_star);
    ++run.iterations_checked;
  };
  const auto start = Clock::now();
  run.dec = ncralgo(run.inst.tensor, cfg, observer);
  run.seconds = seconds_since(start);
  std::ostringstream csv;
  write_trace_csv(csv, run.dec, false);
  run.trace_csv = csv.str();
  return run;
}

void criteria4to6(const RecoveryRun& run) {
  const Instance& inst = run.inst;
  const Metrics m = evaluate(inst.low_rank, run.dec, &inst.sparse);
  const double n15 = std::pow(50.0, 1.5);
  const bool subset = support_subset(run.dec.S_hat, inst.sparse);
  const bool ok4 = inst.mu <= 3.0 && m.rel_error <= 1e-4 && subset && m.sparse_inf_error <= 1e-3 / n15 &&
                   run.seconds < 120.0;
  report(4, "end-to-end exact recovery", ok4,
         "mu=" + fmt("%.3f", inst.mu) + " (<=3), rel err=" + fmt("%.2e", m.rel_error) + " (<=1e-4), supp subset=" +
             (subset ? "yes" : "no") + ", inf err=" + fmt("%.2e", m.sparse_inf_error) + " (<=" + fmt("%.2e", 1e-3 / n15) +
             "), time=" + fmt("%.1fs", run.seconds) + " (<120s)");

  report(5, "support containment at every iteration", run.contained_every_iteration && run.iterations_checked > 0,
         std::to_string(run.iterations_checked) + " iterations checked, containment " +
             (run.contained_every_iteration ? "held throughout" : "violated"));

  std::vector<double> err;
  for (const auto& rec : run.dec.trace)
    if (rec.stage == 3 && rec.t >= 2 && rec.t <= 6) err.push_back(rec.sparse_error);
  bool ok6 = err.size() == 5 && err.front() > 0.0;
  double rate = NAN;
  std::string steps;
  if (ok6) {
    rate = std::pow(err.back() / err.front(), 1.0 / 4.0);
    ok6 = rate <= 0.75;
    for (std::size_t i = 1; i < err.size(); ++i) steps += (i > 1 ? "," : "") + fmt("%.3f", err[i] / err[i - 1]);
  }
  report(6, "linear rate in the final stage", ok6,
         "geometric mean ratio over t=2..6 = " + fmt("%.3f", rate) + " (<=0.75); per-step [" + steps + "]");
}

void criterion7() {
  const std::size_t n = 40;
  const std::size_t ds[] = {3, 5, 8};
  double worst = 0.0;
  int checked = 0;
  for (int i = 0; i < 20; ++i) {
    SynthSpec s;
    s.n = n;
    s.r = 1;
    s.B = 1;
    s.d = ds[i % 3];
    s.random_signs = (i % 2) == 1;
    Rng rng = make_rng(707, {static_cast<std::uint64_t>(i)});
    const BlockSparse b = gen_sparse_block(s, rng);
    const Tensor3 m = b.s.densify();
    // Use the realised support size of the single block as d.
    const double d = b.psis.front().sum();
    const double bound = std::pow(d, 1.5) * inf_norm(m);
    const double est = spectral_norm_estimate(m, 20, 50, static_cast<std::uint64_t>(i));
    worst = std::max(worst, est / bound);
    ++checked;
  }
  report(7, "block-sparse spectral bound", worst <= 1.0001,
         "max ||M||/(d^1.5 ||M||_inf) over " + std::to_string(checked) + " blocks = " + fmt("%.6f", worst) +
             " (<=1.0001)");
}

void criterion8() {
  Rng rng = make_rng(808);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 2 + static_cast<std::size_t>(c % 4);
    const auto ni = static_cast<Eigen::Index>(n);
    Tensor3 t(n);
    for (double& x : t.values()) x = std::normal_distribution<double>()(rng);
    const Vector u = standard_normal(rng, ni), v = standard_normal(rng, ni), w = standard_normal(rng, ni);
    Matrix m1 = Matrix::Zero(ni, ni);
    Vector m2 = Vector::Zero(ni);
    double m3 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
          const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j), e = static_cast<Eigen::Index>(k);
          m1(a, b) += t(i, j, k) * w(e);
          m2(a) += t(i, j, k) * v(b) * w(e);
          m3 += t(i, j, k) * u(a) * v(b) * w(e);
        }
    worst = std::max(worst, (contract_1(t, w) - m1).norm() / m1.norm());
    worst = std::max(worst, (contract_2(t, v, w) - m2).norm() / m2.norm());
    worst = std::max(worst, std::abs(contract_3(t, u, v, w) - m3) / std::abs(m3));
  }
  report(8, "contraction oracle equivalence", worst <= 1e-13,
         "max rel err over 100 tensors x 3 contractions = " + fmt("%.2e", worst) + " (<=1e-13)");
}

void criterion9() {
  const KeyValues kv = {
      {"n", "100"},          {"r", "5"},
      {"sparsity", "block"}, {"B", "5"},
      {"factor_dist", "rademacher"},
      {"method", "rtd"},     {"method", "mrpca-slice"},
      {"method", "mrpca-flat"},
      {"sweep_key", "d"},    {"sweep_value", "10"},
      {"sweep_value", "20"}, {"reps", "5"},
      {"seed", "9"},         {"rtd.mode", "practical"},
      {"rtd.mu", "8"},       {"rtd.max_iters", "10"},
      {"rtd.stage_tol", "1e-12"},
      {"rtd.restarts", "10"},
      {"mrpca.mode", "practical"},
      {"mrpca.mu", "8"},     {"mrpca.max_iters", "10"},
      {"mrpca.stage_tol", "1e-12"},
  };
  const ExperimentConfig cfg = parse_experiment(kv);
  const auto start = Clock::now();
  const std::vector<BenchRow> rows = run_bench(cfg);
  const double secs = seconds_since(start);
  bool ok = secs < 1200.0;
  std::string detail;
  double mean_mu = 0.0;
  for (std::size_t point = 0; point < 2; ++point) {
    double mean[3] = {0.0, 0.0, 0.0};
    int count[3] = {0, 0, 0};
    for (const auto& r : rows) {
      if (r.point != point || r.status == "error") continue;
      const auto idx = static_cast<std::size_t>(std::find(cfg.methods.begin(), cfg.methods.end(), r.method) -
                                                cfg.methods.begin());
      mean[idx] += r.rel_error;
      ++count[idx];
    }
    for (int m = 0; m < 3; ++m) {
      ok = ok && count[m] == 5;
      mean[m] /= std::max(count[m], 1);
    }
    ok = ok && mean[0] < mean[1] && mean[0] < mean[2];
    detail += "d=" + cfg.sweep_values[point] + ": rtd " + fmt("%.2e", mean[0]) + " slice " + fmt("%.2e", mean[1]) +
              " flat " + fmt("%.2e", mean[2]) + "; ";
  }
  for (std::size_t p = 0; p < 2; ++p)
    for (int rep = 0; rep < 5; ++rep) {
      SynthSpec s = cfg.instance;
      set_spec_field(s, "d", cfg.sweep_values[p]);
      s.seed = instance_seed(cfg.seed, p, rep);
      Rng rng = make_rng(s.seed, {1});
      mean_mu += gen_low_rank(s, rng).mu / 10.0;
    }
  report(9, "tensor method beats matrix baselines", ok,
         detail + "mean measured mu=" + fmt("%.2f", mean_mu) + ", time=" + fmt("%.0fs", secs) + " (<1200s)");
}

void criterion10() {
  const std::size_t n = 20;
  Rng rng = make_rng(1010);
  const Matrix q = random_orthonormal(rng, n, 2);
  const double c = 0.3;
  const Vector a1 = q.col(0);
  const Vector a2 = c * q.col(0) + std::sqrt(1.0 - c * c) * q.col(1);
  Instance inst;
  inst.spec.n = n;
  inst.spec.r = 2;
  inst.spec.seed = 3;
  inst.low_rank = FactorModel(n);
  inst.low_rank.add(1.0, a1);
  inst.low_rank.add(0.7, a2);
  inst.low_rank_tensor = inst.low_rank.materialize();
  inst.sparse = SparseTensor3(n);
  inst.tensor = inst.low_rank_tensor;
  ExperimentConfig cfg;
  cfg.instance = inst.spec;
  const MethodOutcome out = run_method(Method::rtd_w_true, inst, cfg);
  double err = out.factors.rank() == 2 ? 0.0 : INFINITY;
  if (out.factors.rank() == 2) {
    for (std::size_t j = 0; j < 2; ++j) {
      const RankOneTerm& truth = inst.low_rank[j];
      double best = INFINITY;
      for (const auto& est : out.factors.terms())
        best = std::min(best, std::max(aligned_distance(est.u, truth.u), std::abs(est.lambda - truth.lambda) / truth.lambda));
      err = std::max(err, best);
    }
  }
  report(10, "whitening extension", err <= 1e-5,
         "<a1,a2>=" + fmt("%.2f", a1.dot(a2)) + ", max component error=" + fmt("%.2e", err) + " (<=1e-5)");
}

void criterion11(const RecoveryRun& first) {
  const RecoveryRun second = recovery_run();
  const bool same = first.trace_csv == second.trace_csv && !first.trace_csv.empty();
  report(11, "deterministic trace", same,
         std::string("trace CSV without seconds ") + (same ? "byte-identical" : "differs") + " across two runs (" +
             std::to_string(std::count(first.trace_csv.begin(), first.trace_csv.end(), '\n')) + " lines)");
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto want = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  const std::function<void()> simple[] = {criterion1, criterion2, criterion3};
  for (int id = 1; id <= 3; ++id)
    if (want(id)) simple[id - 1]();
  std::optional<RecoveryRun> run;
  if (want(4) || want(5) || want(6) || want(11)) run = recovery_run();
  if (want(4) || want(5) || want(6)) criteria4to6(*run);
  if (want(7)) criterion7();
  if (want(8)) criterion8();
  if (want(9)) criterion9();
  if (want(10)) criterion10();
  if (want(11)) criterion11(*run);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
