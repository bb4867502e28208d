#include <cstring>
#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rtd/baselines.hpp"
#include "rtd/eig.hpp"
#include "rtd/rtd.hpp"
#include "rtd/synth.hpp"
#include "rtd/tensor.hpp"

namespace py = pybind11;
using namespace rtd;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor3 to_tensor(const Array& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a 3-dimensional array");
  const Tensor3::Shape shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                             static_cast<std::size_t>(a.shape(2))};
  return Tensor3(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor3& t) {
  Array out({t.dim(0), t.dim(1), t.dim(2)});
  std::memcpy(out.mutable_data(), t.data(), t.size() * sizeof(double));
  return out;
}

py::dict factors_dict(const FactorModel& f) {
  py::dict d;
  d["lambdas"] = f.lambdas();
  d["factors"] = f.factors();
  return d;
}

py::dict eigenpairs(const Array& t, std::size_t l, std::size_t r, int n_restarts, int n_power_iters,
                    std::uint64_t seed, bool refine) {
  EigConfig cfg;
  cfg.n_restarts = n_restarts;
  cfg.n_power_iters = n_power_iters;
  cfg.seed = seed;
  cfg.refine = refine;
  const EigenResult res = top_r_eigenpairs(to_tensor(t), l, r, cfg);
  Vector lambdas(static_cast<Eigen::Index>(res.pairs.size()));
  Vector residuals(lambdas.size());
  Matrix vectors(static_cast<Eigen::Index>(t.shape(0)), lambdas.size());
  for (std::size_t j = 0; j < res.pairs.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    lambdas(jj) = res.pairs[j].lambda;
    residuals(jj) = res.pairs[j].residual;
    vectors.col(jj) = res.pairs[j].v;
  }
  py::dict d;
  d["lambdas"] = lambdas;
  d["vectors"] = vectors;
  d["residuals"] = residuals;
  d["sigma_next"] = res.sigma_next;
  return d;
}

py::dict instance(std::size_t n, std::size_t r, const std::string& sparsity, std::size_t d, std::size_t B,
                  const std::string& factor_dist, std::optional<double> mu_target, std::uint64_t seed) {
  SynthSpec s;
  s.n = n;
  s.r = r;
  s.sparsity = parse_sparsity_model(sparsity);
  s.d = d;
  s.B = B;
  s.factor_dist = parse_factor_dist(factor_dist);
  s.mu_target = mu_target;
  s.seed = seed;
  const Instance inst = make_instance(s);
  py::dict out = factors_dict(inst.low_rank);
  out["tensor"] = to_array(inst.tensor);
  out["low_rank"] = to_array(inst.low_rank_tensor);
  out["sparse"] = to_array(inst.sparse.densify());
  out["mu"] = inst.mu;
  out["eta"] = inst.eta;
  return out;
}

py::dict decompose(const Array& t, std::size_t rank, const std::string& mode, double mu, double delta,
                   std::optional<double> beta, std::optional<int> max_iters, double stage_tol, int restarts,
                   const std::string& stop_rule, std::uint64_t seed) {
  RtdConfig cfg;
  cfg.rank = rank;
  cfg.threshold_mode = parse_threshold_mode(mode);
  cfg.mu = mu;
  cfg.delta = delta;
  cfg.beta = beta;
  cfg.max_iters_per_stage = max_iters;
  cfg.stage_tol = stage_tol;
  cfg.eig.n_restarts = restarts;
  cfg.stop_rule = parse_stop_rule(stop_rule);
  cfg.eig.seed = seed;
  Decomposition dec;
  {
    py::gil_scoped_release release;
    dec = ncralgo(to_tensor(t), cfg);
  }
  py::dict out = factors_dict(dec.L_hat);
  out["L"] = to_array(dec.L_hat.materialize());
  out["S"] = to_array(dec.S_hat.densify());
  out["converged"] = dec.converged;
  out["stages_run"] = dec.stages_run;
  out["status"] = dec.status;
  out["beta"] = dec.beta;
  py::list trace;
  for (const auto& r : dec.trace) {
    py::dict row;
    row["stage"] = r.stage;
    row["t"] = r.t;
    row["zeta"] = r.zeta;
    row["sigma_l"] = r.sigma_l;
    row["sigma_next"] = r.sigma_next;
    row["residual_inf"] = r.residual_inf;
    row["residual_fro"] = r.residual_fro;
    row["support"] = r.support;
    trace.append(row);
  }
  out["trace"] = trace;
  return out;
}

py::dict rpca(const Array& t, const std::string& how, std::size_t rank, double mu, std::optional<int> max_iters,
              std::uint64_t seed) {
  MatrixRpcaConfig cfg;
  cfg.rank = rank;
  cfg.mu = mu;
  cfg.max_iters_per_stage = max_iters;
  cfg.seed = seed;
  const Tensor3 x = to_tensor(t);
  TensorSplit split;
  if (how == "slice")
    split = rpca_slices(x, cfg);
  else if (how == "flat")
    split = rpca_flatten(x, 1, cfg);
  else
    throw std::invalid_argument("how must be 'slice' or 'flat'");
  py::dict out;
  out["L"] = to_array(split.L);
  out["S"] = to_array(split.S);
  out["converged"] = split.converged;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Robust tensor decomposition: low-rank CP plus sparse corruption";

  m.def("contract_1", [](const Array& t, const Vector& v) { return contract_1(to_tensor(t), v); }, py::arg("t"),
        py::arg("v"), "T(I, I, v)");
  m.def("contract_2", [](const Array& t, const Vector& v, const Vector& w) { return contract_2(to_tensor(t), v, w); },
        py::arg("t"), py::arg("v"), py::arg("w"), "T(I, v, w)");
  m.def("contract_3",
        [](const Array& t, const Vector& u, const Vector& v, const Vector& w) { return contract_3(to_tensor(t), u, v, w); },
        py::arg("t"), py::arg("u"), py::arg("v"), py::arg("w"), "T(u, v, w)");
  m.def("spectral_norm_estimate",
        [](const Array& t, int restarts, int iters, std::uint64_t seed) {
          return spectral_norm_estimate(to_tensor(t), restarts, iters, seed);
        },
        py::arg("t"), py::arg("restarts") = 10, py::arg("iters") = 30, py::arg("seed") = 0);
  m.def("symmetric_part", [](const Array& t) { return to_array(symmetric_part(to_tensor(t))); }, py::arg("t"));
  m.def("hard_threshold", [](const Array& t, double zeta) { return to_array(hard_threshold(to_tensor(t), zeta).densify()); },
        py::arg("t"), py::arg("zeta"));
  m.def("top_eigenpairs", &eigenpairs, py::arg("t"), py::arg("l"), py::arg("r"), py::arg("n_restarts") = 0,
        py::arg("n_power_iters") = 30, py::arg("seed") = 0, py::arg("refine") = true,
        "Top l of r robust eigenpairs of a symmetric tensor");
  m.def("make_instance", &instance, py::arg("n") = 50, py::arg("r") = 3, py::arg("sparsity") = "block",
        py::arg("d") = 5, py::arg("B") = 5, py::arg("factor_dist") = "gaussian", py::arg("mu_target") = py::none(),
        py::arg("seed") = 0);
  m.def("decompose", &decompose, py::arg("t"), py::arg("rank"), py::arg("mode") = "practical", py::arg("mu") = 4.0,
        py::arg("delta") = 1e-3, py::arg("beta") = py::none(), py::arg("max_iters") = py::none(),
        py::arg("stage_tol") = 0.0, py::arg("restarts") = 0, py::arg("stop_rule") = "proof", py::arg("seed") = 0,
        "Split a symmetric tensor into a rank-r CP part and a sparse part");
  m.def("rpca", &rpca, py::arg("t"), py::arg("how") = "slice", py::arg("rank") = 1, py::arg("mu") = 4.0,
        py::arg("max_iters") = py::none(), py::arg("seed") = 0, "Matrix robust PCA on slices or the mode-1 flattening");
  m.def("relative_error", [](const Array& a, const Array& b) { return relative_error(to_tensor(a), to_tensor(b)); },
        py::arg("reference"), py::arg("estimate"));
}
