#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rtd/baselines.hpp"
#include "rtd/experiment.hpp"
#include "rtd/io.hpp"
#include "rtd/rtd.hpp"
#include "rtd/synth.hpp"

namespace fs = std::filesystem;
using namespace rtd;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

void set_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("RTD_THREADS")) threads = std::atoi(env);
  }
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

struct SynthArgs {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

int cmd_synth(const SynthArgs& a) {
  KeyValues kv;
  if (!a.config.empty()) kv = read_key_values(a.config);
  for (const auto& s : a.sets) {
    const KeyValues one = parse_key_values(s, "--set");
    kv.insert(kv.end(), one.begin(), one.end());
  }
  if (a.seed) kv.emplace_back("seed", std::to_string(*a.seed));
  const SynthSpec spec = spec_from_key_values(kv);
  const Instance inst = make_instance(spec);
  const fs::path dir(a.out);
  ensure_dir(dir);
  write_dense(dir / "tensor.rt3d", inst.tensor);
  write_sparse(dir / "sparse.rt3s", inst.sparse);
  write_factors(dir / "factors.txt", inst.low_rank);
  write_key_values(dir / "meta.txt", instance_metadata(inst));
  std::cout << "wrote " << dir.string() << " (n=" << spec.n << ", r=" << spec.r << ", mu=" << format_double(inst.mu)
            << ", nnz(S)=" << inst.sparse.nnz() << ")\n";
  return kOk;
}

struct DecomposeArgs {
  std::string input;
  std::string method = "rtd";
  std::string mode = "practical";
  std::string config;
  std::string out = ".";
  std::string truth;
  std::size_t rank = 1;
  std::optional<double> mu, beta, delta, stage_tol;
  std::optional<int> max_iters, restarts;
  std::uint64_t seed = 0;
  int flatten_mode = 1;
};

int cmd_decompose(const DecomposeArgs& a) {
  const Tensor3 t = read_dense(a.input);
  if (!t.is_cubic()) throw std::invalid_argument(a.input + ": tensor must be cubic");
  ExperimentConfig cfg;
  cfg.rtd.threshold_mode = parse_threshold_mode(a.mode);
  cfg.mrpca.threshold_mode = cfg.rtd.threshold_mode;
  if (!a.config.empty()) {
    for (const auto& [key, value] : read_key_values(a.config)) {
      const bool known = (key.rfind("rtd.", 0) == 0 && apply_rtd_key(cfg.rtd, key.substr(4), value)) ||
                         (key.rfind("mrpca.", 0) == 0 && apply_mrpca_key(cfg.mrpca, key.substr(6), value));
      if (!known) throw std::invalid_argument(a.config + ": unknown key '" + key + "'");
    }
  }
  if (a.mu) cfg.rtd.mu = cfg.mrpca.mu = *a.mu;
  if (a.beta) cfg.rtd.beta = cfg.mrpca.beta = *a.beta;
  if (a.delta) cfg.rtd.delta = cfg.mrpca.delta = *a.delta;
  if (a.stage_tol) cfg.rtd.stage_tol = cfg.mrpca.stage_tol = *a.stage_tol;
  if (a.max_iters) cfg.rtd.max_iters_per_stage = cfg.mrpca.max_iters_per_stage = *a.max_iters;
  if (a.restarts) cfg.rtd.eig.n_restarts = *a.restarts;
  cfg.flatten_mode = a.flatten_mode;

  const Method method = parse_method(a.method);
  if (method == Method::rtd_w_true) throw std::invalid_argument("rtd-w-true needs the true factors; use bench");

  Instance inst;
  inst.spec.n = t.n();
  inst.spec.r = a.rank;
  inst.spec.seed = a.seed;
  inst.tensor = t;
  inst.low_rank = FactorModel(t.n());
  std::optional<FactorModel> truth_l;
  std::optional<SparseTensor3> truth_s;
  if (!a.truth.empty()) {
    truth_l = read_factors(fs::path(a.truth) / "factors.txt");
    truth_s = read_sparse(fs::path(a.truth) / "sparse.rt3s");
  }
  cfg.instance = inst.spec;
  cfg.methods = {method};
  cfg.validate();

  MethodOutcome out;
  if (method == Method::rtd) {
    // Run directly so the trace can carry ground-truth errors.
    RtdConfig c = cfg.rtd;
    c.rank = a.rank;
    c.eig.seed = a.seed;
    const Tensor3 sym = t.is_symmetric(1e-12) ? t : symmetric_part(t);
    IterationObserver obs;
    if (truth_l && truth_s) obs = truth_observer(*truth_l, *truth_s);
    out.decomposition = ncralgo(sym, c, obs);
    out.factors = out.decomposition.L_hat;
    out.S = out.decomposition.S_hat;
    out.converged = out.decomposition.converged;
  } else {
    out = run_method(method, inst, cfg);
  }

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_sparse(dir / "sparse.rt3s", out.S);
  if (method == Method::mrpca_slice || method == Method::mrpca_flat) {
    write_dense(dir / "lowrank.rt3d", out.L);
  } else {
    write_factors(dir / "factors.txt", out.factors);
    auto csv = open_out(dir / "trace.csv");
    write_trace_csv(csv, out.decomposition);
  }
  std::cout << "method=" << a.method << " converged=" << (out.converged ? "yes" : "no");
  if (!out.decomposition.status.empty()) std::cout << " status=\"" << out.decomposition.status << "\"";
  if (truth_l) {
    const Tensor3 lhat = out.factors.empty() && out.L.size() > 0 ? out.L : out.factors.materialize();
    std::cout << " rel_error=" << format_double(relative_error(truth_l->materialize(), lhat));
  }
  std::cout << "\n";
  return out.converged ? kOk : kNotConverged;
}

struct BenchArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_bench(const BenchArgs& a) {
  KeyValues kv = read_key_values(a.config);
  if (a.seed) kv.emplace_back("seed", std::to_string(*a.seed));
  ExperimentConfig cfg = parse_experiment(kv);
  if (!a.out.empty()) cfg.out = a.out;
  if (cfg.out.empty()) cfg.out = "bench.csv";
  const auto rows = run_bench(cfg, [](const BenchRow& r) {
    std::cerr << to_string(r.method) << " d=" << r.d << " rep=" << r.rep << " rel_error=" << format_double(r.rel_error)
              << " seconds=" << r.seconds << " " << r.status << "\n";
  });
  const fs::path raw(cfg.out);
  if (raw.has_parent_path()) ensure_dir(raw.parent_path());
  auto out = open_out(raw);
  write_bench_csv(out, rows);
  fs::path mean = raw;
  mean.replace_filename(raw.stem().string() + "_mean" + raw.extension().string());
  auto mout = open_out(mean);
  write_mean_csv(mout, rows);
  std::cout << "wrote " << raw.string() << " and " << mean.string() << "\n";
  return kOk;
}

int cmd_inspect(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  const std::string tag(magic, in.gcount());
  if (tag == "RT3D") {
    const Tensor3 t = read_dense(path);
    std::cout << "dense " << t.dim(0) << "x" << t.dim(1) << "x" << t.dim(2) << "\n"
              << "fro_norm " << format_double(fro_norm(t)) << "\n"
              << "inf_norm " << format_double(inf_norm(t)) << "\n";
    if (t.is_cubic()) {
      std::cout << "symmetry_defect " << format_double(t.symmetry_defect()) << "\n"
                << "spectral_norm_estimate " << format_double(spectral_norm_estimate(t, 10, 30, 0)) << "\n";
    }
  } else if (tag == "RT3S") {
    const SparseTensor3 s = read_sparse(path);
    std::cout << "sparse n=" << s.n() << "\n"
              << "nnz " << s.nnz() << "\n"
              << "fro_norm " << format_double(fro_norm(s)) << "\n"
              << "inf_norm " << format_double(inf_norm(s)) << "\n"
              << "symmetric " << (s.is_symmetric() ? "yes" : "no") << "\n";
  } else if (tag == "RT3F") {
    const FactorModel f = read_factors(path);
    std::cout << "factors n=" << f.n() << " rank=" << f.rank() << "\n";
    for (std::size_t i = 0; i < f.rank(); ++i) std::cout << "lambda[" << i << "] " << format_double(f[i].lambda) << "\n";
  } else {
    throw IoError(path + ": unrecognised file type");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust tensor decomposition: low-rank CP plus sparse corruption"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: RTD_THREADS or all cores)");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic instance");
  synth->add_option("--config", sa.config, "key=value instance file");
  synth->add_option("--set", sa.sets, "Override one key (key=value), repeatable");
  synth->add_option("--seed", sa.seed, "Instance seed");
  synth->add_option("--out", sa.out, "Output directory");

  DecomposeArgs da;
  auto* dec = app.add_subcommand("decompose", "Split a tensor into low-rank and sparse parts");
  dec->add_option("input", da.input, "RT3D tensor file")->required();
  dec->add_option("--method", da.method, "rtd, rtd-w-slice, mrpca-slice or mrpca-flat");
  dec->add_option("--mode", da.mode, "Threshold mode: theoretical or practical");
  dec->add_option("--rank", da.rank, "Target rank")->check(CLI::PositiveNumber);
  dec->add_option("--config", da.config, "key=value solver file (rtd.* / mrpca.* keys)");
  dec->add_option("--mu", da.mu, "Incoherence parameter");
  dec->add_option("--beta", da.beta, "Threshold scale (default from mu)");
  dec->add_option("--delta", da.delta, "Convergence tolerance");
  dec->add_option("--max-iters", da.max_iters, "Iterations per stage");
  dec->add_option("--stage-tol", da.stage_tol, "Early stage exit tolerance");
  dec->add_option("--restarts", da.restarts, "Power-method restarts");
  dec->add_option("--flatten-mode", da.flatten_mode, "Mode for mrpca-flat");
  dec->add_option("--seed", da.seed, "Random seed");
  dec->add_option("--truth", da.truth, "Directory with factors.txt and sparse.rt3s for error columns");
  dec->add_option("--out", da.out, "Output directory");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Run a sweep and write CSV tables");
  bench->add_option("--config", ba.config, "key=value experiment file")->required();
  bench->add_option("--out", ba.out, "Raw CSV path");
  bench->add_option("--seed", ba.seed, "Global seed");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Print statistics of a tensor or factor file");
  inspect->add_option("path", inspect_path, "RT3D, RT3S or factor file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }
  set_threads(threads);

  try {
    if (*synth) return cmd_synth(sa);
    if (*dec) return cmd_decompose(da);
    if (*bench) return cmd_bench(ba);
    if (*inspect) return cmd_inspect(inspect_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
