#include "rtd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rtd {

namespace {

constexpr int kMuAttempts = 50;
constexpr int kPsiAttempts = 100;

double pow15(std::size_t n) { return std::pow(static_cast<double>(n), 1.5); }

double draw_value(const SynthSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> u(spec.value_low(), spec.value_high());
  double x = u(rng);
  if (spec.random_signs && std::bernoulli_distribution(0.5)(rng)) x = -x;
  return x;
}

void set_orbit(Tensor3& t, std::size_t a, std::size_t b, std::size_t c, double x) {
  t(a, b, c) = x;
  t(a, c, b) = x;
  t(b, a, c) = x;
  t(b, c, a) = x;
  t(c, a, b) = x;
  t(c, b, a) = x;
}

}  // namespace

std::string to_string(SparsityModel m) {
  switch (m) {
    case SparsityModel::none: return "none";
    case SparsityModel::entrywise: return "entrywise";
    case SparsityModel::block: return "block";
  }
  return "?";
}

std::string to_string(FactorDist d) { return d == FactorDist::gaussian ? "gaussian" : "rademacher"; }

SparsityModel parse_sparsity_model(const std::string& s) {
  if (s == "none") return SparsityModel::none;
  if (s == "entrywise") return SparsityModel::entrywise;
  if (s == "block") return SparsityModel::block;
  throw std::invalid_argument("unknown sparsity model '" + s + "'");
}

FactorDist parse_factor_dist(const std::string& s) {
  if (s == "gaussian") return FactorDist::gaussian;
  if (s == "rademacher") return FactorDist::rademacher;
  throw std::invalid_argument("unknown factor distribution '" + s + "'");
}

void SynthSpec::validate() const {
  if (n < 1) throw std::invalid_argument("SynthSpec: n must be >= 1");
  if (r < 1 || r > n) throw std::invalid_argument("SynthSpec: need 1 <= r <= n");
  if (d > n) throw std::invalid_argument("SynthSpec: need d <= n");
  if (sparsity == SparsityModel::block && B < 1) throw std::invalid_argument("SynthSpec: block model needs B >= 1");
  if (mu_target && !(*mu_target >= 1.0))
    throw std::invalid_argument("SynthSpec: mu_target must be >= 1 (every unit vector has incoherence >= 1)");
  if (!lambdas.empty() && lambdas.size() != r)
    throw std::invalid_argument("SynthSpec: lambdas must have r entries");
  for (double l : lambdas)
    if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("SynthSpec: lambdas must be positive");
  if (zero_rows + r > n) throw std::invalid_argument("SynthSpec: zero_rows leaves fewer than r rows");
}

bool SynthSpec::symmetric_corruption() const {
  return symmetrize.value_or(sparsity == SparsityModel::block);
}

double SynthSpec::value_low() const { return static_cast<double>(r) / (2.0 * pow15(n)); }
double SynthSpec::value_high() const { return static_cast<double>(r) / pow15(n); }

double measured_incoherence(const FactorModel& f) {
  double m = 0.0;
  for (const auto& term : f.terms()) m = std::max(m, term.u.cwiseAbs().maxCoeff());
  return std::sqrt(static_cast<double>(f.n())) * m;
}

LowRankInstance gen_low_rank(const SynthSpec& spec, Rng& rng) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto r = static_cast<Eigen::Index>(spec.r);
  LowRankInstance best;
  best.mu = std::numeric_limits<double>::infinity();
  for (int attempt = 1; attempt <= kMuAttempts; ++attempt) {
    Matrix u(n, r);
    if (spec.factor_dist == FactorDist::gaussian) {
      for (Eigen::Index j = 0; j < r; ++j) u.col(j) = standard_normal(rng, n);
    } else {
      std::bernoulli_distribution coin(0.5);
      for (Eigen::Index j = 0; j < r; ++j)
        for (Eigen::Index i = 0; i < n; ++i) u(i, j) = coin(rng) ? 1.0 : -1.0;
    }
    if (spec.zero_rows > 0) {
      std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), 0);
      std::shuffle(rows.begin(), rows.end(), rng);
      for (std::size_t z = 0; z < spec.zero_rows; ++z) u.row(rows[z]).setZero();
    }
    if (spec.orthonormalize) {
      Eigen::HouseholderQR<Matrix> qr(u);
      u = qr.householderQ() * Matrix::Identity(n, r);
    } else {
      for (Eigen::Index j = 0; j < r; ++j) u.col(j).normalize();
    }
    FactorModel model(spec.n);
    for (Eigen::Index j = 0; j < r; ++j)
      model.add(spec.lambdas.empty() ? 1.0 : spec.lambdas[static_cast<std::size_t>(j)], u.col(j));
    const double mu = measured_incoherence(model);
    if (mu < best.mu) {
      best.model = std::move(model);
      best.mu = mu;
      best.attempts = attempt;
    }
    if (!spec.mu_target || best.mu <= *spec.mu_target) {
      best.tensor = best.model.materialize();
      best.attempts = attempt;
      return best;
    }
  }
  throw std::runtime_error("gen_low_rank: mu_target " + format_double(*spec.mu_target) + " not reached after " +
                           std::to_string(kMuAttempts) + " attempts; best achieved mu = " + format_double(best.mu));
}

SparseTensor3 gen_sparse_entrywise(const SynthSpec& spec, Rng& rng) {
  spec.validate();
  const std::size_t n = spec.n;
  const double p = static_cast<double>(spec.d) / static_cast<double>(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (spec.symmetric_corruption()) {
    Tensor3 dense(n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b)
        for (std::size_t c = b; c < n; ++c)
          if (unit(rng) < p) set_orbit(dense, a, b, c, draw_value(spec, rng));
    return SparseTensor3::from_dense(dense);
  }
  std::vector<SparseEntry> entries;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        if (unit(rng) < p)
          entries.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                             static_cast<std::uint32_t>(k), draw_value(spec, rng)});
  return SparseTensor3(n, std::move(entries));
}

BlockSparse gen_sparse_block(const SynthSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.B < 1) throw std::invalid_argument("gen_sparse_block: B must be >= 1");
  const std::size_t n = spec.n;
  const double p = static_cast<double>(spec.d) / static_cast<double>(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  BlockSparse out;
  std::vector<char> mask(n * n * n, 0);
  for (std::size_t b = 0; b < spec.B; ++b) {
    Vector psi = Vector::Zero(static_cast<Eigen::Index>(n));
    for (int attempt = 0; attempt < kPsiAttempts && psi.sum() == 0.0; ++attempt)
      for (auto& x : psi) x = unit(rng) < p ? 1.0 : 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (psi(static_cast<Eigen::Index>(i)) != 0.0) idx.push_back(i);
    for (std::size_t i : idx)
      for (std::size_t j : idx)
        for (std::size_t k : idx) mask[(i * n + j) * n + k] = 1;
    out.psis.push_back(std::move(psi));
  }
  Tensor3 dense(n);
  if (spec.symmetric_corruption()) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b)
        for (std::size_t c = b; c < n; ++c)
          if (mask[(a * n + b) * n + c]) set_orbit(dense, a, b, c, draw_value(spec, rng));
  } else {
    for (std::size_t i = 0; i < n * n * n; ++i)
      if (mask[i]) dense.values()[i] = draw_value(spec, rng);
  }
  out.s = SparseTensor3::from_dense(dense);
  return out;
}

double measured_eta(const std::vector<Vector>& psis) {
  if (psis.size() < 2) return 0.0;
  double d = 0.0;
  for (const auto& p : psis) d = std::max(d, p.sum());
  if (d == 0.0) return 0.0;
  double overlap = 0.0;
  for (std::size_t i = 0; i < psis.size(); ++i)
    for (std::size_t j = i + 1; j < psis.size(); ++j) overlap = std::max(overlap, psis[i].dot(psis[j]));
  return overlap / d;
}

Instance make_instance(const SynthSpec& spec) {
  spec.validate();
  Instance inst;
  inst.spec = spec;
  Rng rng_low = make_rng(spec.seed, {1});
  Rng rng_sparse = make_rng(spec.seed, {2});
  LowRankInstance low = gen_low_rank(spec, rng_low);
  inst.low_rank = std::move(low.model);
  inst.low_rank_tensor = std::move(low.tensor);
  inst.mu = low.mu;
  switch (spec.sparsity) {
    case SparsityModel::none: inst.sparse = SparseTensor3(spec.n); break;
    case SparsityModel::entrywise: inst.sparse = gen_sparse_entrywise(spec, rng_sparse); break;
    case SparsityModel::block: {
      BlockSparse blocks = gen_sparse_block(spec, rng_sparse);
      inst.sparse = std::move(blocks.s);
      inst.psis = std::move(blocks.psis);
      inst.eta = measured_eta(inst.psis);
      for (const auto& p : inst.psis) inst.max_support = std::max(inst.max_support, static_cast<std::size_t>(p.sum()));
      break;
    }
  }
  inst.tensor = inst.low_rank_tensor;
  inst.sparse.add_to(inst.tensor);
  return inst;
}

KeyValues instance_metadata(const Instance& inst) {
  const SynthSpec& s = inst.spec;
  KeyValues kv{{"n", std::to_string(s.n)},
               {"r", std::to_string(s.r)},
               {"sparsity", to_string(s.sparsity)},
               {"d", std::to_string(s.d)},
               {"B", std::to_string(s.B)},
               {"orthonormalize", s.orthonormalize ? "true" : "false"},
               {"factor_dist", to_string(s.factor_dist)},
               {"zero_rows", std::to_string(s.zero_rows)},
               {"symmetrize", s.symmetric_corruption() ? "true" : "false"},
               {"random_signs", s.random_signs ? "true" : "false"},
               {"seed", std::to_string(s.seed)}};
  if (s.mu_target) kv.emplace_back("mu_target", format_double(*s.mu_target));
  for (double l : s.lambdas) kv.emplace_back("lambda", format_double(l));
  kv.emplace_back("measured_mu", format_double(inst.mu));
  kv.emplace_back("measured_eta", format_double(inst.eta));
  kv.emplace_back("max_support", std::to_string(inst.max_support));
  kv.emplace_back("sparse_nnz", std::to_string(inst.sparse.nnz()));
  return kv;
}

bool set_spec_field(SynthSpec& s, const std::string& key, const std::string& value) {
  auto count = [&](const char* what) {
    const long long v = parse_int(value, what);
    if (v < 0) throw std::invalid_argument(std::string(what) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  if (key == "n") s.n = count("n");
  else if (key == "r") s.r = count("r");
  else if (key == "sparsity") s.sparsity = parse_sparsity_model(value);
  else if (key == "d") s.d = count("d");
  else if (key == "B") s.B = count("B");
  else if (key == "mu_target") s.mu_target = parse_double(value, key);
  else if (key == "orthonormalize") s.orthonormalize = parse_bool(value, key);
  else if (key == "factor_dist") s.factor_dist = parse_factor_dist(value);
  else if (key == "lambda") s.lambdas.push_back(parse_double(value, key));
  else if (key == "zero_rows") s.zero_rows = count("zero_rows");
  else if (key == "symmetrize") s.symmetrize = parse_bool(value, key);
  else if (key == "random_signs") s.random_signs = parse_bool(value, key);
  else if (key == "seed") s.seed = static_cast<std::uint64_t>(count("seed"));
  else return false;
  return true;
}

SynthSpec spec_from_key_values(const KeyValues& kv) {
  static const char* const derived[] = {"measured_mu", "measured_eta", "max_support", "sparse_nnz"};
  SynthSpec s;
  for (const auto& [key, value] : kv) {
    if (set_spec_field(s, key, value)) continue;
    if (std::find(std::begin(derived), std::end(derived), key) != std::end(derived)) continue;
    throw std::invalid_argument("unknown instance key '" + key + "'");
  }
  s.validate();
  return s;
}

}  // namespace rtd
