#include "rtd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rtd/random.hpp"

namespace rtd {

namespace {

constexpr Eigen::Index kOversample = 5;
constexpr Eigen::Index kDenseLimit = 64;

Matrix orth(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

Svd dense_svd(const Matrix& m, Eigen::Index k) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU().leftCols(k), svd.singularValues().head(k), svd.matrixV().leftCols(k)};
}

Matrix hard_threshold_matrix(const Matrix& m, double zeta) {
  return m.unaryExpr([zeta](double x) { return std::abs(x) >= zeta ? x : 0.0; });
}

bool same_support_within(const Matrix& a, const Matrix& b, double tol) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i];
    const double y = b.data()[i];
    if ((x == 0.0) != (y == 0.0) || std::abs(x - y) > tol) return false;
  }
  return true;
}

}  // namespace

Svd truncated_svd(const Matrix& m, std::size_t k_in, std::uint64_t seed, double tol, int max_iters) {
  const auto k = static_cast<Eigen::Index>(k_in);
  const Eigen::Index kmax = std::min(m.rows(), m.cols());
  if (k < 1 || k > kmax)
    throw std::invalid_argument("truncated_svd: k = " + std::to_string(k_in) + " must lie in [1, " +
                                std::to_string(kmax) + "]");
  if (!m.allFinite()) throw std::invalid_argument("truncated_svd: matrix has non-finite entries");
  const Eigen::Index b = std::min(k + kOversample, kmax);
  if (kmax <= kDenseLimit || 2 * b >= kmax) return dense_svd(m, k);

  Rng rng = make_rng(seed, {0x5add});
  Matrix omega(m.cols(), b);
  for (Eigen::Index j = 0; j < b; ++j) omega.col(j) = standard_normal(rng, m.cols());
  Matrix q = orth(m * omega);
  Svd out;
  for (int it = 0;; ++it) {
    // m^T q = (q^T m)^T; its SVD gives the Rayleigh-Ritz triplets on span(q).
    const Matrix bt = m.transpose() * q;
    Eigen::HouseholderQR<Matrix> qr(bt);
    const Matrix r = qr.matrixQR().topRows(b).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Matrix> small(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix qb = qr.householderQ() * Matrix::Identity(bt.rows(), b);
    out.S = small.singularValues().head(k);
    out.V = qb * small.matrixU().leftCols(k);
    out.U = q * small.matrixV().leftCols(k);
    const double scale = std::max(out.S(0), std::numeric_limits<double>::min());
    const double res = (m * out.V - out.U * out.S.asDiagonal()).colwise().norm().maxCoeff();
    if (res <= tol * scale || it >= max_iters) break;
    q = orth(m * orth(bt));
  }
  return out;
}

void MatrixRpcaConfig::validate() const {
  if (rank < 1) throw std::invalid_argument("MatrixRpcaConfig: rank must be >= 1");
  if (beta && !(*beta > 0.0)) throw std::invalid_argument("MatrixRpcaConfig: beta must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("MatrixRpcaConfig: mu must be positive");
  if (!(delta > 0.0)) throw std::invalid_argument("MatrixRpcaConfig: delta must be positive");
  if (max_iters_per_stage && *max_iters_per_stage < 1)
    throw std::invalid_argument("MatrixRpcaConfig: max_iters_per_stage must be >= 1");
  if (stage_tol < 0.0) throw std::invalid_argument("MatrixRpcaConfig: stage_tol must be >= 0");
  if (!(zeta_floor >= 0.0)) throw std::invalid_argument("MatrixRpcaConfig: zeta_floor must be >= 0");
}

MatrixRpcaResult matrix_rpca(const Matrix& m, const MatrixRpcaConfig& cfg) {
  cfg.validate();
  if (!m.allFinite()) throw std::invalid_argument("matrix_rpca: matrix has non-finite entries");
  MatrixRpcaResult out;
  out.L = Matrix::Zero(m.rows(), m.cols());
  out.S = Matrix::Zero(m.rows(), m.cols());
  if (m.size() == 0 || m.norm() == 0.0) {
    out.converged = true;
    return out;
  }
  const double n_eff = std::sqrt(static_cast<double>(m.rows()) * static_cast<double>(m.cols()));
  const double beta = cfg.beta ? *cfg.beta : 4.0 * cfg.mu * cfg.mu * static_cast<double>(cfg.rank) / n_eff;
  const auto kmin = static_cast<std::size_t>(std::min(m.rows(), m.cols()));
  const double floor = cfg.zeta_floor * m.cwiseAbs().maxCoeff();
  std::uint64_t calls = 0;
  auto svd = [&](const Matrix& a, std::size_t k) { return truncated_svd(a, k, cfg.seed + calls++); };

  double zeta = beta * svd(m, 1).S(0);
  Matrix s = hard_threshold_matrix(m, zeta);
  int tau = 1;
  if (cfg.max_iters_per_stage) {
    tau = *cfg.max_iters_per_stage;
  } else {
    const double arg = n_eff * beta * svd(m - s, 1).S(0) / cfg.delta;
    tau = arg > 1.0 ? std::max(1, static_cast<int>(std::ceil(10.0 * std::log(arg)))) : 1;
  }

  const std::size_t stages = std::min(cfg.rank, kmin);
  Matrix l_part = out.L;
  for (std::size_t l = 1; l <= stages; ++l) {
    out.stages_run = static_cast<int>(l);
    const std::size_t kk = std::min(l + 1, kmin);
    for (int it = 0; it < tau; ++it) {
      const Svd dec = svd(m - s, kk);
      const auto li = static_cast<Eigen::Index>(l);
      l_part = dec.U.leftCols(li) * dec.S.head(li).asDiagonal() * dec.V.leftCols(li).transpose();
      const double sigma_l = dec.S(li - 1);
      const double sigma_next = kk > l ? dec.S(li) : 0.0;
      if (cfg.threshold_mode == ThresholdMode::practical)
        zeta = cfg.mu * sigma_next / n_eff;
      else if (it > 0)
        zeta = beta * (sigma_next + std::ldexp(sigma_l, -(it - 1)));
      zeta = std::max(zeta, floor);
      Matrix s_next = zeta > 0.0 ? hard_threshold_matrix(m - l_part, zeta) : s;
      const bool settled = cfg.stage_tol > 0.0 && same_support_within(s, s_next, cfg.stage_tol);
      s = std::move(s_next);
      ++out.iterations;
      if (settled) break;
    }
    if (cfg.early_stop) {
      const double sigma_next = kk > l ? svd(m - s, kk).S(static_cast<Eigen::Index>(l)) : 0.0;
      if (beta * sigma_next < cfg.delta / (2.0 * n_eff)) {
        out.converged = true;
        break;
      }
    }
  }
  out.L = std::move(l_part);
  out.S = std::move(s);
  return out;
}

TensorSplit rpca_slices(const Tensor3& t, const MatrixRpcaConfig& cfg) {
  cfg.validate();
  const auto& shape = t.shape();
  const std::size_t slices = shape[2];
  std::vector<MatrixRpcaResult> parts(slices);
  std::vector<std::string> errors(slices);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t l = 0; l < slices; ++l) {
    try {
      MatrixRpcaConfig c = cfg;
      c.seed = cfg.seed + 7919 * l;
      parts[l] = matrix_rpca(slice(t, 3, l), c);
    } catch (const std::exception& e) {
      errors[l] = e.what();
    }
  }
  for (std::size_t l = 0; l < slices; ++l)
    if (!errors[l].empty()) throw std::runtime_error("rpca_slices: slice " + std::to_string(l) + ": " + errors[l]);
  TensorSplit out{Tensor3(shape), Tensor3(shape), 0, true};
  for (std::size_t l = 0; l < slices; ++l) {
    for (std::size_t i = 0; i < shape[0]; ++i)
      for (std::size_t j = 0; j < shape[1]; ++j) {
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        out.L(i, j, l) = parts[l].L(a, b);
        out.S(i, j, l) = parts[l].S(a, b);
      }
    out.iterations += parts[l].iterations;
    out.converged = out.converged && parts[l].converged;
  }
  return out;
}

TensorSplit rpca_flatten(const Tensor3& t, int mode, const MatrixRpcaConfig& cfg) {
  const MatrixRpcaResult r = matrix_rpca(flatten(t, mode), cfg);
  return {unflatten(r.L, mode, t.shape()), unflatten(r.S, mode, t.shape()), r.iterations, r.converged};
}

Whitened whiten(const Tensor3& t, const Matrix& m2, std::size_t k_in) {
  const auto n = static_cast<Eigen::Index>(t.n());
  const auto k = static_cast<Eigen::Index>(k_in);
  if (m2.rows() != n || m2.cols() != n) throw std::invalid_argument("whiten: M2 must be n x n");
  if (k < 1 || k > n) throw std::invalid_argument("whiten: k must lie in [1, n]");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m2 + m2.transpose()));
  // Eigenvalues ascend; the top k are the last k.
  const Vector d = es.eigenvalues().tail(k).reverse();
  const Matrix u = es.eigenvectors().rightCols(k).rowwise().reverse();
  if (!(d(k - 1) > 1e-12))
    throw std::invalid_argument("whiten: M2 has rank < k (eigenvalue " + std::to_string(d(k - 1)) + ")");
  Whitened w;
  w.W = u * d.cwiseSqrt().cwiseInverse().asDiagonal();
  w.unwhiten = u * d.cwiseSqrt().asDiagonal();

  // Contract the three modes one at a time.
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor a = Eigen::Map<const RowMajor>(t.data(), n * n, n) * w.W;  // (i, j) x c
  RowMajor b(n, k * k);                                                     // i x (b, c)
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowMajor bi = w.W.transpose() * a.middleRows(i * n, n);
    b.row(i) = Eigen::Map<const Eigen::RowVectorXd>(bi.data(), k * k);
  }
  const RowMajor c = w.W.transpose() * b;  // a x (b, c)
  w.tensor = Tensor3({k_in, k_in, k_in}, std::vector<double>(c.data(), c.data() + c.size()));
  return w;
}

FactorModel unwhiten(const FactorModel& whitened, const Whitened& w) {
  if (static_cast<Eigen::Index>(whitened.n()) != w.unwhiten.cols())
    throw std::invalid_argument("unwhiten: model dimension does not match the whitening");
  FactorModel out(static_cast<std::size_t>(w.unwhiten.rows()));
  for (const auto& term : whitened.terms()) {
    if (!(term.lambda > 0.0)) continue;
    const Vector a = term.lambda * (w.unwhiten * term.u);
    const double norm = a.norm();
    if (!(norm > 0.0)) continue;
    const double weight = 1.0 / (term.lambda * term.lambda);
    out.add(weight * norm * norm * norm, a / norm);
  }
  return out;
}

Matrix psd_abs(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("psd_abs: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseAbs().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace rtd
