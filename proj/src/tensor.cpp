#include "rtd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rtd/random.hpp"

namespace rtd {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_cubic(const Tensor3& t, const char* what) {
  if (!t.is_cubic())
    throw std::invalid_argument(std::string(what) + ": tensor must be cubic");
}

void require_length(const Tensor3& t, const Vector& v, const char* what) {
  if (static_cast<std::size_t>(v.size()) != t.dim(0))
    throw std::invalid_argument(std::string(what) + ": vector length " + std::to_string(v.size()) +
                                " does not match tensor dimension " + std::to_string(t.dim(0)));
}

void require_same_shape(const Tensor3& a, const Tensor3& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("tensor shapes differ");
}

int check_mode(int mode) {
  if (mode < 1 || mode > 3)
    throw std::invalid_argument("mode must be 1, 2 or 3, got " + std::to_string(mode));
  return mode - 1;
}

// (a, b, c) sorted ascending.
inline void sort3(std::size_t& a, std::size_t& b, std::size_t& c) {
  if (a > b) std::swap(a, b);
  if (b > c) std::swap(b, c);
  if (a > b) std::swap(a, b);
}

}  // namespace

Tensor3::Tensor3(std::size_t n) : Tensor3(Shape{n, n, n}) {}

Tensor3::Tensor3(Shape shape) : shape_(shape), values_(shape[0] * shape[1] * shape[2], 0.0) {}

Tensor3::Tensor3(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape[0] * shape[1] * shape[2])
    throw std::invalid_argument("Tensor3: value count does not match shape");
}

std::size_t Tensor3::dim(int mode) const {
  if (mode < 0 || mode > 2) throw std::invalid_argument("Tensor3::dim: axis out of range");
  return shape_[static_cast<std::size_t>(mode)];
}

bool Tensor3::is_cubic() const noexcept {
  return shape_[0] == shape_[1] && shape_[1] == shape_[2];
}

std::size_t Tensor3::n() const {
  require_cubic(*this, "Tensor3::n");
  return shape_[0];
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  require_same_shape(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
  require_same_shape(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Tensor3& Tensor3::operator*=(double scale) noexcept {
  for (double& x : values_) x *= scale;
  return *this;
}

bool Tensor3::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

double Tensor3::symmetry_defect() const {
  require_cubic(*this, "symmetry_defect");
  const std::size_t n = shape_[0];
  double defect = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) {
        const double ref = (*this)(i, j, k);
        const double perms[5] = {(*this)(i, k, j), (*this)(j, i, k), (*this)(j, k, i), (*this)(k, i, j),
                                 (*this)(k, j, i)};
        for (double p : perms) defect = std::max(defect, std::abs(p - ref));
      }
  return defect;
}

bool Tensor3::is_symmetric(double rel_tol) const {
  if (!is_cubic()) return false;
  return symmetry_defect() <= rel_tol * inf_norm(*this);
}

Tensor3 operator+(Tensor3 lhs, const Tensor3& rhs) { return lhs += rhs; }
Tensor3 operator-(Tensor3 lhs, const Tensor3& rhs) { return lhs -= rhs; }
Tensor3 operator*(double scale, Tensor3 t) { return t *= scale; }

// ---------------------------------------------------------------------------
// SparseTensor3

namespace {

bool lex_less(const SparseEntry& a, const SparseEntry& b) {
  if (a.i != b.i) return a.i < b.i;
  if (a.j != b.j) return a.j < b.j;
  return a.k < b.k;
}

bool same_index(const SparseEntry& a, const SparseEntry& b) {
  return a.i == b.i && a.j == b.j && a.k == b.k;
}

}  // namespace

SparseTensor3::SparseTensor3(std::size_t n, std::vector<SparseEntry> entries)
    : n_(n), entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.i >= n_ || e.j >= n_ || e.k >= n_)
      throw std::invalid_argument("SparseTensor3: index out of range");
    if (e.value == 0.0 || !std::isfinite(e.value))
      throw std::invalid_argument("SparseTensor3: stored values must be finite and non-zero");
  }
  std::sort(entries_.begin(), entries_.end(), lex_less);
  for (std::size_t p = 1; p < entries_.size(); ++p)
    if (same_index(entries_[p - 1], entries_[p]))
      throw std::invalid_argument("SparseTensor3: duplicate index");
}

SparseTensor3 SparseTensor3::from_dense(const Tensor3& dense) {
  require_cubic(dense, "SparseTensor3::from_dense");
  const std::size_t n = dense.dim(0);
  SparseTensor3 out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        if (const double x = dense(i, j, k); x != 0.0)
          out.entries_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                  static_cast<std::uint32_t>(k), x});
  return out;
}

bool SparseTensor3::contains(std::size_t i, std::size_t j, std::size_t k) const {
  const SparseEntry key{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                        static_cast<std::uint32_t>(k), 0.0};
  return std::binary_search(entries_.begin(), entries_.end(), key, lex_less);
}

double SparseTensor3::at(std::size_t i, std::size_t j, std::size_t k) const {
  const SparseEntry key{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                        static_cast<std::uint32_t>(k), 0.0};
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key, lex_less);
  return (it != entries_.end() && same_index(*it, key)) ? it->value : 0.0;
}

bool SparseTensor3::is_symmetric() const {
  for (const auto& e : entries_) {
    const std::uint32_t p[3] = {e.i, e.j, e.k};
    static constexpr int perms[5][3] = {{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& q : perms) {
      const SparseEntry key{p[q[0]], p[q[1]], p[q[2]], 0.0};
      auto it = std::lower_bound(entries_.begin(), entries_.end(), key, lex_less);
      if (it == entries_.end() || !same_index(*it, key) || it->value != e.value) return false;
    }
  }
  return true;
}

Tensor3 SparseTensor3::densify() const {
  Tensor3 out(n_);
  add_to(out, 1.0);
  return out;
}

void SparseTensor3::add_to(Tensor3& dense, double scale) const {
  if (dense.shape() != Tensor3::Shape{n_, n_, n_})
    throw std::invalid_argument("SparseTensor3::add_to: shape mismatch");
  for (const auto& e : entries_) dense(e.i, e.j, e.k) += scale * e.value;
}

bool support_subset(const SparseTensor3& inner, const SparseTensor3& outer) {
  return support_overlap(inner, outer) == inner.nnz();
}

std::size_t support_overlap(const SparseTensor3& candidate, const SparseTensor3& reference) {
  auto a = candidate.entries();
  auto b = reference.entries();
  std::size_t count = 0;
  std::size_t p = 0, q = 0;
  while (p < a.size() && q < b.size()) {
    if (lex_less(a[p], b[q])) {
      ++p;
    } else if (lex_less(b[q], a[p])) {
      ++q;
    } else {
      ++count;
      ++p;
      ++q;
    }
  }
  return count;
}

SparseTensor3 difference(const SparseTensor3& a, const SparseTensor3& b) {
  if (a.n() != b.n()) throw std::invalid_argument("difference: dimension mismatch");
  std::vector<SparseEntry> out;
  auto x = a.entries();
  auto y = b.entries();
  std::size_t p = 0, q = 0;
  auto emit = [&out](SparseEntry e, double v) {
    if (v != 0.0) {
      e.value = v;
      out.push_back(e);
    }
  };
  while (p < x.size() || q < y.size()) {
    if (q == y.size() || (p < x.size() && lex_less(x[p], y[q]))) {
      emit(x[p], x[p].value);
      ++p;
    } else if (p == x.size() || lex_less(y[q], x[p])) {
      emit(y[q], -y[q].value);
      ++q;
    } else {
      emit(x[p], x[p].value - y[q].value);
      ++p;
      ++q;
    }
  }
  return SparseTensor3(a.n(), std::move(out));
}

// ---------------------------------------------------------------------------
// FactorModel

FactorModel::FactorModel(std::size_t n, std::vector<RankOneTerm> terms) : n_(n) {
  for (auto& term : terms) add(term.lambda, std::move(term.u));
}

void FactorModel::add(double lambda, Vector u) {
  if (static_cast<std::size_t>(u.size()) != n_)
    throw std::invalid_argument("FactorModel::add: vector length mismatch");
  if (!std::isfinite(lambda) || !u.allFinite())
    throw std::invalid_argument("FactorModel::add: non-finite term");
  if (std::abs(u.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("FactorModel::add: factor must have unit norm");
  if (lambda < 0.0) {
    lambda = -lambda;
    u = -u;
  }
  auto pos = std::find_if(terms_.begin(), terms_.end(),
                          [lambda](const RankOneTerm& t) { return t.lambda < lambda; });
  terms_.insert(pos, RankOneTerm{lambda, std::move(u)});
}

Vector FactorModel::lambdas() const {
  Vector out(static_cast<Eigen::Index>(terms_.size()));
  for (std::size_t i = 0; i < terms_.size(); ++i) out(static_cast<Eigen::Index>(i)) = terms_[i].lambda;
  return out;
}

Matrix FactorModel::factors() const {
  Matrix out(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(terms_.size()));
  for (std::size_t i = 0; i < terms_.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = terms_[i].u;
  return out;
}

Tensor3 FactorModel::materialize() const {
  Tensor3 out(n_);
  for (const auto& term : terms_) add_rank1(out, term.lambda, term.u);
  return out;
}

// ---------------------------------------------------------------------------
// Contractions

Matrix contract_1(const Tensor3& t, const Vector& v) {
  require_cubic(t, "contract_1");
  require_length(t, v, "contract_1");
  const auto n = static_cast<Eigen::Index>(t.dim(0));
  Eigen::Map<const RowMajorMatrix> a(t.data(), n * n, n);
  Vector flat = a * v;
  Eigen::Map<const RowMajorMatrix> m(flat.data(), n, n);
  return Matrix(m);
}

Vector contract_2(const Tensor3& t, const Vector& v, const Vector& w) {
  require_cubic(t, "contract_2");
  require_length(t, v, "contract_2");
  require_length(t, w, "contract_2");
  const auto n = static_cast<Eigen::Index>(t.dim(0));
  Vector vw(n * n);
  for (Eigen::Index j = 0; j < n; ++j) vw.segment(j * n, n) = v(j) * w;
  Eigen::Map<const RowMajorMatrix> a(t.data(), n, n * n);
  return a * vw;
}

double contract_3(const Tensor3& t, const Vector& u, const Vector& v, const Vector& w) {
  require_length(t, u, "contract_3");
  return u.dot(contract_2(t, v, w));
}

void add_rank1(Tensor3& t, double scale, const Vector& v) {
  require_cubic(t, "rank1_accumulate");
  require_length(t, v, "rank1_accumulate");
  const std::size_t n = t.dim(0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        std::size_t a = i, b = j, c = k;
        sort3(a, b, c);
        t(i, j, k) += scale * (v(static_cast<Eigen::Index>(a)) * v(static_cast<Eigen::Index>(b)) *
                               v(static_cast<Eigen::Index>(c)));
      }
}

Tensor3 rank1_accumulate(Tensor3 t, double scale, const Vector& v) {
  add_rank1(t, scale, v);
  return t;
}

// ---------------------------------------------------------------------------
// Reshaping

namespace {

// Position of (i, j, k) in the mode-m flattening.
inline std::pair<std::size_t, std::size_t> flat_pos(int m, const Tensor3::Shape& s, std::size_t i,
                                                    std::size_t j, std::size_t k) {
  switch (m) {
    case 0: return {i, j * s[2] + k};
    case 1: return {j, i * s[2] + k};
    default: return {k, i * s[1] + j};
  }
}

}  // namespace

Matrix flatten(const Tensor3& t, int mode) {
  const int m = check_mode(mode);
  const auto& s = t.shape();
  const std::size_t rows = s[static_cast<std::size_t>(m)];
  const std::size_t cols = t.size() / std::max<std::size_t>(rows, 1);
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < s[0]; ++i)
    for (std::size_t j = 0; j < s[1]; ++j)
      for (std::size_t k = 0; k < s[2]; ++k) {
        auto [r, c] = flat_pos(m, s, i, j, k);
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t(i, j, k);
      }
  return out;
}

Tensor3 unflatten(const Matrix& mat, int mode, const Tensor3::Shape& shape) {
  const int m = check_mode(mode);
  const std::size_t rows = shape[static_cast<std::size_t>(m)];
  const std::size_t total = shape[0] * shape[1] * shape[2];
  if (static_cast<std::size_t>(mat.rows()) != rows ||
      static_cast<std::size_t>(mat.rows() * mat.cols()) != total)
    throw std::invalid_argument("unflatten: matrix does not match the requested shape");
  Tensor3 out(shape);
  for (std::size_t i = 0; i < shape[0]; ++i)
    for (std::size_t j = 0; j < shape[1]; ++j)
      for (std::size_t k = 0; k < shape[2]; ++k) {
        auto [r, c] = flat_pos(m, shape, i, j, k);
        out(i, j, k) = mat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      }
  return out;
}

Matrix slice(const Tensor3& t, int mode, std::size_t index) {
  const int m = check_mode(mode);
  const auto& s = t.shape();
  if (index >= s[static_cast<std::size_t>(m)])
    throw std::out_of_range("slice: index " + std::to_string(index) + " out of range");
  const std::size_t r0 = m == 0 ? 1 : 0;
  const std::size_t c0 = m == 2 ? 1 : 2;
  Matrix out(static_cast<Eigen::Index>(s[r0]), static_cast<Eigen::Index>(s[c0]));
  for (std::size_t a = 0; a < s[r0]; ++a)
    for (std::size_t b = 0; b < s[c0]; ++b) {
      double x = 0.0;
      switch (m) {
        case 0: x = t(index, a, b); break;
        case 1: x = t(a, index, b); break;
        default: x = t(a, b, index); break;
      }
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = x;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Norms

double inf_norm(const Tensor3& t) noexcept {
  double m = 0.0;
  for (double x : t.values()) m = std::max(m, std::abs(x));
  return m;
}

double fro_norm(const Tensor3& t) noexcept {
  double s = 0.0;
  for (double x : t.values()) s += x * x;
  return std::sqrt(s);
}

double inf_norm(const SparseTensor3& t) noexcept {
  double m = 0.0;
  for (const auto& e : t.entries()) m = std::max(m, std::abs(e.value));
  return m;
}

double fro_norm(const SparseTensor3& t) noexcept {
  double s = 0.0;
  for (const auto& e : t.entries()) s += e.value * e.value;
  return std::sqrt(s);
}

double spectral_norm_estimate(const Tensor3& t, int restarts, int iters, std::uint64_t seed) {
  require_cubic(t, "spectral_norm_estimate");
  if (restarts < 1 || iters < 1)
    throw std::invalid_argument("spectral_norm_estimate: restarts and iters must be >= 1");
  const auto n = static_cast<Eigen::Index>(t.dim(0));
  if (n == 0) return 0.0;
  double best = 0.0;
  for (int r = 0; r < restarts; ++r) {
    Rng rng = make_rng(seed, {0x5e7ull, static_cast<std::uint64_t>(r)});
    Vector v = random_unit(rng, n);
    for (int it = 0; it <= iters; ++it) {
      Vector g = contract_2(t, v, v);
      best = std::max(best, std::abs(v.dot(g)));
      const double gn = g.norm();
      if (it == iters || !(gn > std::numeric_limits<double>::min())) break;
      v = g / gn;
    }
  }
  return best;
}

Tensor3 symmetric_part(const Tensor3& t) {
  require_cubic(t, "symmetric_part");
  const std::size_t n = t.dim(0);
  Tensor3 out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) {
        const double x = (t(i, j, k) + t(i, k, j) + t(j, i, k) + t(j, k, i) + t(k, i, j) + t(k, j, i)) / 6.0;
        out(i, j, k) = x;
        out(i, k, j) = x;
        out(j, i, k) = x;
        out(j, k, i) = x;
        out(k, i, j) = x;
        out(k, j, i) = x;
      }
  return out;
}

SparseTensor3 hard_threshold(const Tensor3& t, double zeta) {
  require_cubic(t, "hard_threshold");
  if (!(zeta > 0.0)) throw std::invalid_argument("hard_threshold: zeta must be positive");
  const std::size_t n = t.dim(0);
  std::vector<SparseEntry> kept;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        if (const double x = t(i, j, k); std::abs(x) >= zeta)
          kept.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                          static_cast<std::uint32_t>(k), x});
  return SparseTensor3(n, std::move(kept));
}

Tensor3 sym_embed(const Tensor3& a) {
  const auto& s = a.shape();
  const std::size_t n = s[0] + s[1] + s[2];
  Tensor3 out(n);
  for (std::size_t i = 0; i < s[0]; ++i)
    for (std::size_t j = 0; j < s[1]; ++j)
      for (std::size_t k = 0; k < s[2]; ++k) {
        const double x = a(i, j, k);
        const std::size_t p = i, q = s[0] + j, r = s[0] + s[1] + k;
        out(p, q, r) = x;
        out(p, r, q) = x;
        out(q, p, r) = x;
        out(q, r, p) = x;
        out(r, p, q) = x;
        out(r, q, p) = x;
      }
  return out;
}

}  // namespace rtd
