#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rtd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense third-order tensor.
///
/// Values are stored in a single contiguous buffer with the canonical index
/// function idx(i, j, k) = (i * n2 + j) * n3 + k, i.e. the last index varies
/// fastest. The RT3D file format uses the same order.
///
/// Symmetry is a property of the values, not of the storage: the full n^3
/// buffer is always kept. Routines that need a symmetric input say so.
class Tensor3 {
public:
  using Shape = std::array<std::size_t, 3>;

  Tensor3() = default;
  explicit Tensor3(std::size_t n);
  explicit Tensor3(Shape shape);
  Tensor3(Shape shape, std::vector<double> values);

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t dim(int mode) const;
  [[nodiscard]] bool is_cubic() const noexcept;
  /// Side length of a cubic tensor; throws std::invalid_argument otherwise.
  [[nodiscard]] std::size_t n() const;
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return (i * shape_[1] + j) * shape_[2] + k;
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return values_[index(i, j, k)];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return values_[index(i, j, k)];
  }

  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<double> values() noexcept { return values_; }
  [[nodiscard]] const double* data() const noexcept { return values_.data(); }
  [[nodiscard]] double* data() noexcept { return values_.data(); }

  Tensor3& operator+=(const Tensor3& other);
  Tensor3& operator-=(const Tensor3& other);
  Tensor3& operator*=(double scale) noexcept;

  [[nodiscard]] bool all_finite() const noexcept;
  /// max |T(i,j,k) - T(p,q,r)| over all index permutations; 0 for exactly
  /// symmetric tensors. Only defined for cubic tensors.
  [[nodiscard]] double symmetry_defect() const;
  /// Symmetric within rel_tol * inf_norm (exact when rel_tol is 0).
  [[nodiscard]] bool is_symmetric(double rel_tol = 0.0) const;

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
  Shape shape_{0, 0, 0};
  std::vector<double> values_;
};

Tensor3 operator+(Tensor3 lhs, const Tensor3& rhs);
Tensor3 operator-(Tensor3 lhs, const Tensor3& rhs);
Tensor3 operator*(double scale, Tensor3 t);

struct SparseEntry {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
  double value = 0.0;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Coordinate-form cubic sparse tensor with entries in strictly increasing
/// lexicographic (i, j, k) order and no explicit zeros. Symmetric tensors store
/// every permuted copy explicitly.
class SparseTensor3 {
public:
  SparseTensor3() = default;
  explicit SparseTensor3(std::size_t n) : n_(n) {}
  /// Sorts the entries; throws std::invalid_argument on duplicates, zeros,
  /// non-finite values or out-of-range indices.
  SparseTensor3(std::size_t n, std::vector<SparseEntry> entries);

  static SparseTensor3 from_dense(const Tensor3& dense);

  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] std::size_t nnz() const noexcept { return entries_.size(); }
  [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
  [[nodiscard]] std::span<const SparseEntry> entries() const noexcept { return entries_; }

  [[nodiscard]] bool contains(std::size_t i, std::size_t j, std::size_t k) const;
  /// Stored value, or 0 when (i, j, k) is not in the support.
  [[nodiscard]] double at(std::size_t i, std::size_t j, std::size_t k) const;
  /// Entry set closed under index permutation with bitwise-equal values.
  [[nodiscard]] bool is_symmetric() const;

  [[nodiscard]] Tensor3 densify() const;
  /// dense += scale * this
  void add_to(Tensor3& dense, double scale = 1.0) const;

  friend bool operator==(const SparseTensor3&, const SparseTensor3&) = default;

private:
  std::size_t n_ = 0;
  std::vector<SparseEntry> entries_;
};

/// supp(inner) is a subset of supp(outer).
bool support_subset(const SparseTensor3& inner, const SparseTensor3& outer);

/// Number of entries of `candidate` whose index is also in `reference`.
std::size_t support_overlap(const SparseTensor3& candidate, const SparseTensor3& reference);

/// Entrywise difference a - b as a sparse tensor over the union of supports.
SparseTensor3 difference(const SparseTensor3& a, const SparseTensor3& b);

struct RankOneTerm {
  double lambda = 0.0;
  Vector u;
};

/// Symmetric CP model sum_i lambda_i u_i (x) u_i (x) u_i kept in factored form.
///
/// Terms are canonicalised on insertion: a negative weight is absorbed into
/// the sign of u, and terms are kept sorted by non-increasing lambda
/// (stable, so equal weights keep insertion order).
class FactorModel {
public:
  FactorModel() = default;
  explicit FactorModel(std::size_t n) : n_(n) {}
  FactorModel(std::size_t n, std::vector<RankOneTerm> terms);

  /// Throws std::invalid_argument unless u has length n and unit norm (1e-10).
  void add(double lambda, Vector u);

  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] std::size_t rank() const noexcept { return terms_.size(); }
  [[nodiscard]] bool empty() const noexcept { return terms_.empty(); }
  [[nodiscard]] const std::vector<RankOneTerm>& terms() const noexcept { return terms_; }
  [[nodiscard]] const RankOneTerm& operator[](std::size_t i) const { return terms_.at(i); }

  [[nodiscard]] Vector lambdas() const;
  /// n x rank matrix with u_i as columns.
  [[nodiscard]] Matrix factors() const;
  /// Dense tensor; exactly symmetric by construction.
  [[nodiscard]] Tensor3 materialize() const;

private:
  std::size_t n_ = 0;
  std::vector<RankOneTerm> terms_;
};

// Multilinear contractions. All of them require a cubic tensor and vectors of
// matching length (std::invalid_argument otherwise). Each output entry is a
// reduction over the stored buffer in index order, so results are bitwise
// reproducible for a given build.

/// M(i, j) = sum_k T(i, j, k) v(k), i.e. T(I, I, v).
Matrix contract_1(const Tensor3& t, const Vector& v);
/// out(i) = sum_{j,k} T(i, j, k) v(j) w(k), i.e. T(I, v, w).
Vector contract_2(const Tensor3& t, const Vector& v, const Vector& w);
/// sum_{i,j,k} T(i, j, k) u(i) v(j) w(k).
double contract_3(const Tensor3& t, const Vector& u, const Vector& v, const Vector& w);

/// t += scale * v (x) v (x) v. Each product v(a) v(b) v(c) is evaluated with
/// sorted indices, so an exactly symmetric t stays exactly symmetric.
void add_rank1(Tensor3& t, double scale, const Vector& v);
[[nodiscard]] Tensor3 rank1_accumulate(Tensor3 t, double scale, const Vector& v);

/// Mode-k flattening (mode in {1,2,3}). Rows are indexed by the mode index;
/// the column of the remaining pair (a, b) is a * dim_b + b, with the two
/// remaining modes taken in increasing mode order (so mode 1 columns are
/// j * n3 + k, mode 2 columns are i * n3 + k, mode 3 columns are i * n2 + j).
Matrix flatten(const Tensor3& t, int mode);
Tensor3 unflatten(const Matrix& m, int mode, const Tensor3::Shape& shape);

/// Matrix slice with the `mode` index fixed to `index`; the remaining two
/// indices become (row, column) in increasing mode order. slice(T, 3, l) is
/// T(:, :, l).
Matrix slice(const Tensor3& t, int mode, std::size_t index);

double inf_norm(const Tensor3& t) noexcept;
double fro_norm(const Tensor3& t) noexcept;
double inf_norm(const SparseTensor3& t) noexcept;
double fro_norm(const SparseTensor3& t) noexcept;

/// Lower bound on max_{|v|=1} |T(v, v, v)| from `restarts` random starts with
/// `iters` power iterations each. Deterministic in `seed`.
double spectral_norm_estimate(const Tensor3& t, int restarts, int iters, std::uint64_t seed);

/// Average of t over the six index permutations.
Tensor3 symmetric_part(const Tensor3& t);

/// Keeps exactly the entries with |value| >= zeta (zeta > 0).
SparseTensor3 hard_threshold(const Tensor3& t, double zeta);

/// Symmetric embedding of an n1 x n2 x n3 tensor into an N x N x N tensor,
/// N = n1 + n2 + n3. A(a, b, c) is written to all six permutations of
/// (a, n1 + b, n1 + n2 + c); every other entry is zero.
Tensor3 sym_embed(const Tensor3& a);

}  // namespace rtd
