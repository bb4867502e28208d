#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rtd/io.hpp"
#include "rtd/random.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

enum class SparsityModel { none, entrywise, block };
enum class FactorDist { gaussian, rademacher };

std::string to_string(SparsityModel m);
std::string to_string(FactorDist d);
SparsityModel parse_sparsity_model(const std::string& s);
FactorDist parse_factor_dist(const std::string& s);

struct SynthSpec {
  std::size_t n = 50;
  std::size_t r = 3;
  SparsityModel sparsity = SparsityModel::block;
  /// Expected support size per vector (block) or per fiber (entrywise).
  std::size_t d = 5;
  /// Number of blocks for the block model.
  std::size_t B = 5;
  /// Upper bound on measured_incoherence; factors are redrawn up to 50 times.
  std::optional<double> mu_target;
  bool orthonormalize = true;
  FactorDist factor_dist = FactorDist::gaussian;
  /// Component weights; empty means all 1.
  std::vector<double> lambdas;
  /// Rows of U zeroed before orthonormalisation (raises coherence).
  std::size_t zero_rows = 0;
  /// Symmetrise the corruption. Unset: entrywise stays asymmetric, blocks are
  /// symmetrised.
  std::optional<bool> symmetrize;
  /// Multiply corruption values by independent random signs.
  bool random_signs = false;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when the fields are inconsistent.
  void validate() const;
  [[nodiscard]] bool symmetric_corruption() const;
  /// [r / (2 n^1.5), r / n^1.5]
  [[nodiscard]] double value_low() const;
  [[nodiscard]] double value_high() const;
};

struct LowRankInstance {
  FactorModel model;
  Tensor3 tensor;
  double mu = 0.0;
  int attempts = 1;
};

struct BlockSparse {
  SparseTensor3 s;
  /// 0/1 support vectors, one per block.
  std::vector<Vector> psis;
};

struct Instance {
  SynthSpec spec;
  FactorModel low_rank;
  Tensor3 low_rank_tensor;
  SparseTensor3 sparse;
  std::vector<Vector> psis;
  /// low_rank_tensor + sparse
  Tensor3 tensor;
  double mu = 0.0;
  double eta = 0.0;
  /// Largest realised block support (block model), 0 otherwise.
  std::size_t max_support = 0;
};

LowRankInstance gen_low_rank(const SynthSpec& spec, Rng& rng);
double measured_incoherence(const FactorModel& f);
SparseTensor3 gen_sparse_entrywise(const SynthSpec& spec, Rng& rng);
BlockSparse gen_sparse_block(const SynthSpec& spec, Rng& rng);
/// max_{i != j} <psi_i, psi_j> / d with d the largest support; 0 for fewer
/// than two vectors.
double measured_eta(const std::vector<Vector>& psis);

/// Full instance, deterministic in spec.seed. The low-rank and sparse parts
/// draw from separate streams.
Instance make_instance(const SynthSpec& spec);

/// Flat description of the instance parameters and measured quantities.
KeyValues instance_metadata(const Instance& inst);
/// Parses the keys written by instance_metadata; throws on unknown keys.
SynthSpec spec_from_key_values(const KeyValues& kv);
/// Applies one spec key; false when the key is not a spec field.
bool set_spec_field(SynthSpec& s, const std::string& key, const std::string& value);

}  // namespace rtd
