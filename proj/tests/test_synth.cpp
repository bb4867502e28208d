#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "rtd/synth.hpp"

using namespace rtd;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.n = 20;
  s.r = 3;
  s.d = 4;
  s.B = 3;
  s.seed = 5;
  return s;
}

}  // namespace

TEST(SynthSpec, ValueRange) {
  SynthSpec s;
  s.n = 100;
  s.r = 5;
  EXPECT_DOUBLE_EQ(s.value_low(), 5.0 / 2000.0);
  EXPECT_DOUBLE_EQ(s.value_high(), 5.0 / 1000.0);
}

TEST(SynthSpec, RejectsInconsistentFields) {
  SynthSpec s = small_spec();
  s.r = 21;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_spec();
  s.d = 21;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_spec();
  s.lambdas = {1.0, 2.0};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_spec();
  s.mu_target = 0.5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_spec();
  s.B = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(GenLowRank, OrthonormalFactorsWithWeights) {
  SynthSpec s = small_spec();
  s.lambdas = {3.0, 2.0, 1.0};
  Rng rng = make_rng(1);
  const LowRankInstance low = gen_low_rank(s, rng);
  const Matrix u = low.model.factors();
  EXPECT_LE((u.transpose() * u - Matrix::Identity(3, 3)).norm(), 1e-12);
  EXPECT_EQ(low.model.lambdas(), Vector::LinSpaced(3, 3.0, 1.0));
  EXPECT_EQ(low.tensor, low.model.materialize());
  EXPECT_DOUBLE_EQ(low.mu, measured_incoherence(low.model));
}

TEST(GenLowRank, IncoherenceTargetAndFailure) {
  SynthSpec s = small_spec();
  s.mu_target = 3.0;
  Rng rng = make_rng(2);
  EXPECT_LE(gen_low_rank(s, rng).mu, 3.0);
  s.mu_target = 1.0;  // only reachable by flat vectors, never after QR of random draws
  try {
    gen_low_rank(s, rng);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("best achieved mu"), std::string::npos);
  }
}

TEST(GenLowRank, ZeroRowsRaiseCoherence) {
  SynthSpec s = small_spec();
  s.zero_rows = 15;
  Rng rng = make_rng(3);
  const LowRankInstance low = gen_low_rank(s, rng);
  EXPECT_GE(low.mu, std::sqrt(20.0 / 5.0) * 0.999);  // mass confined to 5 rows
}

TEST(MeasuredIncoherence, StandardBasisIsMaximal) {
  FactorModel f(16);
  Vector e = Vector::Zero(16);
  e(3) = 1.0;
  f.add(1.0, e);
  EXPECT_DOUBLE_EQ(measured_incoherence(f), 4.0);
  FactorModel g(16);
  g.add(1.0, Vector::Constant(16, 0.25));
  EXPECT_DOUBLE_EQ(measured_incoherence(g), 1.0);
}

TEST(GenSparseBlock, SupportIsUnionOfCubes) {
  const SynthSpec s = small_spec();
  Rng rng = make_rng(4);
  const BlockSparse b = gen_sparse_block(s, rng);
  ASSERT_EQ(b.psis.size(), 3u);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j)
      for (std::size_t k = 0; k < 20; ++k) {
        bool in = false;
        for (const auto& p : b.psis) in = in || (p(i) * p(j) * p(k) != 0.0);
        expected += in;
        EXPECT_EQ(b.s.contains(i, j, k), in);
      }
  EXPECT_EQ(b.s.nnz(), expected);
  EXPECT_TRUE(b.s.is_symmetric());
  for (const auto& e : b.s.entries()) {
    EXPECT_GE(e.value, s.value_low());
    EXPECT_LE(e.value, s.value_high());
  }
  for (const auto& p : b.psis) EXPECT_GT(p.sum(), 0.0);
}

TEST(GenSparseBlock, AsymmetricAndSignedVariants) {
  SynthSpec s = small_spec();
  s.symmetrize = false;
  s.random_signs = true;
  Rng rng = make_rng(5);
  const BlockSparse b = gen_sparse_block(s, rng);
  EXPECT_FALSE(b.s.is_symmetric());
  bool negative = false;
  for (const auto& e : b.s.entries()) {
    EXPECT_GE(std::abs(e.value), s.value_low());
    negative = negative || e.value < 0.0;
  }
  EXPECT_TRUE(negative);
}

TEST(GenSparseEntrywise, DensityAndSymmetryDefault) {
  SynthSpec s = small_spec();
  s.sparsity = SparsityModel::entrywise;
  s.d = 2;
  Rng rng = make_rng(6);
  const SparseTensor3 sp = gen_sparse_entrywise(s, rng);
  const double expected = 8000.0 * 2.0 / 20.0;
  EXPECT_NEAR(static_cast<double>(sp.nnz()), expected, 5.0 * std::sqrt(expected));
  EXPECT_FALSE(sp.is_symmetric());
  s.symmetrize = true;
  EXPECT_TRUE(gen_sparse_entrywise(s, rng).is_symmetric());
}

TEST(MeasuredEta, NormalisedOverlap) {
  Vector a = Vector::Zero(6), b = Vector::Zero(6);
  a << 1, 1, 1, 1, 0, 0;
  b << 0, 0, 1, 1, 1, 0;
  EXPECT_DOUBLE_EQ(measured_eta({a, b}), 2.0 / 4.0);
  EXPECT_EQ(measured_eta({a}), 0.0);
}

TEST(MakeInstance, DeterministicAndAdditive) {
  const SynthSpec s = small_spec();
  const Instance a = make_instance(s);
  const Instance b = make_instance(s);
  EXPECT_EQ(a.tensor, b.tensor);
  EXPECT_EQ(a.sparse, b.sparse);
  EXPECT_EQ(a.tensor, a.low_rank_tensor + a.sparse.densify());
  EXPECT_TRUE(a.tensor.is_symmetric(1e-15));
  SynthSpec other = s;
  other.seed = 6;
  EXPECT_NE(make_instance(other).tensor, a.tensor);
}

TEST(MakeInstance, SparseStreamIndependentOfLowRankSettings) {
  SynthSpec s = small_spec();
  const Instance a = make_instance(s);
  s.factor_dist = FactorDist::rademacher;
  s.mu_target = 10.0;
  const Instance b = make_instance(s);
  EXPECT_EQ(a.sparse, b.sparse);
}

TEST(Metadata, RoundTripsThroughKeyValues) {
  SynthSpec s = small_spec();
  s.lambdas = {3.0, 2.0, 0.5};
  s.mu_target = 4.0;
  s.factor_dist = FactorDist::rademacher;
  const Instance inst = make_instance(s);
  const KeyValues kv = instance_metadata(inst);
  const SynthSpec back = spec_from_key_values(kv);
  EXPECT_EQ(make_instance(back).tensor, inst.tensor);
  EXPECT_THROW(spec_from_key_values({{"nonsense", "1"}}), std::invalid_argument);
  SynthSpec t;
  EXPECT_TRUE(set_spec_field(t, "d", "7"));
  EXPECT_EQ(t.d, 7u);
  EXPECT_FALSE(set_spec_field(t, "method", "rtd"));
}
