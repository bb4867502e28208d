#include <cmath>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "rtd/experiment.hpp"

using namespace rtd;

namespace {

KeyValues small_bench() {
  return {{"n", "12"},        {"r", "1"},          {"d", "2"},          {"B", "2"},
          {"method", "rtd"},  {"method", "mrpca-slice"},                {"method", "mrpca-flat"},
          {"method", "rtd-w-true"},                 {"sweep_key", "d"},  {"sweep_value", "1"},
          {"sweep_value", "2"}, {"reps", "2"},     {"seed", "4"},       {"rtd.mode", "practical"},
          {"rtd.mu", "4"},    {"rtd.max_iters", "3"}, {"rtd.restarts", "4"}, {"mrpca.max_iters", "3"}};
}

}  // namespace

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::rtd, Method::rtd_w_true, Method::rtd_w_slice, Method::mrpca_slice, Method::mrpca_flat})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("pca"), std::invalid_argument);
}

TEST(ParseExperiment, ReadsAllKeyGroups) {
  const ExperimentConfig c = parse_experiment(small_bench());
  EXPECT_EQ(c.instance.n, 12u);
  EXPECT_EQ(c.methods.size(), 4u);
  EXPECT_EQ(c.points(), 2u);
  EXPECT_EQ(c.repetitions, 2);
  EXPECT_EQ(c.rtd.threshold_mode, ThresholdMode::practical);
  EXPECT_EQ(c.rtd.eig.n_restarts, 4);
  EXPECT_EQ(*c.mrpca.max_iters_per_stage, 3);
  EXPECT_THROW(parse_experiment({{"bogus", "1"}}), std::invalid_argument);
  EXPECT_THROW(parse_experiment({{"rtd.bogus", "1"}}), std::invalid_argument);
  EXPECT_THROW(parse_experiment({{"reps", "x"}}), std::invalid_argument);
  EXPECT_THROW(parse_experiment({{"method", "rtd"}, {"sweep_key", "nonsense"}, {"sweep_value", "1"}}),
               std::invalid_argument);
}

TEST(InstanceSeed, DistinctAcrossPointsAndReps) {
  EXPECT_NE(instance_seed(1, 0, 0), instance_seed(1, 0, 1));
  EXPECT_NE(instance_seed(1, 0, 0), instance_seed(1, 1, 0));
  EXPECT_EQ(instance_seed(1, 2, 3), instance_seed(1, 2, 3));
}

TEST(RunBench, RowsOrderedAndCsvWellFormed) {
  const ExperimentConfig c = parse_experiment(small_bench());
  const std::vector<BenchRow> rows = run_bench(c);
  ASSERT_EQ(rows.size(), 4u * 2u * 2u);
  EXPECT_EQ(rows[0].method, Method::rtd);
  EXPECT_EQ(rows[3].method, Method::rtd);
  EXPECT_EQ(rows[4].method, Method::mrpca_slice);
  EXPECT_EQ(rows[1].rep, 1);
  EXPECT_EQ(rows[2].d, 2u);
  for (const auto& r : rows) {
    EXPECT_NE(r.status, "error") << r.error;
    EXPECT_TRUE(std::isfinite(r.rel_error));
  }
  // The same instance is shared by every method at a given (point, rep).
  EXPECT_EQ(rows[0].seed, rows[4].seed);

  std::ostringstream raw, mean;
  write_bench_csv(raw, rows, false);
  write_mean_csv(mean, rows);
  std::istringstream in(raw.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "schema,method,n,r,d,B,seed,rep,rel_error,support_precision,iterations,status,error");
  int count = 0;
  while (std::getline(in, line)) {
    ++count;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 12) << line;
  }
  EXPECT_EQ(count, 16);
  std::istringstream min(mean.str());
  std::getline(min, line);
  EXPECT_EQ(line,
            "schema,method,n,r,d,B,reps,failures,mean_rel_error,mean_support_precision,mean_seconds,mean_iterations");
  count = 0;
  while (std::getline(min, line)) ++count;
  EXPECT_EQ(count, 8);

  std::ostringstream again;
  write_bench_csv(again, run_bench(c), false);
  EXPECT_EQ(again.str(), raw.str());
}

TEST(RunBench, FailuresBecomeErrorRows) {
  KeyValues kv = {{"n", "6"}, {"r", "2"}, {"mu_target", "1"}, {"method", "rtd"}, {"reps", "1"}};
  const std::vector<BenchRow> rows = run_bench(parse_experiment(kv));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].status, "error");
  EXPECT_NE(rows[0].error.find("mu_target"), std::string::npos);
  std::ostringstream mean;
  write_mean_csv(mean, rows);
  EXPECT_NE(mean.str().find(",1,1,"), std::string::npos);  // reps=1, failures=1
}

TEST(RunMethod, AsymmetricCorruptionIsSymmetrisedForTensorMethods) {
  SynthSpec s;
  s.n = 10;
  s.r = 1;
  s.sparsity = SparsityModel::entrywise;
  s.d = 1;
  s.seed = 2;
  const Instance inst = make_instance(s);
  ASSERT_FALSE(inst.tensor.is_symmetric(1e-12));
  ExperimentConfig cfg;
  cfg.instance = s;
  cfg.rtd.max_iters_per_stage = 2;
  cfg.rtd.eig.n_restarts = 4;
  EXPECT_NO_THROW(run_method(Method::rtd, inst, cfg));
  EXPECT_NO_THROW(run_method(Method::rtd_w_slice, inst, cfg));
}
