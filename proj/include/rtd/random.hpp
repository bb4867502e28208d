#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace rtd {

using Rng = std::mt19937_64;

/// Deterministic generator for the stream identified by (seed, stream...).
/// Two different stream tuples give statistically independent sequences, so
/// parallel workers can each derive their own generator without sharing state.
Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {});

Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n);

/// Uniformly distributed point on the unit sphere in R^n.
Eigen::VectorXd random_unit(Rng& rng, Eigen::Index n);

}  // namespace rtd
