#include "rtd/random.hpp"

#include <vector>

namespace rtd {

Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * stream.size());
  auto push = [&words](std::uint64_t x) {
    words.push_back(static_cast<std::uint32_t>(x & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(x >> 32));
  };
  push(seed);
  for (auto s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Eigen::VectorXd random_unit(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v = standard_normal(rng, n);
  double norm = v.norm();
  while (norm == 0.0) {
    v = standard_normal(rng, n);
    norm = v.norm();
  }
  return v / norm;
}

}  // namespace rtd
