#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace driftscope {

// Stateless 64-bit mixer used to derive independent child seeds.
std::uint64_t splitmix64(std::uint64_t x);

// Combines a parent seed with a stream identifier.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream);

// Thin wrapper around mt19937_64. The variate transforms are written out
// explicitly so that sequences are identical across standard libraries
// (the std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential(double mean);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace driftscope
