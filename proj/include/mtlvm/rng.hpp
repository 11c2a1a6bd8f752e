#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mtlvm {

// Seedable generator passed explicitly to every stochastic operation.
// split() derives an independent child stream from a label, so parallel
// work (e.g. per-entity synthesis) stays reproducible regardless of
// scheduling.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  Rng split(std::uint64_t label) const {
    return Rng(mix(state_hash() ^ mix(label)));
  }

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    return std::uniform_int_distribution<int>(0, n - 1)(engine_);
  }

  double gamma(double shape) {
    return std::gamma_distribution<double>(shape, 1.0)(engine_);
  }

  // Index sampled proportionally to the given nonnegative weights.
  int categorical(const std::vector<double>& weights);

  // Index sampled proportionally to exp(logw - max(logw)).
  int log_categorical(const std::vector<double>& log_weights);

  std::vector<double> dirichlet(const std::vector<double>& alpha);
  std::vector<double> symmetric_dirichlet(double alpha, int dim);

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  std::uint64_t state_hash() const {
    std::hash<std::string> h;
    return h(serialize());
  }

  std::mt19937_64 engine_;
};

}  // namespace mtlvm
