#include "mtlvm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtlvm {

int Rng::categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("categorical: bad weight");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("categorical: zero mass");
  double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

int Rng::log_categorical(const std::vector<double>& log_weights) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) mx = std::max(mx, lw);
  if (!std::isfinite(mx))
    throw std::invalid_argument("log_categorical: all weights are -inf");
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - mx);
  return categorical(w);
}

std::vector<double> Rng::dirichlet(const std::vector<double>& alpha) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] <= 0.0) throw std::invalid_argument("dirichlet: alpha <= 0");
    // Boosted-gamma trick keeps small-shape draws away from exact zero.
    if (alpha[i] < 1.0) {
      double u = uniform();
      while (u <= 0.0) u = uniform();
      out[i] = gamma(alpha[i] + 1.0) * std::pow(u, 1.0 / alpha[i]);
    } else {
      out[i] = gamma(alpha[i]);
    }
    total += out[i];
  }
  if (total <= 0.0) return symmetric_dirichlet(1.0, static_cast<int>(alpha.size()));
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> Rng::symmetric_dirichlet(double alpha, int dim) {
  return dirichlet(std::vector<double>(dim, alpha));
}

}  // namespace mtlvm
