#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "calliope/error.hpp"
#include "calliope/rng.hpp"

namespace calliope {

/// Probabilities proportional to weight^(1/temperature), computed in log space.
inline std::vector<double> tempered_distribution(std::span<const double> weights, double temperature) {
  if (weights.empty()) throw Error(ErrorCode::EmptyWeights, "no candidates to sample from");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw Error(ErrorCode::InvalidArgument, "temperature must be positive");
  std::vector<double> logits;
  logits.reserve(weights.size());
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorCode::NonPositiveWeight, "weights must be positive");
    logits.push_back(std::log(w) / temperature);
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) total += (l = std::exp(l - top));
  for (double& l : logits) l /= total;
  return logits;
}

/// Draws an index with probability proportional to weight^(1/temperature).
inline std::size_t temperature_sample(std::span<const double> weights, double temperature, Rng& rng) {
  const auto probs = tempered_distribution(weights, temperature);
  double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    if (u < probs[i]) return i;
    u -= probs[i];
  }
  return probs.size() - 1;
}

/// Density level 0 means "pick one": uniform over 1..10.
inline int resolve_density(int level, Rng& rng) {
  if (level < 0 || level > 10) throw Error(ErrorCode::InvalidArgument, "density level must be in 0..10");
  if (level > 0) return level;
  return static_cast<int>(rng.uniform_int(1, 10));
}

}  // namespace calliope
