#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "error.hpp"

namespace selekt {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

// Linear interpolation between order statistics (R type 7).
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapCI bootstrap_ci(std::span<const double> values, double level, int resamples,
                         std::uint64_t seed) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "bootstrap of an empty sample");
  require(level > 0.0 && level < 1.0, ErrorCode::kInvalidArgument, "level must be in (0,1)");
  require(resamples >= 1, ErrorCode::kInvalidArgument, "resamples must be >= 1");
  BootstrapCI ci;
  ci.level = level;
  ci.resamples = resamples;
  double sum = 0.0;
  for (double v : values) sum += v;
  const std::size_t n = values.size();
  ci.mean = sum / static_cast<double>(n);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> means(resamples);
  for (int r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[pick(rng)];
    means[r] = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  ci.lower = std::min(quantile(means, tail), ci.mean);
  ci.upper = std::max(quantile(means, 1.0 - tail), ci.mean);
  return ci;
}

void to_json(nlohmann::json& j, const BootstrapCI& ci) {
  j = {{"mean", ci.mean}, {"lower", ci.lower}, {"upper", ci.upper},
       {"level", ci.level}, {"resamples", ci.resamples}};
}

void from_json(const nlohmann::json& j, BootstrapCI& ci) {
  ci.mean = j.at("mean").get<double>();
  ci.lower = j.at("lower").get<double>();
  ci.upper = j.at("upper").get<double>();
  ci.level = j.value("level", 0.95);
  ci.resamples = j.value("resamples", 10000);
}

}  // namespace selekt
