#pragma once

#include <cstdint>
#include <span>

#include <json.hpp>

namespace selekt {

// 64-bit mixer used to derive independent sub-seeds (init, split, shuffle)
// from one run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

struct BootstrapCI {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  int resamples = 10000;
};

// Percentile bootstrap of the mean.
BootstrapCI bootstrap_ci(std::span<const double> values, double level = 0.95,
                         int resamples = 10000, std::uint64_t seed = 0);

void to_json(nlohmann::json& j, const BootstrapCI& ci);
void from_json(const nlohmann::json& j, BootstrapCI& ci);

}  // namespace selekt
