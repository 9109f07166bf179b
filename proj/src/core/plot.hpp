#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "report.hpp"

namespace selekt {

// acc-vs-alpha, acc-vs-eps, acc-vs-steps, jacobian-vs-alpha, dims-vs-layer,
// corruption-bars
const std::vector<std::string>& figure_families();

// Renders one figure family as a standalone SVG document. `kind` selects a
// variant where the family has one (attack method for acc-vs-eps, matrix
// kind for dims-vs-layer, norm for jacobian-vs-alpha, acc|norm for
// corruption-bars). Throws naming the metric the summary lacks.
std::string render_figure(const Summary& summary, const std::string& fig,
                          const std::string& kind = "");

// Writes <out>/<fig>[-<kind>].svg; out defaults to <summary dir>/figures.
std::filesystem::path plot_figure(const std::filesystem::path& summary_json,
                                  const std::string& fig, const std::string& kind,
                                  const std::optional<std::filesystem::path>& out);

}  // namespace selekt
