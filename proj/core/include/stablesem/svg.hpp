#pragma once

#include <string>
#include <vector>

#include "stablesem/stability.hpp"

namespace stablesem {

/// Line plot of one stability graph: complexity on x, probability on y, one line per pair that
/// is ever nonzero, a dashed horizontal line at pi_sel and a dashed vertical line at pi_bic.
/// Pass pi_bic < 0 to omit the vertical line.
[[nodiscard]] std::string stability_svg(const StabilityGraph& g, const std::vector<std::string>& names, double pi_sel,
                                        int pi_bic, const std::string& title);

} // namespace stablesem
