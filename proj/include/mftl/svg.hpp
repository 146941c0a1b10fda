// mftl: minimal SVG plotting for rate reports (log-log scatter + fitted line).
// SPDX-License-Identifier: MIT
#pragma once

#include <string>

#include "mftl/analysis.hpp"

namespace mftl {

/// Renders a log-log scatter of the report's points (filled = used by the
/// fit, hollow = dropped) with the fitted power law drawn across the x-range
/// and the slope printed in the caption.
std::string rate_svg(const RateReport& report, const std::string& title);

void save_rate_svg(const std::string& path, const RateReport& report,
                   const std::string& title);

}  // namespace mftl
