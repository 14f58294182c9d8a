#pragma once

#include "aggmogp/io.hpp"

#include <string>

namespace aggmogp {

/// Standalone SVG documents. Every data layer is a <g> element carrying the
/// data-to-pixel mapping as attributes (data-xmin, data-xmax, data-ymin,
/// data-ymax for the data window and data-left, data-right, data-top,
/// data-bottom for the pixel frame), so coordinates can be read back.

/// ELBO against iteration.
std::string plot_trace_svg(const TraceSeries &trace);

/// 1-D refinement plot: posterior mean line and a band of mean +- 2 sd.
std::string plot_band_svg(const GridTable &grid);

/// 2-D heatmap of the posterior mean, one rectangle per grid point.
std::string plot_heatmap_svg(const GridTable &grid);

} // namespace aggmogp
