#pragma once

#include "kmex/core.hpp"
#include "kmex/metrics.hpp"

#include <string>
#include <vector>

namespace kmex {

/// Five-axis radar polygon ("larger area is better"); several named
/// score sets overlay in distinct colors.
std::string radar_svg(const std::vector<std::pair<std::string, RadarScores>>& entries);

/// Grid of images (raw pixel range [0,1]) with one caption under each.
std::string image_grid_svg(const std::vector<Tensorf>& images,
                           const std::vector<std::string>& captions, int columns,
                           int pixel_scale = 6);

}  // namespace kmex
