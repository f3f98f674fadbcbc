#pragma once

#include <opencv2/core.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossview/geodata.hpp"
#include "crossview/raster.hpp"

namespace crossview::features {

class FeatureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FeatureRecord {
    std::string building_id;
    double roof_brightness = 0.0;   // [0,255], from the masked top chip
    double wall_brightness = 0.0;   // [0,255], from the masked facade chip
    std::optional<double> mean_dist_4nn_m;  // undefined with < 4 neighbors
    double tir_value = 0.0;
    bool tir_valid = false;
};

/// Mean of (R+G+B)/3 over pixels not equal to the fill value. Throws on an
/// empty selection.
double brightness(const cv::Mat& chip, const cv::Vec3b& fill_value);

/// Mean of the 4 smallest centroid-to-centroid distances to other buildings.
/// nullopt when fewer than 4 other footprints exist.
std::optional<double> mean_dist_4nn(const BuildingFootprint& building,
                                    const std::vector<BuildingFootprint>& all_footprints);

/// Mean of raster pixels whose centers fall inside the polygon, skipping
/// nodata; falls back to the pixel containing the centroid when no center is
/// inside. valid=false when the footprint misses the raster or everything is
/// nodata.
std::pair<double, bool> zonal_tir(const geo::Raster& tir_raster,
                                  const BuildingFootprint& footprint);

}  // namespace crossview::features
