#include "crossview/features.hpp"

#include <algorithm>
#include <cmath>

namespace crossview::features {

double brightness(const cv::Mat& chip, const cv::Vec3b& fill_value) {
    if (chip.empty() || chip.type() != CV_8UC3)
        throw FeatureError("brightness expects a CV_8UC3 chip");
    double sum = 0.0;
    long count = 0;
    for (int r = 0; r < chip.rows; ++r) {
        for (int c = 0; c < chip.cols; ++c) {
            const cv::Vec3b v = chip.at<cv::Vec3b>(r, c);
            if (v == fill_value) continue;
            sum += (static_cast<double>(v[0]) + v[1] + v[2]) / 3.0;
            count++;
        }
    }
    if (count == 0) throw FeatureError("brightness over an empty mask");
    return sum / static_cast<double>(count);
}

std::optional<double> mean_dist_4nn(const BuildingFootprint& building,
                                    const std::vector<BuildingFootprint>& all_footprints) {
    std::vector<double> dists;
    dists.reserve(all_footprints.size());
    for (const auto& other : all_footprints) {
        if (other.id == building.id) continue;
        dists.push_back(geo::distance(building.centroid, other.centroid));
    }
    if (dists.size() < 4) return std::nullopt;
    std::partial_sort(dists.begin(), dists.begin() + 4, dists.end());
    return (dists[0] + dists[1] + dists[2] + dists[3]) / 4.0;
}

std::pair<double, bool> zonal_tir(const geo::Raster& tir_raster,
                                  const BuildingFootprint& footprint) {
    const cv::Mat& grid = tir_raster.data();
    if (grid.type() != CV_32FC1) throw FeatureError("zonal_tir expects a CV_32FC1 raster");

    if (!tir_raster.world_in_bounds(footprint.centroid)) return {0.0, false};

    geo::Point lo, hi;
    footprint.polygon.bounding_box(lo, hi);
    const geo::Point plo = tir_raster.transform().world_to_pixel({lo.x, hi.y});
    const geo::Point phi = tir_raster.transform().world_to_pixel({hi.x, lo.y});
    const int c0 = std::clamp(static_cast<int>(std::floor(std::min(plo.x, phi.x))), 0, grid.cols - 1);
    const int c1 = std::clamp(static_cast<int>(std::ceil(std::max(plo.x, phi.x))), 0, grid.cols - 1);
    const int r0 = std::clamp(static_cast<int>(std::floor(std::min(plo.y, phi.y))), 0, grid.rows - 1);
    const int r1 = std::clamp(static_cast<int>(std::ceil(std::max(plo.y, phi.y))), 0, grid.rows - 1);

    const auto nodata = tir_raster.nodata();
    double sum = 0.0;
    long count = 0;
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
            const geo::Point center = tir_raster.pixel_center_world(c, r);
            if (!footprint.polygon.contains(center)) continue;
            const float v = grid.at<float>(r, c);
            if (nodata && static_cast<double>(v) == *nodata) continue;
            sum += v;
            count++;
        }
    }
    if (count > 0) return {sum / static_cast<double>(count), true};

    // Footprint smaller than a pixel: take the pixel containing the centroid.
    const geo::Point px = tir_raster.transform().world_to_pixel(footprint.centroid);
    const int ic = std::clamp(static_cast<int>(px.x), 0, grid.cols - 1);
    const int ir = std::clamp(static_cast<int>(px.y), 0, grid.rows - 1);
    const float v = grid.at<float>(ir, ic);
    if (nodata && static_cast<double>(v) == *nodata) return {0.0, false};
    return {static_cast<double>(v), true};
}

}  // namespace crossview::features
