#pragma once

#include <opencv2/core.hpp>

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossview/geodata.hpp"
#include "crossview/geometry.hpp"
#include "crossview/raster.hpp"

namespace crossview::pairing {

class PairingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Visibility { Usable, TooFar, Obstructed, NonResidential };

const std::string& visibility_name(Visibility v);

struct VisibilityVerdict {
    std::string building_id;
    Visibility status = Visibility::TooFar;
    std::optional<std::string> blocking_id;
};

struct CrossViewPair {
    std::string building_id;
    std::string capture_id;
    cv::Mat top_chip;     // chip_size x chip_size, CV_8UC3
    cv::Mat facade_chip;  // chip_size x chip_size, CV_8UC3
    double match_distance_m = 0.0;
    double mask_fraction_top = 0.0;
    double mask_fraction_facade = 0.0;
};

enum class PanoramaConvention {
    HeadingStart,   // column 0 looks along the driving direction
    HeadingCenter,  // center column looks along the driving direction
    NorthStart      // column 0 looks north
};

struct PairingConfig {
    double max_match_distance_m = 30.0;
    double pad_deg = 5.0;
    int chip_size = 256;
    double min_mask_fraction = 0.01;
    cv::Vec3b fill_value{128, 128, 128};
    double elevation_band_lo = 0.25;  // fraction of panorama height
    double elevation_band_hi = 0.75;
    PanoramaConvention convention = PanoramaConvention::HeadingStart;
    int obstruction_rays = 1;  // 1 = centroid sightline, 3 = fan
};

/// Uniform-grid point index over capture positions.
class CaptureIndex {
public:
    CaptureIndex(std::vector<CaptureSample> captures, double cell_size_m = 50.0);

    bool empty() const { return captures_.empty(); }
    const std::vector<CaptureSample>& captures() const { return captures_; }

    /// Capture minimizing Euclidean distance to p; ties broken by smaller id.
    std::optional<std::pair<const CaptureSample*, double>> nearest(geo::Point p) const;

private:
    std::vector<CaptureSample> captures_;
    double cell_ = 50.0;
    geo::Point origin_{0, 0};
    int nx_ = 0, ny_ = 0;
    std::vector<std::vector<int>> cells_;
};

/// Uniform-grid index over footprint bounding boxes for sightline queries.
class FootprintIndex {
public:
    explicit FootprintIndex(const std::vector<BuildingFootprint>* footprints,
                            double cell_size_m = 50.0);

    const std::vector<BuildingFootprint>& footprints() const { return *footprints_; }

    /// Indices of footprints whose bbox intersects the segment a->b bbox.
    std::vector<int> candidates_near_segment(geo::Point a, geo::Point b) const;

private:
    const std::vector<BuildingFootprint>* footprints_;
    double cell_ = 50.0;
    geo::Point origin_{0, 0};
    int nx_ = 0, ny_ = 0;
    std::vector<std::vector<int>> cells_;
};

std::optional<std::pair<const CaptureSample*, double>> nearest_capture(
    const BuildingFootprint& building, const CaptureIndex& index,
    double max_match_distance_m);

VisibilityVerdict visibility_test(const BuildingFootprint& building,
                                  const CaptureSample& capture,
                                  const FootprintIndex& all_footprints,
                                  const PairingConfig& cfg = {});

/// Angular window (relative to capture heading, degrees in [0,360), may wrap)
/// subtending the building's vertices, padded by pad_deg per side. Throws if
/// the capture position lies inside the polygon.
geo::Arc facade_angular_window(const CaptureSample& capture, const BuildingFootprint& building,
                               double pad_deg);

/// Fractional panorama column for a heading-relative angle.
double relative_angle_to_column(double theta_rel_deg, double heading_deg, int pano_width,
                                PanoramaConvention convention);

/// Heading-relative angle looking through the center of a panorama column.
double column_to_relative_angle(int col, double heading_deg, int pano_width,
                                PanoramaConvention convention);

/// Per-column building mask over the panorama: 1 when the column's bearing
/// ray hits the target footprint before any other footprint.
std::vector<uint8_t> facade_column_mask(const CaptureSample& capture,
                                        const BuildingFootprint& building,
                                        const FootprintIndex& index,
                                        const PairingConfig& cfg);

struct ChipResult {
    cv::Mat chip;
    double mask_fraction = 0.0;
};

/// Cut the angular window from an equirectangular panorama (wrapping across
/// the image edge when needed), blank non-building columns to the fill value,
/// and resample to chip_size^2.
ChipResult extract_facade_chip(const cv::Mat& panorama, const geo::Arc& window_rel,
                               const std::vector<uint8_t>& column_mask,
                               const PairingConfig& cfg, double heading_deg = 0.0);

/// Crop the footprint's padded square bbox from the aerial raster, mask
/// pixels outside the polygon to the fill value, resample to chip_size^2.
ChipResult extract_top_chip(const geo::Raster& uav_raster, const BuildingFootprint& footprint,
                            const PairingConfig& cfg);

struct DatasetCensus {
    int non_residential = 0;
    int too_far = 0;
    int obstructed = 0;
    int usable = 0;
    int chip_failures = 0;
};

/// Callback supplying the panorama image for a capture (lets callers cache).
using PanoramaProvider = std::function<cv::Mat(const CaptureSample&)>;

struct DatasetResult {
    std::vector<CrossViewPair> pairs;
    std::vector<VisibilityVerdict> verdicts;
    DatasetCensus census;
};

DatasetResult build_dataset(const std::vector<BuildingFootprint>& footprints,
                            const CaptureIndex& captures, const geo::Raster& uav_raster,
                            const PanoramaProvider& panoramas, const PairingConfig& cfg);

/// Writes `<building_id>_{top|facade}.png` chips plus `pairs_manifest.csv`.
void write_dataset(const DatasetResult& result, const std::string& out_dir);

}  // namespace crossview::pairing
