#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossview/crs.hpp"
#include "crossview/geometry.hpp"
#include "crossview/labels.hpp"

namespace crossview {

class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BuildingFootprint {
    std::string id;
    geo::Ring polygon;  // projected metric coordinates, CCW normalized
    geo::Point centroid;
    bool is_residential = false;
};

struct CaptureSample {
    std::string id;
    geo::Point position;      // projected metric coordinates
    double heading_deg = 0.0; // direction of travel, [0, 360)
    std::string image_ref;
    int width_px = 0;
    int height_px = 0;
};

struct FootprintLoadOptions {
    std::string crs_spec = "local";       // see geo::Projection::parse
    std::string residential_field = "residential";
};

struct FootprintLoadReport {
    std::vector<BuildingFootprint> footprints;
    int dropped_invalid = 0;
};

struct CaptureLoadOptions {
    bool require_image_files = false;  // error (true) vs warn on missing image paths
};

struct CaptureLoadReport {
    std::vector<CaptureSample> captures;
    int dropped_missing_heading = 0;
    int missing_image_files = 0;
};

/// GeoJSON-style vector file: FeatureCollection of Polygon features with a
/// string id and the configured residential tag field. Degenerate geometries
/// are dropped and counted.
FootprintLoadReport load_footprints(const std::string& path, const FootprintLoadOptions& opts);

/// Capture index CSV with columns (id, x, y, heading_deg, image_path) and
/// optional (width_px, height_px). Headings are normalized to [0, 360); rows
/// with a missing heading are dropped and counted.
CaptureLoadReport load_capture_index(const std::string& path,
                                     const CaptureLoadOptions& opts = {});

/// Labels CSV: columns (building_id, openness, floors, vegetation, wall,
/// roof). Unknown class tokens and duplicate ids are errors.
std::map<std::string, AttributeLabelSet> load_labels(const std::string& path);

/// Per-task class counts and percentage shares, in vocabulary order.
struct LabelSummaryRow {
    Task task;
    std::string cls;
    int count = 0;
    double percent = 0.0;
};
std::vector<LabelSummaryRow> summarize_labels(const std::map<std::string, AttributeLabelSet>& labels);

std::vector<BuildingFootprint> residential_subset(const std::vector<BuildingFootprint>& all);

}  // namespace crossview
