#pragma once

#include <map>
#include <string>
#include <vector>

#include "crossview/geodata.hpp"
#include "crossview/labels.hpp"

namespace crossview::synth {

/// Knobs for the generated scene. Streets run along x; buildings sit in rows
/// on both sides of each street, close enough for the default 30 m matching
/// radius. Every label class is recoverable from the rendered imagery.
struct SynthSpec {
    int n_buildings = 50;
    uint64_t seed = 7;
    double pct_residential = 1.0;
    int n_too_far = 0;     // extra buildings placed beyond matching range
    int n_obstructed = 0;  // extra buildings placed behind a front-row blocker

    double street_spacing_m = 80.0;
    double building_pitch_m = 14.0;   // along-street spacing
    double building_side_m = 10.0;
    double row_offset_m = 12.0;       // street-to-front-wall distance
    double capture_spacing_m = 5.0;

    int pano_width_px = 1024;
    int pano_height_px = 512;
    double aerial_gsd_m = 0.25;
    double tir_cell_m = 3.5;

    // Planted attribute -> TIR effects.
    double tir_base = 40.0;
    double vegetation_tir_delta = -5.0;     // applied when vegetation = Yes
    double roof_brightness_tir_slope = -3.0;  // per 100 brightness units
    double tir_noise_std = 0.3;

    /// When set, vegetation cues are split: half the Yes-buildings show
    /// vegetation only in the aerial view (rooftop), half only in the
    /// street view (facade). Otherwise both views carry the cue.
    bool complementary_vegetation_cues = false;
};

struct SyntheticScene {
    std::string dir;
    std::string footprints_path;
    std::string captures_path;
    std::string labels_path;
    std::string aerial_path;
    std::string tir_path;
    std::string panorama_dir;
    int n_buildings = 0;
    int n_captures = 0;
    std::map<std::string, AttributeLabelSet> truth_labels;
    std::map<std::string, double> truth_roof_brightness;
};

/// Writes all four datasets (GeoJSON footprints, capture index CSV, labels
/// CSV, aerial PNG + world file, TIR ASCII grid, per-capture panoramas) in
/// the formats the ingest module reads.
SyntheticScene generate_synthetic_scene(const SynthSpec& spec, const std::string& out_dir);

}  // namespace crossview::synth
