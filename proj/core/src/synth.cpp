#include "crossview/synth.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "crossview/csv.hpp"
#include "crossview/pairing.hpp"
#include "crossview/raster.hpp"

namespace crossview::synth {

namespace fs = std::filesystem;
using geo::Point;
using nlohmann::json;

namespace {

struct Building {
    std::string id;
    Point center;
    double side = 10.0;
    bool residential = true;
    AttributeLabelSet labels;
    double roof_brightness = 140.0;
    double wall_brightness = 140.0;
    int veg_cue = 0;  // bit 1: aerial rooftop cue, bit 2: facade cue
    std::vector<Point> ring() const {
        const double h = side / 2.0;
        return {{center.x - h, center.y - h},
                {center.x + h, center.y - h},
                {center.x + h, center.y + h},
                {center.x - h, center.y + h}};
    }
};

int sample_class(std::mt19937_64& rng, const std::vector<double>& probs) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        x -= probs[i];
        if (x <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

cv::Vec3b tinted_color(const std::array<double, 3>& tint_rgb, double target_brightness) {
    const double sum = tint_rgb[0] + tint_rgb[1] + tint_rgb[2];
    const double k = target_brightness * 3.0 / sum;
    // OpenCV is BGR.
    return cv::Vec3b(static_cast<uchar>(std::clamp(tint_rgb[2] * k, 0.0, 255.0)),
                     static_cast<uchar>(std::clamp(tint_rgb[1] * k, 0.0, 255.0)),
                     static_cast<uchar>(std::clamp(tint_rgb[0] * k, 0.0, 255.0)));
}

std::array<double, 3> roof_tint(int roof_class) {
    switch (roof_class) {
        case 0: return {1.0, 1.0, 1.0};     // Metal
        case 1: return {1.0, 0.97, 0.93};   // Concrete
        case 2: return {0.95, 0.55, 0.45};  // Clay
        case 3: return {0.55, 0.65, 1.0};   // Tarpaulin
        case 4: return {0.75, 0.60, 0.45};  // Wood
        default: return {0.9, 0.9, 0.9};    // Unclear
    }
}

std::array<double, 3> wall_tint(int wall_class) {
    switch (wall_class) {
        case 0: return {0.95, 0.95, 1.0};   // Metal
        case 1: return {0.95, 0.93, 0.88};  // Concrete
        case 2: return {0.9, 0.5, 0.4};     // Brick
        case 3: return {0.7, 0.55, 0.4};    // Wood
        default: return {0.85, 0.85, 0.85}; // Unclear
    }
}

double floors_height_m(int floors_class) {
    switch (floors_class) {
        case 0: return 3.0;
        case 1: return 6.0;
        case 2: return 9.0;
        case 3: return 13.0;
        default: return 4.5;  // Unclear
    }
}

}  // namespace

SyntheticScene generate_synthetic_scene(const SynthSpec& spec, const std::string& out_dir) {
    if (spec.n_buildings <= 0) throw std::invalid_argument("zero buildings requested");
    std::mt19937_64 rng(spec.seed);

    const int per_row =
        std::max(4, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.n_buildings)))));
    const double margin = 30.0;

    std::vector<Building> buildings;
    std::vector<double> street_ys;

    std::uniform_real_distribution<double> roof_b_dist(60.0, 220.0);
    std::uniform_real_distribution<double> wall_b_dist(80.0, 200.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    auto assign_labels = [&](Building& b) {
        b.labels.building_id = b.id;
        b.labels.set(Task::Openness, sample_class(rng, {0.70, 0.20, 0.10}));
        b.labels.set(Task::Floors, sample_class(rng, {0.55, 0.25, 0.10, 0.05, 0.05}));
        b.labels.set(Task::Vegetation, sample_class(rng, {0.50, 0.50}));
        b.labels.set(Task::Wall, sample_class(rng, {0.20, 0.50, 0.15, 0.10, 0.05}));
        b.labels.set(Task::Roof, sample_class(rng, {0.40, 0.15, 0.20, 0.10, 0.10, 0.05}));
        b.roof_brightness = roof_b_dist(rng);
        b.wall_brightness = wall_b_dist(rng);
        if (b.labels.get(Task::Vegetation) == 0) b.veg_cue = 3;
    };

    for (int i = 0; i < spec.n_buildings; ++i) {
        const int row = i / per_row;
        const int col = i % per_row;
        const int street = row / 2;
        const int side = row % 2;  // 0: north of street, 1: south
        const double street_y = street * spec.street_spacing_m;
        if (static_cast<int>(street_ys.size()) <= street) street_ys.push_back(street_y);

        Building b;
        b.id = "b" + std::to_string(1000 + i);
        b.side = spec.building_side_m;
        const double off = spec.row_offset_m + b.side / 2.0;
        b.center = {margin + col * spec.building_pitch_m,
                    street_y + (side == 0 ? off : -off)};
        b.residential = coin(rng) < spec.pct_residential;
        assign_labels(b);
        buildings.push_back(std::move(b));
    }

    // Deterministic complementary-cue split (alternate over veg=Yes order).
    if (spec.complementary_vegetation_cues) {
        int k = 0;
        for (auto& b : buildings)
            if (b.labels.get(Task::Vegetation) == 0) b.veg_cue = (k++ % 2 == 0) ? 1 : 2;
    }

    // Extra too-far buildings: 45 m from the first street.
    for (int i = 0; i < spec.n_too_far; ++i) {
        Building b;
        b.id = "far" + std::to_string(100 + i);
        b.side = spec.building_side_m;
        b.center = {margin + i * spec.building_pitch_m, street_ys.front() + 45.0};
        b.residential = true;
        assign_labels(b);
        buildings.push_back(std::move(b));
    }
    // Extra obstructed buildings: directly behind a front-row building.
    for (int i = 0; i < spec.n_obstructed && i < per_row; ++i) {
        const Building& front = buildings[static_cast<std::size_t>(i)];
        Building b;
        b.id = "obs" + std::to_string(100 + i);
        b.side = spec.building_side_m;
        // Close enough to match (< 30 m from the street) but fully behind the
        // front-row building it shadows.
        b.center = {front.center.x, front.center.y + spec.building_side_m + 2.0};
        b.residential = true;
        assign_labels(b);
        buildings.push_back(std::move(b));
    }

    // ---------------------------------------------------------------- files
    fs::create_directories(out_dir);
    SyntheticScene scene;
    scene.dir = out_dir;
    scene.n_buildings = static_cast<int>(buildings.size());

    // Extent.
    double xmin = 1e18, xmax = -1e18, ymin = 1e18, ymax = -1e18;
    for (const auto& b : buildings) {
        xmin = std::min(xmin, b.center.x - b.side);
        xmax = std::max(xmax, b.center.x + b.side);
        ymin = std::min(ymin, b.center.y - b.side);
        ymax = std::max(ymax, b.center.y + b.side);
    }
    for (double y : street_ys) {
        ymin = std::min(ymin, y - 10.0);
        ymax = std::max(ymax, y + 10.0);
    }
    xmin -= 25.0; xmax += 25.0; ymin -= 25.0; ymax += 25.0;

    // Footprints GeoJSON.
    {
        json doc;
        doc["type"] = "FeatureCollection";
        doc["crs"] = "local";
        json features = json::array();
        for (const auto& b : buildings) {
            json f;
            f["type"] = "Feature";
            f["properties"] = {{"id", b.id}, {"residential", b.residential}};
            json coords = json::array();
            json ring = json::array();
            auto verts = b.ring();
            verts.push_back(verts.front());
            for (const Point& p : verts) ring.push_back({p.x, p.y});
            coords.push_back(std::move(ring));
            f["geometry"] = {{"type", "Polygon"}, {"coordinates", std::move(coords)}};
            features.push_back(std::move(f));
        }
        doc["features"] = std::move(features);
        scene.footprints_path = (fs::path(out_dir) / "footprints.geojson").string();
        std::ofstream(scene.footprints_path) << doc.dump(1) << "\n";
    }

    // Labels CSV (residential buildings only, mirroring an annotation file).
    {
        csv::Table t;
        t.header = {"building_id", "openness", "floors", "vegetation", "wall", "roof"};
        for (const auto& b : buildings) {
            if (!b.residential) continue;
            std::vector<std::string> row = {b.id};
            for (Task task : kAllTasks) row.push_back(b.labels.token(task));
            t.rows.push_back(std::move(row));
            scene.truth_labels[b.id] = b.labels;
            scene.truth_roof_brightness[b.id] = b.roof_brightness;
        }
        scene.labels_path = (fs::path(out_dir) / "labels.csv").string();
        csv::write_file(scene.labels_path, t);
    }

    // Aerial raster.
    const double gsd = spec.aerial_gsd_m;
    const int img_w = static_cast<int>(std::ceil((xmax - xmin) / gsd));
    const int img_h = static_cast<int>(std::ceil((ymax - ymin) / gsd));
    geo::GeoTransform aerial_t = geo::GeoTransform::north_up({xmin, ymax}, gsd);
    {
        cv::Mat img(img_h, img_w, CV_8UC3, cv::Scalar(150, 160, 175));  // bare ground
        // Streets.
        for (double y : street_ys) {
            const Point a = aerial_t.world_to_pixel({xmin, y});
            const Point b2 = aerial_t.world_to_pixel({xmax, y});
            cv::line(img, {static_cast<int>(a.x), static_cast<int>(a.y)},
                     {static_cast<int>(b2.x), static_cast<int>(b2.y)}, cv::Scalar(90, 90, 90),
                     static_cast<int>(8.0 / gsd));
        }
        for (const auto& b : buildings) {
            std::vector<cv::Point> poly;
            for (const Point& v : b.ring()) {
                const Point px = aerial_t.world_to_pixel(v);
                poly.emplace_back(static_cast<int>(px.x), static_cast<int>(px.y));
            }
            cv::fillConvexPoly(img, poly, tinted_color(roof_tint(b.labels.get(Task::Roof)),
                                                       b.roof_brightness));
            if (b.veg_cue & 1) {
                const Point c = aerial_t.world_to_pixel(b.center);
                cv::circle(img, {static_cast<int>(c.x), static_cast<int>(c.y)},
                           static_cast<int>(0.38 * b.side / gsd), cv::Scalar(30, 190, 30),
                           cv::FILLED);
            }
        }
        scene.aerial_path = (fs::path(out_dir) / "aerial.png").string();
        geo::Raster(img, aerial_t).save_image(scene.aerial_path);
    }

    // TIR grid.
    {
        const double cell = spec.tir_cell_m;
        const int gw = static_cast<int>(std::ceil((xmax - xmin) / cell));
        const int gh = static_cast<int>(std::ceil((ymax - ymin) / cell));
        geo::GeoTransform t = geo::GeoTransform::north_up({xmin, ymax}, cell);
        cv::Mat grid(gh, gw, CV_32FC1);
        std::normal_distribution<double> noise(0.0, spec.tir_noise_std);
        for (int r = 0; r < gh; ++r)
            for (int c = 0; c < gw; ++c)
                grid.at<float>(r, c) = static_cast<float>(spec.tir_base + noise(rng));
        for (const auto& b : buildings) {
            double v = spec.tir_base + noise(rng);
            if (b.labels.get(Task::Vegetation) == 0) v += spec.vegetation_tir_delta;
            v += spec.roof_brightness_tir_slope * (b.roof_brightness - 140.0) / 100.0;
            geo::Ring ring(b.ring());
            for (int r = 0; r < gh; ++r)
                for (int c = 0; c < gw; ++c) {
                    const Point center = t.pixel_to_world(c + 0.5, r + 0.5);
                    if (ring.contains(center))
                        grid.at<float>(r, c) = static_cast<float>(v + noise(rng) * 0.1);
                }
        }
        scene.tir_path = (fs::path(out_dir) / "tir.asc").string();
        geo::Raster(grid, t, -9999.0).save_ascii_grid(scene.tir_path);
    }

    // Captures + panoramas.
    {
        scene.panorama_dir = (fs::path(out_dir) / "panoramas").string();
        fs::create_directories(scene.panorama_dir);

        std::vector<BuildingFootprint> footprints;
        for (const auto& b : buildings) {
            BuildingFootprint fp;
            fp.id = b.id;
            fp.polygon = geo::Ring(b.ring());
            fp.centroid = fp.polygon.centroid();
            fp.is_residential = b.residential;
            footprints.push_back(std::move(fp));
        }
        pairing::FootprintIndex index(&footprints);
        std::map<std::string, const Building*> by_id;
        for (const auto& b : buildings) by_id[b.id] = &b;

        csv::Table captures;
        captures.header = {"id", "x", "y", "heading_deg", "image_path", "width_px", "height_px"};
        const int W = spec.pano_width_px, H = spec.pano_height_px;
        const double heading = 90.0;  // driving east along the street
        int cap_idx = 0;
        for (std::size_t s = 0; s < street_ys.size(); ++s) {
            for (double x = xmin + 5.0; x <= xmax - 5.0; x += spec.capture_spacing_m) {
                const Point pos{x, street_ys[s]};
                char idbuf[32];
                std::snprintf(idbuf, sizeof(idbuf), "cap%05d", cap_idx++);
                const std::string cap_id = idbuf;
                const std::string img_path =
                    (fs::path(scene.panorama_dir) / (cap_id + ".png")).string();

                cv::Mat pano(H, W, CV_8UC3);
                const int horizon = H / 2;
                for (int r = 0; r < H; ++r) {
                    const cv::Vec3b px = r < horizon ? cv::Vec3b(235, 210, 180)   // sky
                                                     : cv::Vec3b(100, 110, 120);  // ground
                    pano.row(r).setTo(px);
                }
                for (int c = 0; c < W; ++c) {
                    const double rel = pairing::column_to_relative_angle(
                        c, heading, W, pairing::PanoramaConvention::HeadingStart);
                    const double bearing = geo::normalize_deg(rel + heading);
                    const double rad = bearing * M_PI / 180.0;
                    const Point end = pos + Point{300.0 * std::sin(rad), 300.0 * std::cos(rad)};
                    // Nearest building hit along this column's ray.
                    double best_t = 1e18;
                    const Building* hit = nullptr;
                    for (int idx : index.candidates_near_segment(pos, end)) {
                        const auto& fp = footprints[static_cast<std::size_t>(idx)];
                        auto ts = geo::segment_ring_crossings(pos, end, fp.polygon);
                        if (!ts.empty() && ts.front() < best_t) {
                            best_t = ts.front();
                            hit = by_id.at(fp.id);
                        }
                    }
                    if (!hit) continue;
                    const double dist = best_t * 300.0;
                    if (dist < 1.0) continue;
                    const double wall_h_m = floors_height_m(hit->labels.get(Task::Floors));
                    const int up = std::clamp(
                        static_cast<int>(0.8 * H * wall_h_m / (2.0 * M_PI * dist) * 4.0), 3,
                        horizon - 2);
                    const int down = std::clamp(up / 3, 2, H - horizon - 1);
                    const bool gap =
                        hit->labels.get(Task::Openness) == 1 && (c % 12) < 3;  // Partial
                    if (gap) continue;
                    const cv::Vec3b wall =
                        tinted_color(wall_tint(hit->labels.get(Task::Wall)), hit->wall_brightness);
                    const cv::Vec3b roof =
                        tinted_color(roof_tint(hit->labels.get(Task::Roof)), hit->roof_brightness);
                    for (int r = horizon - up; r < horizon + down; ++r)
                        pano.at<cv::Vec3b>(r, c) = wall;
                    // A sliver of roof above the wall.
                    for (int r = std::max(0, horizon - up - 3); r < horizon - up; ++r)
                        pano.at<cv::Vec3b>(r, c) = roof;
                    if ((hit->veg_cue & 2) && (c % 6) < 4) {
                        // Creeper stripes over the full wall height; alternate
                        // columns keep the wall material visible.
                        for (int r = horizon - up; r < horizon + down; ++r)
                            pano.at<cv::Vec3b>(r, c) = cv::Vec3b(30, 190, 30);
                    }
                }
                cv::imwrite(img_path, pano);

                captures.rows.push_back({cap_id, std::to_string(pos.x), std::to_string(pos.y),
                                         std::to_string(heading), "panoramas/" + cap_id + ".png",
                                         std::to_string(W), std::to_string(H)});
            }
        }
        scene.n_captures = cap_idx;
        scene.captures_path = (fs::path(out_dir) / "captures.csv").string();
        csv::write_file(scene.captures_path, captures);
    }

    return scene;
}

}  // namespace crossview::synth
