#include "crossview/pairing.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <unordered_map>

#include "crossview/csv.hpp"

namespace crossview::pairing {

namespace fs = std::filesystem;
using geo::Arc;
using geo::Point;

const std::string& visibility_name(Visibility v) {
    static const std::vector<std::string> names = {"usable", "too_far", "obstructed",
                                                   "non_residential"};
    switch (v) {
        case Visibility::Usable: return names[0];
        case Visibility::TooFar: return names[1];
        case Visibility::Obstructed: return names[2];
        case Visibility::NonResidential: return names[3];
    }
    return names[1];
}

// ---------------------------------------------------------------------------
// Spatial indexes

CaptureIndex::CaptureIndex(std::vector<CaptureSample> captures, double cell_size_m)
    : captures_(std::move(captures)), cell_(cell_size_m) {
    if (captures_.empty()) return;
    Point lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Point hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
    for (const auto& c : captures_) {
        lo.x = std::min(lo.x, c.position.x);
        lo.y = std::min(lo.y, c.position.y);
        hi.x = std::max(hi.x, c.position.x);
        hi.y = std::max(hi.y, c.position.y);
    }
    origin_ = lo;
    nx_ = std::max(1, static_cast<int>((hi.x - lo.x) / cell_) + 1);
    ny_ = std::max(1, static_cast<int>((hi.y - lo.y) / cell_) + 1);
    cells_.resize(static_cast<std::size_t>(nx_) * ny_);
    for (int i = 0; i < static_cast<int>(captures_.size()); ++i) {
        const Point p = captures_[static_cast<std::size_t>(i)].position;
        const int cx = std::clamp(static_cast<int>((p.x - origin_.x) / cell_), 0, nx_ - 1);
        const int cy = std::clamp(static_cast<int>((p.y - origin_.y) / cell_), 0, ny_ - 1);
        cells_[static_cast<std::size_t>(cy) * nx_ + cx].push_back(i);
    }
}

std::optional<std::pair<const CaptureSample*, double>> CaptureIndex::nearest(Point p) const {
    if (captures_.empty()) return std::nullopt;
    const int cx = std::clamp(static_cast<int>((p.x - origin_.x) / cell_), 0, nx_ - 1);
    const int cy = std::clamp(static_cast<int>((p.y - origin_.y) / cell_), 0, ny_ - 1);

    const CaptureSample* best = nullptr;
    double best_dist = std::numeric_limits<double>::max();
    const int max_ring = std::max(nx_, ny_);
    for (int ring = 0; ring <= max_ring; ++ring) {
        // Once a hit exists, cells in ring r are at least (r-1)*cell away.
        if (best && (ring - 1) * cell_ > best_dist) break;
        bool any_cell = false;
        for (int dy = -ring; dy <= ring; ++dy) {
            for (int dx = -ring; dx <= ring; ++dx) {
                if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
                const int gx = cx + dx, gy = cy + dy;
                if (gx < 0 || gy < 0 || gx >= nx_ || gy >= ny_) continue;
                any_cell = true;
                for (int idx : cells_[static_cast<std::size_t>(gy) * nx_ + gx]) {
                    const auto& c = captures_[static_cast<std::size_t>(idx)];
                    const double d = geo::distance(p, c.position);
                    if (d < best_dist || (d == best_dist && best && c.id < best->id)) {
                        best = &c;
                        best_dist = d;
                    }
                }
            }
        }
        if (!any_cell && ring > 0 && best) break;
    }
    if (!best) return std::nullopt;
    return std::make_pair(best, best_dist);
}

FootprintIndex::FootprintIndex(const std::vector<BuildingFootprint>* footprints,
                               double cell_size_m)
    : footprints_(footprints), cell_(cell_size_m) {
    const auto& fps = *footprints_;
    if (fps.empty()) {
        nx_ = ny_ = 1;
        cells_.resize(1);
        return;
    }
    Point lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Point hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
    for (const auto& f : fps) {
        Point flo, fhi;
        f.polygon.bounding_box(flo, fhi);
        lo.x = std::min(lo.x, flo.x);
        lo.y = std::min(lo.y, flo.y);
        hi.x = std::max(hi.x, fhi.x);
        hi.y = std::max(hi.y, fhi.y);
    }
    origin_ = lo;
    nx_ = std::max(1, static_cast<int>((hi.x - lo.x) / cell_) + 1);
    ny_ = std::max(1, static_cast<int>((hi.y - lo.y) / cell_) + 1);
    cells_.resize(static_cast<std::size_t>(nx_) * ny_);
    for (int i = 0; i < static_cast<int>(fps.size()); ++i) {
        Point flo, fhi;
        fps[static_cast<std::size_t>(i)].polygon.bounding_box(flo, fhi);
        const int x0 = std::clamp(static_cast<int>((flo.x - origin_.x) / cell_), 0, nx_ - 1);
        const int x1 = std::clamp(static_cast<int>((fhi.x - origin_.x) / cell_), 0, nx_ - 1);
        const int y0 = std::clamp(static_cast<int>((flo.y - origin_.y) / cell_), 0, ny_ - 1);
        const int y1 = std::clamp(static_cast<int>((fhi.y - origin_.y) / cell_), 0, ny_ - 1);
        for (int gy = y0; gy <= y1; ++gy)
            for (int gx = x0; gx <= x1; ++gx)
                cells_[static_cast<std::size_t>(gy) * nx_ + gx].push_back(i);
    }
}

std::vector<int> FootprintIndex::candidates_near_segment(Point a, Point b) const {
    const int x0 = std::clamp(static_cast<int>((std::min(a.x, b.x) - origin_.x) / cell_) - 1, 0,
                              nx_ - 1);
    const int x1 = std::clamp(static_cast<int>((std::max(a.x, b.x) - origin_.x) / cell_) + 1, 0,
                              nx_ - 1);
    const int y0 = std::clamp(static_cast<int>((std::min(a.y, b.y) - origin_.y) / cell_) - 1, 0,
                              ny_ - 1);
    const int y1 = std::clamp(static_cast<int>((std::max(a.y, b.y) - origin_.y) / cell_) + 1, 0,
                              ny_ - 1);
    std::vector<int> out;
    for (int gy = y0; gy <= y1; ++gy)
        for (int gx = x0; gx <= x1; ++gx)
            for (int idx : cells_[static_cast<std::size_t>(gy) * nx_ + gx])
                out.push_back(idx);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Matching and visibility

std::optional<std::pair<const CaptureSample*, double>> nearest_capture(
    const BuildingFootprint& building, const CaptureIndex& index, double max_match_distance_m) {
    auto hit = index.nearest(building.centroid);
    if (!hit || hit->second > max_match_distance_m) return std::nullopt;
    return hit;
}

namespace {

// Nearest interior entry along a->b among footprints other than `self_id`.
std::optional<std::pair<double, std::string>> first_blocker(Point a, Point b,
                                                            const std::string& self_id,
                                                            const FootprintIndex& index) {
    std::optional<std::pair<double, std::string>> best;
    for (int idx : index.candidates_near_segment(a, b)) {
        const auto& other = index.footprints()[static_cast<std::size_t>(idx)];
        if (other.id == self_id) continue;
        double entry_t = 0.0;
        if (geo::segment_enters_interior(a, b, other.polygon, entry_t)) {
            if (!best || entry_t < best->first) best = {entry_t, other.id};
        }
    }
    return best;
}

}  // namespace

VisibilityVerdict visibility_test(const BuildingFootprint& building, const CaptureSample& capture,
                                  const FootprintIndex& all_footprints, const PairingConfig& cfg) {
    VisibilityVerdict verdict;
    verdict.building_id = building.id;

    std::vector<Point> targets = {building.centroid};
    if (cfg.obstruction_rays >= 3) {
        // Fan: centroid plus the two vertices with extreme bearings.
        const auto& verts = building.polygon.vertices();
        std::vector<double> bearings;
        bearings.reserve(verts.size());
        for (const Point& v : verts) bearings.push_back(geo::bearing_deg(capture.position, v));
        const Arc arc = geo::minimal_covering_arc(bearings);
        for (const Point& v : verts) {
            const double b = geo::bearing_deg(capture.position, v);
            if (std::abs(geo::normalize_deg(b - arc.start_deg)) < 1e-9 ||
                std::abs(geo::normalize_deg(b - arc.start_deg) - arc.width_deg) < 1e-9) {
                // Pull slightly toward the centroid so the ray ends inside.
                targets.push_back(v + 0.1 * (building.centroid - v));
            }
        }
    }

    std::optional<std::pair<double, std::string>> centroid_blocker;
    bool any_clear = false;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        auto blocker = first_blocker(capture.position, targets[i], building.id, all_footprints);
        if (i == 0) centroid_blocker = blocker;
        if (!blocker) any_clear = true;
    }
    if (any_clear) {
        verdict.status = Visibility::Usable;
    } else {
        verdict.status = Visibility::Obstructed;
        verdict.blocking_id = centroid_blocker->second;
    }
    return verdict;
}

// ---------------------------------------------------------------------------
// Angular windows and panorama columns

Arc facade_angular_window(const CaptureSample& capture, const BuildingFootprint& building,
                          double pad_deg) {
    if (building.polygon.contains(capture.position))
        throw PairingError("capture position inside building polygon: " + building.id);
    std::vector<double> rel;
    rel.reserve(building.polygon.size());
    for (const Point& v : building.polygon.vertices())
        rel.push_back(geo::normalize_deg(geo::bearing_deg(capture.position, v) -
                                         capture.heading_deg));
    Arc arc = geo::minimal_covering_arc(rel);
    arc.start_deg = geo::normalize_deg(arc.start_deg - pad_deg);
    arc.width_deg = std::min(360.0, arc.width_deg + 2.0 * pad_deg);
    return arc;
}

double relative_angle_to_column(double theta_rel_deg, double heading_deg, int pano_width,
                                PanoramaConvention convention) {
    double frac = 0.0;
    switch (convention) {
        case PanoramaConvention::HeadingStart:
            frac = geo::normalize_deg(theta_rel_deg) / 360.0;
            break;
        case PanoramaConvention::HeadingCenter:
            frac = geo::normalize_deg(theta_rel_deg + 180.0) / 360.0;
            break;
        case PanoramaConvention::NorthStart:
            frac = geo::normalize_deg(theta_rel_deg + heading_deg) / 360.0;
            break;
    }
    return std::fmod(frac * pano_width, static_cast<double>(pano_width));
}

double column_to_relative_angle(int col, double heading_deg, int pano_width,
                                PanoramaConvention convention) {
    const double deg = (col + 0.5) / pano_width * 360.0;
    switch (convention) {
        case PanoramaConvention::HeadingStart: return geo::normalize_deg(deg);
        case PanoramaConvention::HeadingCenter: return geo::normalize_deg(deg - 180.0);
        case PanoramaConvention::NorthStart: return geo::normalize_deg(deg - heading_deg);
    }
    return deg;
}

std::vector<uint8_t> facade_column_mask(const CaptureSample& capture,
                                        const BuildingFootprint& building,
                                        const FootprintIndex& index, const PairingConfig& cfg) {
    const int w = capture.width_px > 0 ? capture.width_px : 1024;
    std::vector<uint8_t> mask(static_cast<std::size_t>(w), 0);

    // Ray length: centroid distance plus the footprint diameter covers the
    // whole building from the capture point.
    Point lo, hi;
    building.polygon.bounding_box(lo, hi);
    const double diam = geo::distance(lo, hi);
    const double range = geo::distance(capture.position, building.centroid) + diam + 1.0;

    for (int c = 0; c < w; ++c) {
        const double rel = column_to_relative_angle(c, capture.heading_deg, w, cfg.convention);
        const double bearing = geo::normalize_deg(rel + capture.heading_deg);
        const double rad = bearing * M_PI / 180.0;
        const Point end = capture.position + Point{range * std::sin(rad), range * std::cos(rad)};

        auto target_ts = geo::segment_ring_crossings(capture.position, end, building.polygon);
        if (target_ts.empty()) continue;
        const double t_target = target_ts.front();

        bool occluded = false;
        for (int idx : index.candidates_near_segment(capture.position, end)) {
            const auto& other = index.footprints()[static_cast<std::size_t>(idx)];
            if (other.id == building.id) continue;
            double entry_t = 0.0;
            if (geo::segment_enters_interior(capture.position, end, other.polygon, entry_t) &&
                entry_t < t_target) {
                occluded = true;
                break;
            }
        }
        if (!occluded) mask[static_cast<std::size_t>(c)] = 1;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Chip extraction

ChipResult extract_facade_chip(const cv::Mat& panorama, const Arc& window_rel,
                               const std::vector<uint8_t>& column_mask, const PairingConfig& cfg,
                               double heading_deg) {
    if (window_rel.width_deg <= 0.0) throw PairingError("degenerate angular window");
    if (panorama.empty() || panorama.type() != CV_8UC3)
        throw PairingError("panorama must be a CV_8UC3 image");
    const int w = panorama.cols, h = panorama.rows;

    const int row0 = std::clamp(static_cast<int>(std::floor(cfg.elevation_band_lo * h)), 0, h - 1);
    const int row1 = std::clamp(static_cast<int>(std::ceil(cfg.elevation_band_hi * h)), row0 + 1, h);
    const int band_h = row1 - row0;

    const double col0 =
        relative_angle_to_column(window_rel.start_deg, heading_deg, w, cfg.convention);
    const int n_cols = std::max(1, static_cast<int>(std::round(window_rel.width_deg / 360.0 * w)));

    cv::Mat strip(band_h, n_cols, CV_8UC3);
    long unmasked = 0;
    for (int j = 0; j < n_cols; ++j) {
        const int src = static_cast<int>(std::floor(col0 + j)) % w;
        const int src_col = src < 0 ? src + w : src;
        const bool keep =
            src_col < static_cast<int>(column_mask.size()) && column_mask[static_cast<std::size_t>(src_col)];
        for (int r = 0; r < band_h; ++r)
            strip.at<cv::Vec3b>(r, j) =
                keep ? panorama.at<cv::Vec3b>(row0 + r, src_col) : cfg.fill_value;
        if (keep) unmasked += band_h;
    }

    ChipResult out;
    out.mask_fraction = static_cast<double>(unmasked) / (static_cast<double>(band_h) * n_cols);
    cv::resize(strip, out.chip, cv::Size(cfg.chip_size, cfg.chip_size), 0, 0, cv::INTER_LINEAR);
    if (out.mask_fraction <= 0.0) out.chip.setTo(cfg.fill_value);
    return out;
}

ChipResult extract_top_chip(const geo::Raster& uav_raster, const BuildingFootprint& footprint,
                            const PairingConfig& cfg) {
    if (uav_raster.data().type() != CV_8UC3)
        throw PairingError("aerial raster must be CV_8UC3 imagery");
    Point lo, hi;
    footprint.polygon.bounding_box(lo, hi);
    const double side = std::max(hi.x - lo.x, hi.y - lo.y);
    if (side <= 0.0) throw PairingError("degenerate footprint bbox: " + footprint.id);
    const Point center{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)};
    const Point box_lo{center.x - 0.5 * side, center.y - 0.5 * side};
    const Point box_hi{center.x + 0.5 * side, center.y + 0.5 * side};

    for (const Point corner : {box_lo, box_hi, Point{box_lo.x, box_hi.y}, Point{box_hi.x, box_lo.y}})
        if (!uav_raster.world_in_bounds(corner))
            throw PairingError("OutOfExtent: footprint " + footprint.id +
                               " outside aerial raster");

    const int n = cfg.chip_size;
    cv::Mat chip(n, n, CV_8UC3);
    const cv::Mat& img = uav_raster.data();
    long inside_count = 0;
    bool any_valid = false;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            // Row 0 is the north edge of the box.
            const Point wpt{box_lo.x + (c + 0.5) / n * side, box_hi.y - (r + 0.5) / n * side};
            if (!footprint.polygon.contains(wpt)) {
                chip.at<cv::Vec3b>(r, c) = cfg.fill_value;
                continue;
            }
            inside_count++;
            const Point px = uav_raster.transform().world_to_pixel(wpt);
            const int ix = std::clamp(static_cast<int>(px.x), 0, img.cols - 1);
            const int iy = std::clamp(static_cast<int>(px.y), 0, img.rows - 1);
            const cv::Vec3b v = img.at<cv::Vec3b>(iy, ix);
            chip.at<cv::Vec3b>(r, c) = v;
            any_valid = true;
        }
    }
    if (uav_raster.nodata() && inside_count > 0 && !any_valid)
        throw PairingError("all-nodata window for footprint " + footprint.id);

    ChipResult out;
    out.chip = chip;
    out.mask_fraction = static_cast<double>(inside_count) / (static_cast<double>(n) * n);
    return out;
}

// ---------------------------------------------------------------------------
// Dataset assembly

DatasetResult build_dataset(const std::vector<BuildingFootprint>& footprints,
                            const CaptureIndex& captures, const geo::Raster& uav_raster,
                            const PanoramaProvider& panoramas, const PairingConfig& cfg) {
    std::vector<const BuildingFootprint*> ordered;
    ordered.reserve(footprints.size());
    for (const auto& f : footprints) ordered.push_back(&f);
    std::sort(ordered.begin(), ordered.end(),
              [](const BuildingFootprint* a, const BuildingFootprint* b) { return a->id < b->id; });

    FootprintIndex fp_index(&footprints);
    DatasetResult result;
    for (const BuildingFootprint* fp : ordered) {
        VisibilityVerdict verdict;
        verdict.building_id = fp->id;
        if (!fp->is_residential) {
            verdict.status = Visibility::NonResidential;
            result.census.non_residential++;
            result.verdicts.push_back(std::move(verdict));
            continue;
        }
        auto match = nearest_capture(*fp, captures, cfg.max_match_distance_m);
        if (!match) {
            verdict.status = Visibility::TooFar;
            result.census.too_far++;
            result.verdicts.push_back(std::move(verdict));
            continue;
        }
        const CaptureSample& capture = *match->first;
        verdict = visibility_test(*fp, capture, fp_index, cfg);
        if (verdict.status == Visibility::Obstructed) {
            result.census.obstructed++;
            result.verdicts.push_back(std::move(verdict));
            continue;
        }
        result.census.usable++;
        result.verdicts.push_back(verdict);

        try {
            const Arc window = facade_angular_window(capture, *fp, cfg.pad_deg);
            const cv::Mat pano = panoramas(capture);
            // The loaded panorama is authoritative for the column count; a
            // stale or missing width in the capture index would misalign the
            // visibility mask against the chip columns.
            CaptureSample sized = capture;
            if (!pano.empty()) {
                sized.width_px = pano.cols;
                sized.height_px = pano.rows;
            }
            const auto column_mask = facade_column_mask(sized, *fp, fp_index, cfg);
            ChipResult facade =
                extract_facade_chip(pano, window, column_mask, cfg, capture.heading_deg);
            ChipResult top = extract_top_chip(uav_raster, *fp, cfg);
            if (facade.mask_fraction < cfg.min_mask_fraction ||
                top.mask_fraction < cfg.min_mask_fraction) {
                result.census.chip_failures++;
                continue;
            }
            CrossViewPair pair;
            pair.building_id = fp->id;
            pair.capture_id = capture.id;
            pair.match_distance_m = match->second;
            pair.top_chip = std::move(top.chip);
            pair.facade_chip = std::move(facade.chip);
            pair.mask_fraction_top = top.mask_fraction;
            pair.mask_fraction_facade = facade.mask_fraction;
            result.pairs.push_back(std::move(pair));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "pairing: building %s skipped: %s\n", fp->id.c_str(), e.what());
            result.census.chip_failures++;
        }
    }
    return result;
}

void write_dataset(const DatasetResult& result, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::unordered_map<std::string, const CrossViewPair*> by_id;
    for (const auto& p : result.pairs) {
        by_id[p.building_id] = &p;
        cv::imwrite((fs::path(out_dir) / (p.building_id + "_top.png")).string(), p.top_chip);
        cv::imwrite((fs::path(out_dir) / (p.building_id + "_facade.png")).string(), p.facade_chip);
    }
    csv::Table manifest;
    manifest.header = {"building_id", "capture_id", "match_distance_m", "status",
                       "mask_fraction_top", "mask_fraction_facade"};
    for (const auto& v : result.verdicts) {
        std::vector<std::string> row(6);
        row[0] = v.building_id;
        row[3] = visibility_name(v.status);
        auto it = by_id.find(v.building_id);
        if (it != by_id.end()) {
            const CrossViewPair& p = *it->second;
            row[1] = p.capture_id;
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.6f", p.match_distance_m);
            row[2] = buf;
            std::snprintf(buf, sizeof(buf), "%.6f", p.mask_fraction_top);
            row[4] = buf;
            std::snprintf(buf, sizeof(buf), "%.6f", p.mask_fraction_facade);
            row[5] = buf;
        }
        manifest.rows.push_back(std::move(row));
    }
    csv::write_file((fs::path(out_dir) / "pairs_manifest.csv").string(), manifest);
}

}  // namespace crossview::pairing
