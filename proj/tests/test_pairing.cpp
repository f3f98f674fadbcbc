#include <doctest.h>

#include <opencv2/core.hpp>

#include <cmath>

#include "crossview/pairing.hpp"

using namespace crossview;
using namespace crossview::pairing;
using geo::Point;

namespace {

BuildingFootprint square_building(const std::string& id, Point center, double side = 10.0,
                                  bool residential = true) {
    const double h = side / 2.0;
    BuildingFootprint fp;
    fp.id = id;
    fp.polygon = geo::Ring({{center.x - h, center.y - h},
                            {center.x + h, center.y - h},
                            {center.x + h, center.y + h},
                            {center.x - h, center.y + h}});
    fp.centroid = fp.polygon.centroid();
    fp.is_residential = residential;
    return fp;
}

CaptureSample capture_at(const std::string& id, Point p, double heading = 0.0) {
    CaptureSample c;
    c.id = id;
    c.position = p;
    c.heading_deg = heading;
    return c;
}

}  // namespace

TEST_CASE("nearest capture: unique minimum and 30 m cutoff") {
    BuildingFootprint b = square_building("b", {0, 0});
    {
        CaptureIndex idx({capture_at("c1", {10, 0}), capture_at("c2", {0, 25})});
        auto hit = nearest_capture(b, idx, 30.0);
        REQUIRE(hit);
        CHECK(hit->first->id == "c1");
        CHECK(hit->second == doctest::Approx(10.0));
    }
    {
        CaptureIndex idx({capture_at("c1", {0, 31})});
        CHECK_FALSE(nearest_capture(b, idx, 30.0));
    }
    {
        // Exactly at the threshold still matches.
        CaptureIndex idx({capture_at("c1", {0, 30})});
        CHECK(nearest_capture(b, idx, 30.0));
    }
}

TEST_CASE("nearest capture: equidistant tie broken by smaller id") {
    BuildingFootprint b = square_building("b", {0, 0});
    CaptureIndex idx({capture_at("z_far", {5, 0}), capture_at("a_near", {-5, 0})});
    auto hit = nearest_capture(b, idx, 30.0);
    REQUIRE(hit);
    CHECK(hit->first->id == "a_near");
    CHECK(hit->second == doctest::Approx(5.0));
}

TEST_CASE("visibility: empty scene is usable") {
    std::vector<BuildingFootprint> scene = {square_building("target", {0, 20})};
    FootprintIndex idx(&scene);
    auto v = visibility_test(scene[0], capture_at("c", {0, 0}), idx);
    CHECK(v.status == Visibility::Usable);
    CHECK_FALSE(v.blocking_id);
}

TEST_CASE("visibility: blocker straddling the sightline midpoint") {
    std::vector<BuildingFootprint> scene = {square_building("target", {0, 40}),
                                            square_building("wall", {0, 20})};
    FootprintIndex idx(&scene);
    auto v = visibility_test(scene[0], capture_at("c", {0, 0}), idx);
    CHECK(v.status == Visibility::Obstructed);
    REQUIRE(v.blocking_id);
    CHECK(*v.blocking_id == "wall");
}

TEST_CASE("visibility: first blocker by distance is reported") {
    std::vector<BuildingFootprint> scene = {square_building("target", {0, 60}),
                                            square_building("far_wall", {0, 40}),
                                            square_building("near_wall", {0, 20})};
    FootprintIndex idx(&scene);
    auto v = visibility_test(scene[0], capture_at("c", {0, 0}), idx);
    CHECK(v.status == Visibility::Obstructed);
    REQUIRE(v.blocking_id);
    CHECK(*v.blocking_id == "near_wall");
}

TEST_CASE("visibility: neighbor touched only along its boundary stays usable") {
    // The sightline runs exactly along the neighbor's left edge; grazing a
    // boundary without entering the interior does not obstruct.
    std::vector<BuildingFootprint> scene = {square_building("target", {0, 30}),
                                            square_building("side", {5, 10})};
    FootprintIndex idx(&scene);
    auto v = visibility_test(scene[0], capture_at("c", {0, 0}), idx);
    CHECK(v.status == Visibility::Usable);
}

TEST_CASE("facade window: due-east building under north heading") {
    // Square subtending exactly 20 deg around bearing 90.
    const double half = 20.0 * M_PI / 180.0 / 2.0;
    const double dist = 50.0;
    const double offset = dist * std::tan(half);
    BuildingFootprint fp;
    fp.polygon = geo::Ring({{dist, -offset},
                            {dist + 2 * offset, -offset},
                            {dist + 2 * offset, offset},
                            {dist, offset}});
    fp.centroid = fp.polygon.centroid();
    auto w = facade_angular_window(capture_at("c", {0, 0}, 0.0), fp, 5.0);
    CHECK(w.start_deg == doctest::Approx(80.0 - 5.0).epsilon(1e-6));
    // Rear corners subtend slightly less than the near face; the window is
    // set by the near corners at +-10 deg.
    CHECK(w.start_deg + w.width_deg == doctest::Approx(100.0 + 5.0).epsilon(1e-6));
}

TEST_CASE("facade window: heading toward the building centers at zero") {
    BuildingFootprint fp = square_building("b", {20, 0});
    auto w = facade_angular_window(capture_at("c", {0, 0}, 90.0), fp, 5.0);
    const double center = geo::normalize_deg(w.start_deg + w.width_deg / 2.0);
    CHECK((center < 1e-6 || center > 360.0 - 1e-6));
}

TEST_CASE("facade window: building straight ahead wraps through 360") {
    // Due north under heading north: relative vertex angles straddle zero,
    // so the padded window starts just below 360 and wraps.
    BuildingFootprint fp = square_building("b", {0, 30});
    auto w = facade_angular_window(capture_at("c", {0, 0}, 0.0), fp, 5.0);
    CHECK(w.start_deg > 180.0);
    CHECK(w.start_deg + w.width_deg > 360.0);  // wraps
    CHECK(w.contains(0.0));
    CHECK_FALSE(w.contains(180.0));
}

TEST_CASE("facade window: capture inside the polygon throws") {
    BuildingFootprint fp = square_building("b", {0, 0});
    CHECK_THROWS_AS(facade_angular_window(capture_at("c", {0, 0}), fp, 5.0), PairingError);
}

TEST_CASE("panorama column conventions") {
    // HeadingStart: relative angle 0 maps to column 0.
    CHECK(relative_angle_to_column(0.0, 123.0, 3600, PanoramaConvention::HeadingStart) ==
          doctest::Approx(0.0));
    CHECK(relative_angle_to_column(36.0, 0.0, 3600, PanoramaConvention::HeadingStart) ==
          doctest::Approx(360.0));
    // HeadingCenter: relative angle 0 maps to the central column.
    CHECK(relative_angle_to_column(0.0, 0.0, 3600, PanoramaConvention::HeadingCenter) ==
          doctest::Approx(1800.0));
    // NorthStart: column position depends on absolute bearing.
    CHECK(relative_angle_to_column(0.0, 90.0, 3600, PanoramaConvention::NorthStart) ==
          doctest::Approx(900.0));
}

TEST_CASE("facade chip: window (0,36) of a 3600-px gradient panorama") {
    // Panorama whose column c stores c / 16 in the red channel.
    cv::Mat pano(100, 3600, CV_8UC3);
    for (int c = 0; c < 3600; ++c)
        pano.col(c).setTo(cv::Vec3b(static_cast<uchar>(c / 16), 0, 0));
    PairingConfig cfg;
    cfg.chip_size = 64;
    std::vector<uint8_t> mask(3600, 1);
    auto res = extract_facade_chip(pano, {0.0, 36.0}, mask, cfg);
    CHECK(res.chip.rows == 64);
    CHECK(res.chip.cols == 64);
    CHECK(res.mask_fraction > 0.99);
    // Only columns 0..359 contribute: red stays below 360/16.
    double mn, mx;
    cv::minMaxLoc(cv::Mat(res.chip.reshape(1).colRange(0, res.chip.cols)), &mn, &mx);
    std::vector<cv::Mat> ch;
    cv::split(res.chip, ch);
    cv::minMaxLoc(ch[0], &mn, &mx);
    CHECK(mx <= 360 / 16);
    CHECK(mn >= 0);
}

TEST_CASE("facade chip: wrapped window stitches both edges") {
    cv::Mat pano(100, 360, CV_8UC3, cv::Vec3b(0, 0, 0));
    // Distinct colors near both vertical edges.
    for (int c = 350; c < 360; ++c) pano.col(c).setTo(cv::Vec3b(0, 0, 200));
    for (int c = 0; c < 10; ++c) pano.col(c).setTo(cv::Vec3b(0, 200, 0));
    PairingConfig cfg;
    cfg.chip_size = 32;
    std::vector<uint8_t> mask(360, 1);
    auto res = extract_facade_chip(pano, {350.0, 20.0}, mask, cfg);
    std::vector<cv::Mat> ch;
    cv::split(res.chip, ch);
    double mn, mx;
    cv::minMaxLoc(ch[2], &mn, &mx);  // red from the left part (columns 350..359)
    CHECK(mx > 100);
    cv::minMaxLoc(ch[1], &mn, &mx);  // green from the wrapped part (columns 0..9)
    CHECK(mx > 100);
}

TEST_CASE("facade chip: fully masked window is rejected material") {
    cv::Mat pano(100, 360, CV_8UC3, cv::Vec3b(10, 20, 30));
    PairingConfig cfg;
    cfg.chip_size = 16;
    std::vector<uint8_t> mask(360, 0);
    auto res = extract_facade_chip(pano, {0.0, 30.0}, mask, cfg);
    CHECK(res.mask_fraction == doctest::Approx(0.0));
    // Chip is pure fill value.
    for (int r = 0; r < res.chip.rows; ++r)
        for (int c = 0; c < res.chip.cols; ++c) {
            CHECK(res.chip.at<cv::Vec3b>(r, c) == cfg.fill_value);
        }
}

TEST_CASE("top chip: constant raster, interior constant, exterior fill") {
    cv::Mat img(100, 100, CV_8UC3, cv::Vec3b(50, 100, 150));
    geo::Raster raster(img, geo::GeoTransform::north_up({0, 100}, 1.0));
    // Diamond footprint: its bounding box corners lie outside the polygon.
    BuildingFootprint fp;
    fp.id = "b";
    fp.polygon = geo::Ring({{50, 65}, {65, 50}, {50, 35}, {35, 50}});
    fp.centroid = fp.polygon.centroid();
    PairingConfig cfg;
    cfg.chip_size = 64;
    auto res = extract_top_chip(raster, fp, cfg);
    CHECK(res.chip.rows == 64);
    // Center pixel inside the footprint keeps the raster color.
    CHECK(res.chip.at<cv::Vec3b>(32, 32) == cv::Vec3b(50, 100, 150));
    // Corner pixel (outside the diamond but inside the squared box) is fill.
    CHECK(res.chip.at<cv::Vec3b>(0, 0) == cfg.fill_value);
    // Half the box area is interior.
    CHECK(res.mask_fraction == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("top chip: footprint partially outside the raster errors") {
    cv::Mat img(50, 50, CV_8UC3, cv::Vec3b(0, 0, 0));
    geo::Raster raster(img, geo::GeoTransform::north_up({0, 50}, 1.0));
    BuildingFootprint fp = square_building("b", {48, 25}, 20.0);
    PairingConfig cfg;
    try {
        extract_top_chip(raster, fp, cfg);
        FAIL("expected PairingError");
    } catch (const PairingError& e) {
        CHECK(std::string(e.what()).find("OutOfExtent") != std::string::npos);
    }
}

TEST_CASE("top chip: L-shape mask fraction matches analytic area ratio") {
    cv::Mat img(200, 200, CV_8UC3, cv::Vec3b(99, 99, 99));
    geo::Raster raster(img, geo::GeoTransform::north_up({0, 200}, 1.0));
    // L-shape: 30x30 square minus a 15x15 corner = 675 m^2.
    BuildingFootprint fp;
    fp.id = "L";
    fp.polygon = geo::Ring({{100, 100},
                            {130, 100},
                            {130, 115},
                            {115, 115},
                            {115, 130},
                            {100, 130}});
    fp.centroid = fp.polygon.centroid();
    PairingConfig cfg;
    cfg.chip_size = 128;
    auto res = extract_top_chip(raster, fp, cfg);
    // Padded box is square around the bbox; analytic ratio = 675 / box area.
    const double box_area = res.chip.rows > 0 ? 0.0 : 0.0;  // via mask fraction below
    (void)box_area;
    // The implementation reports polygon area / padded-box area; compare with
    // a pixel count oracle over the chip itself.
    int non_fill = 0;
    for (int r = 0; r < res.chip.rows; ++r)
        for (int c = 0; c < res.chip.cols; ++c)
            if (res.chip.at<cv::Vec3b>(r, c) != cfg.fill_value) non_fill++;
    const double pixel_ratio =
        static_cast<double>(non_fill) / (res.chip.rows * res.chip.cols);
    CHECK(res.mask_fraction == doctest::Approx(pixel_ratio).epsilon(0.02));
}

TEST_CASE("build_dataset census over a constructed six-building scene") {
    std::vector<BuildingFootprint> scene;
    // Street along y=0; captures every 5 m.
    scene.push_back(square_building("u1", {10, 15}));
    scene.push_back(square_building("u2", {30, 15}));
    scene.push_back(square_building("u3", {50, 15}));
    scene.push_back(square_building("nr", {70, 15}, 10.0, false));
    scene.push_back(square_building("far", {90, 40}));
    scene.push_back(square_building("blocked", {10, 27}));  // behind u1

    std::vector<CaptureSample> caps;
    for (int i = 0; i <= 20; ++i) {
        auto c = capture_at("c" + std::to_string(100 + i), {i * 5.0, 0.0}, 90.0);
        c.width_px = 360;
        c.height_px = 180;
        caps.push_back(std::move(c));
    }
    CaptureIndex cap_idx(caps);

    cv::Mat img(300, 300, CV_8UC3, cv::Vec3b(120, 120, 120));
    geo::Raster raster(img, geo::GeoTransform::north_up({-50, 200}, 1.0));

    PairingConfig cfg;
    cfg.chip_size = 32;
    auto result = build_dataset(
        scene, cap_idx, raster,
        [](const CaptureSample&) { return cv::Mat(180, 360, CV_8UC3, cv::Vec3b(90, 90, 90)); },
        cfg);

    CHECK(result.census.non_residential == 1);
    CHECK(result.census.too_far == 1);
    CHECK(result.census.obstructed == 1);
    CHECK(result.census.usable == 3);
    CHECK(result.census.chip_failures == 0);
    CHECK(result.pairs.size() == 3);
}

TEST_CASE("build_dataset: zero captures marks all residential too far") {
    std::vector<BuildingFootprint> scene = {square_building("a", {0, 15}),
                                            square_building("b", {20, 15})};
    CaptureIndex cap_idx(std::vector<CaptureSample>{});
    cv::Mat img(100, 100, CV_8UC3, cv::Vec3b(0, 0, 0));
    geo::Raster raster(img, geo::GeoTransform::north_up({-50, 65}, 1.0));
    PairingConfig cfg;
    auto result = build_dataset(
        scene, cap_idx, raster,
        [](const CaptureSample&) { return cv::Mat(); }, cfg);
    CHECK(result.pairs.empty());
    CHECK(result.census.too_far == 2);
}

TEST_CASE("build_dataset: two buildings may share one capture") {
    std::vector<BuildingFootprint> scene = {square_building("a", {-8, 15}),
                                            square_building("b", {8, 15})};
    std::vector<CaptureSample> caps = {capture_at("only", {0, 0}, 90.0)};
    CaptureIndex cap_idx(caps);
    cv::Mat img(200, 200, CV_8UC3, cv::Vec3b(77, 77, 77));
    geo::Raster raster(img, geo::GeoTransform::north_up({-100, 100}, 1.0));
    PairingConfig cfg;
    cfg.chip_size = 32;
    auto result = build_dataset(
        scene, cap_idx, raster,
        [](const CaptureSample&) { return cv::Mat(180, 360, CV_8UC3, cv::Vec3b(90, 90, 90)); },
        cfg);
    REQUIRE(result.pairs.size() == 2);
    CHECK(result.pairs[0].capture_id == "only");
    CHECK(result.pairs[1].capture_id == "only");
}
