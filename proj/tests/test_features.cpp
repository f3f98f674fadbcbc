#include <doctest.h>

#include <opencv2/core.hpp>

#include "crossview/features.hpp"

using namespace crossview;
using namespace crossview::features;
using geo::Point;

namespace {
BuildingFootprint at(const std::string& id, Point center, double side = 2.0) {
    const double h = side / 2.0;
    BuildingFootprint fp;
    fp.id = id;
    fp.polygon = geo::Ring({{center.x - h, center.y - h},
                            {center.x + h, center.y - h},
                            {center.x + h, center.y + h},
                            {center.x - h, center.y + h}});
    fp.centroid = fp.polygon.centroid();
    return fp;
}
}  // namespace

TEST_CASE("brightness of constant chips") {
    const cv::Vec3b fill(128, 128, 128);
    cv::Mat white(4, 4, CV_8UC3, cv::Vec3b(255, 255, 255));
    CHECK(brightness(white, fill) == doctest::Approx(255.0));
    cv::Mat black(4, 4, CV_8UC3, cv::Vec3b(0, 0, 0));
    CHECK(brightness(black, fill) == doctest::Approx(0.0));
}

TEST_CASE("brightness averages channel means over non-fill pixels") {
    const cv::Vec3b fill(128, 128, 128);
    cv::Mat chip(1, 4, CV_8UC3, fill);
    chip.at<cv::Vec3b>(0, 0) = cv::Vec3b(0, 0, 255);  // BGR red: mean 85
    chip.at<cv::Vec3b>(0, 1) = cv::Vec3b(255, 0, 0);  // BGR blue: mean 85
    CHECK(brightness(chip, fill) == doctest::Approx(85.0));
}

TEST_CASE("brightness of an all-fill chip throws") {
    const cv::Vec3b fill(128, 128, 128);
    cv::Mat chip(4, 4, CV_8UC3, fill);
    CHECK_THROWS_AS(brightness(chip, fill), FeatureError);
}

TEST_CASE("mean 4nn distance") {
    std::vector<BuildingFootprint> all = {at("me", {0, 0}),   at("n1", {1, 0}),
                                          at("n2", {2, 0}),   at("n3", {3, 0}),
                                          at("n4", {4, 0}),   at("n5", {100, 0})};
    auto d = mean_dist_4nn(all[0], all);
    REQUIRE(d);
    CHECK(*d == doctest::Approx(2.5));
}

TEST_CASE("mean 4nn with uniform distances") {
    std::vector<BuildingFootprint> all = {at("me", {0, 0}), at("n1", {7, 0}),
                                          at("n2", {-7, 0}), at("n3", {0, 7}),
                                          at("n4", {0, -7})};
    auto d = mean_dist_4nn(all[0], all);
    REQUIRE(d);
    CHECK(*d == doctest::Approx(7.0));
}

TEST_CASE("mean 4nn undefined with fewer than 4 neighbors") {
    std::vector<BuildingFootprint> all = {at("me", {0, 0}), at("n1", {1, 0}),
                                          at("n2", {2, 0}), at("n3", {3, 0})};
    CHECK_FALSE(mean_dist_4nn(all[0], all));
}

TEST_CASE("zonal tir: constant raster") {
    cv::Mat grid(10, 10, CV_32FC1, cv::Scalar(40.0f));
    geo::Raster tir(grid, geo::GeoTransform::north_up({0, 35}, 3.5), -9999.0);
    auto [v, ok] = zonal_tir(tir, at("b", {17.5, 17.5}, 10.0));
    CHECK(ok);
    CHECK(v == doctest::Approx(40.0));
}

TEST_CASE("zonal tir: sub-pixel footprint falls back to the centroid pixel") {
    cv::Mat grid(10, 10, CV_32FC1, cv::Scalar(40.0f));
    grid.at<float>(5, 5) = 99.0f;
    geo::Raster tir(grid, geo::GeoTransform::north_up({0, 35}, 3.5), -9999.0);
    // 1 m building inside pixel (5,5); no pixel center inside the polygon.
    auto [v, ok] = zonal_tir(tir, at("b", {5 * 3.5 + 3.0, 35 - 5 * 3.5 - 3.0}, 1.0));
    CHECK(ok);
    CHECK(v == doctest::Approx(99.0));
}

TEST_CASE("zonal tir: checkerboard averages to the midpoint") {
    cv::Mat grid(8, 8, CV_32FC1);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) grid.at<float>(r, c) = ((r + c) % 2) ? 20.0f : 10.0f;
    geo::Raster tir(grid, geo::GeoTransform::north_up({0, 8}, 1.0), -9999.0);
    // 4x4 window covers 8 of each parity.
    auto [v, ok] = zonal_tir(tir, at("b", {4, 4}, 4.0));
    CHECK(ok);
    CHECK(v == doctest::Approx(15.0));
}

TEST_CASE("zonal tir: footprint outside the raster is invalid") {
    cv::Mat grid(4, 4, CV_32FC1, cv::Scalar(40.0f));
    geo::Raster tir(grid, geo::GeoTransform::north_up({0, 4}, 1.0), -9999.0);
    auto [v, ok] = zonal_tir(tir, at("b", {100, 100}, 2.0));
    CHECK_FALSE(ok);
    (void)v;
}

TEST_CASE("zonal tir: nodata pixels are skipped") {
    cv::Mat grid(4, 4, CV_32FC1, cv::Scalar(40.0f));
    grid.at<float>(1, 1) = -9999.0f;
    grid.at<float>(1, 2) = 50.0f;
    geo::Raster tir(grid, geo::GeoTransform::north_up({0, 4}, 1.0), -9999.0);
    // Footprint covering pixels (1,1) and (1,2): nodata skipped, mean = 50.
    auto [v, ok] = zonal_tir(tir, at("b", {2.0, 2.5}, 1.9));
    CHECK(ok);
    CHECK(v == doctest::Approx(50.0));
}
