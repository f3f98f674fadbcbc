#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "crossview/geodata.hpp"

using namespace crossview;
namespace fs = std::filesystem;

namespace {

std::string write_tmp(const std::string& name, const std::string& content) {
    const std::string path = (fs::temp_directory_path() / ("crossview_gd_" + name)).string();
    std::ofstream(path) << content;
    return path;
}

std::string square_feature(const std::string& id, double x, double y, bool residential) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  R"({"type":"Feature","properties":{"id":"%s","residential":%s},)"
                  R"("geometry":{"type":"Polygon","coordinates":[[[%f,%f],[%f,%f],[%f,%f],[%f,%f],[%f,%f]]]}})",
                  id.c_str(), residential ? "true" : "false", x, y, x + 10, y, x + 10, y + 10,
                  x, y + 10, x, y);
    return buf;
}

}  // namespace

TEST_CASE("footprints: valid polygons pass through") {
    std::string body = "{\"type\":\"FeatureCollection\",\"features\":[";
    for (int i = 0; i < 5; ++i)
        body += (i ? "," : "") + square_feature("b" + std::to_string(i), i * 20.0, 0.0, true);
    body += "]}";
    auto rep = load_footprints(write_tmp("five.geojson", body), {});
    CHECK(rep.footprints.size() == 5);
    CHECK(rep.dropped_invalid == 0);
    for (const auto& fp : rep.footprints) {
        CHECK(fp.is_residential);
        CHECK(fp.polygon.signed_area() > 0.0);  // CCW normalized
        CHECK(fp.polygon.area() == doctest::Approx(100.0));
    }
    CHECK(rep.footprints[0].centroid.x == doctest::Approx(5.0));
}

TEST_CASE("footprints: degenerate geometry dropped and counted") {
    std::string body = "{\"type\":\"FeatureCollection\",\"features\":[";
    for (int i = 0; i < 4; ++i)
        body += (i ? "," : "") + square_feature("b" + std::to_string(i), i * 20.0, 0.0, true);
    body += R"(,{"type":"Feature","properties":{"id":"bad"},"geometry":)"
            R"({"type":"Polygon","coordinates":[[[0,0],[1,1]]]}})";
    body += "]}";
    auto rep = load_footprints(write_tmp("degen.geojson", body), {});
    CHECK(rep.footprints.size() == 4);
    CHECK(rep.dropped_invalid == 1);
}

TEST_CASE("residential subset filter") {
    std::string body = "{\"type\":\"FeatureCollection\",\"features\":[";
    for (int i = 0; i < 10; ++i)
        body += (i ? "," : "") + square_feature("b" + std::to_string(i), i * 20.0, 0.0, i < 6);
    body += "]}";
    auto rep = load_footprints(write_tmp("mix.geojson", body), {});
    CHECK(rep.footprints.size() == 10);
    CHECK(residential_subset(rep.footprints).size() == 6);
}

TEST_CASE("capture index: heading normalization and drops") {
    const std::string csv =
        "id,x,y,heading_deg,image_path\n"
        "c1,0,0,450.0,\n"
        "c2,5,0,-90.0,\n"
        "c3,9,0,,\n";
    auto rep = load_capture_index(write_tmp("caps.csv", csv));
    REQUIRE(rep.captures.size() == 2);
    CHECK(rep.dropped_missing_heading == 1);
    CHECK(rep.captures[0].heading_deg == doctest::Approx(90.0));
    CHECK(rep.captures[1].heading_deg == doctest::Approx(270.0));
}

TEST_CASE("capture index: missing image warns, strict mode throws") {
    const std::string csv = "id,x,y,heading_deg,image_path\nc1,0,0,0,/nonexistent/img.png\n";
    const std::string path = write_tmp("caps_missing.csv", csv);
    auto rep = load_capture_index(path);
    CHECK(rep.missing_image_files == 1);
    CaptureLoadOptions strict;
    strict.require_image_files = true;
    CHECK_THROWS_AS(load_capture_index(path, strict), IngestError);
}

TEST_CASE("labels: valid row and vocabulary rejection") {
    const std::string good =
        "building_id,openness,floors,vegetation,wall,roof\n"
        "b1,Closed,Two,Yes,Brick,Clay\n";
    auto labels = load_labels(write_tmp("labels_ok.csv", good));
    REQUIRE(labels.count("b1"));
    CHECK(labels.at("b1").token(Task::Vegetation) == "Yes");
    CHECK(labels.at("b1").token(Task::Roof) == "Clay");
    CHECK(labels.at("b1").get(Task::Floors) == 1);

    const std::string bad =
        "building_id,openness,floors,vegetation,wall,roof\n"
        "b1,Closed,Two,Yes,Brick,Thatch\n";
    try {
        load_labels(write_tmp("labels_bad.csv", bad));
        FAIL("expected IngestError");
    } catch (const IngestError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("roof") != std::string::npos);
        CHECK(msg.find("Thatch") != std::string::npos);
    }
}

TEST_CASE("labels: duplicate id rejected") {
    const std::string dup =
        "building_id,openness,floors,vegetation,wall,roof\n"
        "b1,Closed,Two,Yes,Brick,Clay\n"
        "b1,Closed,One,No,Wood,Metal\n";
    CHECK_THROWS_AS(load_labels(write_tmp("labels_dup.csv", dup)), IngestError);
}

TEST_CASE("label summary percentages match the reference vegetation split") {
    // 1946 Yes / 54 No -> 97.30% / 2.70%.
    std::string csv = "building_id,openness,floors,vegetation,wall,roof\n";
    for (int i = 0; i < 2000; ++i)
        csv += "b" + std::to_string(i) + ",Closed,One," + (i < 1946 ? "Yes" : "No") +
               ",Brick,Clay\n";
    auto labels = load_labels(write_tmp("labels_veg.csv", csv));
    double yes_pct = 0.0, no_pct = 0.0;
    for (const auto& row : summarize_labels(labels)) {
        if (row.task != Task::Vegetation) continue;
        if (row.cls == "Yes") yes_pct = row.percent;
        if (row.cls == "No") no_pct = row.percent;
    }
    CHECK(yes_pct == doctest::Approx(97.30).epsilon(1e-6));
    CHECK(no_pct == doctest::Approx(2.70).epsilon(1e-6));
}

TEST_CASE("task vocabularies match the label schema") {
    CHECK(task_class_count(Task::Openness) == 3);
    CHECK(task_class_count(Task::Floors) == 5);
    CHECK(task_class_count(Task::Vegetation) == 2);
    CHECK(task_class_count(Task::Wall) == 5);
    CHECK(task_class_count(Task::Roof) == 6);
    CHECK(unclear_class(Task::Vegetation) == -1);
    CHECK(task_vocabulary(Task::Roof)[unclear_class(Task::Roof)] == "Unclear");
    CHECK(task_vocabulary(Task::Floors)[3] == "FourPlus");
}
