#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "crossview/config.hpp"

using namespace crossview;
namespace fs = std::filesystem;

namespace {

std::string write_config(const std::string& name, const std::string& body) {
    const std::string path = (fs::temp_directory_path() / ("crossview_cfg_" + name)).string();
    std::ofstream(path) << body;
    return path;
}

const char* kMinimal = R"({
  "seed": 11,
  "output_dir": "/tmp/x",
  "footprints": {"path": "f.geojson"},
  "captures": {"path": "c.csv"},
  "labels": {"path": "l.csv"},
  "uav_raster": {"path": "a.png"}
})";

}  // namespace

TEST_CASE("minimal config loads with defaults") {
    auto cfg = load_run_config(write_config("min.json", kMinimal));
    CHECK(cfg.seed == 11);
    CHECK(cfg.deterministic);
    CHECK(cfg.pairing.max_match_distance_m == doctest::Approx(30.0));
    CHECK(cfg.pairing.pad_deg == doctest::Approx(5.0));
    CHECK(cfg.train.folds == 5);
    CHECK(cfg.associate.alpha == doctest::Approx(0.05));
    CHECK(cfg.tir_raster_path.empty());
    CHECK(cfg.train.opt.seed == 11);  // seed propagates to training
}

TEST_CASE("unknown keys are rejected with the offending name") {
    const std::string bad = R"({
      "seed": 1, "output_dir": "/tmp/x",
      "footprints": {"path": "f"}, "captures": {"path": "c"},
      "labels": {"path": "l"}, "uav_raster": {"path": "a"},
      "train": {"learning_rate": 0.001}
    })";
    try {
        load_run_config(write_config("unknown.json", bad));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
    }
}

TEST_CASE("missing required sections fail validation") {
    const std::string missing = R"({"seed": 1, "output_dir": "/tmp/x"})";
    CHECK_THROWS_AS(load_run_config(write_config("missing.json", missing)), ConfigError);
}

TEST_CASE("config echo json round trips") {
    auto cfg = load_run_config(write_config("echo.json", kMinimal));
    const std::string echoed = run_config_to_json(cfg);
    auto cfg2 = load_run_config(write_config("echo2.json", echoed));
    CHECK(cfg2.seed == cfg.seed);
    CHECK(cfg2.output_dir == cfg.output_dir);
    CHECK(cfg2.pairing.chip_size == cfg.pairing.chip_size);
    CHECK(cfg2.train.folds == cfg.train.folds);
    CHECK(cfg2.model.patch_size == cfg.model.patch_size);
    CHECK(run_config_to_json(cfg2) == echoed);
}

TEST_CASE("chip size override keeps model and pairing consistent") {
    const std::string body = R"({
      "seed": 1, "output_dir": "/tmp/x",
      "footprints": {"path": "f"}, "captures": {"path": "c"},
      "labels": {"path": "l"}, "uav_raster": {"path": "a"},
      "pairing": {"chip_size": 128},
      "model": {"patch_size": 16}
    })";
    auto cfg = load_run_config(write_config("chip.json", body));
    CHECK(cfg.pairing.chip_size == 128);
    CHECK(cfg.model.chip_size == 128);
    CHECK_NOTHROW(cfg.model.validate());
}

TEST_CASE("invalid values are rejected") {
    const std::string body = R"({
      "seed": 1, "output_dir": "/tmp/x",
      "footprints": {"path": "f"}, "captures": {"path": "c"},
      "labels": {"path": "l"}, "uav_raster": {"path": "a"},
      "associate": {"alpha": 1.5}
    })";
    CHECK_THROWS_AS(load_run_config(write_config("alpha.json", body)), ConfigError);
}
