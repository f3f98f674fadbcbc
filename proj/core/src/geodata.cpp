#include "crossview/geodata.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "crossview/csv.hpp"

namespace crossview {

using nlohmann::json;

FootprintLoadReport load_footprints(const std::string& path, const FootprintLoadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open footprints file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IngestError("footprints parse error in " + path + ": " + e.what());
    }
    if (!doc.contains("features") || !doc["features"].is_array())
        throw IngestError("footprints file is not a FeatureCollection: " + path);

    std::string crs_spec = opts.crs_spec;
    if (crs_spec.empty()) {
        if (doc.contains("crs") && doc["crs"].is_string())
            crs_spec = doc["crs"].get<std::string>();
        else
            throw IngestError("no CRS in file and none configured: " + path);
    }
    auto projection = geo::Projection::parse(crs_spec);

    FootprintLoadReport report;
    for (const auto& feature : doc["features"]) {
        const auto& geom = feature.value("geometry", json::object());
        if (geom.value("type", "") != "Polygon" || !geom.contains("coordinates")) {
            report.dropped_invalid++;
            continue;
        }
        const auto& rings = geom["coordinates"];
        if (!rings.is_array() || rings.empty() || !rings[0].is_array()) {
            report.dropped_invalid++;
            continue;
        }
        std::vector<geo::Point> verts;
        bool bad = false;
        for (const auto& coord : rings[0]) {
            if (!coord.is_array() || coord.size() < 2) {
                bad = true;
                break;
            }
            verts.push_back(projection->project({coord[0].get<double>(), coord[1].get<double>()}));
        }
        geo::Ring ring{std::move(verts)};
        if (bad || !ring.valid()) {
            report.dropped_invalid++;
            continue;
        }
        BuildingFootprint fp;
        const auto& props = feature.value("properties", json::object());
        if (feature.contains("id"))
            fp.id = feature["id"].is_string() ? feature["id"].get<std::string>()
                                             : feature["id"].dump();
        else if (props.contains("id"))
            fp.id = props["id"].is_string() ? props["id"].get<std::string>() : props["id"].dump();
        else
            fp.id = "feature_" +
                    std::to_string(report.footprints.size() + report.dropped_invalid);
        fp.polygon = ring.normalized();
        fp.centroid = fp.polygon.centroid();
        if (props.contains(opts.residential_field)) {
            const auto& v = props[opts.residential_field];
            if (v.is_boolean()) fp.is_residential = v.get<bool>();
            else if (v.is_number()) fp.is_residential = v.get<double>() != 0.0;
            else if (v.is_string()) {
                const std::string s = v.get<std::string>();
                fp.is_residential = (s == "yes" || s == "true" || s == "1" || s == "residential");
            }
        }
        report.footprints.push_back(std::move(fp));
    }
    if (report.footprints.empty())
        throw IngestError("zero valid polygons in footprints file: " + path);
    return report;
}

CaptureLoadReport load_capture_index(const std::string& path, const CaptureLoadOptions& opts) {
    csv::Table table = csv::read_file(path);
    for (const char* required : {"id", "x", "y", "heading_deg", "image_path"})
        if (table.column(required) < 0)
            throw IngestError(std::string("capture index missing column '") + required +
                              "': " + path);
    const int col_w = table.column("width_px");
    const int col_h = table.column("height_px");

    CaptureLoadReport report;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string& heading = table.cell(r, "heading_deg");
        if (heading.empty()) {
            report.dropped_missing_heading++;
            continue;
        }
        CaptureSample s;
        s.id = table.cell(r, "id");
        try {
            s.position = {std::stod(table.cell(r, "x")), std::stod(table.cell(r, "y"))};
            s.heading_deg = geo::normalize_deg(std::stod(heading));
        } catch (const std::exception&) {
            throw IngestError("malformed capture row " + std::to_string(r + 2) + " in " + path);
        }
        s.image_ref = table.cell(r, "image_path");
        // Relative image paths are resolved against the CSV's directory so
        // scene folders stay relocatable.
        if (!s.image_ref.empty() && std::filesystem::path(s.image_ref).is_relative())
            s.image_ref = (std::filesystem::path(path).parent_path() / s.image_ref).string();
        if (col_w >= 0 && col_h >= 0) {
            const auto& w = table.rows[r][static_cast<std::size_t>(col_w)];
            const auto& h = table.rows[r][static_cast<std::size_t>(col_h)];
            if (!w.empty() && !h.empty()) {
                s.width_px = std::stoi(w);
                s.height_px = std::stoi(h);
                if (s.width_px <= 0 || s.height_px <= 0)
                    throw IngestError("non-positive panorama size in row " +
                                      std::to_string(r + 2) + " of " + path);
                if (s.width_px != 2 * s.height_px)
                    std::fprintf(stderr,
                                 "warning: capture %s is %dx%d, not equirectangular 2:1\n",
                                 s.id.c_str(), s.width_px, s.height_px);
            }
        }
        if (!s.image_ref.empty() && !std::ifstream(s.image_ref).good()) {
            report.missing_image_files++;
            if (opts.require_image_files)
                throw IngestError("capture image not found: " + s.image_ref);
        }
        report.captures.push_back(std::move(s));
    }
    return report;
}

std::map<std::string, AttributeLabelSet> load_labels(const std::string& path) {
    csv::Table table = csv::read_file(path);
    for (const char* required : {"building_id", "openness", "floors", "vegetation", "wall", "roof"})
        if (table.column(required) < 0)
            throw IngestError(std::string("labels file missing column '") + required + "': " + path);

    std::map<std::string, AttributeLabelSet> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        AttributeLabelSet l;
        l.building_id = table.cell(r, "building_id");
        if (out.count(l.building_id))
            throw IngestError("duplicate building_id '" + l.building_id + "' at row " +
                              std::to_string(r + 2));
        for (Task t : kAllTasks) {
            const std::string& token = table.cell(r, task_name(t));
            auto idx = class_index(t, token);
            if (!idx)
                throw IngestError("unknown class token '" + token + "' for field '" +
                                  task_name(t) + "' at row " + std::to_string(r + 2));
            l.set(t, *idx);
        }
        out.emplace(l.building_id, std::move(l));
    }
    return out;
}

std::vector<LabelSummaryRow> summarize_labels(const std::map<std::string, AttributeLabelSet>& labels) {
    std::vector<AttributeLabelSet> flat;
    flat.reserve(labels.size());
    for (const auto& [_, l] : labels) flat.push_back(l);
    auto hist = class_histogram(flat);
    std::vector<LabelSummaryRow> rows;
    const double n = static_cast<double>(flat.size());
    for (Task t : kAllTasks) {
        const auto& vocab = task_vocabulary(t);
        for (std::size_t c = 0; c < vocab.size(); ++c) {
            LabelSummaryRow row;
            row.task = t;
            row.cls = vocab[c];
            row.count = hist[t][c];
            row.percent = n > 0 ? 100.0 * row.count / n : 0.0;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::vector<BuildingFootprint> residential_subset(const std::vector<BuildingFootprint>& all) {
    std::vector<BuildingFootprint> out;
    std::copy_if(all.begin(), all.end(), std::back_inserter(out),
                 [](const BuildingFootprint& f) { return f.is_residential; });
    return out;
}

}  // namespace crossview
