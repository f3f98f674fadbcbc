#include "crossview/raster.hpp"

#include <opencv2/imgcodecs.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace crossview::geo {

namespace fs = std::filesystem;

Point GeoTransform::world_to_pixel(Point w) const {
    const double det = determinant();
    if (std::abs(det) < 1e-15) throw RasterError("non-invertible geotransform");
    const double x = w.x - c, y = w.y - f;
    return {(e * x - b * y) / det, (-d * x + a * y) / det};
}

Raster::Raster(cv::Mat data, GeoTransform transform, std::optional<double> nodata)
    : data_(std::move(data)), transform_(transform), nodata_(nodata) {
    if (!transform_.invertible()) throw RasterError("non-invertible geotransform");
    if (data_.empty()) throw RasterError("empty raster data");
}

bool Raster::world_in_bounds(Point w) const {
    const Point p = transform_.world_to_pixel(w);
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= data_.cols && p.y <= data_.rows;
}

namespace {

std::string world_file_path(const std::string& png_path) {
    fs::path p(png_path);
    p.replace_extension(".pgw");
    return p.string();
}

}  // namespace

Raster Raster::load_image(const std::string& png_path) {
    cv::Mat img = cv::imread(png_path, cv::IMREAD_COLOR);
    if (img.empty()) throw RasterError("cannot read image: " + png_path);
    std::ifstream wf(world_file_path(png_path));
    if (!wf) throw RasterError("missing world file for: " + png_path);
    // World file line order: a d b e c' f' referencing pixel (0,0) center.
    double a, d, b, e, cx, fy;
    if (!(wf >> a >> d >> b >> e >> cx >> fy))
        throw RasterError("malformed world file for: " + png_path);
    GeoTransform t{a, b, cx - 0.5 * a - 0.5 * b, d, e, fy - 0.5 * d - 0.5 * e};
    return Raster(std::move(img), t);
}

void Raster::save_image(const std::string& png_path) const {
    if (!cv::imwrite(png_path, data_)) throw RasterError("cannot write image: " + png_path);
    std::ofstream wf(world_file_path(png_path));
    const GeoTransform& t = transform_;
    const Point origin_center = t.pixel_to_world(0.5, 0.5);
    wf << std::setprecision(17) << t.a << "\n" << t.d << "\n" << t.b << "\n" << t.e << "\n"
       << origin_center.x << "\n" << origin_center.y << "\n";
}

Raster Raster::load_ascii_grid(const std::string& asc_path) {
    std::ifstream in(asc_path);
    if (!in) throw RasterError("cannot read grid: " + asc_path);
    int ncols = -1, nrows = -1;
    double xll = 0, yll = 0, cellsize = 1;
    std::optional<double> nodata;
    std::string key;
    // Header: key/value lines until the first numeric token.
    while (in >> key) {
        std::string lower;
        for (char ch : key) lower.push_back(static_cast<char>(std::tolower(ch)));
        if (lower == "ncols") in >> ncols;
        else if (lower == "nrows") in >> nrows;
        else if (lower == "xllcorner") in >> xll;
        else if (lower == "yllcorner") in >> yll;
        else if (lower == "cellsize") in >> cellsize;
        else if (lower == "nodata_value") { double v; in >> v; nodata = v; }
        else {
            // First data token.
            if (ncols <= 0 || nrows <= 0) throw RasterError("bad grid header: " + asc_path);
            cv::Mat grid(nrows, ncols, CV_32FC1);
            grid.at<float>(0, 0) = std::stof(key);
            for (int r = 0; r < nrows; ++r)
                for (int c = (r == 0 ? 1 : 0); c < ncols; ++c) {
                    double v;
                    if (!(in >> v)) throw RasterError("truncated grid: " + asc_path);
                    grid.at<float>(r, c) = static_cast<float>(v);
                }
            GeoTransform t = GeoTransform::north_up({xll, yll + nrows * cellsize}, cellsize);
            return Raster(std::move(grid), t, nodata);
        }
    }
    throw RasterError("grid has no data: " + asc_path);
}

void Raster::save_ascii_grid(const std::string& asc_path) const {
    if (data_.type() != CV_32FC1) throw RasterError("ascii grid requires CV_32FC1 data");
    const GeoTransform& t = transform_;
    if (t.b != 0.0 || t.d != 0.0 || t.a <= 0.0 || t.e >= 0.0 || std::abs(t.a + t.e) > 1e-9)
        throw RasterError("ascii grid requires square north-up pixels");
    std::ofstream out(asc_path);
    if (!out) throw RasterError("cannot write grid: " + asc_path);
    out << "ncols " << data_.cols << "\n";
    out << "nrows " << data_.rows << "\n";
    out << std::setprecision(17);
    out << "xllcorner " << t.c << "\n";
    out << "yllcorner " << (t.f + t.e * data_.rows) << "\n";
    out << "cellsize " << t.a << "\n";
    if (nodata_) out << "NODATA_value " << *nodata_ << "\n";
    out << std::setprecision(9);
    for (int r = 0; r < data_.rows; ++r) {
        for (int c = 0; c < data_.cols; ++c) {
            if (c) out << ' ';
            out << data_.at<float>(r, c);
        }
        out << "\n";
    }
}

}  // namespace crossview::geo
