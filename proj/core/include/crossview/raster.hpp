#pragma once

#include <opencv2/core.hpp>

#include <optional>
#include <stdexcept>
#include <string>

#include "crossview/geometry.hpp"

namespace crossview::geo {

class RasterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Affine pixel <-> world map. World coordinates of the center of pixel
/// (col, row) are (a*col + b*row + c, d*col + e*row + f) evaluated at
/// col+0.5, row+0.5.
struct GeoTransform {
    double a = 1.0, b = 0.0, c = 0.0;
    double d = 0.0, e = -1.0, f = 0.0;

    Point pixel_to_world(double col, double row) const {
        return {a * col + b * row + c, d * col + e * row + f};
    }
    Point world_to_pixel(Point w) const;
    double determinant() const { return a * e - b * d; }
    bool invertible() const { return std::abs(determinant()) > 1e-15; }

    /// North-up transform with square pixels: origin = top-left corner.
    static GeoTransform north_up(Point top_left, double pixel_size) {
        return {pixel_size, 0.0, top_left.x, 0.0, -pixel_size, top_left.y};
    }
};

/// Geo-referenced raster. Pixel data is a cv::Mat (CV_8UC3 imagery or
/// CV_32FC1 single-band grids such as TIR).
class Raster {
public:
    Raster() = default;
    Raster(cv::Mat data, GeoTransform transform,
           std::optional<double> nodata = std::nullopt);

    const cv::Mat& data() const { return data_; }
    cv::Mat& data() { return data_; }
    const GeoTransform& transform() const { return transform_; }
    std::optional<double> nodata() const { return nodata_; }
    int width() const { return data_.cols; }
    int height() const { return data_.rows; }
    int band_count() const { return data_.channels(); }

    Point pixel_center_world(int col, int row) const {
        return transform_.pixel_to_world(col + 0.5, row + 0.5);
    }
    bool world_in_bounds(Point w) const;

    /// PNG image plus ESRI world file (six-line affine sidecar, .pgw/.wld).
    static Raster load_image(const std::string& png_path);
    void save_image(const std::string& png_path) const;

    /// ESRI ASCII grid (.asc): single float band with embedded
    /// georeferencing and NODATA_value.
    static Raster load_ascii_grid(const std::string& asc_path);
    void save_ascii_grid(const std::string& asc_path) const;

private:
    cv::Mat data_;
    GeoTransform transform_;
    std::optional<double> nodata_;
};

}  // namespace crossview::geo
