#include "crossview/crs.hpp"

#include <cctype>
#include <cmath>

namespace crossview::geo {

namespace {

class LocalProjection final : public Projection {
public:
    Point project(Point p) const override { return p; }
    Point unproject(Point p) const override { return p; }
    std::string spec() const override { return "local"; }
};

// WGS84 transverse Mercator (Snyder series, forward direction). The inverse
// runs Newton iteration on the forward map, so project->unproject round-trips
// to machine precision regardless of the series truncation error.
class UtmProjection final : public Projection {
public:
    UtmProjection(int zone, bool south) : zone_(zone), south_(south) {
        lon0_ = (zone_ - 1) * 6.0 - 180.0 + 3.0;
    }

    Point project(Point lonlat) const override {
        const double a = kA, e2 = kE2;
        const double lat = lonlat.y * kDeg2Rad;
        const double lon = lonlat.x * kDeg2Rad;
        const double lon0 = lon0_ * kDeg2Rad;
        const double ep2 = e2 / (1.0 - e2);
        const double sin_lat = std::sin(lat), cos_lat = std::cos(lat), tan_lat = std::tan(lat);
        const double N = a / std::sqrt(1.0 - e2 * sin_lat * sin_lat);
        const double T = tan_lat * tan_lat;
        const double C = ep2 * cos_lat * cos_lat;
        const double A = (lon - lon0) * cos_lat;
        const double M = meridian_arc(lat);
        const double k0 = 0.9996;
        const double x = k0 * N *
                             (A + (1 - T + C) * A * A * A / 6.0 +
                              (5 - 18 * T + T * T + 72 * C - 58 * ep2) * std::pow(A, 5) / 120.0) +
                         500000.0;
        double y = k0 * (M + N * tan_lat *
                                 (A * A / 2.0 + (5 - T + 9 * C + 4 * C * C) * std::pow(A, 4) / 24.0 +
                                  (61 - 58 * T + T * T + 600 * C - 330 * ep2) * std::pow(A, 6) / 720.0));
        if (south_) y += 10000000.0;
        return {x, y};
    }

    Point unproject(Point xy) const override {
        // Newton on the forward map with a numeric Jacobian.
        Point ll{lon0_, south_ ? -1.0 : 1.0};
        for (int it = 0; it < 50; ++it) {
            const Point f = project(ll) - xy;
            if (std::abs(f.x) < 1e-9 && std::abs(f.y) < 1e-9) break;
            const double h = 1e-7;
            const Point fx = project({ll.x + h, ll.y}) - xy;
            const Point fy = project({ll.x, ll.y + h}) - xy;
            const double j11 = (fx.x - f.x) / h, j12 = (fy.x - f.x) / h;
            const double j21 = (fx.y - f.y) / h, j22 = (fy.y - f.y) / h;
            const double det = j11 * j22 - j12 * j21;
            if (std::abs(det) < 1e-20) break;
            ll.x -= (j22 * f.x - j12 * f.y) / det;
            ll.y -= (-j21 * f.x + j11 * f.y) / det;
        }
        return ll;
    }

    std::string spec() const override {
        return "utm:" + std::to_string(zone_) + (south_ ? "S" : "N");
    }

private:
    static constexpr double kA = 6378137.0;
    static constexpr double kE2 = 0.00669437999014;
    static constexpr double kDeg2Rad = M_PI / 180.0;

    double meridian_arc(double lat) const {
        const double a = kA, e2 = kE2;
        const double e4 = e2 * e2, e6 = e4 * e2;
        return a * ((1 - e2 / 4 - 3 * e4 / 64 - 5 * e6 / 256) * lat -
                    (3 * e2 / 8 + 3 * e4 / 32 + 45 * e6 / 1024) * std::sin(2 * lat) +
                    (15 * e4 / 256 + 45 * e6 / 1024) * std::sin(4 * lat) -
                    (35 * e6 / 3072) * std::sin(6 * lat));
    }

    int zone_;
    bool south_;
    double lon0_;
};

}  // namespace

std::unique_ptr<Projection> Projection::parse(const std::string& spec) {
    if (spec.empty() || spec == "local") return std::make_unique<LocalProjection>();
    if (spec.rfind("utm:", 0) == 0) {
        std::string rest = spec.substr(4);
        if (rest.size() < 2) throw CrsError("bad utm spec: " + spec);
        const char hemi = static_cast<char>(std::toupper(rest.back()));
        if (hemi != 'N' && hemi != 'S') throw CrsError("utm spec needs N/S suffix: " + spec);
        int zone = 0;
        try {
            zone = std::stoi(rest.substr(0, rest.size() - 1));
        } catch (const std::exception&) {
            throw CrsError("bad utm zone in: " + spec);
        }
        if (zone < 1 || zone > 60) throw CrsError("utm zone out of range: " + spec);
        return std::make_unique<UtmProjection>(zone, hemi == 'S');
    }
    throw CrsError("unknown CRS spec: " + spec);
}

}  // namespace crossview::geo
