#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace crossview::geo {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Closed polygon ring. Vertices are stored without the duplicate closing
/// vertex; edges are (v[i], v[(i+1) % n]).
class Ring {
public:
    Ring() = default;
    explicit Ring(std::vector<Point> vertices);

    const std::vector<Point>& vertices() const { return verts_; }
    std::size_t size() const { return verts_.size(); }
    bool valid() const { return verts_.size() >= 3 && std::abs(signed_area()) > 0.0; }

    double signed_area() const;
    double area() const { return std::abs(signed_area()); }
    Point centroid() const;

    /// Strict interior test (boundary points are outside).
    bool contains_interior(Point p) const;
    /// Inclusive test (boundary points are inside).
    bool contains(Point p) const;

    void bounding_box(Point& lo, Point& hi) const;

    /// Counter-clockwise orientation normalization.
    Ring normalized() const;

private:
    std::vector<Point> verts_;
};

/// Intersection parameters t in [0,1] where segment a->b crosses the ring
/// boundary, sorted ascending.
std::vector<double> segment_ring_crossings(Point a, Point b, const Ring& ring);

/// True when the open segment a->b passes through the strict interior of the
/// ring for a sub-segment longer than eps (touching the boundary does not
/// count). On success, entry_t receives the parameter of first interior entry.
bool segment_enters_interior(Point a, Point b, const Ring& ring, double& entry_t,
                             double eps = 1e-9);

/// Bearing of `to` as seen from `from`, degrees clockwise from north (+y),
/// in [0, 360).
double bearing_deg(Point from, Point to);

/// Normalize any angle in degrees to [0, 360).
double normalize_deg(double deg);

/// Minimal arc [start, start+width) in degrees covering all given angles.
/// Angles may straddle the 0/360 wrap. width in (0, 360].
struct Arc {
    double start_deg = 0.0;
    double width_deg = 0.0;
    bool contains(double deg) const;
};
Arc minimal_covering_arc(const std::vector<double>& angles_deg);

}  // namespace crossview::geo
