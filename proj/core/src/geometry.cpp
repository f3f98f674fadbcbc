#include "crossview/geometry.hpp"

#include <algorithm>
#include <limits>

namespace crossview::geo {

Ring::Ring(std::vector<Point> vertices) : verts_(std::move(vertices)) {
    // Drop an explicit closing vertex if present.
    if (verts_.size() >= 2) {
        const Point& first = verts_.front();
        const Point& last = verts_.back();
        if (first.x == last.x && first.y == last.y) verts_.pop_back();
    }
}

double Ring::signed_area() const {
    double acc = 0.0;
    const std::size_t n = verts_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = verts_[i];
        const Point& b = verts_[(i + 1) % n];
        acc += cross(a, b);
    }
    return 0.5 * acc;
}

Point Ring::centroid() const {
    const std::size_t n = verts_.size();
    double a = signed_area();
    if (std::abs(a) < 1e-12) {
        // Degenerate ring: fall back to vertex mean.
        Point m{0, 0};
        for (const Point& p : verts_) m = m + p;
        return (1.0 / static_cast<double>(n)) * m;
    }
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = verts_[i];
        const Point& q = verts_[(i + 1) % n];
        const double w = cross(p, q);
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    return {cx / (6.0 * a), cy / (6.0 * a)};
}

namespace {

// Winding-style crossing count; `strict` excludes boundary points.
int point_in_ring(Point p, const std::vector<Point>& v, bool strict) {
    const std::size_t n = v.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = v[i];
        const Point& b = v[j];
        // On-edge check.
        const double c = cross(b - a, p - a);
        if (std::abs(c) < 1e-12 && dot(p - a, p - b) <= 1e-12) {
            return strict ? 0 : 1;
        }
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_int = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < x_int) inside = !inside;
        }
    }
    return inside ? 1 : 0;
}

}  // namespace

bool Ring::contains_interior(Point p) const { return point_in_ring(p, verts_, true) == 1; }
bool Ring::contains(Point p) const { return point_in_ring(p, verts_, false) == 1; }

void Ring::bounding_box(Point& lo, Point& hi) const {
    lo = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    hi = {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
    for (const Point& p : verts_) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
}

Ring Ring::normalized() const {
    if (signed_area() >= 0.0) return *this;
    std::vector<Point> rev(verts_.rbegin(), verts_.rend());
    return Ring(std::move(rev));
}

std::vector<double> segment_ring_crossings(Point a, Point b, const Ring& ring) {
    std::vector<double> ts;
    const auto& v = ring.vertices();
    const std::size_t n = v.size();
    const Point d = b - a;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = v[i];
        const Point& q = v[(i + 1) % n];
        const Point e = q - p;
        const double denom = cross(d, e);
        if (std::abs(denom) < 1e-15) continue;  // parallel
        const double t = cross(p - a, e) / denom;
        const double u = cross(p - a, d) / denom;
        if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) ts.push_back(t);
    }
    std::sort(ts.begin(), ts.end());
    return ts;
}

bool segment_enters_interior(Point a, Point b, const Ring& ring, double& entry_t, double eps) {
    std::vector<double> ts = segment_ring_crossings(a, b, ring);
    ts.insert(ts.begin(), 0.0);
    ts.push_back(1.0);
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        const double t0 = ts[i], t1 = ts[i + 1];
        if (t1 - t0 <= eps) continue;
        const double tm = 0.5 * (t0 + t1);
        const Point mid = a + tm * (b - a);
        if (ring.contains_interior(mid)) {
            entry_t = t0;
            return true;
        }
    }
    return false;
}

double bearing_deg(Point from, Point to) {
    const double rad = std::atan2(to.x - from.x, to.y - from.y);  // clockwise from +y
    return normalize_deg(rad * 180.0 / M_PI);
}

double normalize_deg(double deg) {
    double r = std::fmod(deg, 360.0);
    if (r < 0.0) r += 360.0;
    return r;
}

bool Arc::contains(double deg) const {
    // Inclusive of both endpoints with a small tolerance so that the extreme
    // angles that define a covering arc test as contained.
    const double rel = normalize_deg(deg - start_deg);
    return rel <= width_deg + 1e-9 || rel >= 360.0 - 1e-9 || width_deg >= 360.0;
}

Arc minimal_covering_arc(const std::vector<double>& angles_deg) {
    if (angles_deg.empty()) return {0.0, 0.0};
    std::vector<double> a;
    a.reserve(angles_deg.size());
    for (double d : angles_deg) a.push_back(normalize_deg(d));
    std::sort(a.begin(), a.end());
    // The minimal covering arc is the complement of the largest gap.
    double best_gap = a.front() + 360.0 - a.back();
    std::size_t gap_after = a.size() - 1;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        const double g = a[i + 1] - a[i];
        if (g > best_gap) {
            best_gap = g;
            gap_after = i;
        }
    }
    Arc arc;
    arc.start_deg = a[(gap_after + 1) % a.size()];
    arc.width_deg = 360.0 - best_gap;
    return arc;
}

}  // namespace crossview::geo
