#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyfeti {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(b - a); }
inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Axis-aligned rectangle [xmin, xmax] x [ymin, ymax].
struct Rect {
    double xmin = 0.0;
    double ymin = 0.0;
    double xmax = 1.0;
    double ymax = 1.0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }
    double diameter() const { return std::hypot(width(), height()); }
};

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Polygon helpers. Polygons are vertex cycles without repeated closing vertex.

double signed_area(std::span<const Point2> poly);
Point2 area_centroid(std::span<const Point2> poly);
double polygon_diameter(std::span<const Point2> poly);

/// Kernel of a simple polygon (set of points that see the whole polygon) as a
/// convex CCW polygon; empty when the polygon is not star-shaped.
std::vector<Point2> polygon_kernel(std::span<const Point2> poly);

/// Largest circle inside the kernel of a CCW polygon. Radius 0 if the kernel
/// is empty or degenerate.
struct InscribedCircle {
    Point2 center;
    double radius = 0.0;
};
InscribedCircle kernel_inscribed_circle(std::span<const Point2> poly);

/// Point guaranteed strictly inside a star-shaped polygon: centroid of its
/// kernel. Falls back to the area centroid if the kernel is empty.
Point2 kernel_point(std::span<const Point2> poly);

enum class Containment { Outside, Boundary, Inside };

/// Exact point-in-polygon classification (uses the exact orientation test).
Containment locate_point(std::span<const Point2> poly, Point2 p);

}  // namespace polyfeti
