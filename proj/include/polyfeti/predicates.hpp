#pragma once

#include "polyfeti/geometry.hpp"

namespace polyfeti {

enum class Orientation { Right = -1, Collinear = 0, Left = 1 };

/// Value whose sign equals the exact sign of det[(b - a); (c - b)], i.e. twice
/// the signed area of triangle abc. Adaptive-precision expansion arithmetic:
/// the magnitude is only approximate, the sign is always exact.
double orient2d(Point2 a, Point2 b, Point2 c);

/// Where c lies relative to the directed line a -> b.
Orientation orientation(Point2 a, Point2 b, Point2 c);

struct Segment {
    Point2 a;
    Point2 b;
};

struct SegmentIntersection {
    enum class Kind { None, Point, Overlap };
    Kind kind = Kind::None;
    Point2 p;  // the point, or the first overlap endpoint
    Point2 q;  // second overlap endpoint (Overlap only)
};

/// Exact classification of two closed segments. A proper crossing point is the
/// exact rational solution rounded once to nearest doubles; endpoint contacts
/// return the endpoint itself. Overlap endpoints are ordered along s1.
SegmentIntersection segment_intersection(const Segment& s1, const Segment& s2);

/// True if p lies on the closed segment [a, b] (exact).
bool on_segment(Point2 a, Point2 b, Point2 p);

/// Exactly-rounded crossing point of the lines through (a, b) and (c, d).
/// Precondition: the lines are not parallel.
Point2 line_crossing(Point2 a, Point2 b, Point2 c, Point2 d);

}  // namespace polyfeti
