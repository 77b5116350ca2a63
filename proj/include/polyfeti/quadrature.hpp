#pragma once

#include "polyfeti/geometry.hpp"

#include <span>
#include <vector>

namespace polyfeti {

struct Rule1D {
    std::vector<double> nodes;    // on [-1, 1], increasing
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule, exact for degree 2n - 1.
Rule1D gauss_legendre(int n_points);

/// n-point Gauss-Lobatto rule (endpoints included), exact for degree 2n - 3.
Rule1D gauss_lobatto(int n_points);

struct QuadPoint {
    Point2 x;
    double w;
};

/// Conical-product rule on a triangle, exact for polynomials of degree `degree`.
std::vector<QuadPoint> triangle_rule(Point2 a, Point2 b, Point2 c, int degree);

/// Rule on a star-shaped polygon: fan of triangles from `center` (a point of
/// the kernel), each integrated exactly to `degree`.
std::vector<QuadPoint> polygon_rule(std::span<const Point2> poly, Point2 center, int degree);

}  // namespace polyfeti
