#include "doctest.h"
#include "oracles.hpp"

#include "polyfeti/geometry.hpp"
#include "polyfeti/predicates.hpp"

#include <cmath>
#include <random>

using namespace polyfeti;

TEST_CASE("orientation of simple triples")
{
    CHECK(orientation({0, 0}, {1, 0}, {1, 1}) == Orientation::Left);
    CHECK(orientation({0, 0}, {1, 0}, {1, -1}) == Orientation::Right);
    CHECK(orientation({0, 0}, {1, 0}, {2, 0}) == Orientation::Collinear);
}

TEST_CASE("orientation at tiny scale is exact")
{
    // 2e-30 + 1e-60 rounds back to 2e-30, so the nudged coordinate is the next double up.
    const Point2 c{2e-30, std::nextafter(2e-30, 1.0)};
    CHECK(oracle::exact_orient({0, 0}, {1e-30, 1e-30}, c) == 1);
    CHECK(orientation({0, 0}, {1e-30, 1e-30}, c) == Orientation::Left);
    const double naive = (1e-30 - 0) * (c.y - 1e-30) - (1e-30 - 0) * (c.x - 1e-30);
    CHECK(naive == doctest::Approx(0.0));
}

TEST_CASE("orientation agrees with exact rationals on near-degenerate input")
{
    std::mt19937_64 rng(12345);
    int mismatches = 0;
    for (int i = 0; i < 20000; ++i) {
        const auto [a, b, c] = oracle::near_degenerate_triple(rng);
        if (static_cast<int>(orientation(a, b, c)) != oracle::exact_orient(a, b, c)) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("orientation is antisymmetric and cyclic")
{
    std::mt19937_64 rng(99);
    for (int i = 0; i < 2000; ++i) {
        const auto [a, b, c] = oracle::near_degenerate_triple(rng);
        const auto o = static_cast<int>(orientation(a, b, c));
        CHECK(static_cast<int>(orientation(b, c, a)) == o);
        CHECK(static_cast<int>(orientation(b, a, c)) == -o);
    }
}

TEST_CASE("segment intersection cases")
{
    using K = SegmentIntersection::Kind;
    auto r = segment_intersection({{0, 0}, {1, 1}}, {{0, 1}, {1, 0}});
    CHECK(r.kind == K::Point);
    CHECK(r.p == Point2{0.5, 0.5});

    CHECK(segment_intersection({{0, 0}, {1, 0}}, {{2, 0}, {3, 0}}).kind == K::None);

    r = segment_intersection({{0, 0}, {2, 0}}, {{1, 0}, {3, 0}});
    CHECK(r.kind == K::Overlap);
    CHECK(r.p == Point2{1, 0});
    CHECK(r.q == Point2{2, 0});

    r = segment_intersection({{0, 0}, {2, 0}}, {{2, 0}, {2, 5}});
    CHECK(r.kind == K::Point);
    CHECK(r.p == Point2{2, 0});

    r = segment_intersection({{0, 0}, {2, 0}}, {{1, 0}, {1, 3}});
    CHECK(r.kind == K::Point);
    CHECK(r.p == Point2{1, 0});

    CHECK(segment_intersection({{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}).kind == K::None);
}

TEST_CASE("crossing point is the correctly rounded rational solution")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const Point2 a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)}, d{u(rng), u(rng)};
        const mpq_class ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y), dx(d.x), dy(d.y);
        const mpq_class den = (bx - ax) * (dy - cy) - (by - ay) * (dx - cx);
        if (den == 0) continue;
        const mpq_class t = ((cx - ax) * (dy - cy) - (cy - ay) * (dx - cx)) / den;
        const mpq_class px = ax + t * (bx - ax), py = ay + t * (by - ay);
        const Point2 p = line_crossing(a, b, c, d);
        // Rounded to nearest: the exact value is within half an ulp.
        auto half_ulp_ok = [](double v, const mpq_class& exact) {
            const mpq_class err = abs(mpq_class(v) - exact);
            const double ulp = std::nextafter(std::abs(v), INFINITY) - std::abs(v);
            return err <= mpq_class(ulp) / 2;
        };
        CHECK(half_ulp_ok(p.x, px));
        CHECK(half_ulp_ok(p.y, py));
    }
}

TEST_CASE("polygon helpers")
{
    const std::vector<Point2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    CHECK(signed_area(square) == 1.0);
    CHECK(area_centroid(square) == Point2{0.5, 0.5});
    CHECK(polygon_diameter(square) == doctest::Approx(std::sqrt(2.0)));
    const auto ic = kernel_inscribed_circle(square);
    CHECK(ic.radius == doctest::Approx(0.5));
    CHECK(locate_point(square, {0.5, 0.5}) == Containment::Inside);
    CHECK(locate_point(square, {1.0, 0.3}) == Containment::Boundary);
    CHECK(locate_point(square, {1.5, 0.3}) == Containment::Outside);

    // L-shape: kernel is the lower-left unit square.
    const std::vector<Point2> ell{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
    const auto ker = polygon_kernel(ell);
    CHECK(std::abs(signed_area(ker) - 1.0) < 1e-14);
    CHECK(locate_point(ell, kernel_point(ell)) == Containment::Inside);

    // Not star-shaped: a comb with two deep slots.
    const std::vector<Point2> comb{{0, 0}, {5, 0}, {5, 3}, {4, 3}, {4, 0.5}, {3, 0.5}, {3, 3},
                                   {2, 3}, {2, 0.5}, {1, 0.5}, {1, 3}, {0, 3}};
    CHECK(polygon_kernel(comb).empty());
    CHECK(kernel_inscribed_circle(comb).radius == 0.0);
}
