#include "polyfeti/geometry.hpp"

#include "polyfeti/predicates.hpp"

#include <algorithm>
#include <limits>

namespace polyfeti {

double signed_area(std::span<const Point2> poly)
{
    if (poly.size() < 3) return 0.0;
    const Point2 o = poly[0];
    double twice = 0.0;
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) twice += cross(poly[i] - o, poly[i + 1] - o);
    return 0.5 * twice;
}

Point2 area_centroid(std::span<const Point2> poly)
{
    const Point2 o = poly[0];
    double a = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
        const Point2 p = poly[i] - o, q = poly[i + 1] - o;
        const double w = cross(p, q);
        a += w;
        cx += w * (p.x + q.x);
        cy += w * (p.y + q.y);
    }
    if (a == 0.0) {
        Point2 mean{};
        for (const Point2& p : poly) mean = mean + p;
        return (1.0 / static_cast<double>(poly.size())) * mean;
    }
    return {o.x + cx / (3.0 * a), o.y + cy / (3.0 * a)};
}

double polygon_diameter(std::span<const Point2> poly)
{
    double d = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i)
        for (std::size_t j = i + 1; j < poly.size(); ++j) d = std::max(d, distance(poly[i], poly[j]));
    return d;
}

namespace {

// Keeps the part of convex polygon `in` on the left of the directed line a->b.
std::vector<Point2> clip_left(const std::vector<Point2>& in, Point2 a, Point2 b)
{
    std::vector<Point2> out;
    if (in.empty()) return out;
    const Point2 dir = b - a;
    auto side = [&](Point2 p) { return cross(dir, p - a); };
    for (std::size_t i = 0; i < in.size(); ++i) {
        const Point2 p = in[i];
        const Point2 q = in[(i + 1) % in.size()];
        const double sp = side(p), sq = side(q);
        if (sp >= 0.0) out.push_back(p);
        if ((sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0)) {
            const double t = sp / (sp - sq);
            out.push_back(p + t * (q - p));
        }
    }
    if (out.size() < 3) out.clear();
    return out;
}

}  // namespace

std::vector<Point2> polygon_kernel(std::span<const Point2> poly)
{
    double xmin = std::numeric_limits<double>::max(), ymin = xmin;
    double xmax = std::numeric_limits<double>::lowest(), ymax = xmax;
    for (const Point2& p : poly) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    std::vector<Point2> kernel{{xmin, ymin}, {xmax, ymin}, {xmax, ymax}, {xmin, ymax}};
    for (std::size_t i = 0; i < poly.size() && !kernel.empty(); ++i) {
        const Point2 a = poly[i], b = poly[(i + 1) % poly.size()];
        if (a == b) continue;
        kernel = clip_left(kernel, a, b);
    }
    if (!kernel.empty() && signed_area(kernel) <= 0.0) kernel.clear();
    return kernel;
}

InscribedCircle kernel_inscribed_circle(std::span<const Point2> poly)
{
    // Chebyshev centre of the kernel: maximise r subject to n_i . x - r >= n_i . a_i
    // for every edge with inward unit normal n_i. The optimum sits at a vertex of
    // the (x, y, r) feasible polytope, so every nonsingular triple is tried.
    struct HalfPlane {
        Point2 n;
        double offset;
    };
    std::vector<HalfPlane> hp;
    const double scale = polygon_diameter(poly);
    // Offsets relative to the first vertex keep them O(scale) for tiny elements.
    const Point2 origin = poly[0];
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point2 a = poly[i] - origin, b = poly[(i + 1) % poly.size()] - origin;
        const double len = distance(a, b);
        if (len == 0.0) continue;
        const Point2 n{-(b.y - a.y) / len, (b.x - a.x) / len};
        const HalfPlane h{n, dot(n, a)};
        const bool duplicate = std::any_of(hp.begin(), hp.end(), [&](const HalfPlane& o) {
            return norm(o.n - h.n) < 1e-14 && std::abs(o.offset - h.offset) <= 1e-14 * scale;
        });
        if (!duplicate) hp.push_back(h);
    }

    InscribedCircle best{};
    bool found = false;
    const double tol = 1e-12 * scale;
    const std::size_t m = hp.size();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            for (std::size_t k = j + 1; k < m; ++k) {
                // Solve [n_i -1; n_j -1; n_k -1] (x, y, r) = offsets by Cramer's rule.
                const HalfPlane* t[3] = {&hp[i], &hp[j], &hp[k]};
                auto det3 = [](const double m3[3][3]) {
                    return m3[0][0] * (m3[1][1] * m3[2][2] - m3[1][2] * m3[2][1]) -
                           m3[0][1] * (m3[1][0] * m3[2][2] - m3[1][2] * m3[2][0]) +
                           m3[0][2] * (m3[1][0] * m3[2][1] - m3[1][1] * m3[2][0]);
                };
                double a[3][3], rhs[3];
                for (int r = 0; r < 3; ++r) {
                    a[r][0] = t[r]->n.x;
                    a[r][1] = t[r]->n.y;
                    a[r][2] = -1.0;
                    rhs[r] = t[r]->offset;
                }
                const double d = det3(a);
                if (std::abs(d) < 1e-12) continue;
                double sol[3];
                for (int c = 0; c < 3; ++c) {
                    double ac[3][3];
                    for (int r = 0; r < 3; ++r)
                        for (int cc = 0; cc < 3; ++cc) ac[r][cc] = (cc == c) ? rhs[r] : a[r][cc];
                    sol[c] = det3(ac) / d;
                }
                const Point2 x{sol[0], sol[1]};
                const double r = sol[2];
                if (found && r <= best.radius) continue;
                const bool feasible = std::all_of(hp.begin(), hp.end(), [&](const HalfPlane& h) {
                    return dot(h.n, x) - r >= h.offset - tol;
                });
                if (feasible) {
                    best = {x + origin, r};
                    found = true;
                }
            }
    if (!found || best.radius < 0.0) return {area_centroid(poly), 0.0};
    return best;
}

Point2 kernel_point(std::span<const Point2> poly)
{
    const std::vector<Point2> kernel = polygon_kernel(poly);
    if (kernel.empty()) return area_centroid(poly);
    return area_centroid(kernel);
}

Containment locate_point(std::span<const Point2> poly, Point2 p)
{
    int winding = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point2 a = poly[i], b = poly[(i + 1) % poly.size()];
        if (on_segment(a, b, p)) return Containment::Boundary;
        if (a.y <= p.y) {
            if (b.y > p.y && orientation(a, b, p) == Orientation::Left) ++winding;
        } else {
            if (b.y <= p.y && orientation(a, b, p) == Orientation::Right) --winding;
        }
    }
    return winding != 0 ? Containment::Inside : Containment::Outside;
}

}  // namespace polyfeti
