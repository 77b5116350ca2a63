#include "polyfeti/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace polyfeti {

namespace {

// Legendre P_n(x) and its derivative by the three-term recurrence.
void legendre(int n, double x, double& p, double& dp)
{
    double p0 = 1.0, p1 = x;
    if (n == 0) {
        p = 1.0;
        dp = 0.0;
        return;
    }
    for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
    }
    p = p1;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

Rule1D gauss_legendre(int n)
{
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    Rule1D r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Chebyshev-like initial guess, then Newton.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double p = 0.0, dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            legendre(n, x, p, dp);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        legendre(n, x, p, dp);
        r.nodes[n - 1 - i] = x;
        r.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

Rule1D gauss_lobatto(int n)
{
    if (n < 2) throw std::invalid_argument("gauss_lobatto: n must be >= 2");
    // Interior nodes are the roots of P'_{n-1}; weights 2 / (n (n-1) P_{n-1}(x)^2).
    const int m = n - 1;
    Rule1D r;
    r.nodes.assign(n, 0.0);
    r.weights.assign(n, 0.0);
    r.nodes.front() = -1.0;
    r.nodes.back() = 1.0;
    const double wend = 2.0 / (n * (n - 1.0));
    r.weights.front() = r.weights.back() = wend;
    for (int i = 1; i < m; ++i) {
        double x = -std::cos(std::numbers::pi * i / m);
        for (int it = 0; it < 100; ++it) {
            // Newton on q(x) = P'_m(x) using (1 - x^2) P''_m = 2x P'_m - m(m+1) P_m.
            double p, dp;
            legendre(m, x, p, dp);
            const double d2p = (2.0 * x * dp - m * (m + 1.0) * p) / (1.0 - x * x);
            const double dx = dp / d2p;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p, dp;
        legendre(m, x, p, dp);
        r.nodes[i] = x;
        r.weights[i] = wend / (p * p);
    }
    // Enforce exact symmetry.
    for (int i = 0; i < n / 2; ++i) {
        const double x = 0.5 * (r.nodes[n - 1 - i] - r.nodes[i]);
        const double w = 0.5 * (r.weights[n - 1 - i] + r.weights[i]);
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = r.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    return r;
}

std::vector<QuadPoint> triangle_rule(Point2 a, Point2 b, Point2 c, int degree)
{
    // Collapsed square (Duffy): x = a + u (b - a) + u v (c - b) with u, v in [0, 1],
    // Jacobian 2|T| u; a Gauss rule of n points per direction with n >= (degree + 2) / 2.
    const int n = std::max(1, (degree + 2 + 1) / 2);
    const Rule1D g = gauss_legendre(n);
    const double twice_area = cross(b - a, c - a);
    std::vector<QuadPoint> pts;
    pts.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        const double u = 0.5 * (g.nodes[i] + 1.0);
        const double wu = 0.5 * g.weights[i];
        for (int j = 0; j < n; ++j) {
            const double v = 0.5 * (g.nodes[j] + 1.0);
            const double wv = 0.5 * g.weights[j];
            const Point2 x = a + u * (b - a) + (u * v) * (c - b);
            pts.push_back({x, wu * wv * u * twice_area});
        }
    }
    return pts;
}

std::vector<QuadPoint> polygon_rule(std::span<const Point2> poly, Point2 center, int degree)
{
    std::vector<QuadPoint> pts;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        auto tri = triangle_rule(center, poly[i], poly[(i + 1) % poly.size()], degree);
        pts.insert(pts.end(), tri.begin(), tri.end());
    }
    return pts;
}

}  // namespace polyfeti
