#include "polyfeti/predicates.hpp"

#include <gmpxx.h>
#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <tuple>

// Adaptive-precision orientation test after J. R. Shewchuk, "Adaptive
// Precision Floating-Point Arithmetic and Fast Robust Geometric Predicates".
// This translation unit must be compiled without floating-point contraction
// (no fused multiply-add), see src/CMakeLists.txt.

namespace polyfeti {
namespace {

constexpr double kEpsilon = 0x1p-53;
constexpr double kSplitter = 134217729.0;  // 2^27 + 1
constexpr double kResultErrBound = (3.0 + 8.0 * kEpsilon) * kEpsilon;
constexpr double kCcwErrBoundA = (3.0 + 16.0 * kEpsilon) * kEpsilon;
constexpr double kCcwErrBoundB = (2.0 + 12.0 * kEpsilon) * kEpsilon;
constexpr double kCcwErrBoundC = (9.0 + 64.0 * kEpsilon) * kEpsilon * kEpsilon;

inline void fast_two_sum(double a, double b, double& x, double& y)
{
    x = a + b;
    const double bvirt = x - a;
    y = b - bvirt;
}

inline void two_sum(double a, double b, double& x, double& y)
{
    x = a + b;
    const double bvirt = x - a;
    const double avirt = x - bvirt;
    const double bround = b - bvirt;
    const double around = a - avirt;
    y = around + bround;
}

inline void two_diff_tail(double a, double b, double x, double& y)
{
    const double bvirt = a - x;
    const double avirt = x + bvirt;
    const double bround = bvirt - b;
    const double around = a - avirt;
    y = around + bround;
}

inline void two_diff(double a, double b, double& x, double& y)
{
    x = a - b;
    two_diff_tail(a, b, x, y);
}

inline void split(double a, double& hi, double& lo)
{
    const double c = kSplitter * a;
    const double abig = c - a;
    hi = c - abig;
    lo = a - hi;
}

inline void two_product(double a, double b, double& x, double& y)
{
    x = a * b;
    double ahi, alo, bhi, blo;
    split(a, ahi, alo);
    split(b, bhi, blo);
    const double err1 = x - (ahi * bhi);
    const double err2 = err1 - (alo * bhi);
    const double err3 = err2 - (ahi * blo);
    y = (alo * blo) - err3;
}

inline void two_one_diff(double a1, double a0, double b, double& x2, double& x1, double& x0)
{
    double i;
    two_diff(a0, b, i, x0);
    two_sum(a1, i, x2, x1);
}

// (a1 + a0) - (b1 + b0) as a four-component expansion x[0..3].
inline void two_two_diff(double a1, double a0, double b1, double b0, double* x)
{
    double j, zero;
    two_one_diff(a1, a0, b0, j, zero, x[0]);
    two_one_diff(j, zero, b1, x[3], x[2], x[1]);
}

// Sum of two nonoverlapping expansions; zero components are dropped.
int fast_expansion_sum_zeroelim(int elen, const double* e, int flen, const double* f, double* h)
{
    double q, qnew, hh;
    int eindex = 0;
    int findex = 0;
    int hindex = 0;
    double enow = e[0];
    double fnow = f[0];
    auto next_e = [&] { ++eindex; enow = eindex < elen ? e[eindex] : 0.0; };
    auto next_f = [&] { ++findex; fnow = findex < flen ? f[findex] : 0.0; };

    if ((fnow > enow) == (fnow > -enow)) {
        q = enow;
        next_e();
    } else {
        q = fnow;
        next_f();
    }
    if (eindex < elen && findex < flen) {
        if ((fnow > enow) == (fnow > -enow)) {
            fast_two_sum(enow, q, qnew, hh);
            next_e();
        } else {
            fast_two_sum(fnow, q, qnew, hh);
            next_f();
        }
        q = qnew;
        if (hh != 0.0) h[hindex++] = hh;
        while (eindex < elen && findex < flen) {
            if ((fnow > enow) == (fnow > -enow)) {
                two_sum(q, enow, qnew, hh);
                next_e();
            } else {
                two_sum(q, fnow, qnew, hh);
                next_f();
            }
            q = qnew;
            if (hh != 0.0) h[hindex++] = hh;
        }
    }
    while (eindex < elen) {
        two_sum(q, enow, qnew, hh);
        next_e();
        q = qnew;
        if (hh != 0.0) h[hindex++] = hh;
    }
    while (findex < flen) {
        two_sum(q, fnow, qnew, hh);
        next_f();
        q = qnew;
        if (hh != 0.0) h[hindex++] = hh;
    }
    if (q != 0.0 || hindex == 0) h[hindex++] = q;
    return hindex;
}

double estimate(int len, const double* e)
{
    double q = e[0];
    for (int i = 1; i < len; ++i) q += e[i];
    return q;
}

double orient2d_adapt(Point2 pa, Point2 pb, Point2 pc, double detsum)
{
    const double acx = pa.x - pc.x;
    const double bcx = pb.x - pc.x;
    const double acy = pa.y - pc.y;
    const double bcy = pb.y - pc.y;

    double detleft, detlefttail, detright, detrighttail;
    two_product(acx, bcy, detleft, detlefttail);
    two_product(acy, bcx, detright, detrighttail);

    double b[4];
    two_two_diff(detleft, detlefttail, detright, detrighttail, b);

    double det = estimate(4, b);
    double errbound = kCcwErrBoundB * detsum;
    if (det >= errbound || -det >= errbound) return det;

    double acxtail, bcxtail, acytail, bcytail;
    two_diff_tail(pa.x, pc.x, acx, acxtail);
    two_diff_tail(pb.x, pc.x, bcx, bcxtail);
    two_diff_tail(pa.y, pc.y, acy, acytail);
    two_diff_tail(pb.y, pc.y, bcy, bcytail);

    if (acxtail == 0.0 && acytail == 0.0 && bcxtail == 0.0 && bcytail == 0.0) return det;

    errbound = kCcwErrBoundC * detsum + kResultErrBound * std::abs(det);
    det += (acx * bcytail + bcy * acxtail) - (acy * bcxtail + bcx * acytail);
    if (det >= errbound || -det >= errbound) return det;

    double s1, s0, t1, t0, u[4];
    double c1[8], c2[12], d[16];

    two_product(acxtail, bcy, s1, s0);
    two_product(acytail, bcx, t1, t0);
    two_two_diff(s1, s0, t1, t0, u);
    const int c1len = fast_expansion_sum_zeroelim(4, b, 4, u, c1);

    two_product(acx, bcytail, s1, s0);
    two_product(acy, bcxtail, t1, t0);
    two_two_diff(s1, s0, t1, t0, u);
    const int c2len = fast_expansion_sum_zeroelim(c1len, c1, 4, u, c2);

    two_product(acxtail, bcytail, s1, s0);
    two_product(acytail, bcxtail, t1, t0);
    two_two_diff(s1, s0, t1, t0, u);
    const int dlen = fast_expansion_sum_zeroelim(c2len, c2, 4, u, d);

    return d[dlen - 1];
}

double round_to_double(const mpq_class& q)
{
    mpfr_t r;
    mpfr_init2(r, 53);
    mpfr_set_q(r, q.get_mpq_t(), MPFR_RNDN);
    const double out = mpfr_get_d(r, MPFR_RNDN);
    mpfr_clear(r);
    return out;
}

bool lex_less(Point2 a, Point2 b) { return std::tie(a.x, a.y) < std::tie(b.x, b.y); }

}  // namespace

double orient2d(Point2 pa, Point2 pb, Point2 pc)
{
    const double detleft = (pa.x - pc.x) * (pb.y - pc.y);
    const double detright = (pa.y - pc.y) * (pb.x - pc.x);
    const double det = detleft - detright;
    double detsum;

    if (detleft > 0.0) {
        if (detright <= 0.0) return det;
        detsum = detleft + detright;
    } else if (detleft < 0.0) {
        if (detright >= 0.0) return det;
        detsum = -detleft - detright;
    } else {
        return det;
    }

    const double errbound = kCcwErrBoundA * detsum;
    if (det >= errbound || -det >= errbound) return det;
    return orient2d_adapt(pa, pb, pc, detsum);
}

Orientation orientation(Point2 a, Point2 b, Point2 c)
{
    const double d = orient2d(a, b, c);
    if (d > 0.0) return Orientation::Left;
    if (d < 0.0) return Orientation::Right;
    return Orientation::Collinear;
}

bool on_segment(Point2 a, Point2 b, Point2 p)
{
    if (orientation(a, b, p) != Orientation::Collinear) return false;
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

Point2 line_crossing(Point2 a, Point2 b, Point2 c, Point2 d)
{
    const mpq_class ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y), dx(d.x), dy(d.y);
    const mpq_class ux = bx - ax, uy = by - ay;
    const mpq_class vx = dx - cx, vy = dy - cy;
    const mpq_class den = ux * vy - uy * vx;
    if (den == 0) throw GeometryError("line_crossing: parallel lines");
    const mpq_class t = ((cx - ax) * vy - (cy - ay) * vx) / den;
    return {round_to_double(ax + t * ux), round_to_double(ay + t * uy)};
}

SegmentIntersection segment_intersection(const Segment& s1, const Segment& s2)
{
    using Kind = SegmentIntersection::Kind;
    const Point2 a = s1.a, b = s1.b, c = s2.a, d = s2.b;
    const Orientation o1 = orientation(a, b, c);
    const Orientation o2 = orientation(a, b, d);

    if (o1 == Orientation::Collinear && o2 == Orientation::Collinear) {
        // All four points on one line; lexicographic order is the order along it.
        auto [lo1, hi1] = std::minmax(a, b, lex_less);
        auto [lo2, hi2] = std::minmax(c, d, lex_less);
        const Point2 lo = lex_less(lo1, lo2) ? lo2 : lo1;
        const Point2 hi = lex_less(hi1, hi2) ? hi1 : hi2;
        if (lex_less(hi, lo)) return {};
        if (lo == hi) return {Kind::Point, lo, lo};
        const bool forward = lex_less(a, b);
        return forward ? SegmentIntersection{Kind::Overlap, lo, hi} : SegmentIntersection{Kind::Overlap, hi, lo};
    }
    if (o1 != Orientation::Collinear && o1 == o2) return {};

    const Orientation o3 = orientation(c, d, a);
    const Orientation o4 = orientation(c, d, b);
    if (o3 != Orientation::Collinear && o3 == o4) return {};

    if (o1 == Orientation::Collinear) return {Kind::Point, c, c};
    if (o2 == Orientation::Collinear) return {Kind::Point, d, d};
    if (o3 == Orientation::Collinear) return {Kind::Point, a, a};
    if (o4 == Orientation::Collinear) return {Kind::Point, b, b};

    const Point2 p = line_crossing(a, b, c, d);
    return {Kind::Point, p, p};
}

}  // namespace polyfeti
