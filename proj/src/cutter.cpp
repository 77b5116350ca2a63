#include "polyfeti/cutter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace polyfeti {

namespace {

std::uint64_t pair_key(int a, int b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

bool is_convex(std::span<const Point2> poly)
{
    for (std::size_t i = 0; i < poly.size(); ++i)
        if (orientation(poly[i], poly[(i + 1) % poly.size()], poly[(i + 2) % poly.size()]) == Orientation::Right)
            return false;
    return true;
}

// Part of `subject` inside the convex CCW polygon `clip`.
std::vector<Point2> clip_convex(std::vector<Point2> subject, std::span<const Point2> clip)
{
    for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
        const Point2 a = clip[i], b = clip[(i + 1) % clip.size()];
        std::vector<Point2> out;
        for (std::size_t j = 0; j < subject.size(); ++j) {
            const Point2 p = subject[j], q = subject[(j + 1) % subject.size()];
            const double sp = cross(b - a, p - a), sq = cross(b - a, q - a);
            if (sp >= 0.0) out.push_back(p);
            if ((sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0)) out.push_back(p + (sp / (sp - sq)) * (q - p));
        }
        subject = std::move(out);
    }
    return subject;
}

// Uniform bucket grid over segment bounding boxes.
class SegmentGrid {
public:
    SegmentGrid(const Rect& box, std::size_t expected)
        : box_(box), n_(std::max(1, static_cast<int>(std::sqrt(static_cast<double>(expected) / 2.0))))
    {
        cw_ = std::max(box.width(), 1e-300) / n_;
        ch_ = std::max(box.height(), 1e-300) / n_;
        cells_.resize(static_cast<std::size_t>(n_) * n_);
    }

    void insert(int id, Point2 p, Point2 q)
    {
        visit(p, q, [&](std::vector<int>& cell) { cell.push_back(id); });
    }

    template <class Fn>
    void visit(Point2 p, Point2 q, Fn&& fn)
    {
        const int x0 = ix(std::min(p.x, q.x)), x1 = ix(std::max(p.x, q.x));
        const int y0 = iy(std::min(p.y, q.y)), y1 = iy(std::max(p.y, q.y));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) fn(cells_[static_cast<std::size_t>(y) * n_ + x]);
    }

private:
    int ix(double x) const { return std::clamp(static_cast<int>(std::floor((x - box_.xmin) / cw_)), 0, n_ - 1); }
    int iy(double y) const { return std::clamp(static_cast<int>(std::floor((y - box_.ymin) / ch_)), 0, n_ - 1); }

    Rect box_;
    int n_;
    double cw_ = 1.0, ch_ = 1.0;
    std::vector<std::vector<int>> cells_;
};

struct RawSegment {
    int a;
    int b;
    Provenance prov;
};

}  // namespace

// ---------------------------------------------------------------------------
// Layout

double SubdomainLayout::max_diameter() const
{
    double h = 0.0;
    for (const auto& s : subdomains) h = std::max(h, polygon_diameter(s));
    return h;
}

SubdomainLayout SubdomainLayout::grid(int m, const Rect& domain)
{
    if (m < 1) throw std::invalid_argument("SubdomainLayout::grid: m must be >= 1");
    auto xs = [&](int i) { return i == m ? domain.xmax : domain.xmin + domain.width() * i / m; };
    auto ys = [&](int j) { return j == m ? domain.ymax : domain.ymin + domain.height() * j / m; };
    SubdomainLayout layout;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i)
            layout.subdomains.push_back({{xs(i), ys(j)}, {xs(i + 1), ys(j)}, {xs(i + 1), ys(j + 1)}, {xs(i), ys(j + 1)}});
    return layout;
}

ValidationReport validate_layout(const SubdomainLayout& layout, double domain_area)
{
    ValidationReport r;
    double total = 0.0;
    for (std::size_t s = 0; s < layout.size(); ++s) {
        const auto& poly = layout.subdomains[s];
        const double a = signed_area(poly);
        if (poly.size() < 3 || a <= 0.0) r.violations.push_back("subdomain " + std::to_string(s) + " is not a CCW polygon");
        total += a;
    }
    if (std::abs(total - domain_area) > 1e-12 * std::abs(domain_area))
        r.violations.push_back("subdomain areas sum to " + std::to_string(total) + ", domain area is " + std::to_string(domain_area));

    // Pairwise overlap, measured by convex clipping where one side is convex.
    for (std::size_t s = 0; s < layout.size(); ++s)
        for (std::size_t t = s + 1; t < layout.size(); ++t) {
            const auto& ps = layout.subdomains[s];
            const auto& pt = layout.subdomains[t];
            const std::span<const Point2>* clip = nullptr;
            std::span<const Point2> ss(ps), st(pt);
            std::vector<Point2> subject;
            if (is_convex(st)) {
                clip = &st;
                subject = ps;
            } else if (is_convex(ss)) {
                clip = &ss;
                subject = pt;
            } else {
                continue;
            }
            const auto inter = clip_convex(subject, *clip);
            const double overlap = inter.size() >= 3 ? std::abs(signed_area(inter)) : 0.0;
            if (overlap >= 1e-12 * std::abs(domain_area))
                r.violations.push_back("subdomains " + std::to_string(s) + " and " + std::to_string(t) + " overlap");
        }
    return r;
}

// ---------------------------------------------------------------------------
// Edge soup

EdgeSoup build_edge_soup(const PolygonalMesh& mesh, const SubdomainLayout& layout)
{
    Rect box = mesh.bounding_box();
    for (const auto& poly : layout.subdomains)
        for (const Point2& p : poly) {
            box.xmin = std::min(box.xmin, p.x);
            box.xmax = std::max(box.xmax, p.x);
            box.ymin = std::min(box.ymin, p.y);
            box.ymax = std::max(box.ymax, p.y);
        }
    VertexPool pool(kMergeTolerance * box.diameter());

    for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
        if (pool.insert(mesh.vertices()[v]) != static_cast<int>(v))
            throw GeometryError("build_edge_soup: mesh vertex " + std::to_string(v) + " coincides with an earlier vertex");

    std::vector<RawSegment> segs;
    for (const Edge& e : mesh.edges()) segs.push_back({e.a, e.b, Provenance::Mesh});
    const std::size_t n_mesh = segs.size();
    for (std::size_t s = 0; s < layout.size(); ++s) {
        const auto& poly = layout.subdomains[s];
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const int a = pool.insert(poly[i]);
            const int b = pool.insert(poly[(i + 1) % poly.size()]);
            if (a == b) throw GeometryError("build_edge_soup: zero-length edge in subdomain " + std::to_string(s));
            segs.push_back({a, b, Provenance::Subdomain});
        }
    }

    auto pos = [&](int id) { return pool.points()[id]; };
    std::vector<std::vector<int>> splits(segs.size());

    auto intersect = [&](std::size_t s, std::size_t t) {
        const Segment gs{pos(segs[s].a), pos(segs[s].b)};
        const Segment gt{pos(segs[t].a), pos(segs[t].b)};
        const SegmentIntersection x = segment_intersection(gs, gt);
        if (x.kind == SegmentIntersection::Kind::None) return;
        const int p = pool.insert(x.p);
        splits[s].push_back(p);
        splits[t].push_back(p);
        if (x.kind == SegmentIntersection::Kind::Overlap) {
            const int q = pool.insert(x.q);
            splits[s].push_back(q);
            splits[t].push_back(q);
        }
    };

    SegmentGrid grid(box, n_mesh);
    for (std::size_t i = 0; i < n_mesh; ++i) grid.insert(static_cast<int>(i), pos(segs[i].a), pos(segs[i].b));
    std::vector<std::size_t> stamp(n_mesh, std::numeric_limits<std::size_t>::max());
    for (std::size_t s = n_mesh; s < segs.size(); ++s) {
        grid.visit(pos(segs[s].a), pos(segs[s].b), [&](std::vector<int>& cell) {
            for (int m : cell) {
                if (stamp[m] == s) continue;
                stamp[m] = s;
                intersect(s, static_cast<std::size_t>(m));
            }
        });
        for (std::size_t t = s + 1; t < segs.size(); ++t) intersect(s, t);
    }

    // Cut every segment at its split points, sorted along the segment.
    EdgeSoup soup;
    std::unordered_map<std::uint64_t, int> index;
    for (std::size_t s = 0; s < segs.size(); ++s) {
        std::vector<int> pts = splits[s];
        pts.push_back(segs[s].a);
        pts.push_back(segs[s].b);
        const Point2 a = pos(segs[s].a), d = pos(segs[s].b) - a;
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        std::stable_sort(pts.begin(), pts.end(), [&](int p, int q) { return dot(pos(p) - a, d) < dot(pos(q) - a, d); });
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const int u = pts[i], v = pts[i + 1];
            auto [it, inserted] = index.try_emplace(pair_key(u, v), static_cast<int>(soup.edges.size()));
            if (inserted) {
                soup.edges.push_back({std::min(u, v), std::max(u, v)});
                soup.provenance.push_back(segs[s].prov);
            } else {
                auto& pv = soup.provenance[it->second];
                pv = static_cast<Provenance>(static_cast<std::uint8_t>(pv) | static_cast<std::uint8_t>(segs[s].prov));
            }
        }
    }
    soup.vertices = pool.release();

    // Re-validate after rounding: edges may only meet at shared endpoints.
    SegmentGrid check(box, soup.edges.size());
    for (std::size_t i = 0; i < soup.edges.size(); ++i)
        check.insert(static_cast<int>(i), soup.vertices[soup.edges[i].a], soup.vertices[soup.edges[i].b]);
    std::vector<std::size_t> seen(soup.edges.size(), std::numeric_limits<std::size_t>::max());
    for (std::size_t i = 0; i < soup.edges.size(); ++i) {
        const Edge ei = soup.edges[i];
        const Segment si{soup.vertices[ei.a], soup.vertices[ei.b]};
        check.visit(si.a, si.b, [&](std::vector<int>& cell) {
            for (int j : cell) {
                if (static_cast<std::size_t>(j) <= i || seen[j] == i) continue;
                seen[j] = i;
                const Edge ej = soup.edges[j];
                const SegmentIntersection x = segment_intersection(si, {soup.vertices[ej.a], soup.vertices[ej.b]});
                if (x.kind == SegmentIntersection::Kind::None) continue;
                int shared = -1;
                if (ei.a == ej.a || ei.a == ej.b) shared = ei.a;
                if (ei.b == ej.a || ei.b == ej.b) shared = ei.b;
                if (x.kind == SegmentIntersection::Kind::Point && shared >= 0 && x.p == soup.vertices[shared]) continue;
                throw GeometryError("build_edge_soup: soup edges " + std::to_string(i) + " and " + std::to_string(j) +
                                    " meet away from a shared endpoint");
            }
        });
    }
    return soup;
}

// ---------------------------------------------------------------------------
// Tracing

OrientedEdge leftmost_edge(std::span<const Point2> vertices, OrientedEdge current, std::span<const OrientedEdge> incident)
{
    const Point2 vi = vertices[current.from];
    const Point2 vj = vertices[current.to];

    const OrientedEdge* best = nullptr;
    bool best_left = false;
    const OrientedEdge* reversal = nullptr;
    for (const OrientedEdge& cand : incident) {
        if (cand.from != current.to) throw GeometryError("leftmost_edge: candidate does not leave the current head");
        if (cand.to == current.from) {
            reversal = &cand;
            continue;
        }
        const bool left = orientation(vi, vj, vertices[cand.to]) == Orientation::Left;
        if (best == nullptr || (left && !best_left)) {
            best = &cand;
            best_left = left;
            continue;
        }
        if (left != best_left) continue;
        // Same side of `current`: the candidate further counterclockwise has the
        // smaller dot product among left turns and the larger among right turns,
        // and is the leftmost either way.
        const Orientation o = orientation(vj, vertices[best->to], vertices[cand.to]);
        if (o == Orientation::Collinear)
            throw GeometryError("leftmost_edge: two incident edges leave vertex " + std::to_string(current.to) +
                                " in the same direction");
        if (o == Orientation::Left) best = &cand;
    }
    if (best) return *best;
    if (reversal) return *reversal;
    throw GeometryError("leftmost_edge: no incident edges at vertex " + std::to_string(current.to));
}

TraceResult trace_polygons(const EdgeSoup& soup)
{
    const std::size_t nv = soup.vertices.size();
    const std::size_t ne = soup.edges.size();
    std::vector<std::vector<int>> out_edges(nv);  // half-edge ids: 2e (a->b), 2e+1 (b->a)
    for (std::size_t e = 0; e < ne; ++e) {
        if (soup.edges[e].a == soup.edges[e].b) throw GeometryError("trace_polygons: zero-length edge " + std::to_string(e));
        out_edges[soup.edges[e].a].push_back(static_cast<int>(2 * e));
        out_edges[soup.edges[e].b].push_back(static_cast<int>(2 * e + 1));
    }
    for (std::size_t v = 0; v < nv; ++v)
        if (out_edges[v].size() == 1)
            throw GeometryError("trace_polygons: dangling edge at vertex " + std::to_string(v));

    auto half = [&](int h) {
        const Edge& e = soup.edges[h / 2];
        return (h % 2 == 0) ? OrientedEdge{e.a, e.b} : OrientedEdge{e.b, e.a};
    };

    TraceResult result;
    std::vector<std::uint8_t> used(2 * ne, 0);
    std::vector<OrientedEdge> candidates;
    std::vector<int> candidate_ids;
    int clockwise = 0;
    for (int start = 0; start < static_cast<int>(2 * ne); ++start) {
        if (used[start]) continue;
        std::vector<int> cycle;
        int h = start;
        do {
            if (used[h]) {
                throw GeometryError("trace_polygons: oriented edge (" + std::to_string(half(h).from) + "," +
                                    std::to_string(half(h).to) + ") consumed twice");
            }
            used[h] = 1;
            ++result.consumed_half_edges;
            const OrientedEdge cur = half(h);
            cycle.push_back(cur.from);
            candidates.clear();
            candidate_ids.clear();
            for (int o : out_edges[cur.to]) {
                candidates.push_back(half(o));
                candidate_ids.push_back(o);
            }
            const OrientedEdge next = leftmost_edge(soup.vertices, cur, candidates);
            h = candidate_ids[std::find(candidates.begin(), candidates.end(), next) - candidates.begin()];
        } while (h != start);

        std::vector<Point2> poly;
        poly.reserve(cycle.size());
        for (int v : cycle) poly.push_back(soup.vertices[v]);
        if (signed_area(poly) < 0.0) {
            ++clockwise;
            result.outer = std::move(cycle);
        } else {
            // Start each face at its smallest vertex id for a canonical form.
            std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()), cycle.end());
            result.polygons.push_back(std::move(cycle));
        }
    }
    if (result.consumed_half_edges != 2 * ne)
        throw GeometryError("trace_polygons: consumed " + std::to_string(result.consumed_half_edges) + " of " +
                            std::to_string(2 * ne) + " oriented edges");
    if (clockwise != 1)
        throw GeometryError("trace_polygons: expected exactly one clockwise face, found " + std::to_string(clockwise));
    return result;
}

// ---------------------------------------------------------------------------
// Cut

std::vector<int> assign_subdomains(const PolygonalMesh& mesh, const SubdomainLayout& layout)
{
    std::vector<Rect> boxes;
    for (const auto& poly : layout.subdomains) {
        Rect r{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
               std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
        for (const Point2& p : poly) {
            r.xmin = std::min(r.xmin, p.x);
            r.ymin = std::min(r.ymin, p.y);
            r.xmax = std::max(r.xmax, p.x);
            r.ymax = std::max(r.ymax, p.y);
        }
        boxes.push_back(r);
    }
    std::vector<int> owner(mesh.num_elements(), -1);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Point2 kp = kernel_point(mesh.element_polygon(e));
        for (std::size_t s = 0; s < layout.size(); ++s) {
            const Rect& b = boxes[s];
            if (kp.x < b.xmin || kp.x > b.xmax || kp.y < b.ymin || kp.y > b.ymax) continue;
            if (locate_point(layout.subdomains[s], kp) == Containment::Inside) {
                owner[e] = static_cast<int>(s);
                break;
            }
        }
        if (owner[e] < 0) throw GeometryError("assign_subdomains: element " + std::to_string(e) + " lies in no subdomain");
    }
    return owner;
}

CutMesh cut(const PolygonalMesh& mesh, const SubdomainLayout& layout)
{
    if (layout.size() == 0) throw GeometryError("cut: empty layout");
    const ValidationReport lv = validate_layout(layout, mesh.total_area());
    if (!lv.ok()) throw GeometryError("cut: invalid layout: " + lv.violations.front());

    EdgeSoup soup = build_edge_soup(mesh, layout);
    TraceResult traced = trace_polygons(soup);

    CutMesh out;
    out.mesh = PolygonalMesh(std::move(soup.vertices), std::move(traced.polygons));
    out.layout = layout;
    out.num_subdomains = static_cast<int>(layout.size());
    out.element_subdomain = assign_subdomains(out.mesh, layout);
    return out;
}

}  // namespace polyfeti
