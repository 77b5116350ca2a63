#include "polyfeti/mesh.hpp"

#include "polyfeti/predicates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace polyfeti {

namespace {

std::uint64_t edge_key(int a, int b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

// ---------------------------------------------------------------------------
// PolygonalMesh

PolygonalMesh::PolygonalMesh(std::vector<Point2> vertices, std::vector<std::vector<int>> elements)
    : vertices_(std::move(vertices)), elements_(std::move(elements))
{
    std::unordered_map<std::uint64_t, int> lookup;
    lookup.reserve(elements_.size() * 4);
    element_edges_.resize(elements_.size());
    for (std::size_t e = 0; e < elements_.size(); ++e) {
        const auto& cyc = elements_[e];
        element_edges_[e].resize(cyc.size());
        for (std::size_t i = 0; i < cyc.size(); ++i) {
            const int a = cyc[i], b = cyc[(i + 1) % cyc.size()];
            auto [it, inserted] = lookup.try_emplace(edge_key(a, b), static_cast<int>(edges_.size()));
            if (inserted) {
                edges_.push_back({std::min(a, b), std::max(a, b)});
                edge_incidence_.push_back(0);
            }
            ++edge_incidence_[it->second];
            element_edges_[e][i] = it->second;
        }
    }
    boundary_vertex_.assign(vertices_.size(), 0);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        if (edge_incidence_[i] != 1) continue;
        for (int v : {edges_[i].a, edges_[i].b})
            if (v >= 0 && static_cast<std::size_t>(v) < vertices_.size()) boundary_vertex_[v] = 1;
    }
}

std::vector<Point2> PolygonalMesh::element_polygon(std::size_t e) const
{
    std::vector<Point2> poly;
    poly.reserve(elements_[e].size());
    for (int v : elements_[e]) poly.push_back(vertices_[v]);
    return poly;
}

double PolygonalMesh::element_area(std::size_t e) const { return signed_area(element_polygon(e)); }

double PolygonalMesh::total_area() const
{
    double a = 0.0;
    for (std::size_t e = 0; e < elements_.size(); ++e) a += element_area(e);
    return a;
}

Rect PolygonalMesh::bounding_box() const
{
    Rect r{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
           std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
    for (const Point2& p : vertices_) {
        r.xmin = std::min(r.xmin, p.x);
        r.ymin = std::min(r.ymin, p.y);
        r.xmax = std::max(r.xmax, p.x);
        r.ymax = std::max(r.ymax, p.y);
    }
    return r;
}

// ---------------------------------------------------------------------------
// VertexPool

VertexPool::VertexPool(double tolerance) : tol_(tolerance), cell_(tolerance > 0.0 ? tolerance : 1e-300)
{
}

std::uint64_t VertexPool::key(std::int64_t ix, std::int64_t iy) const
{
    return static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint64_t>(iy) * 0xC2B2AE3D27D4EB4Full;
}

int VertexPool::insert(Point2 p)
{
    const auto ix = static_cast<std::int64_t>(std::floor(p.x / cell_));
    const auto iy = static_cast<std::int64_t>(std::floor(p.y / cell_));
    int best = -1;
    for (std::int64_t dx = -1; dx <= 1; ++dx)
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
            auto it = buckets_.find(key(ix + dx, iy + dy));
            if (it == buckets_.end()) continue;
            for (int idx : it->second)
                if (distance(points_[idx], p) <= tol_ && (best < 0 || idx < best)) best = idx;
        }
    if (best >= 0) return best;
    const int id = static_cast<int>(points_.size());
    points_.push_back(p);
    buckets_[key(ix, iy)].push_back(id);
    return id;
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate(const PolygonalMesh& mesh)
{
    ValidationReport report;
    auto add = [&](const std::string& s) { report.violations.push_back(s); };
    const auto& verts = mesh.vertices();
    const int nv = static_cast<int>(verts.size());

    for (int v = 0; v < nv; ++v)
        if (!is_finite(verts[v])) add("non-finite coordinates, vertex " + std::to_string(v));

    bool indices_ok = true;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& cyc = mesh.elements()[e];
        const std::string tag = "element " + std::to_string(e);
        if (cyc.size() < 3) {
            add("fewer than 3 vertices, " + tag);
            continue;
        }
        bool in_range = true;
        for (int v : cyc)
            if (v < 0 || v >= nv) {
                add("vertex index " + std::to_string(v) + " out of range, " + tag);
                in_range = false;
            }
        if (!in_range) {
            indices_ok = false;
            continue;
        }
        std::vector<int> sorted = cyc;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            add("repeated vertex, " + tag);
            continue;
        }
        const std::vector<Point2> poly = mesh.element_polygon(e);
        const std::size_t n = poly.size();
        bool simple = true;
        for (std::size_t i = 0; i < n && simple; ++i)
            for (std::size_t j = i + 1; j < n && simple; ++j) {
                const Segment si{poly[i], poly[(i + 1) % n]}, sj{poly[j], poly[(j + 1) % n]};
                const SegmentIntersection x = segment_intersection(si, sj);
                if (x.kind == SegmentIntersection::Kind::None) continue;
                const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
                if (!adjacent || x.kind == SegmentIntersection::Kind::Overlap) simple = false;
                else {
                    const Point2 shared = (j == i + 1) ? poly[j] : poly[i];
                    if (!(x.p == shared)) simple = false;
                }
            }
        if (!simple) add("self-intersecting boundary, " + tag);
        if (signed_area(poly) <= 0.0) add("negative signed area, " + tag);
    }
    if (!indices_ok) return report;

    // Conformity: incidence counts and opposite traversal of shared edges.
    std::vector<int> forward(mesh.num_edges(), 0);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& cyc = mesh.elements()[e];
        for (std::size_t i = 0; i < cyc.size(); ++i)
            if (cyc[i] < cyc[(i + 1) % cyc.size()]) ++forward[mesh.element_edge(e, i)];
    }
    for (std::size_t i = 0; i < mesh.num_edges(); ++i) {
        const Edge& ed = mesh.edges()[i];
        const std::string tag = "edge " + std::to_string(i) + " (" + std::to_string(ed.a) + "," + std::to_string(ed.b) + ")";
        if (mesh.edge_incidence(i) > 2) add("conformity violation: " + tag + " shared by " + std::to_string(mesh.edge_incidence(i)) + " elements");
        else if (mesh.edge_incidence(i) == 2 && forward[i] != 1) add("conformity violation: " + tag + " traversed twice in the same direction");
    }

    // Hanging vertices: an endpoint strictly inside a singly-used edge.
    std::vector<int> open_edges;
    for (std::size_t i = 0; i < mesh.num_edges(); ++i)
        if (mesh.edge_incidence(i) == 1) open_edges.push_back(static_cast<int>(i));
    if (!open_edges.empty()) {
        const Rect box = mesh.bounding_box();
        const int g = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(open_edges.size()))));
        const double cw = std::max(box.width(), 1e-300) / g, ch = std::max(box.height(), 1e-300) / g;
        auto cell_of = [&](double x, double y) {
            const int ix = std::clamp(static_cast<int>((x - box.xmin) / cw), 0, g - 1);
            const int iy = std::clamp(static_cast<int>((y - box.ymin) / ch), 0, g - 1);
            return std::pair{ix, iy};
        };
        std::vector<std::vector<int>> grid(static_cast<std::size_t>(g) * g);
        for (int ei : open_edges) {
            const Point2 p = verts[mesh.edges()[ei].a], q = verts[mesh.edges()[ei].b];
            auto [x0, y0] = cell_of(std::min(p.x, q.x), std::min(p.y, q.y));
            auto [x1, y1] = cell_of(std::max(p.x, q.x), std::max(p.y, q.y));
            for (int ix = x0; ix <= x1; ++ix)
                for (int iy = y0; iy <= y1; ++iy) grid[static_cast<std::size_t>(iy) * g + ix].push_back(ei);
        }
        std::vector<std::uint8_t> checked(verts.size(), 0);
        for (int ei : open_edges)
            for (int v : {mesh.edges()[ei].a, mesh.edges()[ei].b}) {
                if (checked[v]) continue;
                checked[v] = 1;
                auto [ix, iy] = cell_of(verts[v].x, verts[v].y);
                for (int other : grid[static_cast<std::size_t>(iy) * g + ix]) {
                    const Edge& oe = mesh.edges()[other];
                    if (oe.a == v || oe.b == v) continue;
                    if (on_segment(verts[oe.a], verts[oe.b], verts[v]))
                        add("conformity violation: vertex " + std::to_string(v) + " lies inside edge " +
                            std::to_string(other) + " (" + std::to_string(oe.a) + "," + std::to_string(oe.b) + ")");
                }
            }
    }

    // Coincident vertices.
    if (nv > 0) {
        const Rect box = mesh.bounding_box();
        VertexPool pool(kMergeTolerance * box.diameter());
        std::vector<int> first_vertex;
        for (int v = 0; v < nv; ++v) {
            const std::size_t before = pool.points().size();
            const int id = pool.insert(verts[v]);
            if (pool.points().size() == before)
                add("coincident vertices " + std::to_string(first_vertex[id]) + " and " + std::to_string(v));
            else
                first_vertex.push_back(v);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Quality

MeshQualityReport compute_quality(const PolygonalMesh& mesh)
{
    const ValidationReport v = validate(mesh);
    if (!v.ok()) throw GeometryError("compute_quality: invalid mesh: " + v.violations.front());
    if (mesh.num_elements() == 0) throw GeometryError("compute_quality: empty mesh");

    const std::size_t ne = mesh.num_elements();
    std::vector<double> hk(ne), g0(ne), g1(ne);
    std::vector<std::uint8_t> star(ne, 1);

#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t ei = 0; ei < static_cast<std::ptrdiff_t>(ne); ++ei) {
        const auto e = static_cast<std::size_t>(ei);
        const std::vector<Point2> poly = mesh.element_polygon(e);
        const double diam = polygon_diameter(poly);
        double min_pair = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < poly.size(); ++i)
            for (std::size_t j = i + 1; j < poly.size(); ++j) min_pair = std::min(min_pair, distance(poly[i], poly[j]));
        hk[e] = diam;
        g1[e] = min_pair / diam;
        if (polygon_kernel(poly).empty()) {
            star[e] = 0;
            g0[e] = 0.0;
        } else {
            g0[e] = kernel_inscribed_circle(poly).radius / diam;
        }
    }

    MeshQualityReport q;
    q.h = *std::max_element(hk.begin(), hk.end());
    q.gamma0 = *std::min_element(g0.begin(), g0.end());
    q.gamma1 = *std::min_element(g1.begin(), g1.end());
    q.uniformity_ratio = q.h / *std::min_element(hk.begin(), hk.end());
    q.h_min = std::numeric_limits<double>::max();
    for (const Edge& ed : mesh.edges()) q.h_min = std::min(q.h_min, distance(mesh.vertices()[ed.a], mesh.vertices()[ed.b]));
    for (std::size_t e = 0; e < ne; ++e)
        if (!star[e]) q.non_star_shaped.push_back(static_cast<int>(e));
    return q;
}

// ---------------------------------------------------------------------------
// Generators

namespace {

// Keeps the part of a convex cell closer to `p` than to `q`. Crossing points on
// axis-aligned cell edges keep the shared coordinate exactly, so cells clipped
// by the domain rectangle keep exact boundary coordinates.
std::vector<Point2> clip_bisector(const std::vector<Point2>& cell, Point2 p, Point2 q)
{
    const Point2 mid = 0.5 * (p + q);
    const Point2 dir = q - p;
    auto side = [&](Point2 x) { return dot(x - mid, dir); };
    std::vector<Point2> out;
    out.reserve(cell.size() + 1);
    for (std::size_t i = 0; i < cell.size(); ++i) {
        const Point2 a = cell[i], b = cell[(i + 1) % cell.size()];
        const double sa = side(a), sb = side(b);
        if (sa <= 0.0) out.push_back(a);
        if ((sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0)) {
            const double t = sa / (sa - sb);
            Point2 x = a + t * (b - a);
            if (a.x == b.x) x.x = a.x;
            if (a.y == b.y) x.y = a.y;
            out.push_back(x);
        }
    }
    return out;
}

std::vector<std::vector<Point2>> voronoi_cells(const std::vector<Point2>& seeds, const Rect& domain)
{
    const int n = static_cast<int>(seeds.size());
    const int g = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
    const double cw = domain.width() / g, ch = domain.height() / g;
    auto cell_index = [&](Point2 p) {
        const int ix = std::clamp(static_cast<int>((p.x - domain.xmin) / cw), 0, g - 1);
        const int iy = std::clamp(static_cast<int>((p.y - domain.ymin) / ch), 0, g - 1);
        return std::pair{ix, iy};
    };
    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(g) * g);
    for (int i = 0; i < n; ++i) {
        auto [ix, iy] = cell_index(seeds[i]);
        buckets[static_cast<std::size_t>(iy) * g + ix].push_back(i);
    }

    const std::vector<Point2> box{{domain.xmin, domain.ymin}, {domain.xmax, domain.ymin},
                                  {domain.xmax, domain.ymax}, {domain.xmin, domain.ymax}};
    std::vector<std::vector<Point2>> cells(n);
    const double step = std::min(cw, ch);
#pragma omp parallel for schedule(dynamic, 32)
    for (int i = 0; i < n; ++i) {
        const Point2 p = seeds[i];
        std::vector<Point2> cell = box;
        auto [cx, cy] = cell_index(p);
        for (int ring = 0; ring <= g; ++ring) {
            for (int iy = cy - ring; iy <= cy + ring; ++iy)
                for (int ix = cx - ring; ix <= cx + ring; ++ix) {
                    if (std::max(std::abs(ix - cx), std::abs(iy - cy)) != ring) continue;
                    if (ix < 0 || iy < 0 || ix >= g || iy >= g) continue;
                    for (int j : buckets[static_cast<std::size_t>(iy) * g + ix]) {
                        if (j == i || seeds[j] == p) continue;
                        cell = clip_bisector(cell, p, seeds[j]);
                    }
                }
            double reach = 0.0;
            for (const Point2& v : cell) reach = std::max(reach, distance(p, v));
            if (ring * step >= 2.0 * reach) break;
        }
        cells[i] = std::move(cell);
    }
    return cells;
}

}  // namespace

PolygonalMesh generate_voronoi(int n_cells, std::uint64_t rng_seed, int lloyd_iterations, const Rect& domain)
{
    if (n_cells < 1) throw std::invalid_argument("generate_voronoi: n_cells must be >= 1");
    if (lloyd_iterations < 0) throw std::invalid_argument("generate_voronoi: lloyd_iterations must be >= 0");
    if (!(domain.width() > 0.0) || !(domain.height() > 0.0) || !std::isfinite(domain.area()))
        throw GeometryError("generate_voronoi: degenerate domain");

    // Portable uniform doubles in [0, 1) from the raw 64-bit engine output.
    std::mt19937_64 rng(rng_seed);
    auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1p-53; };
    std::vector<Point2> seeds(n_cells);
    for (Point2& s : seeds) {
        s.x = domain.xmin + uniform() * domain.width();
        s.y = domain.ymin + uniform() * domain.height();
    }

    std::vector<std::vector<Point2>> cells = voronoi_cells(seeds, domain);
    for (int it = 0; it < lloyd_iterations; ++it) {
        for (int i = 0; i < n_cells; ++i) seeds[i] = area_centroid(cells[i]);
        cells = voronoi_cells(seeds, domain);
    }

    VertexPool pool(kMergeTolerance * domain.diameter());
    std::vector<std::vector<int>> elements;
    elements.reserve(cells.size());
    for (const auto& cell : cells) {
        std::vector<int> cyc;
        for (const Point2& v : cell) {
            const int id = pool.insert(v);
            if (cyc.empty() || cyc.back() != id) cyc.push_back(id);
        }
        while (cyc.size() > 1 && cyc.front() == cyc.back()) cyc.pop_back();
        if (cyc.size() >= 3) elements.push_back(std::move(cyc));
    }
    return PolygonalMesh(pool.release(), std::move(elements));
}

PolygonalMesh generate_quad_grid(int nx, int ny, const Rect& domain)
{
    if (nx < 1 || ny < 1) throw std::invalid_argument("generate_quad_grid: nx, ny must be >= 1");
    std::vector<Point2> verts;
    verts.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            const double x = (i == nx) ? domain.xmax : domain.xmin + domain.width() * i / nx;
            const double y = (j == ny) ? domain.ymax : domain.ymin + domain.height() * j / ny;
            verts.push_back({x, y});
        }
    std::vector<std::vector<int>> elems;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int v0 = j * (nx + 1) + i;
            elems.push_back({v0, v0 + 1, v0 + nx + 2, v0 + nx + 1});
        }
    return PolygonalMesh(std::move(verts), std::move(elems));
}

}  // namespace polyfeti
