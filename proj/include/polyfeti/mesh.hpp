#pragma once

#include "polyfeti/geometry.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace polyfeti {

/// Undirected edge stored with a < b.
struct Edge {
    int a = 0;
    int b = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Polygonal tessellation: vertices plus counterclockwise element cycles.
/// Edges and boundary markers are derived once at construction; the object is
/// immutable afterwards.
class PolygonalMesh {
public:
    PolygonalMesh() = default;
    PolygonalMesh(std::vector<Point2> vertices, std::vector<std::vector<int>> elements);

    const std::vector<Point2>& vertices() const { return vertices_; }
    const std::vector<std::vector<int>>& elements() const { return elements_; }
    const std::vector<Edge>& edges() const { return edges_; }

    std::size_t num_vertices() const { return vertices_.size(); }
    std::size_t num_elements() const { return elements_.size(); }
    std::size_t num_edges() const { return edges_.size(); }

    /// Global edge id of local edge i (vertex i -> vertex i+1) of element e.
    int element_edge(std::size_t e, std::size_t i) const { return element_edges_[e][i]; }
    const std::vector<int>& element_edges(std::size_t e) const { return element_edges_[e]; }

    /// Number of elements using each edge (1 on the boundary, 2 inside).
    int edge_incidence(std::size_t edge) const { return edge_incidence_[edge]; }
    bool is_boundary_edge(std::size_t edge) const { return edge_incidence_[edge] == 1; }
    bool is_boundary_vertex(std::size_t v) const { return boundary_vertex_[v] != 0; }
    const std::vector<std::uint8_t>& boundary_vertex_flags() const { return boundary_vertex_; }

    std::vector<Point2> element_polygon(std::size_t e) const;
    double element_area(std::size_t e) const;
    double total_area() const;
    Rect bounding_box() const;

private:
    std::vector<Point2> vertices_;
    std::vector<std::vector<int>> elements_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> element_edges_;
    std::vector<int> edge_incidence_;
    std::vector<std::uint8_t> boundary_vertex_;
};

/// Relative vertex merge tolerance: points closer than this times the domain
/// diameter are the same vertex.
inline constexpr double kMergeTolerance = 1e-12;

struct MeshQualityReport {
    double h = 0.0;                 // max element diameter
    double h_min = 0.0;             // min edge length
    double gamma0 = 0.0;            // min (kernel inradius / h_K)
    double gamma1 = 0.0;            // min (min vertex distance / h_K)
    double uniformity_ratio = 0.0;  // max h_K / min h_K
    std::vector<int> non_star_shaped;  // elements whose kernel is empty
};

MeshQualityReport compute_quality(const PolygonalMesh& mesh);

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate(const PolygonalMesh& mesh);

/// Random Voronoi tessellation of `domain` clipped to the rectangle, with
/// optional Lloyd relaxation. Deterministic for fixed arguments.
PolygonalMesh generate_voronoi(int n_cells, std::uint64_t rng_seed, int lloyd_iterations, const Rect& domain);

/// Structured nx x ny quadrilateral mesh (test fixtures, refinement studies).
PolygonalMesh generate_quad_grid(int nx, int ny, const Rect& domain);

/// Spatial hash that merges points closer than a tolerance. Insertion order
/// decides which coordinates survive, so results are deterministic.
class VertexPool {
public:
    explicit VertexPool(double tolerance);
    int insert(Point2 p);
    const std::vector<Point2>& points() const { return points_; }
    std::vector<Point2> release() { return std::move(points_); }

private:
    double tol_;
    double cell_;
    std::vector<Point2> points_;
    std::unordered_map<std::uint64_t, std::vector<int>> buckets_;

    std::uint64_t key(std::int64_t ix, std::int64_t iy) const;
};

}  // namespace polyfeti
