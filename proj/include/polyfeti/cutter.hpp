#pragma once

// Making a tessellation conform to an unrelated coarse subdomain layout:
// every mesh edge and layout edge is split at their mutual intersections
// (the "edge soup"), faces of the resulting planar arrangement are traced by
// leftmost turns, and each traced polygon is assigned to the subdomain that
// contains it.

#include "polyfeti/geometry.hpp"
#include "polyfeti/mesh.hpp"
#include "polyfeti/mesh_io.hpp"
#include "polyfeti/predicates.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace polyfeti {

/// Coarse decomposition of the domain into simple CCW polygons.
struct SubdomainLayout {
    std::vector<PolygonCycle> subdomains;

    std::size_t size() const { return subdomains.size(); }
    /// Largest subdomain diameter H.
    double max_diameter() const;

    /// m x m squares (or rectangles, for non-square domains) covering `domain`.
    static SubdomainLayout grid(int m, const Rect& domain);
};

/// Checks the layout invariants against the area of the domain it must tile.
ValidationReport validate_layout(const SubdomainLayout& layout, double domain_area);

enum class Provenance : std::uint8_t { Mesh = 1, Subdomain = 2, Both = 3 };

struct EdgeSoup {
    std::vector<Point2> vertices;
    std::vector<Edge> edges;
    std::vector<Provenance> provenance;
};

/// Splits all mesh edges and layout edges at their mutual intersections.
/// Throws GeometryError when the result violates the soup invariant (two edges
/// meeting anywhere but at a shared endpoint) or contains degenerate input edges.
EdgeSoup build_edge_soup(const PolygonalMesh& mesh, const SubdomainLayout& layout);

struct OrientedEdge {
    int from = 0;
    int to = 0;
    friend bool operator==(const OrientedEdge&, const OrientedEdge&) = default;
};

/// The leftmost continuation of `current` among `incident` edges leaving
/// current.to. Left turns win over right turns; among left turns the sharpest
/// (smallest normalized dot product with `current`), among right or straight
/// continuations the flattest (largest dot product). The reversal of `current`
/// is only taken when it is the sole option. Candidate order is decided by
/// exact orientation tests, which give the same ranking as the dot products.
OrientedEdge leftmost_edge(std::span<const Point2> vertices, OrientedEdge current,
                           std::span<const OrientedEdge> incident);

struct TraceResult {
    std::vector<std::vector<int>> polygons;  // counterclockwise faces
    std::vector<int> outer;                  // the clockwise face (discarded from polygons)
    std::size_t consumed_half_edges = 0;
};

/// Traces every face of the soup's planar arrangement. Each oriented edge is
/// consumed exactly once; exactly one face must come out clockwise.
TraceResult trace_polygons(const EdgeSoup& soup);

struct CutMesh {
    PolygonalMesh mesh;
    SubdomainLayout layout;  // may be empty when loaded from files
    std::vector<int> element_subdomain;
    int num_subdomains = 0;
};

/// Full pipeline: soup, tracing, mesh assembly, element-to-subdomain assignment.
CutMesh cut(const PolygonalMesh& mesh, const SubdomainLayout& layout);

/// Assigns each element of `mesh` to the layout polygon containing its kernel point.
std::vector<int> assign_subdomains(const PolygonalMesh& mesh, const SubdomainLayout& layout);

}  // namespace polyfeti
