#pragma once

#include "polyfeti/mesh.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyfeti {

/// Malformed input file. `line()` is 1-based, 0 when the file could not be opened.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line)
    {
    }
    int line() const { return line_; }

private:
    int line_;
};

// Mesh file:
//   polymesh 1
//   vertices N
//   x y            (N lines, %.16e)
//   elements M
//   n i1 ... in    (M lines, 0-based, counterclockwise)
// Lines starting with '#' and blank lines are ignored.
void write_mesh(std::ostream& os, const PolygonalMesh& mesh);
PolygonalMesh read_mesh(std::istream& is);
void save_mesh(const PolygonalMesh& mesh, const std::string& path);
PolygonalMesh load_mesh(const std::string& path);

// Layout file:
//   layout 1
//   subdomains L
//   n x1 y1 ... xn yn   (L lines)
using PolygonCycle = std::vector<Point2>;
void write_layout(std::ostream& os, const std::vector<PolygonCycle>& subdomains);
std::vector<PolygonCycle> read_layout(std::istream& is);
void save_layout(const std::vector<PolygonCycle>& subdomains, const std::string& path);
std::vector<PolygonCycle> load_layout(const std::string& path);

// Element -> subdomain sidecar:
//   element_subdomain M L
//   s                   (M lines)
void save_element_subdomain(const std::vector<int>& element_subdomain, int num_subdomains, const std::string& path);
std::vector<int> load_element_subdomain(const std::string& path, int* num_subdomains = nullptr);

}  // namespace polyfeti
