#include "polyfeti/mesh_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace polyfeti {

namespace {

// Reads logical lines, skipping blanks and '#' comments, tracking line numbers.
class LineReader {
public:
    explicit LineReader(std::istream& is) : is_(is) {}

    bool next(std::istringstream& out)
    {
        std::string line;
        while (std::getline(is_, line)) {
            ++line_no_;
            const auto pos = line.find_first_not_of(" \t\r");
            if (pos == std::string::npos || line[pos] == '#') continue;
            out.clear();
            out.str(line);
            return true;
        }
        return false;
    }

    std::istringstream expect(const char* what)
    {
        std::istringstream ss;
        if (!next(ss)) throw ParseError(std::string("unexpected end of file, expected ") + what, line_no_ + 1);
        return ss;
    }

    int line() const { return line_no_; }

private:
    std::istream& is_;
    int line_no_ = 0;
};

void expect_header(LineReader& in, const std::string& word)
{
    auto ss = in.expect(word.c_str());
    std::string w;
    int version = 0;
    if (!(ss >> w >> version) || w != word || version != 1)
        throw ParseError("expected header '" + word + " 1'", in.line());
}

long read_count(LineReader& in, const std::string& word)
{
    auto ss = in.expect(word.c_str());
    std::string w;
    long n = -1;
    if (!(ss >> w >> n) || w != word || n < 0) throw ParseError("expected '" + word + " <count>'", in.line());
    return n;
}

double read_double(std::istringstream& ss, const LineReader& in)
{
    std::string tok;
    if (!(ss >> tok)) throw ParseError("missing coordinate", in.line());
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw ParseError("bad number '" + tok + "'", in.line());
    return v;
}

void check_trailing(std::istringstream& ss, const LineReader& in)
{
    std::string rest;
    if (ss >> rest) throw ParseError("unexpected trailing token '" + rest + "'", in.line());
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

template <class Fn>
void with_output(const std::string& path, Fn&& fn)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    fn(os);
    if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

template <class Fn>
auto with_input(const std::string& path, Fn&& fn)
{
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open '" + path + "'", 0);
    return fn(is);
}

}  // namespace

void write_mesh(std::ostream& os, const PolygonalMesh& mesh)
{
    os << "polymesh 1\n";
    os << "vertices " << mesh.num_vertices() << '\n';
    for (const Point2& p : mesh.vertices()) os << format_double(p.x) << ' ' << format_double(p.y) << '\n';
    os << "elements " << mesh.num_elements() << '\n';
    for (const auto& cyc : mesh.elements()) {
        os << cyc.size();
        for (int v : cyc) os << ' ' << v;
        os << '\n';
    }
}

PolygonalMesh read_mesh(std::istream& is)
{
    LineReader in(is);
    expect_header(in, "polymesh");
    const long nv = read_count(in, "vertices");
    std::vector<Point2> verts;
    verts.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        auto ss = in.expect("vertex");
        const double x = read_double(ss, in);
        const double y = read_double(ss, in);
        check_trailing(ss, in);
        verts.push_back({x, y});
    }
    const long ne = read_count(in, "elements");
    std::vector<std::vector<int>> elems;
    elems.reserve(static_cast<std::size_t>(ne));
    for (long e = 0; e < ne; ++e) {
        auto ss = in.expect("element");
        long n = 0;
        if (!(ss >> n) || n < 3) throw ParseError("element needs a vertex count >= 3", in.line());
        std::vector<int> cyc;
        for (long i = 0; i < n; ++i) {
            long v = 0;
            if (!(ss >> v)) throw ParseError("element lists fewer than " + std::to_string(n) + " vertices", in.line());
            if (v < 0 || v >= nv) throw ParseError("element references nonexistent vertex " + std::to_string(v), in.line());
            cyc.push_back(static_cast<int>(v));
        }
        check_trailing(ss, in);
        elems.push_back(std::move(cyc));
    }
    std::istringstream extra;
    if (in.next(extra)) throw ParseError("unexpected content after elements", in.line());
    return PolygonalMesh(std::move(verts), std::move(elems));
}

void save_mesh(const PolygonalMesh& mesh, const std::string& path)
{
    with_output(path, [&](std::ostream& os) { write_mesh(os, mesh); });
}

PolygonalMesh load_mesh(const std::string& path)
{
    return with_input(path, [](std::istream& is) { return read_mesh(is); });
}

void write_layout(std::ostream& os, const std::vector<PolygonCycle>& subdomains)
{
    os << "layout 1\n";
    os << "subdomains " << subdomains.size() << '\n';
    for (const auto& poly : subdomains) {
        os << poly.size();
        for (const Point2& p : poly) os << ' ' << format_double(p.x) << ' ' << format_double(p.y);
        os << '\n';
    }
}

std::vector<PolygonCycle> read_layout(std::istream& is)
{
    LineReader in(is);
    expect_header(in, "layout");
    const long l = read_count(in, "subdomains");
    std::vector<PolygonCycle> out;
    for (long s = 0; s < l; ++s) {
        auto ss = in.expect("subdomain polygon");
        long n = 0;
        if (!(ss >> n) || n < 3) throw ParseError("subdomain needs a vertex count >= 3", in.line());
        PolygonCycle poly;
        for (long i = 0; i < n; ++i) {
            const double x = read_double(ss, in);
            const double y = read_double(ss, in);
            poly.push_back({x, y});
        }
        check_trailing(ss, in);
        out.push_back(std::move(poly));
    }
    std::istringstream extra;
    if (in.next(extra)) throw ParseError("unexpected content after subdomains", in.line());
    return out;
}

void save_layout(const std::vector<PolygonCycle>& subdomains, const std::string& path)
{
    with_output(path, [&](std::ostream& os) { write_layout(os, subdomains); });
}

std::vector<PolygonCycle> load_layout(const std::string& path)
{
    return with_input(path, [](std::istream& is) { return read_layout(is); });
}

void save_element_subdomain(const std::vector<int>& element_subdomain, int num_subdomains, const std::string& path)
{
    with_output(path, [&](std::ostream& os) {
        os << "element_subdomain " << element_subdomain.size() << ' ' << num_subdomains << '\n';
        for (int s : element_subdomain) os << s << '\n';
    });
}

std::vector<int> load_element_subdomain(const std::string& path, int* num_subdomains)
{
    return with_input(path, [&](std::istream& is) {
        LineReader in(is);
        auto ss = in.expect("element_subdomain header");
        std::string w;
        long m = -1, l = -1;
        if (!(ss >> w >> m >> l) || w != "element_subdomain" || m < 0 || l < 1)
            throw ParseError("expected 'element_subdomain <M> <L>'", in.line());
        std::vector<int> out;
        for (long i = 0; i < m; ++i) {
            auto row = in.expect("subdomain index");
            long s = -1;
            if (!(row >> s) || s < 0 || s >= l) throw ParseError("subdomain index out of range", in.line());
            out.push_back(static_cast<int>(s));
        }
        if (num_subdomains) *num_subdomains = static_cast<int>(l);
        return out;
    });
}

}  // namespace polyfeti
