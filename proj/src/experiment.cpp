#include "polyfeti/experiment.hpp"

#include "polyfeti/mesh_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace polyfeti {

namespace {

std::vector<std::string> split_words(const std::string& s)
{
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

template <class T>
T parse_number(const std::string& w, const char* what)
{
    T v{};
    const char* end = w.data() + w.size();
    const auto [ptr, ec] = std::from_chars(w.data(), end, v);
    if (ec != std::errc() || ptr != end) throw std::invalid_argument(std::string("expected ") + what + ", got '" + w + "'");
    return v;
}

std::string format_double(double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

}  // namespace

// ---------------------------------------------------------------------------
// Coefficients

RhoSpec parse_rho_spec(const std::string& text)
{
    const auto w = split_words(text);
    RhoSpec s;
    if (w.size() == 2 && w[0] == "constant") {
        s.a = s.b = parse_number<double>(w[1], "a number");
        if (!(s.a > 0.0) || !std::isfinite(s.a)) throw std::invalid_argument("rho must be positive");
        return s;
    }
    if (w.size() == 4 && (w[0] == "per-subdomain-random-logunif" || w[0] == "per-subdomain-random-pow10")) {
        s.kind = w[0] == "per-subdomain-random-logunif" ? RhoSpec::Kind::LogUniform : RhoSpec::Kind::Pow10Integer;
        s.a = parse_number<double>(w[1], "a number");
        s.b = parse_number<double>(w[2], "a number");
        s.seed = parse_number<std::uint64_t>(w[3], "a seed");
        if (s.kind == RhoSpec::Kind::LogUniform && !(s.a > 0.0 && s.b >= s.a && std::isfinite(s.b)))
            throw std::invalid_argument("logunif bounds must satisfy 0 < lo <= hi");
        if (s.kind == RhoSpec::Kind::Pow10Integer &&
            !(s.b >= s.a && s.a == std::floor(s.a) && s.b == std::floor(s.b) && std::abs(s.a) <= 300 && std::abs(s.b) <= 300))
            throw std::invalid_argument("pow10 exponents must be integers with amin <= amax");
        return s;
    }
    throw std::invalid_argument("bad rho spec '" + text +
                                "' (constant <v> | per-subdomain-random-logunif <lo> <hi> <seed> | "
                                "per-subdomain-random-pow10 <amin> <amax> <seed>)");
}

SourceSpec parse_source_spec(const std::string& text)
{
    const auto w = split_words(text);
    SourceSpec s;
    if (w.size() == 2 && w[0] == "expr" && w[1] == "sin2pi") return s;
    if (w.size() == 4 && w[0] == "per-subdomain-random-unif") {
        s.kind = SourceSpec::Kind::Uniform;
        s.lo = parse_number<double>(w[1], "a number");
        s.hi = parse_number<double>(w[2], "a number");
        s.seed = parse_number<std::uint64_t>(w[3], "a seed");
        if (!(s.hi >= s.lo) || !std::isfinite(s.lo) || !std::isfinite(s.hi))
            throw std::invalid_argument("unif bounds must satisfy lo <= hi");
        return s;
    }
    throw std::invalid_argument("bad f spec '" + text + "' (expr sin2pi | per-subdomain-random-unif <lo> <hi> <seed>)");
}

std::string to_string(const RhoSpec& s)
{
    switch (s.kind) {
    case RhoSpec::Kind::Constant: return "constant " + format_double(s.a);
    case RhoSpec::Kind::LogUniform:
        return "per-subdomain-random-logunif " + format_double(s.a) + " " + format_double(s.b) + " " + std::to_string(s.seed);
    case RhoSpec::Kind::Pow10Integer:
        return "per-subdomain-random-pow10 " + format_double(s.a) + " " + format_double(s.b) + " " + std::to_string(s.seed);
    }
    return {};
}

std::string to_string(const SourceSpec& s)
{
    if (s.kind == SourceSpec::Kind::Sin2Pi) return "expr sin2pi";
    return "per-subdomain-random-unif " + format_double(s.lo) + " " + format_double(s.hi) + " " + std::to_string(s.seed);
}

double sin2pi_source(Point2 p)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return std::sin(two_pi * p.x) * std::sin(two_pi * p.y);
}

CoefficientField make_coefficients(const CutMesh& cutmesh, const RhoSpec& rho, const SourceSpec& f)
{
    const int L = cutmesh.num_subdomains;
    std::vector<double> rho_sub(static_cast<std::size_t>(L), rho.a);
    if (rho.kind != RhoSpec::Kind::Constant) {
        std::mt19937_64 rng(rho.seed);
        for (auto& r : rho_sub) {
            if (rho.kind == RhoSpec::Kind::LogUniform) {
                std::uniform_real_distribution<double> u(std::log10(rho.a), std::log10(rho.b));
                r = std::pow(10.0, u(rng));
            } else {
                std::uniform_int_distribution<int> u(static_cast<int>(rho.a), static_cast<int>(rho.b));
                r = std::pow(10.0, u(rng));
            }
        }
    }
    const std::size_t n = cutmesh.mesh.num_elements();
    std::vector<double> rho_el(n);
    for (std::size_t e = 0; e < n; ++e) rho_el[e] = rho_sub[cutmesh.element_subdomain[e]];
    if (f.kind == SourceSpec::Kind::Sin2Pi) return CoefficientField(std::move(rho_el), sin2pi_source);

    std::mt19937_64 rng(f.seed);
    std::uniform_real_distribution<double> u(f.lo, f.hi);
    std::vector<double> f_sub(static_cast<std::size_t>(L));
    for (auto& v : f_sub) v = u(rng);
    std::vector<double> f_el(n);
    for (std::size_t e = 0; e < n; ++e) f_el[e] = f_sub[cutmesh.element_subdomain[e]];
    return CoefficientField(std::move(rho_el), std::move(f_el));
}

std::pair<RhoSpec, SourceSpec> type_i_data() { return {RhoSpec{}, SourceSpec{}}; }

std::pair<RhoSpec, SourceSpec> type_ii_data(std::uint64_t seed)
{
    // Independent streams for rho and f.
    return {RhoSpec{RhoSpec::Kind::Pow10Integer, -5.0, 5.0, seed},
            SourceSpec{SourceSpec::Kind::Uniform, -1.0, 1.0, seed ^ 0x9e3779b97f4a7c15ULL}};
}

// ---------------------------------------------------------------------------
// Records

const std::string& run_record_header()
{
    static const std::string h = "L,dof,inv_h,h_min,gamma0,gamma1,lambda_min,lambda_max,kappa_sqrt,iterations,wall_time";
    return h;
}

std::string to_csv_row(const RunRecord& r)
{
    std::string s = std::to_string(r.L) + "," + std::to_string(r.dof);
    for (double v : {r.inv_h, r.h_min, r.gamma0, r.gamma1, r.lambda_min, r.lambda_max, r.kappa_sqrt})
        s += "," + format_double(v);
    s += "," + std::to_string(r.iterations) + "," + format_double(r.wall_time);
    return s;
}

std::vector<RunRecord> read_run_records(std::istream& is)
{
    std::vector<RunRecord> out;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!header) {
            if (line != run_record_header()) throw ParseError("expected header '" + run_record_header() + "'", lineno);
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 11) throw ParseError("expected 11 fields, got " + std::to_string(f.size()), lineno);
        try {
            RunRecord r;
            r.L = parse_number<int>(f[0], "an integer");
            r.dof = parse_number<long>(f[1], "an integer");
            double* dst[] = {&r.inv_h, &r.h_min, &r.gamma0, &r.gamma1, &r.lambda_min, &r.lambda_max, &r.kappa_sqrt};
            for (int i = 0; i < 7; ++i) *dst[i] = parse_number<double>(f[2 + i], "a number");
            r.iterations = parse_number<int>(f[9], "an integer");
            r.wall_time = parse_number<double>(f[10], "a number");
            out.push_back(r);
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    if (!header) throw ParseError("empty run table", lineno);
    return out;
}

// ---------------------------------------------------------------------------
// Single solve

SolveOutcome run_solve(const CutMesh& cutmesh, const CoefficientField& coeff, const SolveOptions& options)
{
    const auto quality = compute_quality(cutmesh.mesh);
    const auto start = std::chrono::steady_clock::now();
    SolveOutcome out;
    out.feti = solve_feti_dp(cutmesh, options.order, coeff, options.cg, options.exec);
    const auto stop = std::chrono::steady_clock::now();

    RunRecord& r = out.record;
    r.L = cutmesh.num_subdomains;
    r.dof = DofMap(cutmesh.mesh, options.order).total();
    r.inv_h = 1.0 / quality.h;
    r.h_min = quality.h_min;
    r.gamma0 = quality.gamma0;
    r.gamma1 = quality.gamma1;
    r.lambda_min = out.feti.cg.lambda_min;
    r.lambda_max = out.feti.cg.lambda_max;
    r.kappa_sqrt = std::sqrt(r.lambda_max / r.lambda_min);
    r.iterations = out.feti.cg.iterations;
    r.wall_time = std::chrono::duration<double>(stop - start).count();

    if (options.oracle) {
        const auto global = assemble(cutmesh.mesh, options.order, coeff, options.exec);
        const Eigen::VectorXd direct = solve_direct(global);
        Eigen::VectorXd diff(direct.size());
        for (Eigen::Index i = 0; i < diff.size(); ++i)
            diff(i) = out.feti.solution.u(global.dofmap.free_to_global()[i]) - direct(i);
        const double ref = energy_norm(global.A, direct);
        out.oracle_discrepancy = ref > 0.0 ? energy_norm(global.A, diff) / ref : energy_norm(global.A, diff);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config

ExperimentConfig parse_experiment_config(std::istream& is)
{
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    auto ints = [&](const std::vector<std::string>& w, int min) {
        std::vector<int> v;
        for (const auto& s : w) {
            const int x = parse_number<int>(s, "an integer");
            if (x < min) throw std::invalid_argument("value " + s + " must be >= " + std::to_string(min));
            v.push_back(x);
        }
        return v;
    };
    auto single = [](const std::vector<std::string>& w) {
        if (w.size() != 1) throw std::invalid_argument("expected exactly one value");
        return w[0];
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (split_words(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
        const auto key_words = split_words(line.substr(0, eq));
        if (key_words.size() != 1) throw ParseError("bad key", lineno);
        const std::string& key = key_words[0];
        const std::string value = line.substr(eq + 1);
        const auto w = split_words(value);
        try {
            if (key == "cells") c.cells = ints(w, 1);
            else if (key == "mesh") c.mesh_path = single(w);
            else if (key == "seed") c.seed = parse_number<std::uint64_t>(single(w), "a seed");
            else if (key == "lloyd") c.lloyd = ints({single(w)}, 0)[0];
            else if (key == "grid") c.grids = ints(w, 2);
            else if (key == "layout") c.layout_path = single(w);
            else if (key == "order") c.orders = ints(w, 1);
            else if (key == "data") {
                for (const auto& d : w)
                    if (d != "type-i" && d != "type-ii" && d != "custom")
                        throw std::invalid_argument("unknown data type '" + d + "'");
                c.data = w;
            } else if (key == "seeds") {
                c.seeds.clear();
                for (const auto& s : w) c.seeds.push_back(parse_number<std::uint64_t>(s, "a seed"));
            } else if (key == "rho") c.rho = parse_rho_spec(value);
            else if (key == "f") c.f = parse_source_spec(value);
            else if (key == "tolerance") {
                c.cg.rel_tolerance = parse_number<double>(single(w), "a number");
                if (!(c.cg.rel_tolerance > 0.0 && c.cg.rel_tolerance < 1.0)) throw std::invalid_argument("tolerance must lie in (0, 1)");
            } else if (key == "max_iterations") c.cg.max_iterations = ints({single(w)}, 1)[0];
            else if (key == "output") c.output = single(w);
            else if (key == "plot_dir") c.plot_dir = single(w);
            else throw std::invalid_argument("unknown key '" + key + "'");
        } catch (const std::invalid_argument& e) {
            throw ParseError(key + ": " + e.what(), lineno);
        }
    }
    if (c.cells.empty() == c.mesh_path.empty())
        throw ParseError("exactly one of 'cells' (non-empty) or 'mesh' is required", 0);
    if (c.grids.empty() == c.layout_path.empty())
        throw ParseError("exactly one of 'grid' (non-empty) or 'layout' is required", 0);
    if (c.orders.empty()) throw ParseError("empty sweep: 'order' has no values", 0);
    if (c.data.empty()) throw ParseError("empty sweep: 'data' has no values", 0);
    if (std::count(c.data.begin(), c.data.end(), "type-ii") && c.seeds.empty())
        throw ParseError("empty sweep: type-ii needs 'seeds'", 0);
    if (std::count(c.data.begin(), c.data.end(), "custom") && !(c.rho && c.f))
        throw ParseError("data 'custom' needs both 'rho' and 'f'", 0);
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open config '" + path + "'", 0);
    return parse_experiment_config(is);
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<ExperimentRow> run_experiment(const ExperimentConfig& config, Execution exec, const RowCallback& on_row)
{
    struct MeshSource {
        std::string label;
        int cells;
    };
    std::vector<MeshSource> meshes;
    if (!config.mesh_path.empty()) meshes.push_back({config.mesh_path, 0});
    for (int n : config.cells) meshes.push_back({"cells=" + std::to_string(n), n});

    std::vector<SubdomainLayout> layouts;
    if (!config.layout_path.empty()) layouts.push_back(SubdomainLayout{load_layout(config.layout_path)});
    for (int m : config.grids) layouts.push_back(SubdomainLayout::grid(m, Rect{}));

    std::vector<ExperimentRow> rows;
    auto emit = [&](ExperimentRow row) {
        if (on_row) on_row(row);
        rows.push_back(std::move(row));
    };
    for (const auto& src : meshes) {
        std::optional<PolygonalMesh> mesh;
        std::string mesh_error;
        try {
            mesh = src.cells > 0 ? generate_voronoi(src.cells, config.seed, config.lloyd, Rect{}) : load_mesh(src.label);
        } catch (const std::exception& e) {
            mesh_error = e.what();
        }
        for (std::size_t li = 0; li < layouts.size(); ++li) {
            std::optional<CutMesh> cm;
            std::string cut_error = mesh_error;
            if (mesh) {
                try {
                    cm = cut(*mesh, layouts[li]);
                } catch (const std::exception& e) {
                    cut_error = e.what();
                }
            }
            for (int k : config.orders)
                for (const auto& data : config.data) {
                    const std::size_t n_seeds = data == "type-ii" ? config.seeds.size() : 1;
                    for (std::size_t si = 0; si < n_seeds; ++si) {
                        ExperimentRow row;
                        row.mesh = src.label;
                        row.cells = src.cells;
                        row.k = k;
                        row.data = data;
                        row.seed = data == "type-ii" ? config.seeds[si] : 0;
                        if (!cm) {
                            row.message = cut_error;
                            emit(std::move(row));
                            continue;
                        }
                        try {
                            const auto [rho, f] = data == "type-i"    ? type_i_data()
                                                  : data == "type-ii" ? type_ii_data(row.seed)
                                                                      : std::pair{*config.rho, *config.f};
                            const auto coeff = make_coefficients(*cm, rho, f);
                            row.record = run_solve(*cm, coeff, SolveOptions{k, config.cg, exec, false}).record;
                            row.ok = true;
                        } catch (const std::exception& e) {
                            row.message = e.what();
                        }
                        emit(std::move(row));
                    }
                }
        }
    }
    return rows;
}

namespace {

std::string keys_path(const std::string& csv)
{
    const std::filesystem::path p(csv);
    return (p.parent_path() / (p.stem().string() + ".keys.csv")).string();
}

std::string csv_escape(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += (c == '\n' ? ' ' : c);
    }
    return out + "\"";
}

std::string data_label(const ExperimentRow& r)
{
    return r.data == "type-ii" ? "type-ii-s" + std::to_string(r.seed) : r.data;
}

void write_series(const std::filesystem::path& path, std::vector<std::pair<double, double>> pts)
{
    std::sort(pts.begin(), pts.end());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    os << "# x y\n";
    for (const auto& [x, y] : pts) os << format_double(x) << ' ' << format_double(y) << '\n';
}

std::string mesh_tag(const ExperimentRow& r)
{
    return r.cells > 0 ? "cells" + std::to_string(r.cells) : std::filesystem::path(r.mesh).stem().string();
}

}  // namespace

std::vector<std::string> write_experiment_outputs(const ExperimentConfig& config, const std::vector<ExperimentRow>& rows)
{
    if (const auto dir = std::filesystem::path(config.output).parent_path(); !dir.empty())
        std::filesystem::create_directories(dir);
    std::ofstream csv(config.output), keys(keys_path(config.output));
    if (!csv || !keys) throw std::runtime_error("cannot write '" + config.output + "'");
    csv << run_record_header() << '\n';
    keys << "csv_row,mesh,L,k,data,seed,status,message\n";
    int csv_row = 0;
    for (const auto& r : rows) {
        if (r.ok) csv << to_csv_row(r.record) << '\n';
        keys << (r.ok ? std::to_string(++csv_row) : std::string("-")) << ',' << csv_escape(r.mesh) << ','
             << (r.ok ? std::to_string(r.record.L) : std::string("-")) << ',' << r.k << ',' << r.data << ',' << r.seed
             << ',' << (r.ok ? "ok" : "failed") << ',' << csv_escape(r.message) << '\n';
    }

    // Curves: kappa^(1/2) and iterations against dof (per L, k, data) and
    // against k (per mesh, L, data). Only curves with at least two points.
    using Series = std::map<std::string, std::vector<std::pair<double, double>>>;
    Series series;
    for (const auto& r : rows) {
        if (!r.ok) continue;
        const std::string L = "L" + std::to_string(r.record.L);
        const std::string by_dof = L + "_k" + std::to_string(r.k) + "_" + data_label(r);
        const std::string by_k = mesh_tag(r) + "_" + L + "_" + data_label(r);
        const double dof = static_cast<double>(r.record.dof);
        series["kappa_sqrt_vs_dof_" + by_dof].emplace_back(dof, r.record.kappa_sqrt);
        series["iterations_vs_dof_" + by_dof].emplace_back(dof, r.record.iterations);
        series["kappa_sqrt_vs_k_" + by_k].emplace_back(r.k, r.record.kappa_sqrt);
        series["iterations_vs_k_" + by_k].emplace_back(r.k, r.record.iterations);
    }
    std::vector<std::string> written;
    std::filesystem::create_directories(config.plot_dir);
    for (const auto& [name, pts] : series) {
        if (pts.size() < 2) continue;
        const auto path = std::filesystem::path(config.plot_dir) / (name + ".dat");
        write_series(path, pts);
        written.push_back(path.string());
    }
    return written;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: x values are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

}  // namespace polyfeti
