#include "polyfeti/cli.hpp"

#include "polyfeti/experiment.hpp"
#include "polyfeti/mesh_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace polyfeti {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string sidecar_path(const std::string& mesh_path) { return mesh_path + ".subdomains"; }

CutMesh load_cut_mesh(const std::string& path)
{
    CutMesh cm;
    cm.mesh = load_mesh(path);
    cm.element_subdomain = load_element_subdomain(sidecar_path(path), &cm.num_subdomains);
    if (cm.element_subdomain.size() != cm.mesh.num_elements())
        throw ParseError(sidecar_path(path) + ": element count does not match the mesh", 0);
    for (int s : cm.element_subdomain)
        if (s < 0 || s >= cm.num_subdomains) throw ParseError(sidecar_path(path) + ": subdomain index out of range", 0);
    return cm;
}

void print_record(std::ostream& out, const RunRecord& r)
{
    out << "L            " << r.L << '\n'
        << "dof          " << r.dof << '\n'
        << "1/h          " << r.inv_h << '\n'
        << "h_min        " << r.h_min << '\n'
        << "gamma0       " << r.gamma0 << '\n'
        << "gamma1       " << r.gamma1 << '\n'
        << "lambda_min   " << r.lambda_min << '\n'
        << "lambda_max   " << r.lambda_max << '\n'
        << "kappa^(1/2)  " << r.kappa_sqrt << '\n'
        << "iterations   " << r.iterations << '\n'
        << "wall time    " << r.wall_time << " s\n";
}

void write_csv(const std::string& path, const std::vector<RunRecord>& rows)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << run_record_header() << '\n';
    for (const auto& r : rows) os << to_csv_row(r) << '\n';
}

// Curve label per row from the keys sidecar written by `experiment`, or
// "L=<L>" for plain tables.
std::vector<std::string> curve_labels(const std::string& csv_path, const std::vector<RunRecord>& rows)
{
    std::vector<std::string> labels;
    for (const auto& r : rows) labels.push_back("L=" + std::to_string(r.L));
    const std::filesystem::path p(csv_path);
    std::ifstream keys(p.parent_path() / (p.stem().string() + ".keys.csv"));
    if (!keys) return labels;
    std::string line;
    std::getline(keys, line);
    while (std::getline(keys, line)) {
        // csv_row,"mesh",L,k,data,seed,status,"message"
        const auto close = line.find("\",", line.find('"') + 1);
        if (close == std::string::npos) continue;
        std::vector<std::string> f{line.substr(0, line.find(','))};
        std::stringstream rest(line.substr(close + 2));
        for (std::string cell; f.size() < 6 && std::getline(rest, cell, ',');) f.push_back(cell);
        if (f.size() < 6 || f[0] == "-") continue;
        const int row = std::stoi(f[0]) - 1;
        if (row < 0 || row >= static_cast<int>(labels.size())) continue;
        labels[row] = "L=" + f[1] + " k=" + f[2] + " " + f[3] + (f[3] == "type-ii" ? " seed=" + f[4] : "");
    }
    return labels;
}

int report(std::ostream& out, const std::string& csv_path)
{
    std::ifstream is(csv_path);
    if (!is) throw ParseError("cannot open '" + csv_path + "'", 0);
    const auto rows = read_run_records(is);
    out << std::setw(4) << "L" << std::setw(10) << "dof" << std::setw(9) << "1/h" << std::setw(11) << "h_min"
        << std::setw(11) << "gamma0" << std::setw(11) << "gamma1" << std::setw(12) << "lambda_min" << std::setw(12)
        << "lambda_max" << std::setw(10) << "kappa^1/2" << std::setw(6) << "it" << '\n';
    const auto labels = curve_labels(csv_path, rows);
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> curves;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out << std::setw(4) << r.L << std::setw(10) << r.dof << std::fixed << std::setprecision(1) << std::setw(9)
            << r.inv_h << std::scientific << std::setprecision(2) << std::setw(11) << r.h_min << std::setw(11) << r.gamma0
            << std::setw(11) << r.gamma1 << std::fixed << std::setprecision(3) << std::setw(12) << r.lambda_min
            << std::setw(12) << r.lambda_max << std::setw(10) << r.kappa_sqrt << std::setw(6) << r.iterations << '\n';
        curves[labels[i]].first.push_back(std::log(static_cast<double>(r.dof)));
        curves[labels[i]].second.push_back(r.kappa_sqrt);
    }
    for (const auto& [label, xy] : curves) {
        const auto& x = xy.first;
        if (std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end()) continue;
        const auto fit = fit_line(x, xy.second);
        out << std::fixed << std::setprecision(3) << label << ": kappa^(1/2) = " << fit.slope << " log(dof) "
            << (fit.intercept < 0 ? "- " : "+ ") << std::abs(fit.intercept) << ", R^2 = " << fit.r2 << '\n';
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Polygonal VEM discretization with FETI-DP solver"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // mesh-gen
    auto* gen = app.add_subcommand("mesh-gen", "Generate a Voronoi mesh of the unit square");
    int cells = 0, lloyd = 0;
    std::uint64_t seed = 1;
    std::string out_path;
    gen->add_option("--cells", cells, "Number of cells")->required()->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "Random seed");
    gen->add_option("--lloyd", lloyd, "Lloyd iterations")->check(CLI::NonNegativeNumber);
    gen->add_option("--out", out_path, "Output mesh file")->required();

    // cut
    auto* cutc = app.add_subcommand("cut", "Make a mesh conform to a subdomain layout");
    std::string mesh_path, layout_path;
    int grid = 0;
    cutc->add_option("--mesh", mesh_path, "Input mesh file")->required();
    auto* lay_opt = cutc->add_option("--layout", layout_path, "Layout file");
    auto* grid_opt = cutc->add_option("--grid", grid, "m x m square layout")->check(CLI::PositiveNumber);
    lay_opt->excludes(grid_opt);
    cutc->add_option("--out", out_path, "Output mesh file (subdomains in <out>.subdomains)")->required();

    // solve
    auto* solve = app.add_subcommand("solve", "Solve with FETI-DP on a cut mesh");
    int order = 1;
    std::string data = "type-i", rho_text, f_text, csv_path;
    std::uint64_t data_seed = 1;
    bool oracle = false, serial = false;
    CgConfig cg;
    solve->add_option("--mesh", mesh_path, "Cut mesh file (with <mesh>.subdomains)")->required();
    solve->add_option("--order,-k", order, "VEM order")->check(CLI::PositiveNumber);
    solve->add_option("--data", data, "type-i | type-ii")->check(CLI::IsMember({"type-i", "type-ii"}));
    solve->add_option("--seed", data_seed, "Seed for type-ii data");
    solve->add_option("--rho", rho_text, "rho spec, overrides --data");
    solve->add_option("--f", f_text, "f spec, overrides --data");
    solve->add_option("--tol", cg.rel_tolerance, "Relative PCG tolerance")->check(CLI::Range(1e-300, 0.999999));
    solve->add_option("--max-it", cg.max_iterations, "PCG iteration limit")->check(CLI::PositiveNumber);
    solve->add_flag("--oracle", oracle, "Compare with the direct global solve");
    solve->add_flag("--serial", serial, "Use the serial kernels");
    solve->add_option("--csv", csv_path, "Write the run record as CSV");

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run a sweep from a config file");
    std::string config_path;
    exp->add_option("config", config_path, "Config file")->required();
    exp->add_flag("--serial", serial, "Use the serial kernels");

    // report
    auto* rep = app.add_subcommand("report", "Summarize a run table");
    rep->add_option("csv", csv_path, "Run table CSV")->required();

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const CLI::App* sub = nullptr;
        for (const auto* s : app.get_subcommands()) sub = s;
        err << (sub ? sub->help() : app.help());
        return kExitUsage;
    }

    const Execution exec = serial ? Execution::Serial : Execution::Parallel;
    try {
        if (gen->parsed()) {
            save_mesh(generate_voronoi(cells, seed, lloyd, Rect{}), out_path);
            out << "wrote " << out_path << '\n';
        } else if (cutc->parsed()) {
            if (layout_path.empty() && grid == 0) throw UsageError("cut: one of --layout or --grid is required");
            const auto mesh = load_mesh(mesh_path);
            const SubdomainLayout layout = layout_path.empty() ? SubdomainLayout::grid(grid, mesh.bounding_box())
                                                               : SubdomainLayout{load_layout(layout_path)};
            const auto cm = cut(mesh, layout);
            save_mesh(cm.mesh, out_path);
            save_element_subdomain(cm.element_subdomain, cm.num_subdomains, sidecar_path(out_path));
            out << "wrote " << out_path << " (" << cm.mesh.num_elements() << " elements, " << cm.num_subdomains
                << " subdomains)\n";
        } else if (solve->parsed()) {
            const auto cm = load_cut_mesh(mesh_path);
            if (cm.num_subdomains < 4)
                throw UsageError("solve: needs a cut mesh with at least 4 subdomains (got " +
                                 std::to_string(cm.num_subdomains) + ")");
            auto [rho, f] = data == "type-i" ? type_i_data() : type_ii_data(data_seed);
            if (!rho_text.empty()) rho = parse_rho_spec(rho_text);
            if (!f_text.empty()) f = parse_source_spec(f_text);
            const auto outcome = run_solve(cm, make_coefficients(cm, rho, f), SolveOptions{order, cg, exec, oracle});
            out << "rho = " << to_string(rho) << "\nf = " << to_string(f) << "\nk = " << order << '\n';
            print_record(out, outcome.record);
            if (oracle) out << "oracle discrepancy (relative energy norm) " << outcome.oracle_discrepancy << '\n';
            if (!csv_path.empty()) write_csv(csv_path, {outcome.record});
        } else if (exp->parsed()) {
            const auto config = load_experiment_config(config_path);
            const auto rows = run_experiment(config, exec, [&](const ExperimentRow& r) {
                out << r.mesh << " k=" << r.k << ' ' << r.data;
                if (r.data == "type-ii") out << " seed=" << r.seed;
                if (r.ok) out << ": L=" << r.record.L << " it=" << r.record.iterations << " kappa^(1/2)=" << r.record.kappa_sqrt << '\n';
                else out << ": failed: " << r.message << '\n';
            });
            const auto plots = write_experiment_outputs(config, rows);
            const auto failed = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.ok; });
            out << "wrote " << config.output << " (" << rows.size() - failed << " rows, " << failed << " failed) and "
                << plots.size() << " plot files in " << config.plot_dir << '\n';
        } else if (rep->parsed()) {
            return report(out, csv_path);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const GeometryError& e) {
        err << "geometry error: " << e.what() << '\n';
        return kExitGeometry;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitSolver;
    }
    return kExitOk;
}

}  // namespace polyfeti
