#pragma once

// Experiment harness: coefficient models, single solves reported as RunRecord
// rows, and sweeps driven by a flat key = value config file.

#include "polyfeti/cutter.hpp"
#include "polyfeti/fetidp.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace polyfeti {

/// rho = constant <v> | per-subdomain-random-logunif <lo> <hi> <seed>
///     | per-subdomain-random-pow10 <amin> <amax> <seed>   (rho = 10^a, a integer)
struct RhoSpec {
    enum class Kind { Constant, LogUniform, Pow10Integer };
    Kind kind = Kind::Constant;
    double a = 1.0;
    double b = 1.0;
    std::uint64_t seed = 0;
};

/// f = expr sin2pi | per-subdomain-random-unif <lo> <hi> <seed>
struct SourceSpec {
    enum class Kind { Sin2Pi, Uniform };
    Kind kind = Kind::Sin2Pi;
    double lo = 0.0;
    double hi = 0.0;
    std::uint64_t seed = 0;
};

/// Throws std::invalid_argument on malformed specs.
RhoSpec parse_rho_spec(const std::string& text);
SourceSpec parse_source_spec(const std::string& text);
std::string to_string(const RhoSpec& spec);
std::string to_string(const SourceSpec& spec);

/// sin(2 pi x) sin(2 pi y).
double sin2pi_source(Point2 p);

CoefficientField make_coefficients(const CutMesh& cutmesh, const RhoSpec& rho, const SourceSpec& f);

/// Type i: rho = 1, f = sin2pi. Type ii: per subdomain rho = 10^a with a a
/// uniform integer in [-5, 5] and f uniform in [-1, 1].
std::pair<RhoSpec, SourceSpec> type_i_data();
std::pair<RhoSpec, SourceSpec> type_ii_data(std::uint64_t seed);

struct RunRecord {
    int L = 0;
    long dof = 0;
    double inv_h = 0.0;
    double h_min = 0.0;
    double gamma0 = 0.0;
    double gamma1 = 0.0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double kappa_sqrt = 0.0;
    int iterations = 0;
    double wall_time = 0.0;
};

const std::string& run_record_header();
std::string to_csv_row(const RunRecord& r);
/// Parses rows written by to_csv_row. Throws ParseError.
std::vector<RunRecord> read_run_records(std::istream& is);

struct SolveOptions {
    int order = 1;
    CgConfig cg;
    Execution exec = Execution::Parallel;
    bool oracle = false;
};

struct SolveOutcome {
    RunRecord record;
    FetiResult feti;
    /// Relative energy-norm distance to the direct solve; NaN without --oracle.
    double oracle_discrepancy = std::numeric_limits<double>::quiet_NaN();
};

/// classify -> build -> PCG (-> direct solve). Wall time covers the FETI-DP part.
SolveOutcome run_solve(const CutMesh& cutmesh, const CoefficientField& coeff, const SolveOptions& options);

/// Flat config, one `key = value` per line, '#' comments. Keys:
///   cells = n...          generated Voronoi meshes, or
///   mesh = path           a mesh file
///   seed = s, lloyd = i   generator settings
///   grid = m...           m x m layouts, or
///   layout = path         a layout file
///   order = k...
///   data = type-i | type-ii | custom ...
///   seeds = s...          one type-ii row per seed
///   rho = <spec>, f = <spec>   data for `custom`
///   tolerance = t, max_iterations = n
///   output = file.csv     RunRecord table; file.keys.csv holds row keys
///   plot_dir = dir        per-curve x y files
struct ExperimentConfig {
    std::vector<int> cells;
    std::string mesh_path;
    std::uint64_t seed = 1;
    int lloyd = 1;
    std::vector<int> grids;
    std::string layout_path;
    std::vector<int> orders{1};
    std::vector<std::string> data{"type-i"};
    std::vector<std::uint64_t> seeds{1};
    std::optional<RhoSpec> rho;
    std::optional<SourceSpec> f;
    CgConfig cg;
    std::string output = "experiment.csv";
    std::string plot_dir = "plots";
};

/// Throws ParseError naming the line, or for an empty sweep.
ExperimentConfig parse_experiment_config(std::istream& is);
ExperimentConfig load_experiment_config(const std::string& path);

struct ExperimentRow {
    std::string mesh;  // "cells=<n>" or the mesh path
    int cells = 0;
    int k = 1;
    std::string data;  // type-i, type-ii, custom
    std::uint64_t seed = 0;
    bool ok = false;
    std::string message;
    RunRecord record;
};

using RowCallback = std::function<void(const ExperimentRow&)>;
std::vector<ExperimentRow> run_experiment(const ExperimentConfig& config, Execution exec = Execution::Parallel,
                                          const RowCallback& on_row = {});

/// Writes the CSV, the keys CSV, and the plot-data files; returns the plot files written.
std::vector<std::string> write_experiment_outputs(const ExperimentConfig& config, const std::vector<ExperimentRow>& rows);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least-squares line y = slope x + intercept. Needs at least two distinct x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace polyfeti
