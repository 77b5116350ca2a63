#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace polyfeti {

/// Iterative solver failure (non-SPD operator, non-convergence).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-positive curvature p^T A p <= 0 at iteration `iteration()` (0-based).
class BreakdownError : public SolverError {
public:
    BreakdownError(int iteration, double curvature)
        : SolverError("pcg breakdown at iteration " + std::to_string(iteration) +
                      ": non-positive curvature " + std::to_string(curvature)),
          iteration_(iteration)
    {
    }
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct CgConfig {
    double rel_tolerance = 1e-10;
    int max_iterations = 500;
};

struct CgReport {
    int iterations = 0;
    bool converged = false;
    /// sqrt(r^T M r) before the first iteration and after each one.
    std::vector<double> residual_history;
    std::vector<double> alphas;
    std::vector<double> betas;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double kappa = 0.0;
};

struct CgResult {
    Eigen::VectorXd x;
    CgReport report;
};

/// Preconditioned CG from x = 0. Stops when the M-norm of the residual drops
/// below rel_tolerance times its initial value. Throws BreakdownError.
CgResult pcg(const LinearOperator& apply_A, const LinearOperator& apply_M, const Eigen::VectorXd& b,
             const CgConfig& config = {});

/// Extreme eigenvalues of the Lanczos tridiagonal built from the CG
/// coefficients (alphas.size() iterations; betas beyond alphas.size()-1 ignored).
std::pair<double, double> estimate_spectrum(std::span<const double> alphas, std::span<const double> betas);

/// Eigenvalue bounds of a symmetric tridiagonal matrix by Sturm bisection.
std::pair<double, double> tridiagonal_extreme_eigenvalues(std::span<const double> diag, std::span<const double> offdiag);

}  // namespace polyfeti
