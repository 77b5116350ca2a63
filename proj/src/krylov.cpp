#include "polyfeti/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace polyfeti {

CgResult pcg(const LinearOperator& apply_A, const LinearOperator& apply_M, const Eigen::VectorXd& b,
             const CgConfig& config)
{
    if (!(config.rel_tolerance > 0.0 && config.rel_tolerance < 1.0))
        throw std::invalid_argument("pcg: rel_tolerance must lie in (0, 1)");
    if (config.max_iterations < 1) throw std::invalid_argument("pcg: max_iterations must be positive");
    if (!b.allFinite()) throw std::invalid_argument("pcg: right-hand side is not finite");

    CgResult out;
    CgReport& rep = out.report;
    out.x = Eigen::VectorXd::Zero(b.size());
    Eigen::VectorXd r = b;
    Eigen::VectorXd z = apply_M(r);
    double rz = r.dot(z);
    const double norm0 = std::sqrt(std::max(rz, 0.0));
    rep.residual_history.push_back(norm0);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (norm0 == 0.0) {
        rep.converged = true;
        rep.lambda_min = rep.lambda_max = rep.kappa = nan;
        return out;
    }

    Eigen::VectorXd p = z;
    const double target = config.rel_tolerance * norm0;
    for (int it = 0; it < config.max_iterations; ++it) {
        const Eigen::VectorXd Ap = apply_A(p);
        const double curvature = p.dot(Ap);
        if (!(curvature > 0.0)) throw BreakdownError(it, curvature);
        const double alpha = rz / curvature;
        out.x += alpha * p;
        r -= alpha * Ap;
        z = apply_M(r);
        const double rz_next = r.dot(z);
        if (rz_next < 0.0) throw SolverError("pcg: preconditioner is not positive definite");
        const double beta = rz_next / rz;
        rep.alphas.push_back(alpha);
        rep.betas.push_back(beta);
        rep.iterations = it + 1;
        const double norm = std::sqrt(rz_next);
        rep.residual_history.push_back(norm);
        rz = rz_next;
        if (norm <= target) {
            rep.converged = true;
            break;
        }
        p = z + beta * p;
    }

    std::tie(rep.lambda_min, rep.lambda_max) = estimate_spectrum(rep.alphas, rep.betas);
    rep.kappa = rep.lambda_max / rep.lambda_min;
    return out;
}

std::pair<double, double> estimate_spectrum(std::span<const double> alphas, std::span<const double> betas)
{
    const std::size_t m = alphas.size();
    if (m == 0) throw std::invalid_argument("estimate_spectrum: no iterations");
    if (betas.size() + 1 < m) throw std::invalid_argument("estimate_spectrum: too few betas");
    std::vector<double> diag(m), off(m > 0 ? m - 1 : 0);
    diag[0] = 1.0 / alphas[0];
    for (std::size_t j = 1; j < m; ++j) {
        diag[j] = 1.0 / alphas[j] + betas[j - 1] / alphas[j - 1];
        off[j - 1] = std::sqrt(betas[j - 1]) / alphas[j - 1];
    }
    return tridiagonal_extreme_eigenvalues(diag, off);
}

namespace {

// Number of eigenvalues strictly below x (Sturm count via LDL^T pivots).
int count_below(std::span<const double> d, std::span<const double> e, double x)
{
    int count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double e2 = i == 0 ? 0.0 : e[i - 1] * e[i - 1];
        q = d[i] - x - (i == 0 ? 0.0 : e2 / q);
        if (q == 0.0) q = -std::numeric_limits<double>::min();
        if (q < 0.0) ++count;
    }
    return count;
}

double bisect(std::span<const double> d, std::span<const double> e, int index, double lo, double hi)
{
    // Smallest x with count_below(x) > index, i.e. the index-th eigenvalue.
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (count_below(d, e, mid) > index) hi = mid;
        else lo = mid;
        if (hi - lo <= 1e-15 * std::max(std::abs(lo), std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::pair<double, double> tridiagonal_extreme_eigenvalues(std::span<const double> diag, std::span<const double> offdiag)
{
    const std::size_t n = diag.size();
    if (n == 0) throw std::invalid_argument("tridiagonal_extreme_eigenvalues: empty matrix");
    if (n == 1) return {diag[0], diag[0]};
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
        const double radius = (i > 0 ? std::abs(offdiag[i - 1]) : 0.0) + (i + 1 < n ? std::abs(offdiag[i]) : 0.0);
        lo = std::min(lo, diag[i] - radius);
        hi = std::max(hi, diag[i] + radius);
    }
    const double pad = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
    lo -= pad;
    hi += pad;
    return {bisect(diag, offdiag, 0, lo, hi), bisect(diag, offdiag, static_cast<int>(n) - 1, lo, hi)};
}

}  // namespace polyfeti
