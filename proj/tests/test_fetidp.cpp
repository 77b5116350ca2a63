#include "doctest.h"

#include "polyfeti/fetidp.hpp"
#include "polyfeti/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

using namespace polyfeti;

namespace {

double sin2pi(Point2 p)
{
    return 8.0 * std::numbers::pi * std::numbers::pi * std::sin(2 * std::numbers::pi * p.x) *
           std::sin(2 * std::numbers::pi * p.y);
}

CutMesh grid_cut(int cells, int m) { return cut(generate_quad_grid(cells, cells, Rect{}), SubdomainLayout::grid(m, Rect{})); }
CutMesh voronoi_cut(int cells, std::uint64_t seed, int m)
{
    return cut(generate_voronoi(cells, seed, 1, Rect{}), SubdomainLayout::grid(m, Rect{}));
}

std::vector<double> per_subdomain(const CutMesh& cm, const std::vector<double>& values)
{
    std::vector<double> out(cm.mesh.num_elements());
    for (std::size_t e = 0; e < out.size(); ++e) out[e] = values[cm.element_subdomain[e]];
    return out;
}

std::vector<double> random_log_rho(const CutMesh& cm, std::uint64_t seed, double lo, double hi)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    std::vector<double> v(cm.num_subdomains);
    for (auto& x : v) x = std::exp(u(rng));
    return per_subdomain(cm, v);
}

// Test-side torn indexing: per subdomain the listed interior dofs then dual
// dofs, followed by one shared slot per primal dof.
struct TornIndex {
    std::vector<std::map<int, int>> local;
    std::map<int, int> primal;
    int size = 0;

    explicit TornIndex(const DofPartition& p)
    {
        for (const auto& sd : p.subdomains) {
            std::map<int, int> m;
            for (int d : sd.interior) m[d] = size++;
            for (int d : sd.dual) m[d] = size++;
            local.push_back(std::move(m));
        }
        for (int d : p.primal_dofs) primal[d] = size++;
    }
    int operator()(int s, int d) const
    {
        const auto it = primal.find(d);
        return it != primal.end() ? it->second : local[s].at(d);
    }
};

struct DenseTorn {
    Eigen::MatrixXd A;
    Eigen::VectorXd f;
};

DenseTorn dense_torn(const CutMesh& cm, const DofMap& dm, const DofPartition& p, const std::vector<ElementOperators>& ops)
{
    const TornIndex idx(p);
    DenseTorn out{Eigen::MatrixXd::Zero(idx.size, idx.size), Eigen::VectorXd::Zero(idx.size)};
    for (std::size_t e = 0; e < cm.mesh.num_elements(); ++e) {
        const int s = cm.element_subdomain[e];
        const auto& dofs = dm.element_dofs(e);
        for (std::size_t i = 0; i < dofs.size(); ++i) {
            if (dm.is_dirichlet(dofs[i])) continue;
            const int I = idx(s, dofs[i]);
            out.f(I) += ops[e].load(static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < dofs.size(); ++j)
                if (!dm.is_dirichlet(dofs[j]))
                    out.A(I, idx(s, dofs[j])) += ops[e].stiffness(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    return out;
}

// Dense Schur complement of subdomain s onto its dual dofs.
Eigen::MatrixXd dense_dual_schur(const CutMesh& cm, const DofMap& dm, const DofPartition& p,
                                 const std::vector<ElementOperators>& ops, int s)
{
    const auto& sd = p.subdomains[s];
    std::map<int, int> pos;
    for (int d : sd.interior) pos.emplace(d, static_cast<int>(pos.size()));
    for (int d : sd.dual) pos.emplace(d, static_cast<int>(pos.size()));
    const int n = static_cast<int>(pos.size()), nI = static_cast<int>(sd.interior.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    for (int e : sd.elements) {
        const auto& dofs = dm.element_dofs(e);
        for (std::size_t i = 0; i < dofs.size(); ++i)
            for (std::size_t j = 0; j < dofs.size(); ++j) {
                const auto a = pos.find(dofs[i]), b = pos.find(dofs[j]);
                if (a == pos.end() || b == pos.end()) continue;
                K(a->second, b->second) += ops[e].stiffness(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
    }
    const int nD = n - nI;
    const Eigen::MatrixXd KII = K.topLeftCorner(nI, nI), KID = K.topRightCorner(nI, nD);
    return K.bottomRightCorner(nD, nD) - KID.transpose() * KII.ldlt().solve(KID);
}

struct Fixture {
    CutMesh cm;
    int k;
    CoefficientField coeff;
    DofMap dm;
    DofPartition part;
    std::vector<ElementOperators> ops;
    JumpOperator jump;
    FetiSystem sys;

    Fixture(CutMesh c, int order, std::vector<double> rho, Execution exec = Execution::Parallel)
        : cm(std::move(c)), k(order), coeff(std::move(rho), sin2pi), dm(cm.mesh, k), part(classify_dofs(cm, dm)),
          ops(build_all_element_operators(cm.mesh, k, coeff, exec)), jump(build_jump_operator(cm, dm, part, coeff)),
          sys(build_feti_system(cm, dm, part, ops, exec))
    {
    }
};

Eigen::MatrixXd dense_of(const LinearOperator& op, int n)
{
    Eigen::MatrixXd M(n, n);
    for (int j = 0; j < n; ++j) M.col(j) = op(Eigen::VectorXd::Unit(n, j));
    return M;
}

double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST_CASE("dof classification on a 2 x 2 layout")
{
    const auto cm = grid_cut(4, 2);
    for (int k : {1, 2}) {
        const DofMap dm(cm.mesh, k);
        const auto p = classify_dofs(cm, dm);
        REQUIRE(p.primal_dofs.size() == 1);
        CHECK(cm.mesh.vertices()[p.primal_dofs[0]] == Point2{0.5, 0.5});
        CHECK(p.multiplicity[p.primal_dofs[0]] == 4);
        // Four interface vertices plus (k-1) points on each of the 8 interface edges.
        CHECK(p.num_multipliers() == 4 + 8 * (k - 1));
        for (std::size_t r = 0; r < p.dual_dofs.size(); ++r) {
            CHECK(p.multiplicity[p.dual_dofs[r]] == 2);
            CHECK(p.dual_owners[r][0] < p.dual_owners[r][1]);
        }
        int torn = static_cast<int>(p.primal_dofs.size());
        std::vector<int> seen(dm.total(), 0);
        for (const auto& sd : p.subdomains) {
            CHECK(sd.elements.size() == 4);
            CHECK(sd.primal.size() == 1);
            torn += static_cast<int>(sd.interior.size() + sd.dual.size());
            for (int d : sd.interior) ++seen[d];
        }
        CHECK(p.torn_size == torn);
        for (int d = 0; d < dm.total(); ++d)
            if (!dm.is_dirichlet(d)) CHECK(seen[d] + (p.multiplicity[d] > 1 ? 1 : 0) == 1);
    }
}

TEST_CASE("a single subdomain is rejected")
{
    const auto cm = grid_cut(3, 1);
    CHECK_THROWS_AS(classify_dofs(cm, DofMap(cm.mesh, 1)), std::invalid_argument);
}

TEST_CASE("4 x 4 layout on a 4000-cell cut mesh")
{
    const auto cm = voronoi_cut(4000, 11, 4);
    const DofMap dm(cm.mesh, 1);
    const auto p = classify_dofs(cm, dm);
    REQUIRE(p.primal_dofs.size() == 9);
    for (int d : p.primal_dofs) {
        const Point2 x = cm.mesh.vertices()[d];
        CHECK(std::abs(x.x * 4 - std::round(x.x * 4)) <= 1e-14);
        CHECK(std::abs(x.y * 4 - std::round(x.y * 4)) <= 1e-14);
        CHECK(p.multiplicity[d] == 4);
    }
    for (int d : p.dual_dofs) CHECK(p.multiplicity[d] == 2);
    CHECK(p.num_multipliers() > 0);
}

TEST_CASE("jump operator weights")
{
    const auto cm = grid_cut(4, 2);
    const DofMap dm(cm.mesh, 2);
    const auto p = classify_dofs(cm, dm);

    SUBCASE("constant coefficient gives one half")
    {
        const auto J = build_jump_operator(cm, dm, p, CoefficientField::constant(cm.mesh.num_elements(), 3.0, sin2pi));
        for (int r = 0; r < J.B_D.outerSize(); ++r)
            for (Eigen::SparseMatrix<double>::InnerIterator it(J.B_D, r); it; ++it) CHECK(std::abs(it.value()) == 0.5);
        const Eigen::MatrixXd BBt = Eigen::MatrixXd(J.B * Eigen::SparseMatrix<double>(J.B_D.transpose()));
        CHECK(BBt.isIdentity(0.0));
    }
    SUBCASE("two coefficient values")
    {
        const double r_lo = 1e4, r_hi = 1e-2;
        const auto rho = per_subdomain(cm, {r_lo, r_hi, r_hi, r_lo});
        const auto J = build_jump_operator(cm, dm, p, CoefficientField(rho, sin2pi));
        const Eigen::MatrixXd B = J.B, BD = J.B_D;
        const TornIndex idx(p);
        for (int r = 0; r < p.num_multipliers(); ++r) {
            const auto [s0, s1] = p.dual_owners[r];
            const double rho0 = s0 == 0 || s0 == 3 ? r_lo : r_hi;
            const double rho1 = s1 == 0 || s1 == 3 ? r_lo : r_hi;
            const int c0 = idx(s0, p.dual_dofs[r]), c1 = idx(s1, p.dual_dofs[r]);
            CHECK(B(r, c0) == 1.0);
            CHECK(B(r, c1) == -1.0);
            CHECK(BD(r, c0) == doctest::Approx(rho1 / (rho0 + rho1)).epsilon(1e-15));
            CHECK(BD(r, c1) == doctest::Approx(-rho0 / (rho0 + rho1)).epsilon(1e-15));
            CHECK(B.row(r).cwiseAbs().sum() == 2.0);
        }
        const Eigen::MatrixXd BBt = B * BD.transpose();
        CHECK(BBt.isIdentity(1e-15));
    }
}

TEST_CASE("torn operators against dense oracles")
{
    for (int k : {1, 2, 3}) {
        CAPTURE(k);
        auto cm = voronoi_cut(60, 5, 2);
        const auto rho = random_log_rho(cm, 3, 1e-2, 1e2);
        const Fixture fx(std::move(cm), k, rho);
        const int n = fx.sys.torn_size();
        const auto oracle = dense_torn(fx.cm, fx.dm, fx.part, fx.ops);
        REQUIRE(oracle.A.rows() == n);

        const Eigen::MatrixXd At = dense_of([&](const Eigen::VectorXd& x) { return apply_A_tilde(fx.sys, x); }, n);
        CHECK(rel_diff(At, oracle.A) <= 1e-14);
        CHECK((fx.sys.f_torn - oracle.f).norm() <= 1e-14 * oracle.f.norm());

        const Eigen::MatrixXd Ainv = dense_of([&](const Eigen::VectorXd& x) { return apply_A_tilde_inverse(fx.sys, x); }, n);
        CHECK((Ainv * oracle.A - Eigen::MatrixXd::Identity(n, n)).norm() <= 1e-9);

        // Coarse matrix is symmetric positive definite.
        CHECK((fx.sys.S_PP - fx.sys.S_PP.transpose()).norm() == 0.0);
        CHECK(fx.sys.S_PP.llt().info() == Eigen::Success);

        // B annihilates torn copies of continuous vectors.
        std::mt19937_64 rng(k);
        std::normal_distribution<double> g;
        Eigen::VectorXd u(fx.dm.total());
        for (auto& x : u) x = g(rng);
        CHECK((fx.jump.B * tear(fx.sys, u)).norm() == 0.0);

        const int m = fx.part.num_multipliers();
        const Eigen::MatrixXd B = fx.jump.B, BD = fx.jump.B_D;
        const Eigen::MatrixXd F = dense_of([&](const Eigen::VectorXd& x) { return apply_F(fx.sys, fx.jump, x); }, m);
        const Eigen::MatrixXd F_oracle = B * oracle.A.inverse() * B.transpose();
        CHECK(rel_diff(F, F_oracle) <= 1e-9);
        CHECK(rel_diff(F, F.transpose()) <= 1e-12);
        const Eigen::VectorXd d_oracle = B * oracle.A.ldlt().solve(oracle.f);
        CHECK((feti_rhs(fx.sys, fx.jump) - d_oracle).norm() <= 1e-9 * d_oracle.norm());

        // Preconditioner: B_D blockdiag(S_s) B_D^T on the dual copies.
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
        const TornIndex idx(fx.part);
        for (int s = 0; s < fx.part.num_subdomains; ++s) {
            const auto Ss = dense_dual_schur(fx.cm, fx.dm, fx.part, fx.ops, s);
            const auto& dual = fx.part.subdomains[s].dual;
            for (std::size_t i = 0; i < dual.size(); ++i)
                for (std::size_t j = 0; j < dual.size(); ++j)
                    S(idx(s, dual[i]), idx(s, dual[j])) = Ss(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        const Eigen::MatrixXd M =
            dense_of([&](const Eigen::VectorXd& x) { return apply_dirichlet_preconditioner(fx.sys, fx.jump, x); }, m);
        CHECK(rel_diff(M, BD * S * BD.transpose()) <= 1e-10);
        CHECK(rel_diff(M, M.transpose()) <= 1e-12);
    }
}

TEST_CASE("exact multipliers remove the jump and reproduce the global solution")
{
    for (int k : {1, 2}) {
        CAPTURE(k);
        auto cm = voronoi_cut(80, 9, 3);
        const auto rho = random_log_rho(cm, 4, 1e-3, 1e3);
        const Fixture fx(std::move(cm), k, rho);
        const auto oracle = dense_torn(fx.cm, fx.dm, fx.part, fx.ops);
        const int n = fx.sys.torn_size(), m = fx.part.num_multipliers();
        const Eigen::MatrixXd B = fx.jump.B;
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
        K.topLeftCorner(n, n) = oracle.A;
        K.topRightCorner(n, m) = B.transpose();
        K.bottomLeftCorner(m, n) = B;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
        rhs.head(n) = oracle.f;
        const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
        const Eigen::VectorXd lambda = sol.tail(m);

        const auto rec = recover_solution(fx.sys, fx.jump, lambda);
        CHECK(rec.jump_norm <= 1e-12 * std::max(1.0, rec.u_torn.norm()));

        const auto global = assemble(fx.cm.mesh, fx.dm, fx.ops);
        const Eigen::VectorXd direct = expand_free(fx.dm, solve_direct(global));
        CHECK((rec.u - direct).norm() <= 1e-9 * direct.norm());
    }
}

TEST_CASE("FETI-DP solution matches the direct solve")
{
    for (int k : {1, 2, 3}) {
        CAPTURE(k);
        auto cm = voronoi_cut(k == 3 ? 30 : 60, 21, 3);
        const auto rho = random_log_rho(cm, 8, 1e-4, 1e4);
        const CoefficientField coeff(rho, sin2pi);
        const auto res = solve_feti_dp(cm, k, coeff, {1e-12, 500});
        CHECK(res.cg.converged);
        const auto global = assemble(cm.mesh, k, coeff);
        const Eigen::VectorXd direct_free = solve_direct(global);
        const Eigen::VectorXd direct = expand_free(global.dofmap, direct_free);
        Eigen::VectorXd diff_free(global.dofmap.num_free());
        for (int i = 0; i < diff_free.size(); ++i) {
            const int d = global.dofmap.free_to_global()[i];
            diff_free(i) = res.solution.u(d) - direct(d);
        }
        CHECK(energy_norm(global.A, diff_free) <= 1e-8 * energy_norm(global.A, direct_free));
        CHECK(res.cg.lambda_min >= 1.0 - 1e-6);
    }
}

TEST_CASE("zero source gives a zero solution")
{
    const auto cm = grid_cut(6, 2);
    const auto coeff = CoefficientField::constant(cm.mesh.num_elements(), 1.0, [](Point2) { return 0.0; });
    const auto res = solve_feti_dp(cm, 2, coeff);
    CHECK(res.cg.iterations == 0);
    CHECK(res.solution.u.isZero(0.0));
    CHECK(res.lambda.isZero(0.0));
}

TEST_CASE("preconditioned spectrum is bounded below by one")
{
    auto cm = voronoi_cut(400, 2, 4);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        CAPTURE(seed);
        const CoefficientField coeff(random_log_rho(cm, seed, 1e-4, 1e4), sin2pi);
        const auto res = solve_feti_dp(cm, 2, coeff);
        CHECK(res.cg.lambda_min >= 1.0 - 1e-6);
        CHECK(res.cg.lambda_max >= res.cg.lambda_min);
    }
}

TEST_CASE("scaling rho leaves the multiplier iteration unchanged")
{
    const auto cm = voronoi_cut(300, 6, 3);
    const auto rho = random_log_rho(cm, 5, 1e-2, 1e2);
    const CoefficientField coeff(rho, sin2pi);
    const auto a = solve_feti_dp(cm, 2, coeff);
    const auto b = solve_feti_dp(cm, 2, coeff.scaled(1e3, 1e3));
    CHECK(a.cg.iterations == b.cg.iterations);
    CHECK(b.cg.kappa == doctest::Approx(a.cg.kappa).epsilon(1e-8));
    CHECK((a.solution.u - b.solution.u).norm() <= 1e-9 * a.solution.u.norm());
}

TEST_CASE("serial and parallel runs agree bit for bit")
{
    const auto cm = voronoi_cut(300, 12, 3);
    const CoefficientField coeff(random_log_rho(cm, 9, 1e-2, 1e2), sin2pi);
    const auto s = solve_feti_dp(cm, 2, coeff, {}, Execution::Serial);
    const auto p = solve_feti_dp(cm, 2, coeff, {}, Execution::Parallel);
    CHECK(s.cg.iterations == p.cg.iterations);
    CHECK(s.lambda == p.lambda);
    CHECK(s.solution.u == p.solution.u);
    CHECK(s.cg.residual_history == p.cg.residual_history);
}

TEST_CASE("the Dirichlet preconditioner reduces the iteration count")
{
    const auto cm = voronoi_cut(1000, 13, 4);
    const CoefficientField coeff(random_log_rho(cm, 10, 1e-3, 1e3), sin2pi);
    const auto pre = solve_feti_dp(cm, 1, coeff, {1e-8, 2000}, Execution::Parallel, true);
    const auto plain = solve_feti_dp(cm, 1, coeff, {1e-8, 2000}, Execution::Parallel, false);
    CHECK(pre.cg.iterations < plain.cg.iterations);
    CHECK(pre.cg.kappa < plain.cg.kappa);
}

TEST_CASE("subdomain factorization errors name the subdomain")
{
    const auto cm = grid_cut(4, 2);
    const DofMap dm(cm.mesh, 1);
    const auto p = classify_dofs(cm, dm);
    auto ops = build_all_element_operators(cm.mesh, 1, CoefficientField::constant(cm.mesh.num_elements(), 1.0, sin2pi));
    for (int e : p.subdomains[2].elements) ops[e].stiffness = -ops[e].stiffness;
    try {
        build_feti_system(cm, dm, p, ops, Execution::Parallel);
        FAIL("expected a factorization failure");
    } catch (const SolverError& err) {
        CHECK(std::string(err.what()).find("subdomain 2") != std::string::npos);
    }
}
