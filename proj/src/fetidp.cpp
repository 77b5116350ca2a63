#include "polyfeti/fetidp.hpp"

#include "polyfeti/predicates.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace polyfeti {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

// Runs body(s) for every subdomain. On failure the exception of the lowest
// subdomain index is rethrown, so parallel and serial runs report the same error.
template <class Body>
void for_each_subdomain(Execution exec, int n, Body&& body)
{
    if (exec == Execution::Serial) {
        for (int s = 0; s < n; ++s) body(s);
        return;
    }
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 1)
    for (int s = 0; s < n; ++s) {
        try {
            body(s);
        } catch (...) {
            failures[s] = std::current_exception();
        }
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);
}

void add_owner(std::vector<int>& owners, int s)
{
    if (std::find(owners.begin(), owners.end(), s) == owners.end()) owners.push_back(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Partition

DofPartition classify_dofs(const CutMesh& cutmesh, const DofMap& dofmap)
{
    const PolygonalMesh& mesh = cutmesh.mesh;
    const int L = cutmesh.num_subdomains;
    if (L < 2) throw std::invalid_argument("classify_dofs: FETI-DP needs at least two subdomains (got " + std::to_string(L) + ")");
    if (cutmesh.element_subdomain.size() != mesh.num_elements())
        throw std::invalid_argument("classify_dofs: element_subdomain size mismatch");

    const int total = dofmap.total();
    std::vector<std::vector<int>> owners(static_cast<std::size_t>(total));
    std::vector<std::uint8_t> touches_dirichlet(static_cast<std::size_t>(L), 0);
    DofPartition part;
    part.num_subdomains = L;
    part.subdomains.resize(static_cast<std::size_t>(L));
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const int s = cutmesh.element_subdomain[e];
        if (s < 0 || s >= L) throw std::invalid_argument("classify_dofs: element subdomain out of range");
        part.subdomains[s].elements.push_back(static_cast<int>(e));
        for (int d : dofmap.element_dofs(e)) {
            if (dofmap.is_dirichlet(d)) touches_dirichlet[s] = 1;
            else add_owner(owners[d], s);
        }
    }

    // Interface edges around each vertex: edges whose two elements lie in different subdomains.
    std::vector<std::array<int, 2>> edge_elements(mesh.num_edges(), {-1, -1});
    for (std::size_t e = 0; e < mesh.num_elements(); ++e)
        for (int edge : mesh.element_edges(e)) {
            auto& slot = edge_elements[edge];
            (slot[0] < 0 ? slot[0] : slot[1]) = static_cast<int>(e);
        }
    std::vector<std::vector<int>> interface_edges(mesh.num_vertices());
    for (std::size_t edge = 0; edge < mesh.num_edges(); ++edge) {
        const auto [e0, e1] = edge_elements[edge];
        if (e0 < 0 || e1 < 0) continue;
        if (cutmesh.element_subdomain[e0] == cutmesh.element_subdomain[e1]) continue;
        interface_edges[mesh.edges()[edge].a].push_back(static_cast<int>(edge));
        interface_edges[mesh.edges()[edge].b].push_back(static_cast<int>(edge));
    }
    // A vertex shared by two subdomains is a corner unless the interface runs straight through it.
    auto is_corner = [&](int v) {
        const auto& ie = interface_edges[v];
        if (ie.size() != 2) return true;
        auto other = [&](int edge) {
            const Edge& ed = mesh.edges()[edge];
            return mesh.vertices()[ed.a == v ? ed.b : ed.a];
        };
        return orientation(other(ie[0]), mesh.vertices()[v], other(ie[1])) != Orientation::Collinear;
    };

    part.multiplicity.assign(static_cast<std::size_t>(total), 0);
    for (int d = 0; d < total; ++d) {
        auto& own = owners[d];
        part.multiplicity[d] = static_cast<int>(own.size());
        if (own.empty()) continue;
        std::sort(own.begin(), own.end());
        const DofKind kind = dofmap.kind(d);
        if (own.size() == 1 || kind == DofKind::Moment) {
            part.subdomains[own[0]].interior.push_back(d);
            continue;
        }
        const bool primal = kind == DofKind::Vertex && (own.size() >= 3 || is_corner(d));
        if (primal) {
            part.primal_dofs.push_back(d);
            for (int s : own) part.subdomains[s].primal.push_back(d);
        } else {
            if (own.size() != 2)
                throw GeometryError("classify_dofs: edge dof " + std::to_string(d) + " shared by " +
                                    std::to_string(own.size()) + " subdomains");
            part.dual_dofs.push_back(d);
            part.dual_owners.push_back({own[0], own[1]});
            for (int s : own) part.subdomains[s].dual.push_back(d);
        }
    }

    for (int s = 0; s < L; ++s) {
        const auto& sd = part.subdomains[s];
        if (sd.elements.empty()) throw SolverError("classify_dofs: subdomain " + std::to_string(s) + " has no elements");
        if (sd.primal.empty() && !touches_dirichlet[s])
            throw SolverError("classify_dofs: subdomain " + std::to_string(s) +
                              " is floating (no primal and no Dirichlet dofs)");
        part.torn_size += static_cast<int>(sd.interior.size() + sd.dual.size());
    }
    part.torn_size += static_cast<int>(part.primal_dofs.size());
    return part;
}

namespace {

std::vector<int> torn_offsets(const DofPartition& part)
{
    std::vector<int> off(part.subdomains.size());
    int o = 0;
    for (std::size_t s = 0; s < part.subdomains.size(); ++s) {
        off[s] = o;
        o += static_cast<int>(part.subdomains[s].interior.size() + part.subdomains[s].dual.size());
    }
    return off;
}

// Torn index of the copy of dual dof d held by subdomain s.
int dual_torn_index(const DofPartition& part, const std::vector<int>& offsets, int s, int d)
{
    const auto& sd = part.subdomains[s];
    const auto it = std::lower_bound(sd.dual.begin(), sd.dual.end(), d);
    return offsets[s] + static_cast<int>(sd.interior.size()) + static_cast<int>(it - sd.dual.begin());
}

}  // namespace

// ---------------------------------------------------------------------------
// Jump operator

JumpOperator build_jump_operator(const CutMesh& cutmesh, const DofMap& dofmap, const DofPartition& partition,
                                 const CoefficientField& coeff)
{
    const int n = partition.num_multipliers();
    std::unordered_map<int, int> row_of;
    row_of.reserve(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) row_of.emplace(partition.dual_dofs[r], r);

    // Coefficient seen by each side of a dual dof: the largest rho among the
    // side's elements touching it (the subdomain constant for piecewise-constant data).
    std::vector<std::array<double, 2>> side_rho(static_cast<std::size_t>(n), {0.0, 0.0});
    for (std::size_t e = 0; e < cutmesh.mesh.num_elements(); ++e) {
        const int s = cutmesh.element_subdomain[e];
        for (int d : dofmap.element_dofs(e)) {
            const auto it = row_of.find(d);
            if (it == row_of.end()) continue;
            const int side = partition.dual_owners[it->second][0] == s ? 0 : 1;
            auto& rho = side_rho[it->second][side];
            rho = std::max(rho, coeff.rho(e));
        }
    }

    const auto offsets = torn_offsets(partition);
    Triplets tb, td;
    tb.reserve(2 * static_cast<std::size_t>(n));
    td.reserve(2 * static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        const int d = partition.dual_dofs[r];
        const auto [s0, s1] = partition.dual_owners[r];
        const int c0 = dual_torn_index(partition, offsets, s0, d);
        const int c1 = dual_torn_index(partition, offsets, s1, d);
        const double r0 = side_rho[r][0], r1 = side_rho[r][1];
        tb.emplace_back(r, c0, 1.0);
        tb.emplace_back(r, c1, -1.0);
        td.emplace_back(r, c0, r1 / (r0 + r1));
        td.emplace_back(r, c1, -(r0 / (r0 + r1)));
    }
    JumpOperator J;
    J.B.resize(n, partition.torn_size);
    J.B_D.resize(n, partition.torn_size);
    J.B.setFromTriplets(tb.begin(), tb.end());
    J.B_D.setFromTriplets(td.begin(), td.end());
    return J;
}

// ---------------------------------------------------------------------------
// Subdomain systems

FetiSystem build_feti_system(const CutMesh& cutmesh, const DofMap& dofmap, const DofPartition& partition,
                             std::span<const ElementOperators> ops, Execution exec)
{
    if (ops.size() != cutmesh.mesh.num_elements()) throw std::invalid_argument("build_feti_system: operator count mismatch");
    FetiSystem sys;
    sys.partition = partition;
    sys.exec = exec;
    sys.num_dofs = dofmap.total();
    const int L = partition.num_subdomains;
    const int nP = static_cast<int>(partition.primal_dofs.size());
    sys.subdomains.resize(static_cast<std::size_t>(L));
    const auto offsets = torn_offsets(partition);

    std::unordered_map<int, int> coarse_index;
    for (int p = 0; p < nP; ++p) coarse_index.emplace(partition.primal_dofs[p], p);

    std::vector<Eigen::MatrixXd> local_schur(static_cast<std::size_t>(L));
    for_each_subdomain(exec, L, [&](int s) {
        const SubdomainDofs& sd = partition.subdomains[s];
        SubdomainSystem& loc = sys.subdomains[s];
        loc.torn_offset = offsets[s];
        loc.num_interior = static_cast<int>(sd.interior.size());
        loc.b_dofs = sd.interior;
        loc.b_dofs.insert(loc.b_dofs.end(), sd.dual.begin(), sd.dual.end());
        for (int d : sd.primal) loc.primal_index.push_back(coarse_index.at(d));

        const int nB = static_cast<int>(loc.b_dofs.size());
        const int nPl = static_cast<int>(sd.primal.size());
        // Local position: >= 0 in the B block, <= -2 encodes primal slot -(pos + 2).
        std::unordered_map<int, int> pos;
        pos.reserve(static_cast<std::size_t>(nB + nPl));
        for (int i = 0; i < nB; ++i) pos.emplace(loc.b_dofs[i], i);
        for (int i = 0; i < nPl; ++i) pos.emplace(sd.primal[i], -(i + 2));

        Triplets tBB, tBP, tPP;
        loc.f_B = Eigen::VectorXd::Zero(nB);
        loc.f_P = Eigen::VectorXd::Zero(nPl);
        for (int e : sd.elements) {
            const auto& dofs = dofmap.element_dofs(e);
            const auto& K = ops[e].stiffness;
            std::vector<int> lp(dofs.size());
            for (std::size_t i = 0; i < dofs.size(); ++i)
                lp[i] = dofmap.is_dirichlet(dofs[i]) ? -1 : pos.at(dofs[i]);
            for (std::size_t i = 0; i < dofs.size(); ++i) {
                if (lp[i] == -1) continue;
                const auto ii = static_cast<Eigen::Index>(i);
                if (lp[i] >= 0) loc.f_B(lp[i]) += ops[e].load(ii);
                else loc.f_P(-lp[i] - 2) += ops[e].load(ii);
                for (std::size_t j = 0; j < dofs.size(); ++j) {
                    if (lp[j] == -1) continue;
                    const double v = K(ii, static_cast<Eigen::Index>(j));
                    if (lp[i] >= 0 && lp[j] >= 0) tBB.emplace_back(lp[i], lp[j], v);
                    else if (lp[i] >= 0) tBP.emplace_back(lp[i], -lp[j] - 2, v);
                    else if (lp[j] < 0) tPP.emplace_back(-lp[i] - 2, -lp[j] - 2, v);
                }
            }
        }
        loc.K_BB.resize(nB, nB);
        loc.K_BB.setFromTriplets(tBB.begin(), tBB.end());
        loc.K_BP.resize(nB, nPl);
        loc.K_BP.setFromTriplets(tBP.begin(), tBP.end());
        loc.K_PP.resize(nPl, nPl);
        loc.K_PP.setFromTriplets(tPP.begin(), tPP.end());
        const int nI = loc.num_interior, nD = nB - nI;
        loc.K_II = loc.K_BB.topLeftCorner(nI, nI);
        loc.K_ID = loc.K_BB.topRightCorner(nI, nD);
        loc.K_DD = loc.K_BB.bottomRightCorner(nD, nD);

        auto factor = [s](const SpMat& A, const char* name) {
            auto f = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(A);
            if (f->info() != Eigen::Success || (A.rows() > 0 && !(f->vectorD().minCoeff() > 0.0)))
                throw SolverError("factorization of " + std::string(name) + " failed in subdomain " + std::to_string(s) +
                                  " (matrix not positive definite)");
            return f;
        };
        loc.K_BB_factor = factor(loc.K_BB, "K_BB");
        if (nI > 0) loc.K_II_factor = factor(loc.K_II, "K_II");

        if (nPl > 0) {
            const Eigen::MatrixXd X = loc.K_BB_factor->solve(Eigen::MatrixXd(loc.K_BP));
            local_schur[s] = Eigen::MatrixXd(loc.K_PP) - Eigen::MatrixXd(loc.K_BP.transpose()) * X;
        }
    });

    sys.S_PP = Eigen::MatrixXd::Zero(nP, nP);
    for (int s = 0; s < L; ++s) {
        const auto& idx = sys.subdomains[s].primal_index;
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < idx.size(); ++j)
                sys.S_PP(idx[i], idx[j]) += local_schur[s](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    sys.S_PP = (0.5 * (sys.S_PP + sys.S_PP.transpose())).eval();
    if (nP > 0) {
        sys.S_PP_factor.compute(sys.S_PP);
        if (sys.S_PP_factor.info() != Eigen::Success)
            throw SolverError("factorization of the coarse problem failed (not positive definite)");
    }

    sys.f_torn = Eigen::VectorXd::Zero(partition.torn_size);
    const int po = sys.primal_offset();
    for (int s = 0; s < L; ++s) {
        const auto& loc = sys.subdomains[s];
        sys.f_torn.segment(loc.torn_offset, loc.f_B.size()) = loc.f_B;
        for (std::size_t i = 0; i < loc.primal_index.size(); ++i)
            sys.f_torn(po + loc.primal_index[i]) += loc.f_P(static_cast<Eigen::Index>(i));
    }
    return sys;
}

// ---------------------------------------------------------------------------
// Torn operator

Eigen::VectorXd apply_A_tilde(const FetiSystem& sys, const Eigen::VectorXd& u)
{
    const int po = sys.primal_offset();
    const int L = static_cast<int>(sys.subdomains.size());
    Eigen::VectorXd y = Eigen::VectorXd::Zero(sys.torn_size());
    std::vector<Eigen::VectorXd> primal_part(static_cast<std::size_t>(L));
    for_each_subdomain(sys.exec, L, [&](int s) {
        const auto& loc = sys.subdomains[s];
        const auto nB = loc.K_BB.rows();
        Eigen::VectorXd uP(static_cast<Eigen::Index>(loc.primal_index.size()));
        for (std::size_t i = 0; i < loc.primal_index.size(); ++i) uP(static_cast<Eigen::Index>(i)) = u(po + loc.primal_index[i]);
        const Eigen::VectorXd uB = u.segment(loc.torn_offset, nB);
        y.segment(loc.torn_offset, nB) = loc.K_BB * uB + loc.K_BP * uP;
        primal_part[s] = loc.K_BP.transpose() * uB + loc.K_PP * uP;
    });
    for (int s = 0; s < L; ++s) {
        const auto& idx = sys.subdomains[s].primal_index;
        for (std::size_t i = 0; i < idx.size(); ++i) y(po + idx[i]) += primal_part[s](static_cast<Eigen::Index>(i));
    }
    return y;
}

Eigen::VectorXd apply_A_tilde_inverse(const FetiSystem& sys, const Eigen::VectorXd& v)
{
    const int po = sys.primal_offset();
    const int nP = sys.torn_size() - po;
    const int L = static_cast<int>(sys.subdomains.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(sys.torn_size());

    // Local solves, then the coarse correction.
    std::vector<Eigen::VectorXd> coupling(static_cast<std::size_t>(L));
    for_each_subdomain(sys.exec, L, [&](int s) {
        const auto& loc = sys.subdomains[s];
        const Eigen::VectorXd z = loc.K_BB_factor->solve(v.segment(loc.torn_offset, loc.K_BB.rows()));
        coupling[s] = loc.K_BP.transpose() * z;
    });
    Eigen::VectorXd uP = v.tail(nP);
    for (int s = 0; s < L; ++s) {
        const auto& idx = sys.subdomains[s].primal_index;
        for (std::size_t i = 0; i < idx.size(); ++i) uP(idx[i]) -= coupling[s](static_cast<Eigen::Index>(i));
    }
    if (nP > 0) uP = sys.S_PP_factor.solve(uP);
    out.tail(nP) = uP;

    for_each_subdomain(sys.exec, L, [&](int s) {
        const auto& loc = sys.subdomains[s];
        Eigen::VectorXd uPl(static_cast<Eigen::Index>(loc.primal_index.size()));
        for (std::size_t i = 0; i < loc.primal_index.size(); ++i) uPl(static_cast<Eigen::Index>(i)) = uP(loc.primal_index[i]);
        const auto nB = loc.K_BB.rows();
        out.segment(loc.torn_offset, nB) = loc.K_BB_factor->solve(v.segment(loc.torn_offset, nB) - loc.K_BP * uPl);
    });
    return out;
}

Eigen::VectorXd tear(const FetiSystem& sys, const Eigen::VectorXd& global)
{
    if (global.size() != sys.num_dofs) throw std::invalid_argument("tear: expected a full dof vector");
    Eigen::VectorXd t(sys.torn_size());
    for (const auto& loc : sys.subdomains)
        for (std::size_t i = 0; i < loc.b_dofs.size(); ++i) t(loc.torn_offset + static_cast<Eigen::Index>(i)) = global(loc.b_dofs[i]);
    const int po = sys.primal_offset();
    for (std::size_t p = 0; p < sys.partition.primal_dofs.size(); ++p) t(po + static_cast<Eigen::Index>(p)) = global(sys.partition.primal_dofs[p]);
    return t;
}

Eigen::VectorXd apply_F(const FetiSystem& sys, const JumpOperator& jump, const Eigen::VectorXd& lambda)
{
    const Eigen::VectorXd t = jump.B.transpose() * lambda;
    return jump.B * apply_A_tilde_inverse(sys, t);
}

Eigen::VectorXd feti_rhs(const FetiSystem& sys, const JumpOperator& jump)
{
    return jump.B * apply_A_tilde_inverse(sys, sys.f_torn);
}

Eigen::VectorXd apply_dirichlet_preconditioner(const FetiSystem& sys, const JumpOperator& jump,
                                               const Eigen::VectorXd& residual)
{
    const Eigen::VectorXd w = jump.B_D.transpose() * residual;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(sys.torn_size());
    for_each_subdomain(sys.exec, static_cast<int>(sys.subdomains.size()), [&](int s) {
        const auto& loc = sys.subdomains[s];
        const int nI = loc.num_interior;
        const auto nD = loc.K_DD.rows();
        if (nD == 0) return;
        const Eigen::VectorXd wD = w.segment(loc.torn_offset + nI, nD);
        Eigen::VectorXd yD = loc.K_DD * wD;
        if (nI > 0) yD -= loc.K_ID.transpose() * loc.K_II_factor->solve(loc.K_ID * wD);
        y.segment(loc.torn_offset + nI, nD) = yD;
    });
    return jump.B_D * y;
}

RecoveredSolution recover_solution(const FetiSystem& sys, const JumpOperator& jump, const Eigen::VectorXd& lambda,
                                   double jump_threshold)
{
    RecoveredSolution out;
    out.u_torn = apply_A_tilde_inverse(sys, sys.f_torn - jump.B.transpose() * lambda);
    out.jump_norm = (jump.B * out.u_torn).norm();
    const double scale = out.u_torn.norm();
    if (out.jump_norm > jump_threshold * scale)
        throw SolverError("recover_solution: interface jump " + std::to_string(out.jump_norm) +
                          " exceeds tolerance; iteration did not converge");

    out.u = Eigen::VectorXd::Zero(sys.num_dofs);
    Eigen::VectorXd copies = Eigen::VectorXd::Zero(sys.num_dofs);
    for (const auto& loc : sys.subdomains)
        for (std::size_t i = 0; i < loc.b_dofs.size(); ++i) {
            out.u(loc.b_dofs[i]) += out.u_torn(loc.torn_offset + static_cast<Eigen::Index>(i));
            copies(loc.b_dofs[i]) += 1.0;
        }
    const int po = sys.primal_offset();
    for (std::size_t p = 0; p < sys.partition.primal_dofs.size(); ++p) {
        out.u(sys.partition.primal_dofs[p]) = out.u_torn(po + static_cast<Eigen::Index>(p));
        copies(sys.partition.primal_dofs[p]) = 1.0;
    }
    for (Eigen::Index d = 0; d < out.u.size(); ++d)
        if (copies(d) > 1.0) out.u(d) /= copies(d);
    return out;
}

FetiResult solve_feti_dp(const CutMesh& cutmesh, int k, const CoefficientField& coeff, const CgConfig& config,
                         Execution exec, bool precondition)
{
    const DofMap dofmap(cutmesh.mesh, k);
    const auto partition = classify_dofs(cutmesh, dofmap);
    const auto ops = build_all_element_operators(cutmesh.mesh, k, coeff, exec);
    const auto jump = build_jump_operator(cutmesh, dofmap, partition, coeff);
    const auto sys = build_feti_system(cutmesh, dofmap, partition, ops, exec);

    const LinearOperator F = [&](const Eigen::VectorXd& x) { return apply_F(sys, jump, x); };
    const LinearOperator M = precondition
                                 ? LinearOperator([&](const Eigen::VectorXd& r) { return apply_dirichlet_preconditioner(sys, jump, r); })
                                 : LinearOperator([](const Eigen::VectorXd& r) { return r; });
    CgResult cg = pcg(F, M, feti_rhs(sys, jump), config);
    if (!cg.report.converged)
        throw SolverError("pcg did not converge within " + std::to_string(config.max_iterations) + " iterations");

    FetiResult out;
    out.solution = recover_solution(sys, jump, cg.x);
    out.lambda = std::move(cg.x);
    out.cg = std::move(cg.report);
    out.num_multipliers = partition.num_multipliers();
    out.num_primal = static_cast<int>(partition.primal_dofs.size());
    return out;
}

}  // namespace polyfeti
