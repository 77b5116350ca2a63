#pragma once

// Dual-primal substructuring. The torn space holds one copy of every
// non-primal dof per owning subdomain plus a single shared copy of each primal
// (cross point) dof. Continuity at dual dofs is imposed by multipliers:
//   A~ u~ + B^T lambda = f~,   B u~ = 0,
// which reduces to F lambda = d with F = B A~^{-1} B^T and d = B A~^{-1} f~.

#include "polyfeti/cutter.hpp"
#include "polyfeti/execution.hpp"
#include "polyfeti/krylov.hpp"
#include "polyfeti/vem.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <limits>
#include <memory>
#include <vector>

namespace polyfeti {

/// Global dof ids of one subdomain. `interior` and `dual` form the block B
/// that is eliminated locally; `primal` is coupled through the coarse problem.
struct SubdomainDofs {
    std::vector<int> elements;
    std::vector<int> interior;
    std::vector<int> dual;
    std::vector<int> primal;
};

struct DofPartition {
    int num_subdomains = 0;
    std::vector<SubdomainDofs> subdomains;
    std::vector<int> multiplicity;              // per global dof: number of owning subdomains
    std::vector<int> primal_dofs;               // sorted; position = coarse index
    std::vector<int> dual_dofs;                 // sorted; position = multiplier index
    std::vector<std::array<int, 2>> dual_owners;  // per dual dof, owners (lower, higher)
    int torn_size = 0;                          // dimension of the torn space

    int num_multipliers() const { return static_cast<int>(dual_dofs.size()); }
};

/// Splits the free dofs into interior, dual, and primal sets. Throws
/// std::invalid_argument for a single subdomain and SolverError for a
/// subdomain with neither primal nor Dirichlet dofs.
DofPartition classify_dofs(const CutMesh& cutmesh, const DofMap& dofmap);

struct JumpOperator {
    Eigen::SparseMatrix<double> B;    // multipliers x torn space, entries +-1
    Eigen::SparseMatrix<double> B_D;  // same pattern, entries +-delta
};

JumpOperator build_jump_operator(const CutMesh& cutmesh, const DofMap& dofmap, const DofPartition& partition,
                                 const CoefficientField& coeff);

/// Local blocks and factorizations of one subdomain. Local ordering of the B
/// block: interior dofs then dual dofs.
struct SubdomainSystem {
    std::vector<int> b_dofs;          // global ids of the B block
    std::vector<int> primal_index;    // coarse index of each local primal dof
    int num_interior = 0;
    int torn_offset = 0;              // first torn index of the B block
    Eigen::SparseMatrix<double> K_BB;
    Eigen::SparseMatrix<double> K_BP;
    Eigen::SparseMatrix<double> K_PP;
    Eigen::SparseMatrix<double> K_II;
    Eigen::SparseMatrix<double> K_ID;
    Eigen::SparseMatrix<double> K_DD;
    Eigen::VectorXd f_B;
    Eigen::VectorXd f_P;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> K_BB_factor;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> K_II_factor;
};

struct FetiSystem {
    DofPartition partition;
    std::vector<SubdomainSystem> subdomains;
    Eigen::MatrixXd S_PP;                  // coarse Schur complement
    Eigen::LLT<Eigen::MatrixXd> S_PP_factor;
    Eigen::VectorXd f_torn;
    int num_dofs = 0;                      // global dof count (including Dirichlet)
    Execution exec = Execution::Parallel;

    int torn_size() const { return partition.torn_size; }
    int primal_offset() const { return partition.torn_size - static_cast<int>(partition.primal_dofs.size()); }
};

/// Assembles and factorizes the subdomain problems. Throws SolverError naming
/// the subdomain whose factorization fails.
FetiSystem build_feti_system(const CutMesh& cutmesh, const DofMap& dofmap, const DofPartition& partition,
                             std::span<const ElementOperators> ops, Execution exec = Execution::Parallel);

Eigen::VectorXd apply_A_tilde(const FetiSystem& sys, const Eigen::VectorXd& u_torn);
Eigen::VectorXd apply_A_tilde_inverse(const FetiSystem& sys, const Eigen::VectorXd& v_torn);

/// Torn copy of a global dof vector (values of shared dofs duplicated).
Eigen::VectorXd tear(const FetiSystem& sys, const Eigen::VectorXd& global);

Eigen::VectorXd apply_F(const FetiSystem& sys, const JumpOperator& jump, const Eigen::VectorXd& lambda);
Eigen::VectorXd feti_rhs(const FetiSystem& sys, const JumpOperator& jump);
Eigen::VectorXd apply_dirichlet_preconditioner(const FetiSystem& sys, const JumpOperator& jump,
                                               const Eigen::VectorXd& residual);

struct RecoveredSolution {
    Eigen::VectorXd u;       // global dof vector, Dirichlet entries zero
    Eigen::VectorXd u_torn;
    double jump_norm = 0.0;  // ||B u~||
};

/// u~ = A~^{-1}(f~ - B^T lambda), with the two copies of each dual dof averaged.
/// Throws SolverError when ||B u~|| exceeds `jump_threshold * ||u~||`.
RecoveredSolution recover_solution(const FetiSystem& sys, const JumpOperator& jump, const Eigen::VectorXd& lambda,
                                   double jump_threshold = std::numeric_limits<double>::infinity());

struct FetiResult {
    RecoveredSolution solution;
    Eigen::VectorXd lambda;
    CgReport cg;
    int num_multipliers = 0;
    int num_primal = 0;
};

/// classify -> jump operator -> system -> PCG -> recovery.
FetiResult solve_feti_dp(const CutMesh& cutmesh, int k, const CoefficientField& coeff, const CgConfig& config = {},
                         Execution exec = Execution::Parallel, bool precondition = true);

}  // namespace polyfeti
