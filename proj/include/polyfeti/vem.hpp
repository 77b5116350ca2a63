#pragma once

// Virtual element discretization of -div(rho grad u) = f, u = 0 on the
// boundary, on polygonal meshes. Degrees of freedom of order k: vertex values,
// values at the k-1 interior Gauss-Lobatto points of every edge, and the
// moments of order <= k-2 against scaled monomials divided by the element area.
//
// Monomials live in a per-element frame: centered at the area centroid,
// rotated to the principal axes of the vertex cloud, and scaled by the extent
// along each axis. Slivers produced by cutting then keep O(1) monomials and a
// well-conditioned projector.

#include "polyfeti/execution.hpp"
#include "polyfeti/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <span>
#include <vector>

namespace polyfeti {

using ScalarField = std::function<double(Point2)>;
using VectorField = std::function<Point2(Point2)>;

/// Piecewise-constant diffusion plus a source that is either analytic or
/// constant per element.
class CoefficientField {
public:
    CoefficientField(std::vector<double> rho_per_element, ScalarField source);
    CoefficientField(std::vector<double> rho_per_element, std::vector<double> source_per_element);

    static CoefficientField constant(std::size_t n_elements, double rho, ScalarField source);

    double rho(std::size_t element) const { return rho_[element]; }
    const std::vector<double>& rho() const { return rho_; }
    double source(std::size_t element, Point2 x) const;
    bool analytic_source() const { return static_cast<bool>(f_fn_); }

    /// Bounds alpha <= rho <= M.
    double rho_lower() const { return rho_min_; }
    double rho_upper() const { return rho_max_; }

    /// Same field with rho multiplied by c (and the source by `source_factor`).
    CoefficientField scaled(double c, double source_factor) const;

private:
    std::vector<double> rho_;
    ScalarField f_fn_;
    std::vector<double> f_const_;
    double rho_min_ = 0.0;
    double rho_max_ = 0.0;
};

enum class DofKind { Vertex, Edge, Moment };

/// Global numbering: vertices, then (k-1) points per edge ordered from the
/// edge's lower vertex id to the higher one, then k(k-1)/2 moments per element.
class DofMap {
public:
    DofMap(const PolygonalMesh& mesh, int k);

    int order() const { return k_; }
    int total() const { return total_; }
    int num_free() const { return num_free_; }
    int moments_per_element() const { return k_ * (k_ - 1) / 2; }

    int vertex_dof(int v) const { return v; }
    int edge_dof(int edge, int j) const { return nv_ + edge * (k_ - 1) + j; }
    int moment_dof(int element, int m) const { return nv_ + ne_ * (k_ - 1) + element * moments_per_element() + m; }

    DofKind kind(int dof) const;
    /// Vertex, edge, or element index owning the dof.
    int entity(int dof) const;

    /// Local ordering: vertices (CCW), edge points per local edge in traversal
    /// direction, then moments in graded monomial order.
    const std::vector<int>& element_dofs(std::size_t element) const { return element_dofs_[element]; }

    bool is_dirichlet(int dof) const { return dirichlet_[dof] != 0; }
    const std::vector<std::uint8_t>& dirichlet_mask() const { return dirichlet_; }
    /// Position among free dofs, or -1 for Dirichlet dofs.
    int free_index(int dof) const { return free_index_[dof]; }
    const std::vector<int>& free_to_global() const { return free_to_global_; }

private:
    int k_;
    int nv_;
    int ne_;
    int nel_;
    int total_;
    int num_free_ = 0;
    std::vector<std::vector<int>> element_dofs_;
    std::vector<std::uint8_t> dirichlet_;
    std::vector<int> free_index_;
    std::vector<int> free_to_global_;
};

/// Exponent pairs (a, b) of the monomials of degree <= k in graded
/// lexicographic order: 1, x, y, x^2, xy, y^2, ...
std::vector<std::pair<int, int>> monomial_exponents(int k);

/// m_(a,b)(x) = xi^a eta^b with xi = (x - center).axis_x / scale_x and
/// eta = (x - center).axis_y / scale_y.
struct MonomialFrame {
    Point2 center;
    Point2 axis_x{1.0, 0.0};
    Point2 axis_y{0.0, 1.0};
    double scale_x = 1.0;
    double scale_y = 1.0;

    static MonomialFrame of(std::span<const Point2> poly);
    double eval(int a, int b, Point2 x) const;
    Point2 gradient(int a, int b, Point2 x) const;
};

/// Geometry-only part of an element: monomial frame, the energy projector and
/// the matrices it is built from.
struct ElementProjection {
    int k = 1;
    MonomialFrame frame;
    Point2 center;
    double diameter = 0.0;
    double area = 0.0;
    Point2 kernel_center;
    std::vector<std::pair<int, int>> exponents;
    Eigen::MatrixXd G;           // gradient Gram matrix of the monomials
    Eigen::MatrixXd D;           // dofs of each monomial (n_dofs x n_k)
    Eigen::MatrixXd B;           // right-hand side of the projector system
    Eigen::MatrixXd projector;   // monomial coefficients of the projection (n_k x n_dofs)

    double monomial(int alpha, Point2 x) const;
    Point2 monomial_gradient(int alpha, Point2 x) const;
};

ElementProjection build_element_projection(std::span<const Point2> poly, int k);

/// Stabilization of the local stiffness, S = (I - D Pi)^T W (I - D Pi).
///   Diagonal: W = diag(max(rho, (K_c)_ii)), robust to small edges at high order.
///   DofiDofi: W = (trace(K_c) / n_dofs) I.
enum class Stabilization { Diagonal, DofiDofi };

struct ElementOperators {
    ElementProjection proj;
    Eigen::MatrixXd consistency;
    Eigen::MatrixXd stabilization;
    Eigen::MatrixXd stiffness;  // consistency + stabilization, exactly symmetric
    Eigen::VectorXd load;
};

/// Local stiffness and load. Throws GeometryError when the element area is
/// below `min_area`.
ElementOperators build_element_operators(std::span<const Point2> poly, int k, double rho, const ScalarField& f,
                                         double min_area = 0.0,
                                         Stabilization stab = Stabilization::Diagonal);

/// Operators for every element, in element order.
std::vector<ElementOperators> build_all_element_operators(const PolygonalMesh& mesh, int k,
                                                          const CoefficientField& coeff,
                                                          Execution exec = Execution::Parallel);

struct GlobalSystem {
    Eigen::SparseMatrix<double> A;  // free dofs only
    Eigen::VectorXd b;
    DofMap dofmap;
};

GlobalSystem assemble(const PolygonalMesh& mesh, int k, const CoefficientField& coeff,
                      Execution exec = Execution::Parallel);
GlobalSystem assemble(const PolygonalMesh& mesh, const DofMap& dofmap, std::span<const ElementOperators> ops);

/// Sparse Cholesky solve. Throws std::runtime_error if A is not SPD.
Eigen::VectorXd solve_direct(const GlobalSystem& sys);
Eigen::VectorXd solve_direct(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b);

/// Full dof vector from free values (Dirichlet entries zero).
Eigen::VectorXd expand_free(const DofMap& dofmap, const Eigen::VectorXd& free_values);

/// Degrees of freedom of a smooth function (moments by quadrature).
Eigen::VectorXd interpolate(const PolygonalMesh& mesh, const DofMap& dofmap, const ScalarField& u);

/// Solves with prescribed values on the Dirichlet dofs (taken from `boundary`,
/// a full dof vector) instead of zero. Used by patch tests.
Eigen::VectorXd solve_with_boundary_values(const PolygonalMesh& mesh, int k, const CoefficientField& coeff,
                                           const Eigen::VectorXd& boundary);

struct DiscretizationError {
    double h1_seminorm = 0.0;  // |u - Pi u_h|_1
    double l2 = 0.0;           // ||u - Pi u_h||_0
};

DiscretizationError manufactured_error(const PolygonalMesh& mesh, int k, const Eigen::VectorXd& dofs,
                                       const ScalarField& u_exact, const VectorField& grad_exact);

/// Energy norm sqrt(x^T A x).
double energy_norm(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& x);

}  // namespace polyfeti
