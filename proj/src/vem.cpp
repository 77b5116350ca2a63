#include "polyfeti/vem.hpp"

#include "polyfeti/quadrature.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace polyfeti {

// ---------------------------------------------------------------------------
// CoefficientField

namespace {

void check_rho(const std::vector<double>& rho)
{
    for (double r : rho)
        if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("CoefficientField: rho must be positive and finite");
}

}  // namespace

CoefficientField::CoefficientField(std::vector<double> rho_per_element, ScalarField source)
    : rho_(std::move(rho_per_element)), f_fn_(std::move(source))
{
    check_rho(rho_);
    if (!rho_.empty()) {
        rho_min_ = *std::min_element(rho_.begin(), rho_.end());
        rho_max_ = *std::max_element(rho_.begin(), rho_.end());
    }
}

CoefficientField::CoefficientField(std::vector<double> rho_per_element, std::vector<double> source_per_element)
    : rho_(std::move(rho_per_element)), f_const_(std::move(source_per_element))
{
    check_rho(rho_);
    if (f_const_.size() != rho_.size()) throw std::invalid_argument("CoefficientField: source size mismatch");
    if (!rho_.empty()) {
        rho_min_ = *std::min_element(rho_.begin(), rho_.end());
        rho_max_ = *std::max_element(rho_.begin(), rho_.end());
    }
}

CoefficientField CoefficientField::constant(std::size_t n_elements, double rho, ScalarField source)
{
    return CoefficientField(std::vector<double>(n_elements, rho), std::move(source));
}

double CoefficientField::source(std::size_t element, Point2 x) const
{
    return f_fn_ ? f_fn_(x) : f_const_[element];
}

CoefficientField CoefficientField::scaled(double c, double source_factor) const
{
    std::vector<double> rho = rho_;
    for (double& r : rho) r *= c;
    if (f_fn_) {
        ScalarField f = f_fn_;
        return CoefficientField(std::move(rho), [f, source_factor](Point2 x) { return source_factor * f(x); });
    }
    std::vector<double> fc = f_const_;
    for (double& v : fc) v *= source_factor;
    return CoefficientField(std::move(rho), std::move(fc));
}

// ---------------------------------------------------------------------------
// DofMap

DofMap::DofMap(const PolygonalMesh& mesh, int k)
    : k_(k),
      nv_(static_cast<int>(mesh.num_vertices())),
      ne_(static_cast<int>(mesh.num_edges())),
      nel_(static_cast<int>(mesh.num_elements()))
{
    if (k < 1) throw std::invalid_argument("DofMap: order k must be >= 1");
    total_ = nv_ + (k - 1) * ne_ + moments_per_element() * nel_;

    dirichlet_.assign(total_, 0);
    for (int v = 0; v < nv_; ++v)
        if (mesh.is_boundary_vertex(v)) dirichlet_[vertex_dof(v)] = 1;
    for (int e = 0; e < ne_; ++e)
        if (mesh.is_boundary_edge(e))
            for (int j = 0; j < k - 1; ++j) dirichlet_[edge_dof(e, j)] = 1;

    free_index_.assign(total_, -1);
    for (int d = 0; d < total_; ++d)
        if (!dirichlet_[d]) {
            free_index_[d] = num_free_++;
            free_to_global_.push_back(d);
        }

    element_dofs_.resize(nel_);
    for (int el = 0; el < nel_; ++el) {
        const auto& cyc = mesh.elements()[el];
        auto& dofs = element_dofs_[el];
        dofs.reserve(cyc.size() * k + moments_per_element());
        for (int v : cyc) dofs.push_back(vertex_dof(v));
        for (std::size_t i = 0; i < cyc.size(); ++i) {
            const int edge = mesh.element_edge(el, i);
            const bool forward = mesh.edges()[edge].a == cyc[i];
            for (int j = 0; j < k - 1; ++j) dofs.push_back(edge_dof(edge, forward ? j : k - 2 - j));
        }
        for (int m = 0; m < moments_per_element(); ++m) dofs.push_back(moment_dof(el, m));
    }
}

DofKind DofMap::kind(int dof) const
{
    if (dof < nv_) return DofKind::Vertex;
    if (dof < nv_ + ne_ * (k_ - 1)) return DofKind::Edge;
    return DofKind::Moment;
}

int DofMap::entity(int dof) const
{
    switch (kind(dof)) {
    case DofKind::Vertex:
        return dof;
    case DofKind::Edge:
        return (dof - nv_) / (k_ - 1);
    case DofKind::Moment:
        return (dof - nv_ - ne_ * (k_ - 1)) / moments_per_element();
    }
    return -1;
}

// ---------------------------------------------------------------------------
// Monomials and projector

std::vector<std::pair<int, int>> monomial_exponents(int k)
{
    std::vector<std::pair<int, int>> e;
    for (int d = 0; d <= k; ++d)
        for (int b = 0; b <= d; ++b) e.emplace_back(d - b, b);
    return e;
}

namespace {

int monomial_index(int a, int b)
{
    const int d = a + b;
    return d * (d + 1) / 2 + b;
}

double ipow(double x, int n)
{
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

}  // namespace

MonomialFrame MonomialFrame::of(std::span<const Point2> poly)
{
    MonomialFrame f;
    f.center = area_centroid(poly);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (Point2 p : poly) {
        const Point2 d = p - f.center;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    f.axis_x = {std::cos(theta), std::sin(theta)};
    f.axis_y = {-f.axis_x.y, f.axis_x.x};
    f.scale_x = f.scale_y = 0.0;
    for (Point2 p : poly) {
        const Point2 d = p - f.center;
        f.scale_x = std::max(f.scale_x, std::abs(dot(d, f.axis_x)));
        f.scale_y = std::max(f.scale_y, std::abs(dot(d, f.axis_y)));
    }
    return f;
}

double MonomialFrame::eval(int a, int b, Point2 x) const
{
    const Point2 d = x - center;
    return ipow(dot(d, axis_x) / scale_x, a) * ipow(dot(d, axis_y) / scale_y, b);
}

Point2 MonomialFrame::gradient(int a, int b, Point2 x) const
{
    const Point2 d = x - center;
    const double xi = dot(d, axis_x) / scale_x;
    const double eta = dot(d, axis_y) / scale_y;
    const double dxi = a == 0 ? 0.0 : a * ipow(xi, a - 1) * ipow(eta, b) / scale_x;
    const double deta = b == 0 ? 0.0 : b * ipow(xi, a) * ipow(eta, b - 1) / scale_y;
    return dxi * axis_x + deta * axis_y;
}

double ElementProjection::monomial(int alpha, Point2 x) const
{
    return frame.eval(exponents[alpha].first, exponents[alpha].second, x);
}

Point2 ElementProjection::monomial_gradient(int alpha, Point2 x) const
{
    return frame.gradient(exponents[alpha].first, exponents[alpha].second, x);
}

ElementProjection build_element_projection(std::span<const Point2> poly, int k)
{
    if (k < 1) throw std::invalid_argument("build_element_projection: k must be >= 1");
    ElementProjection p;
    p.k = k;
    p.area = signed_area(poly);
    if (!(p.area > 0.0)) throw GeometryError("build_element_projection: element is not counterclockwise");
    p.frame = MonomialFrame::of(poly);
    p.center = p.frame.center;
    p.diameter = polygon_diameter(poly);
    p.kernel_center = kernel_point(poly);
    p.exponents = monomial_exponents(k);

    const int nv = static_cast<int>(poly.size());
    const int nk = static_cast<int>(p.exponents.size());
    const int nm = k * (k - 1) / 2;
    const int ndofs = nv * k + nm;
    const Rule1D gl = gauss_lobatto(k + 1);
    const auto quad = polygon_rule(poly, p.kernel_center, 2 * k);

    auto edge_point = [&](int i, double t) {
        const Point2 a = poly[i], b = poly[(i + 1) % nv];
        return 0.5 * (a + b) + (0.5 * t) * (b - a);
    };

    Eigen::MatrixXd Ggrad = Eigen::MatrixXd::Zero(nk, nk);
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(nm, nk);  // integrals of m_beta * m_alpha, |beta| <= k-2
    for (const QuadPoint& q : quad) {
        std::vector<Point2> grads(nk);
        std::vector<double> vals(nk);
        for (int a = 0; a < nk; ++a) {
            grads[a] = p.monomial_gradient(a, q.x);
            vals[a] = p.monomial(a, q.x);
        }
        for (int a = 0; a < nk; ++a)
            for (int b = 0; b < nk; ++b) Ggrad(a, b) += q.w * dot(grads[a], grads[b]);
        for (int r = 0; r < nm; ++r)
            for (int a = 0; a < nk; ++a) mass(r, a) += q.w * vals[r] * vals[a];
    }
    Ggrad = 0.5 * (Ggrad + Ggrad.transpose()).eval();

    p.D.resize(ndofs, nk);
    for (int i = 0; i < nv; ++i)
        for (int a = 0; a < nk; ++a) p.D(i, a) = p.monomial(a, poly[i]);
    for (int i = 0; i < nv; ++i)
        for (int j = 1; j < k; ++j) {
            const Point2 x = edge_point(i, gl.nodes[j]);
            for (int a = 0; a < nk; ++a) p.D(nv + i * (k - 1) + (j - 1), a) = p.monomial(a, x);
        }
    for (int r = 0; r < nm; ++r)
        for (int a = 0; a < nk; ++a) p.D(nv * k + r, a) = mass(r, a) / p.area;

    // B: boundary terms by Gauss-Lobatto on each edge, volume terms via moments.
    p.B = Eigen::MatrixXd::Zero(nk, ndofs);
    for (int i = 0; i < nv; ++i) {
        const Point2 a = poly[i], b = poly[(i + 1) % nv];
        const Point2 scaled_normal{b.y - a.y, -(b.x - a.x)};  // outward normal times |e|
        for (int j = 0; j <= k; ++j) {
            const Point2 x = edge_point(i, gl.nodes[j]);
            const int dof = j == 0 ? i : (j == k ? (i + 1) % nv : nv + i * (k - 1) + (j - 1));
            for (int al = 1; al < nk; ++al) p.B(al, dof) += 0.5 * gl.weights[j] * dot(p.monomial_gradient(al, x), scaled_normal);
        }
    }
    const double sx2 = p.frame.scale_x * p.frame.scale_x, sy2 = p.frame.scale_y * p.frame.scale_y;
    for (int al = 0; al < nk; ++al) {
        const auto [ea, eb] = p.exponents[al];
        if (ea >= 2) p.B(al, nv * k + monomial_index(ea - 2, eb)) -= p.area * ea * (ea - 1) / sx2;
        if (eb >= 2) p.B(al, nv * k + monomial_index(ea, eb - 2)) -= p.area * eb * (eb - 1) / sy2;
    }

    // First row fixes the constant: vertex average (k = 1) or mean value (k >= 2).
    p.G = Ggrad;
    if (k == 1) {
        for (int a = 0; a < nk; ++a) p.G(0, a) = p.D.col(a).head(nv).mean();
        p.B.row(0).setZero();
        p.B.row(0).head(nv).setConstant(1.0 / nv);
    } else {
        for (int a = 0; a < nk; ++a) p.G(0, a) = p.D(nv * k, a);
        p.B.row(0).setZero();
        p.B(0, nv * k) = 1.0;
    }
    p.projector = p.G.fullPivLu().solve(p.B);
    // Keep the unmodified gradient matrix for the consistency term.
    p.G = Ggrad;
    return p;
}

ElementOperators build_element_operators(std::span<const Point2> poly, int k, double rho, const ScalarField& f,
                                         double min_area, Stabilization stab)
{
    if (!(rho > 0.0)) throw std::invalid_argument("build_element_operators: rho must be positive");
    const double area = signed_area(poly);
    if (!(area > min_area)) throw GeometryError("build_element_operators: degenerate element (area " + std::to_string(area) + ")");

    ElementOperators ops;
    ops.proj = build_element_projection(poly, k);
    const ElementProjection& p = ops.proj;
    const auto ndofs = p.D.rows();

    ops.consistency = rho * (p.projector.transpose() * p.G * p.projector);
    ops.consistency = 0.5 * (ops.consistency + ops.consistency.transpose()).eval();

    const Eigen::MatrixXd residual = Eigen::MatrixXd::Identity(ndofs, ndofs) - p.D * p.projector;
    if (stab == Stabilization::Diagonal) {
        const Eigen::VectorXd w = ops.consistency.diagonal().cwiseMax(rho);
        ops.stabilization = residual.transpose() * w.asDiagonal() * residual;
    } else {
        const double sigma = ops.consistency.trace() / static_cast<double>(ndofs);
        ops.stabilization = sigma * (residual.transpose() * residual);
    }
    ops.stabilization = 0.5 * (ops.stabilization + ops.stabilization.transpose()).eval();
    ops.stiffness = ops.consistency + ops.stabilization;

    const int nv = static_cast<int>(poly.size());
    ops.load = Eigen::VectorXd::Zero(ndofs);
    if (k == 1) {
        const double share = p.area / nv * f(p.center);
        ops.load.head(nv).setConstant(share);
    } else {
        // L2 projection of f onto polynomials of degree k-2, paired with the moments.
        const int nm = k * (k - 1) / 2;
        const Eigen::MatrixXd H = p.area * p.D.block(nv * k, 0, nm, nm);
        Eigen::VectorXd r = Eigen::VectorXd::Zero(nm);
        for (const QuadPoint& q : polygon_rule(poly, p.kernel_center, 2 * k + 2)) {
            const double fq = f(q.x);
            for (int b = 0; b < nm; ++b) r(b) += q.w * fq * p.monomial(b, q.x);
        }
        const Eigen::VectorXd c = (0.5 * (H + H.transpose())).ldlt().solve(r);
        ops.load.tail(nm) = p.area * c;
    }
    return ops;
}

std::vector<ElementOperators> build_all_element_operators(const PolygonalMesh& mesh, int k,
                                                          const CoefficientField& coeff, Execution exec)
{
    const auto n = static_cast<std::ptrdiff_t>(mesh.num_elements());
    const double min_area = 1e-24 * mesh.total_area();
    std::vector<ElementOperators> ops(static_cast<std::size_t>(n));
    auto build = [&](std::ptrdiff_t e) {
        const auto el = static_cast<std::size_t>(e);
        const ScalarField f = [&coeff, el](Point2 x) { return coeff.source(el, x); };
        ops[el] = build_element_operators(mesh.element_polygon(el), k, coeff.rho(el), f, min_area);
    };
    if (exec == Execution::Serial) {
        for (std::ptrdiff_t e = 0; e < n; ++e) build(e);
        return ops;
    }
    // Exceptions must not escape the parallel region; the first one is rethrown.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t e = 0; e < n; ++e) {
        try {
            build(e);
        } catch (...) {
#pragma omp critical(polyfeti_vem_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return ops;
}

// ---------------------------------------------------------------------------
// Assembly and solves

GlobalSystem assemble(const PolygonalMesh& mesh, const DofMap& dofmap, std::span<const ElementOperators> ops)
{
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dofmap.num_free());
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& dofs = dofmap.element_dofs(e);
        const auto& K = ops[e].stiffness;
        for (std::size_t i = 0; i < dofs.size(); ++i) {
            const int fi = dofmap.free_index(dofs[i]);
            if (fi < 0) continue;
            b(fi) += ops[e].load(static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < dofs.size(); ++j) {
                const int fj = dofmap.free_index(dofs[j]);
                if (fj >= 0) triplets.emplace_back(fi, fj, K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
        }
    }
    GlobalSystem sys{Eigen::SparseMatrix<double>(dofmap.num_free(), dofmap.num_free()), std::move(b), dofmap};
    sys.A.setFromTriplets(triplets.begin(), triplets.end());
    sys.A.makeCompressed();
    return sys;
}

GlobalSystem assemble(const PolygonalMesh& mesh, int k, const CoefficientField& coeff, Execution exec)
{
    if (coeff.rho().size() != mesh.num_elements()) throw std::invalid_argument("assemble: coefficient size mismatch");
    const DofMap dofmap(mesh, k);
    const auto ops = build_all_element_operators(mesh, k, coeff, exec);
    return assemble(mesh, dofmap, ops);
}

Eigen::VectorXd solve_direct(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b)
{
    if (A.rows() == 0) return Eigen::VectorXd(0);
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(A);
    if (llt.info() != Eigen::Success) throw std::runtime_error("solve_direct: matrix is not symmetric positive definite");
    Eigen::VectorXd x = llt.solve(b);
    // One step of iterative refinement.
    const Eigen::VectorXd r = b - A * x;
    x += llt.solve(r);
    return x;
}

Eigen::VectorXd solve_direct(const GlobalSystem& sys) { return solve_direct(sys.A, sys.b); }

Eigen::VectorXd expand_free(const DofMap& dofmap, const Eigen::VectorXd& free_values)
{
    Eigen::VectorXd full = Eigen::VectorXd::Zero(dofmap.total());
    for (int i = 0; i < dofmap.num_free(); ++i) full(dofmap.free_to_global()[i]) = free_values(i);
    return full;
}

Eigen::VectorXd interpolate(const PolygonalMesh& mesh, const DofMap& dofmap, const ScalarField& u)
{
    const int k = dofmap.order();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dofmap.total());
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) out(dofmap.vertex_dof(static_cast<int>(v))) = u(mesh.vertices()[v]);
    const Rule1D gl = gauss_lobatto(k + 1);
    for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
        const Point2 a = mesh.vertices()[mesh.edges()[e].a], b = mesh.vertices()[mesh.edges()[e].b];
        for (int j = 1; j < k; ++j)
            out(dofmap.edge_dof(static_cast<int>(e), j - 1)) = u(0.5 * (a + b) + (0.5 * gl.nodes[j]) * (b - a));
    }
    const int nm = dofmap.moments_per_element();
    if (nm == 0) return out;
    for (std::size_t el = 0; el < mesh.num_elements(); ++el) {
        const auto poly = mesh.element_polygon(el);
        const MonomialFrame frame = MonomialFrame::of(poly);
        const auto exps = monomial_exponents(k - 2);
        Eigen::VectorXd m = Eigen::VectorXd::Zero(nm);
        for (const QuadPoint& q : polygon_rule(poly, kernel_point(poly), 2 * k + 4)) {
            const double uq = u(q.x);
            for (int r = 0; r < nm; ++r) m(r) += q.w * uq * frame.eval(exps[r].first, exps[r].second, q.x);
        }
        for (int r = 0; r < nm; ++r) out(dofmap.moment_dof(static_cast<int>(el), r)) = m(r) / signed_area(poly);
    }
    return out;
}

Eigen::VectorXd solve_with_boundary_values(const PolygonalMesh& mesh, int k, const CoefficientField& coeff,
                                           const Eigen::VectorXd& boundary)
{
    const DofMap dofmap(mesh, k);
    const auto ops = build_all_element_operators(mesh, k, coeff);
    const int nf = dofmap.num_free();
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& dofs = dofmap.element_dofs(e);
        for (std::size_t i = 0; i < dofs.size(); ++i) {
            const int fi = dofmap.free_index(dofs[i]);
            if (fi < 0) continue;
            rhs(fi) += ops[e].load(static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < dofs.size(); ++j) {
                const double kij = ops[e].stiffness(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                const int fj = dofmap.free_index(dofs[j]);
                if (fj >= 0) triplets.emplace_back(fi, fj, kij);
                else rhs(fi) -= kij * boundary(dofs[j]);
            }
        }
    }
    Eigen::SparseMatrix<double> A(nf, nf);
    A.setFromTriplets(triplets.begin(), triplets.end());
    const Eigen::VectorXd x = solve_direct(A, rhs);
    Eigen::VectorXd full = boundary;
    for (int i = 0; i < nf; ++i) full(dofmap.free_to_global()[i]) = x(i);
    return full;
}

DiscretizationError manufactured_error(const PolygonalMesh& mesh, int k, const Eigen::VectorXd& dofs,
                                       const ScalarField& u_exact, const VectorField& grad_exact)
{
    const DofMap dofmap(mesh, k);
    if (dofs.size() != dofmap.total()) throw std::invalid_argument("manufactured_error: dof vector size mismatch");
    double h1 = 0.0, l2 = 0.0;
    for (std::size_t el = 0; el < mesh.num_elements(); ++el) {
        const auto poly = mesh.element_polygon(el);
        const ElementProjection p = build_element_projection(poly, k);
        const auto& ldofs = dofmap.element_dofs(el);
        Eigen::VectorXd local(static_cast<Eigen::Index>(ldofs.size()));
        for (std::size_t i = 0; i < ldofs.size(); ++i) local(static_cast<Eigen::Index>(i)) = dofs(ldofs[i]);
        const Eigen::VectorXd coef = p.projector * local;
        for (const QuadPoint& q : polygon_rule(poly, p.kernel_center, 2 * k + 6)) {
            double val = 0.0;
            Point2 grad{};
            for (Eigen::Index a = 0; a < coef.size(); ++a) {
                val += coef(a) * p.monomial(static_cast<int>(a), q.x);
                grad = grad + coef(a) * p.monomial_gradient(static_cast<int>(a), q.x);
            }
            const Point2 dg = grad_exact(q.x) - grad;
            const double dv = u_exact(q.x) - val;
            h1 += q.w * dot(dg, dg);
            l2 += q.w * dv * dv;
        }
    }
    return {std::sqrt(h1), std::sqrt(l2)};
}

double energy_norm(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& x)
{
    return std::sqrt(std::max(0.0, x.dot(A * x)));
}

}  // namespace polyfeti
