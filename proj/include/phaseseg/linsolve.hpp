#pragma once
/**
 * @brief Solvers for the SPD systems (A + diag(s)) x = b of the mu-update.
 *
 * 1D grids give tridiagonal systems solved directly (Thomas algorithm); 2D grids use
 * Jacobi-preconditioned conjugate gradients. pcg() is generic over any operator exposing
 * size(), apply(in, out) and diagonal().
 */

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "phaseseg/errors.hpp"
#include "phaseseg/grid.hpp"

namespace phaseseg {

template <class Op>
concept LinearOperator = requires(const Op& a, std::span<const double> in, std::span<double> out) {
    { a.size() } -> std::convertible_to<std::size_t>;
    a.apply(in, out);
    { a.diagonal() } -> std::convertible_to<std::vector<double>>;
};

/// op + diag(shift), shift > 0 cellwise.
struct SpdSystem {
    DiffusionMatrix op;
    std::vector<double> shift;
    ScalarField rhs;
    double tolerance = 1e-10;
    int max_iterations = 10000;

    std::size_t size() const { return op.size(); }
    void apply(std::span<const double> v, std::span<double> out) const {
        op.apply(v, out);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += shift[k] * v[k];
    }
    std::vector<double> diagonal() const {
        auto d = op.diagonal();
        for (std::size_t k = 0; k < d.size(); ++k) d[k] += shift[k];
        return d;
    }
    void check() const {
        if (shift.size() != op.size() || rhs.size() != op.size()) throw ShapeError("SpdSystem: size mismatch");
        for (std::size_t k = 0; k < shift.size(); ++k)
            if (!(shift[k] > 0.0)) {
                std::ostringstream os;
                os << "SpdSystem: diagonal addition must be positive (cell " << k << ")";
                throw InvalidParameter(os.str());
            }
    }
};

struct SolveResult {
    std::vector<double> x;
    int iterations = 0;
    double relative_residual = 0.0;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

template <LinearOperator Op>
double relative_residual(const Op& a, std::span<const double> x, std::span<const double> b) {
    std::vector<double> ax(b.size());
    a.apply(x, ax);
    double r2 = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) r2 += (b[k] - ax[k]) * (b[k] - ax[k]);
    const double bn = std::sqrt(dot(b, b));
    return bn > 0.0 ? std::sqrt(r2) / bn : std::sqrt(r2);
}

}  // namespace detail

/// Jacobi-preconditioned conjugate gradients from x0 = 0 until ||b - A x|| <= tol ||b||.
template <LinearOperator Op>
SolveResult pcg(const Op& a, std::span<const double> b, double tol = 1e-10, int max_iterations = 10000) {
    const std::size_t n = a.size();
    if (b.size() != n) throw ShapeError("pcg: right-hand side size mismatch");
    SolveResult out;
    out.x.assign(n, 0.0);
    const double bnorm = std::sqrt(detail::dot(b, b));
    if (bnorm == 0.0) return out;

    const std::vector<double> diag = a.diagonal();
    std::vector<double> r(b.begin(), b.end()), z(n), p(n), q(n);
    for (std::size_t k = 0; k < n; ++k) z[k] = r[k] / diag[k];
    p = z;
    double rz = detail::dot(r, z);
    double rnorm = bnorm;
    int it = 0;
    while (rnorm > tol * bnorm) {
        if (it >= max_iterations) {
            std::ostringstream os;
            os << "pcg: no convergence in " << max_iterations << " iterations (relative residual "
               << rnorm / bnorm << ")";
            throw SolverFailure(os.str(), 0.0, rnorm / bnorm);
        }
        a.apply(p, q);
        const double alpha = rz / detail::dot(p, q);
        for (std::size_t k = 0; k < n; ++k) {
            out.x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        rnorm = std::sqrt(detail::dot(r, r));
        ++it;
        for (std::size_t k = 0; k < n; ++k) z[k] = r[k] / diag[k];
        const double rz_new = detail::dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
    out.iterations = it;
    out.relative_residual = detail::relative_residual(a, out.x, b);
    return out;
}

/// Direct solve of a 1D system by forward elimination and back substitution.
inline ScalarField solve_tridiagonal(const SpdSystem& sys) {
    sys.check();
    const Grid& g = sys.op.grid();
    if (g.dim != 1) throw ShapeError("solve_tridiagonal: 1D grid required");
    const std::size_t n = g.size();
    const std::vector<double> diag = sys.diagonal();
    std::vector<double> cprime(n, 0.0), dprime(n, 0.0);
    auto off = [&](std::size_t i) { return -sys.op.x_face(i); };  // entry (i, i+1) == (i+1, i)

    double piv = diag[0];
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) piv = diag[i] - off(i - 1) * cprime[i - 1];
        if (piv == 0.0 || !std::isfinite(piv)) {
            std::ostringstream os;
            os << "solve_tridiagonal: zero pivot at row " << i;
            throw SingularityError(os.str());
        }
        cprime[i] = i + 1 < n ? off(i) / piv : 0.0;
        dprime[i] = (sys.rhs[i] - (i > 0 ? off(i - 1) * dprime[i - 1] : 0.0)) / piv;
    }
    ScalarField x(g);
    x[n - 1] = dprime[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = dprime[i] - cprime[i] * x[i + 1];
    return x;
}

struct CgSolution {
    ScalarField x;
    int iterations = 0;
    double relative_residual = 0.0;
};

inline CgSolution solve_cg(const SpdSystem& sys) {
    sys.check();
    SolveResult r = pcg(sys, sys.rhs.values, sys.tolerance, sys.max_iterations);
    return {ScalarField(sys.rhs.grid, std::move(r.x)), r.iterations, r.relative_residual};
}

}  // namespace phaseseg
