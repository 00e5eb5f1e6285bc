#pragma once
/**
 * @brief Cell-centered uniform grids on intervals and rectangles, discrete fields, and the
 * finite-volume operator -div(kappa(mu) grad .) with zero-flux (Neumann) closure.
 *
 * Boundary faces are simply absent from the operator, so every interior face flux appears
 * twice with opposite signs and the column sums of the operator vanish.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "phaseseg/errors.hpp"
#include "phaseseg/model.hpp"

namespace phaseseg {

struct Grid {
    int dim = 1;
    std::array<std::size_t, 2> cells{1, 1};
    std::array<double, 2> lengths{1.0, 1.0};

    static Grid line(std::size_t n, double length) {
        Grid g;
        g.dim = 1;
        g.cells = {n, 1};
        g.lengths = {length, 1.0};
        g.check();
        return g;
    }
    static Grid rectangle(std::size_t nx, std::size_t ny, double lx, double ly) {
        Grid g;
        g.dim = 2;
        g.cells = {nx, ny};
        g.lengths = {lx, ly};
        g.check();
        return g;
    }

    void check() const {
        if (dim != 1 && dim != 2) throw InvalidParameter("grid: dim must be 1 or 2");
        for (int a = 0; a < dim; ++a) {
            if (cells[a] < 1) throw InvalidParameter("grid: at least one cell per axis required");
            if (!(lengths[a] > 0.0) || !std::isfinite(lengths[a]))
                throw InvalidParameter("grid: lengths must be positive and finite");
        }
    }

    std::size_t nx() const { return cells[0]; }
    std::size_t ny() const { return dim == 2 ? cells[1] : 1; }
    std::size_t size() const { return nx() * ny(); }
    double spacing(int axis) const { return lengths[axis] / static_cast<double>(cells[axis]); }
    double cell_volume() const { return dim == 2 ? spacing(0) * spacing(1) : spacing(0); }
    std::size_t index(std::size_t i, std::size_t j = 0) const { return j * nx() + i; }

    /// Cell-center coordinates of flat index k.
    std::array<double, 2> center(std::size_t k) const {
        const std::size_t i = k % nx();
        const std::size_t j = k / nx();
        return {(static_cast<double>(i) + 0.5) * spacing(0),
                dim == 2 ? (static_cast<double>(j) + 0.5) * spacing(1) : 0.0};
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        if (a.dim != b.dim || a.nx() != b.nx() || a.ny() != b.ny()) return false;
        if (a.lengths[0] != b.lengths[0]) return false;
        return a.dim == 1 || a.lengths[1] == b.lengths[1];
    }
};

/// One value per cell, row-major (x fastest) in 2D.
struct ScalarField {
    Grid grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    ScalarField(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size()) throw ShapeError("field: value count does not match grid");
    }

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }

    double min() const { return *std::min_element(values.begin(), values.end()); }
    double max() const { return *std::max_element(values.begin(), values.end()); }
};

inline void require_same_grid(const ScalarField& a, const ScalarField& b, const char* where) {
    if (!(a.grid == b.grid) || a.size() != b.size()) {
        std::ostringstream os;
        os << where << ": fields live on different grids";
        throw ShapeError(os.str());
    }
}

inline ScalarField operator-(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a, b, "field difference");
    ScalarField out(a.grid);
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
    return out;
}

/// Discrete integral over the domain: sum of values times cell volume.
inline double integrate(const ScalarField& f) {
    double s = 0.0;
    for (double v : f.values) s += v;
    return s * f.grid.cell_volume();
}

/// sqrt(sum vol v^2), the discrete L2(Omega) norm.
inline double norm_h(const ScalarField& f) {
    double s = 0.0;
    for (double v : f.values) s += v * v;
    return std::sqrt(s * f.grid.cell_volume());
}

/**
 * Symmetric finite-volume operator A ~ -div(kappa grad .) stored as face conductances
 * kappa_face / h^2. Boundary faces carry no flux. A has zero row sums, nonpositive
 * off-diagonals, nonnegative diagonal, and is positive semidefinite.
 */
class DiffusionMatrix {
public:
    DiffusionMatrix() = default;
    DiffusionMatrix(const Grid& g, std::vector<double> x_faces, std::vector<double> y_faces)
        : grid_(g), x_faces_(std::move(x_faces)), y_faces_(std::move(y_faces)) {
        const std::size_t nx = g.nx(), ny = g.ny();
        if (x_faces_.size() != (nx - 1) * ny) throw ShapeError("diffusion matrix: x-face count mismatch");
        const std::size_t ny_faces = g.dim == 2 ? nx * (ny - 1) : 0;
        if (y_faces_.size() != ny_faces) throw ShapeError("diffusion matrix: y-face count mismatch");
    }

    /// Operator with every conductance zero (pure reaction systems).
    static DiffusionMatrix zero(const Grid& g) {
        const std::size_t nx = g.nx(), ny = g.ny();
        return DiffusionMatrix(g, std::vector<double>((nx - 1) * ny, 0.0),
                               std::vector<double>(g.dim == 2 ? nx * (ny - 1) : 0, 0.0));
    }

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return grid_.size(); }
    /// Conductance of the face between (i, j) and (i+1, j).
    double x_face(std::size_t i, std::size_t j = 0) const { return x_faces_[j * (grid_.nx() - 1) + i]; }
    /// Conductance of the face between (i, j) and (i, j+1).
    double y_face(std::size_t i, std::size_t j) const { return y_faces_[j * grid_.nx() + i]; }
    std::span<const double> x_faces() const { return x_faces_; }
    std::span<const double> y_faces() const { return y_faces_; }

    /// out = A v
    void apply(std::span<const double> v, std::span<double> out) const {
        const std::size_t nx = grid_.nx(), ny = grid_.ny();
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i + 1 < nx; ++i) {
                const std::size_t p = j * nx + i, q = p + 1;
                const double flux = x_faces_[j * (nx - 1) + i] * (v[p] - v[q]);
                out[p] += flux;
                out[q] -= flux;
            }
        if (grid_.dim == 2)
            for (std::size_t j = 0; j + 1 < ny; ++j)
                for (std::size_t i = 0; i < nx; ++i) {
                    const std::size_t p = j * nx + i, q = p + nx;
                    const double flux = y_faces_[j * nx + i] * (v[p] - v[q]);
                    out[p] += flux;
                    out[q] -= flux;
                }
    }

    ScalarField apply(const ScalarField& v) const {
        ScalarField out(grid_);
        apply(v.values, out.values);
        return out;
    }

    /// The discrete div(kappa grad v) = -A v.
    ScalarField divergence(const ScalarField& v) const {
        ScalarField out = apply(v);
        for (double& x : out.values) x = -x;
        return out;
    }

    std::vector<double> diagonal() const {
        const std::size_t nx = grid_.nx(), ny = grid_.ny();
        std::vector<double> d(size(), 0.0);
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i + 1 < nx; ++i) {
                const double c = x_faces_[j * (nx - 1) + i];
                d[j * nx + i] += c;
                d[j * nx + i + 1] += c;
            }
        if (grid_.dim == 2)
            for (std::size_t j = 0; j + 1 < ny; ++j)
                for (std::size_t i = 0; i < nx; ++i) {
                    const double c = y_faces_[j * nx + i];
                    d[j * nx + i] += c;
                    d[(j + 1) * nx + i] += c;
                }
        return d;
    }

    /// Dense row-major copy, for tests and small oracles.
    std::vector<double> to_dense() const {
        const std::size_t n = size();
        std::vector<double> m(n * n, 0.0), e(n, 0.0), col(n);
        for (std::size_t c = 0; c < n; ++c) {
            e[c] = 1.0;
            apply(e, col);
            e[c] = 0.0;
            for (std::size_t r = 0; r < n; ++r) m[r * n + c] = col[r];
        }
        return m;
    }

private:
    Grid grid_;
    std::vector<double> x_faces_;
    std::vector<double> y_faces_;
};

/// Assembles A from the arithmetic mean of kappa(mu) at the two cells adjacent to each face.
inline DiffusionMatrix assemble_diffusion(const Grid& grid, const ScalarField& mu, const Mobility& mobility) {
    if (!(mu.grid == grid) || mu.size() != grid.size()) throw ShapeError("assemble_diffusion: mu is not on the grid");
    std::vector<double> kap(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(mu[k] >= 0.0)) {
            std::ostringstream os;
            os << "assemble_diffusion: mobility evaluated at negative mu = " << mu[k] << " in cell " << k;
            throw DomainError(os.str());
        }
        kap[k] = mobility(mu[k]);
    }
    const std::size_t nx = grid.nx(), ny = grid.ny();
    const double hx2 = grid.spacing(0) * grid.spacing(0);
    std::vector<double> xf((nx - 1) * ny);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i + 1 < nx; ++i)
            xf[j * (nx - 1) + i] = 0.5 * (kap[j * nx + i] + kap[j * nx + i + 1]) / hx2;
    std::vector<double> yf;
    if (grid.dim == 2) {
        const double hy2 = grid.spacing(1) * grid.spacing(1);
        yf.resize(nx * (ny - 1));
        for (std::size_t j = 0; j + 1 < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i)
                yf[j * nx + i] = 0.5 * (kap[j * nx + i] + kap[(j + 1) * nx + i]) / hy2;
    }
    return DiffusionMatrix(grid, std::move(xf), std::move(yf));
}

/// Space-time norms of a difference history sampled with uniform step tau.
struct NormTriple {
    double l2_Q = 0.0;    // sqrt(sum_n tau sum_i vol v^2)
    double linf_H = 0.0;  // max_n sqrt(sum_i vol v^2)
    double l1_Q = 0.0;    // sum_n tau sum_i vol |v|
};

inline NormTriple norms(std::span<const ScalarField> history, double tau) {
    NormTriple out;
    if (history.empty()) return out;
    const Grid& g = history.front().grid;
    const double vol = g.cell_volume();
    double l2 = 0.0;
    for (const auto& f : history) {
        if (!(f.grid == g) || f.size() != g.size()) throw ShapeError("norms: snapshots live on different grids");
        double sq = 0.0, ab = 0.0;
        for (double v : f.values) {
            sq += v * v;
            ab += std::abs(v);
        }
        l2 += tau * vol * sq;
        out.linf_H = std::max(out.linf_H, std::sqrt(vol * sq));
        out.l1_Q += tau * vol * ab;
    }
    out.l2_Q = std::sqrt(l2);
    return out;
}

}  // namespace phaseseg
