#pragma once
/**
 * @brief Semi-implicit time stepping of (mu, rho, xi) with u = (1 + 2 g(rho)) mu.
 *
 * One step of size tau:
 *   1. rho-update, implicit in beta and explicit in mu, pi:
 *        rho' = (I + tau beta)^{-1}(rho + tau (mu g'(rho) - pi(rho))),  xi' = selection.
 *   2. mu-update, implicit Euler of d_t u - mu g'(rho) d_t rho - div(kappa grad mu) = 0 with
 *      lagged mobility kappa(mu):
 *        [(1 + 2 g(rho')) - g'(rho') (rho' - rho)] mu' / tau + A(mu) mu' = u / tau.
 * Summing the mu-update over cells telescopes the diffusion term, so the discrete balance
 *   sum vol (u' - u) = sum vol mu' g'(rho') (rho' - rho)
 * holds up to the linear-solver residual.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phaseseg/errors.hpp"
#include "phaseseg/grid.hpp"
#include "phaseseg/linsolve.hpp"
#include "phaseseg/model.hpp"
#include "phaseseg/prox.hpp"

namespace phaseseg {

enum class ProfileKind { constant, cosine, tanh };

/**
 * Deterministic analytic initial profile evaluated at cell centers.
 *   constant: mean
 *   cosine:   mean + amplitude cos(mode pi x / Lx) cos(mode_y pi y / Ly)
 *   tanh:     mean + amplitude tanh((x - center Lx) / width)
 * Cosine modes have zero normal derivative at the boundary.
 */
struct Profile {
    ProfileKind kind = ProfileKind::constant;
    double mean = 0.0;
    double amplitude = 0.0;
    int mode = 1;
    int mode_y = 0;
    double center = 0.5;
    double width = 0.1;

    static Profile constant(double v) { return {ProfileKind::constant, v, 0.0}; }
    static Profile cosine(double mean, double amplitude, int mode = 1, int mode_y = 0) {
        return {ProfileKind::cosine, mean, amplitude, mode, mode_y};
    }

    double at(double x, double y, const Grid& g) const {
        switch (kind) {
            case ProfileKind::constant: return mean;
            case ProfileKind::cosine: {
                double v = std::cos(mode * std::numbers::pi * x / g.lengths[0]);
                if (g.dim == 2) v *= std::cos(mode_y * std::numbers::pi * y / g.lengths[1]);
                return mean + amplitude * v;
            }
            case ProfileKind::tanh: return mean + amplitude * std::tanh((x - center * g.lengths[0]) / width);
        }
        return mean;
    }

    ScalarField sample(const Grid& g) const {
        ScalarField f(g);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const auto c = g.center(k);
            f[k] = at(c[0], c[1], g);
        }
        return f;
    }
};

enum class LinearSolverChoice { automatic, direct, cg };

struct SolverOptions {
    double linear_tol = 1e-10;
    int max_cg_iterations = 10000;
    double prox_tol = 0.0;  // <= 0: 1e-12 max(1, |r|) per cell
    LinearSolverChoice linear = LinearSolverChoice::automatic;
};

struct RunConfig {
    Grid grid;
    double tau = 1e-3;
    double t_final = 0.0;
    ModelSpec model;
    Profile mu0 = Profile::constant(0.0);
    Profile rho0 = Profile::constant(0.0);
    // Explicit initial fields take precedence over the profiles.
    std::optional<ScalarField> mu0_field;
    std::optional<ScalarField> rho0_field;
    SolverOptions solver;
    std::size_t output_every = 1;

    ScalarField initial_mu() const { return mu0_field ? *mu0_field : mu0.sample(grid); }
    ScalarField initial_rho() const { return rho0_field ? *rho0_field : rho0.sample(grid); }

    std::size_t step_count() const {
        if (t_final <= 0.0) return 0;
        const double n = std::round(t_final / tau);
        if (std::abs(n * tau - t_final) > 1e-9 * std::max(1.0, t_final))
            throw ValidationError("time.final must be an integer multiple of time.tau");
        return static_cast<std::size_t>(n);
    }
};

struct State {
    double time = 0.0;
    ScalarField mu;
    ScalarField rho;
    ScalarField xi;
    ScalarField u;
};

struct StepReport {
    std::size_t step = 0;
    double time = 0.0;
    double balance_residual = 0.0;
    double u_norm = 0.0;  // ||u^n||_H of the state the step started from
    double min_mu = 0.0;
    double rho_min = 0.0, rho_max = 0.0;
    double xi_min = 0.0, xi_max = 0.0;
    int cg_iterations = 0;
    int prox_max_iterations = 0;
    double safeguard_margin = 0.0;
};

/// u = (1 + 2 g(rho)) mu, cellwise.
inline ScalarField weighted_mu(const Coupling& cp, const ScalarField& rho, const ScalarField& mu) {
    ScalarField u(mu.grid);
    for (std::size_t k = 0; k < mu.size(); ++k) u[k] = (1.0 + 2.0 * cp.g(rho[k])) * mu[k];
    return u;
}

/// Checks tau, grid, solver choice and every model condition; throws ValidationError.
inline void validate_config(const RunConfig& cfg, std::size_t samples = 1000) {
    cfg.grid.check();
    if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) throw ValidationError("time.tau must be positive");
    if (!(cfg.t_final >= 0.0)) throw ValidationError("time.final must be >= 0");
    (void)cfg.step_count();
    if (cfg.output_every < 1) throw ValidationError("output.every must be >= 1");
    if (cfg.solver.linear == LinearSolverChoice::direct && cfg.grid.dim != 1)
        throw ValidationError("solver.linear = direct requires a 1D grid");
    ValidationReport rep;
    try {
        rep = validate_model(cfg.model, samples);
    } catch (const DomainError& e) {
        throw ValidationError(e.what());
    }
    if (!rep.all_passed()) {
        std::ostringstream os;
        os << "model validation failed:";
        for (const auto& c : rep.checks)
            if (!c.passed) os << ' ' << c.name << " (margin " << c.worst_margin << ")";
        throw ValidationError(os.str());
    }
}

inline State init_state(const RunConfig& cfg) {
    const ModelSpec& m = cfg.model;
    State s;
    s.time = 0.0;
    s.mu = cfg.initial_mu();
    s.rho = cfg.initial_rho();
    if (!(s.mu.grid == cfg.grid) || !(s.rho.grid == cfg.grid))
        throw ShapeError("init_state: initial fields are not on the configured grid");
    for (std::size_t k = 0; k < cfg.grid.size(); ++k) {
        std::ostringstream os;
        if (!(s.mu[k] >= 0.0) || !std::isfinite(s.mu[k])) {
            os << "initial data: mu0 >= 0 and bounded violated in cell " << k << " (mu0 = " << s.mu[k] << ")";
            throw ValidationError(os.str());
        }
        if (!m.potential.in_domain(s.rho[k])) {
            os << "initial data: rho0 outside D(beta) in cell " << k << " (rho0 = " << s.rho[k] << ")";
            throw ValidationError(os.str());
        }
        if (s.rho[k] < m.constants.rho_min || s.rho[k] > m.constants.rho_max) {
            os << "initial data: rho_min <= rho0 <= rho_max violated in cell " << k << " (rho0 = " << s.rho[k]
               << ")";
            throw ValidationError(os.str());
        }
    }
    s.xi = ScalarField(cfg.grid);
    for (std::size_t k = 0; k < cfg.grid.size(); ++k) {
        const double r = s.rho[k];
        if (m.potential.single_valued()) {
            s.xi[k] = m.potential.beta(r);
        } else {
            // Active cells take the selection that keeps rho at rest.
            const double w = s.mu[k] * m.coupling.g_prime(r) - m.potential.pi(r);
            s.xi[k] = m.potential.project_onto_beta(r, w);
        }
    }
    s.u = weighted_mu(m.coupling, s.rho, s.mu);
    return s;
}

struct RhoUpdate {
    ScalarField rho;
    ScalarField xi;
    int prox_max_iterations = 0;
};

/// rho' = resolve(rho + tau (mu g'(rho) - pi(rho))), xi' = (r - rho') / tau.
inline RhoUpdate step_rho(const State& s, const ModelSpec& m, double tau, double prox_tol = 0.0) {
    ScalarField r(s.rho.grid);
    for (std::size_t k = 0; k < r.size(); ++k) {
        const double rho = s.rho[k];
        r[k] = rho + tau * (s.mu[k] * m.coupling.g_prime(rho) - m.potential.pi(rho));
    }
    ProxFieldResult pr = resolve_field(m.potential, tau, r, prox_tol);
    return {std::move(pr.x), std::move(pr.xi), pr.max_iterations};
}

struct MuUpdate {
    ScalarField mu;
    int cg_iterations = 0;
    double safeguard_margin = 0.0;
};

/// The linear mu-system of one step, without solving it.
inline SpdSystem mu_system(const State& s, const ScalarField& rho_new, const ModelSpec& m, double tau,
                           const SolverOptions& opt, double* safeguard_margin = nullptr) {
    const Grid& g = s.mu.grid;
    std::vector<double> shift(g.size());
    double margin = kInf;
    std::size_t worst = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double rn = rho_new[k];
        const double coef = 1.0 + 2.0 * m.coupling.g(rn) - m.coupling.g_prime(rn) * (rn - s.rho[k]);
        if (coef < margin) {
            margin = coef;
            worst = k;
        }
        shift[k] = coef / tau;
    }
    if (!(margin > 0.0)) {
        std::ostringstream os;
        os << "mu-update diagonal safeguard violated in cell " << worst << " (margin " << margin
           << "); reduce time.tau";
        throw StepSizeError(os.str(), worst, margin);
    }
    if (safeguard_margin) *safeguard_margin = margin;
    ScalarField rhs(g);
    for (std::size_t k = 0; k < g.size(); ++k) rhs[k] = s.u[k] / tau;
    return SpdSystem{assemble_diffusion(g, s.mu, m.mobility), std::move(shift), std::move(rhs), opt.linear_tol,
                     opt.max_cg_iterations};
}

inline MuUpdate step_mu(const State& s, const ScalarField& rho_new, const ModelSpec& m, double tau,
                        const SolverOptions& opt) {
    MuUpdate out;
    const SpdSystem sys = mu_system(s, rho_new, m, tau, opt, &out.safeguard_margin);
    const bool direct = opt.linear == LinearSolverChoice::direct ||
                        (opt.linear == LinearSolverChoice::automatic && s.mu.grid.dim == 1);
    if (direct) {
        out.mu = solve_tridiagonal(sys);
    } else {
        CgSolution sol = solve_cg(sys);
        out.mu = std::move(sol.x);
        out.cg_iterations = sol.iterations;
    }
    return out;
}

/// |sum vol (u' - u) - sum vol mu' g'(rho') (rho' - rho)|
inline double balance_residual(const State& before, const State& after, const Coupling& cp) {
    double s = 0.0;
    for (std::size_t k = 0; k < before.u.size(); ++k) {
        const double drho = after.rho[k] - before.rho[k];
        s += (after.u[k] - before.u[k]) - after.mu[k] * cp.g_prime(after.rho[k]) * drho;
    }
    return std::abs(s * before.u.grid.cell_volume());
}

inline std::pair<State, StepReport> step(const State& s, const RunConfig& cfg) {
    const ModelSpec& m = cfg.model;
    RhoUpdate ru = step_rho(s, m, cfg.tau, cfg.solver.prox_tol);
    MuUpdate mu = step_mu(s, ru.rho, m, cfg.tau, cfg.solver);

    State next;
    next.rho = std::move(ru.rho);
    next.xi = std::move(ru.xi);
    next.mu = std::move(mu.mu);
    next.u = weighted_mu(m.coupling, next.rho, next.mu);

    StepReport rep;
    rep.balance_residual = balance_residual(s, next, m.coupling);
    rep.u_norm = norm_h(s.u);
    rep.min_mu = next.mu.min();
    rep.rho_min = next.rho.min();
    rep.rho_max = next.rho.max();
    rep.xi_min = next.xi.min();
    rep.xi_max = next.xi.max();
    rep.cg_iterations = mu.cg_iterations;
    rep.prox_max_iterations = ru.prox_max_iterations;
    rep.safeguard_margin = mu.safeguard_margin;
    return {std::move(next), rep};
}

struct Trajectory {
    double tau = 0.0;
    std::vector<State> states;        // at output cadence, always including t = 0 and the final time
    std::vector<StepReport> reports;  // one per step
};

/// Called with each state kept at the output cadence; report is null for the initial state.
using StepObserver = std::function<void(const State&, const StepReport*)>;
/// Called once per step, regardless of the output cadence.
using ReportObserver = std::function<void(const StepReport&)>;

inline Trajectory run(const RunConfig& cfg, const StepObserver& observer = {}, const ReportObserver& on_report = {}) {
    validate_config(cfg);
    const std::size_t n_steps = cfg.step_count();
    Trajectory traj;
    traj.tau = cfg.tau;
    State s = init_state(cfg);
    traj.states.push_back(s);
    if (observer) observer(s, nullptr);
    for (std::size_t n = 1; n <= n_steps; ++n) {
        auto [next, rep] = step(s, cfg);
        next.time = static_cast<double>(n) * cfg.tau;
        rep.step = n;
        rep.time = next.time;
        traj.reports.push_back(rep);
        if (on_report) on_report(rep);
        s = std::move(next);
        if (n % cfg.output_every == 0 || n == n_steps) {
            traj.states.push_back(s);
            if (observer) observer(s, &traj.reports.back());
        }
    }
    return traj;
}

}  // namespace phaseseg
