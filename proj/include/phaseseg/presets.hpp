#pragma once
// Reference configurations shared by the CLI defaults and the test suites.

#include "phaseseg/model.hpp"
#include "phaseseg/stepper.hpp"

namespace phaseseg::presets {

/// Logarithmic potential (c = 2), g = 1 - r^2/2, kappa(m) = 1 + 1/(1+m), box rho in [-0.98, 0.98].
inline ModelSpec default_model() {
    ModelSpec m;
    m.potential = make_logarithmic(2.0);
    m.coupling = default_concave_coupling();
    m.mobility = rational_mobility(1.0, 2.0);
    m.constants = default_constants(m.potential);
    return m;
}

/// Default model on 128 cells of [0, 1], tau = 1e-3, T = 0.5,
/// mu0 = 1 + cos(pi x)/2, rho0 = cos(pi x)/2.
inline RunConfig default_config() {
    RunConfig c;
    c.grid = Grid::line(128, 1.0);
    c.tau = 1e-3;
    c.t_final = 0.5;
    c.model = default_model();
    c.mu0 = Profile::cosine(1.0, 0.5, 1);
    c.rho0 = Profile::cosine(0.0, 0.5, 1);
    return c;
}

/**
 * Fully linear control: obstacle on [-1, 1] with pi(r) = -r, g = 0, kappa = 1.
 * mu solves the heat equation, rho the scalar ODE rho' = rho while it stays interior.
 */
inline ModelSpec linear_model() {
    ModelSpec m;
    m.potential = make_obstacle(-1.0, 1.0, [](double r) { return -r; }, 1.0);
    m.coupling = constant_coupling(0.0);
    m.mobility = constant_mobility(1.0);
    m.constants = default_constants(m.potential);
    return m;
}

inline RunConfig linear_config() {
    RunConfig c = default_config();
    c.model = linear_model();
    c.rho0 = Profile::constant(0.0);
    return c;
}

}  // namespace phaseseg::presets
