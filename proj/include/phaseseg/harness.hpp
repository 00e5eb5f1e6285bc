#pragma once
/**
 * @brief Solution-pair experiments that audit the stability estimates of the system.
 *
 * run_pair: two runs from perturbed initial data, compared in the norm triple
 *   ||mu1 - mu2||_{L2(Q)} + ||rho1 - rho2||_{Linf(H)} + ||xi1 - xi2||_{L1(Q)}
 * against ||mu0 diff||_H + ||rho0 diff||_H.
 * pointwise_estimate_check: the cellwise L1-type estimate with a constant computed from
 * the stored Lipschitz data.
 * self_convergence_study: Cauchy-type temporal convergence at tau, tau/2, tau/4, ...
 * invariant_audit: sign and range monitors over a trajectory.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "phaseseg/errors.hpp"
#include "phaseseg/grid.hpp"
#include "phaseseg/model.hpp"
#include "phaseseg/stepper.hpp"

namespace phaseseg {

/// Runs fn(0..count-1) on at most `workers` threads (0: one per task). Results must be
/// written to per-index slots, so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers == 0) workers = count;
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

enum class PerturbTarget { mu0, rho0, both };

inline const char* to_string(PerturbTarget t) {
    switch (t) {
        case PerturbTarget::mu0: return "mu0";
        case PerturbTarget::rho0: return "rho0";
        case PerturbTarget::both: return "both";
    }
    return "?";
}

/// Adds eps * shape to the targeted initial field(s); shape is a zero-mean unit profile.
struct Perturbation {
    PerturbTarget target = PerturbTarget::rho0;
    Profile shape = Profile::cosine(0.0, 1.0, 2);
    double eps = 1e-2;
};

struct PairExperiment {
    RunConfig base;
    Perturbation perturbation;
};

struct PerturbedConfig {
    RunConfig config;
    double eps_effective = 0.0;
    bool clamped = false;
};

/// The perturbed configuration, with eps reduced if needed so that mu0 >= 0 and
/// rho_min <= rho0 <= rho_max still hold.
inline PerturbedConfig perturbed_config(const RunConfig& base, const Perturbation& p) {
    if (!(p.eps >= 0.0)) throw InvalidParameter("perturbation amplitude must be >= 0");
    const ScalarField shape = p.shape.sample(base.grid);
    const ScalarField mu0 = base.initial_mu(), rho0 = base.initial_rho();
    const auto& k = base.model.constants;
    double eps_max = kInf;
    for (std::size_t c = 0; c < shape.size(); ++c) {
        const double s = shape[c];
        if (p.target != PerturbTarget::mu0) {
            if (s > 0.0) eps_max = std::min(eps_max, (k.rho_max - rho0[c]) / s);
            if (s < 0.0) eps_max = std::min(eps_max, (rho0[c] - k.rho_min) / -s);
        }
        if (p.target != PerturbTarget::rho0 && s < 0.0) eps_max = std::min(eps_max, mu0[c] / -s);
    }
    PerturbedConfig out;
    out.eps_effective = std::min(p.eps, std::max(0.0, eps_max));
    out.clamped = out.eps_effective < p.eps;
    out.config = base;
    ScalarField mu = mu0, rho = rho0;
    for (std::size_t c = 0; c < shape.size(); ++c) {
        if (p.target != PerturbTarget::rho0) mu[c] += out.eps_effective * shape[c];
        if (p.target != PerturbTarget::mu0) rho[c] += out.eps_effective * shape[c];
    }
    if (p.target != PerturbTarget::mu0) {
        // The eps_max division can round a cell past the bound by one ulp.
        for (double& v : rho.values) v = std::clamp(v, k.rho_min, k.rho_max);
    }
    if (p.target != PerturbTarget::rho0)
        for (double& v : mu.values) v = std::max(v, 0.0);
    out.config.mu0_field = std::move(mu);
    out.config.rho0_field = std::move(rho);
    return out;
}

/// Distances between two trajectories sampled on the same time grid with step tau.
struct TrajectoryDistance {
    double mu_l2_Q = 0.0;    // steps 1..N
    double rho_linf_H = 0.0; // steps 0..N
    double xi_l1_Q = 0.0;    // steps 1..N
    double total() const { return mu_l2_Q + rho_linf_H + xi_l1_Q; }
};

/// a[n], b[n] are matched states (n = 0..N).
inline TrajectoryDistance trajectory_distance(const std::vector<const State*>& a, const std::vector<const State*>& b,
                                              double tau) {
    if (a.size() != b.size() || a.empty()) throw ShapeError("trajectory_distance: mismatched trajectories");
    std::vector<ScalarField> dmu, drho, dxi;
    for (std::size_t n = 0; n < a.size(); ++n) {
        drho.push_back(a[n]->rho - b[n]->rho);
        if (n == 0) continue;
        dmu.push_back(a[n]->mu - b[n]->mu);
        dxi.push_back(a[n]->xi - b[n]->xi);
    }
    TrajectoryDistance d;
    d.mu_l2_Q = norms(dmu, tau).l2_Q;
    d.rho_linf_H = norms(drho, tau).linf_H;
    d.xi_l1_Q = norms(dxi, tau).l1_Q;
    return d;
}

inline std::vector<const State*> state_ptrs(const Trajectory& t, std::size_t stride = 1) {
    std::vector<const State*> out;
    for (std::size_t n = 0; n < t.states.size(); n += stride) out.push_back(&t.states[n]);
    return out;
}

enum class PairVerdict { ratio, identical_data, uniqueness_violation };

inline const char* to_string(PairVerdict v) {
    switch (v) {
        case PairVerdict::ratio: return "ratio";
        case PairVerdict::identical_data: return "identical-data";
        case PairVerdict::uniqueness_violation: return "uniqueness-violation";
    }
    return "?";
}

struct PairReport {
    double eps = 0.0;
    double eps_effective = 0.0;
    bool clamped = false;
    TrajectoryDistance distance;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    PairVerdict verdict = PairVerdict::ratio;
};

struct PairRun {
    RunConfig first;
    RunConfig second;
    Trajectory a;
    Trajectory b;
    double eps_effective = 0.0;
    bool clamped = false;
};

inline constexpr double kRhsFloor = 1e-14;
inline constexpr double kIdenticalLhsFloor = 1e-9;

/// Both runs of a pair at full output cadence; they may execute concurrently.
inline PairRun run_pair_trajectories(const PairExperiment& e, std::size_t workers = 1) {
    PairRun pr;
    pr.first = e.base;
    pr.first.output_every = 1;
    const PerturbedConfig pc = perturbed_config(pr.first, e.perturbation);
    pr.second = pc.config;
    pr.eps_effective = pc.eps_effective;
    pr.clamped = pc.clamped;
    validate_config(pr.first);
    parallel_for(2, workers, [&](std::size_t i) {
        if (i == 0)
            pr.a = run(pr.first);
        else
            pr.b = run(pr.second);
    });
    return pr;
}

/// Norm-triple comparison of two already computed full-cadence trajectories.
inline PairReport compare_pair(const Trajectory& a, const Trajectory& b) {
    if (a.tau != b.tau || a.states.size() != b.states.size())
        throw ShapeError("compare_pair: trajectories differ in time step or length");
    if (a.states.size() != a.reports.size() + 1) throw ShapeError("compare_pair: full output cadence required");
    PairReport r;
    r.distance = trajectory_distance(state_ptrs(a), state_ptrs(b), a.tau);
    r.lhs = r.distance.total();
    const State& a0 = a.states.front();
    const State& b0 = b.states.front();
    r.rhs = norm_h(a0.mu - b0.mu) + norm_h(a0.rho - b0.rho);
    const double scale = std::max(1.0, norm_h(a0.mu) + norm_h(a0.rho));
    if (r.rhs <= kRhsFloor * scale) {
        r.verdict = r.lhs <= kIdenticalLhsFloor ? PairVerdict::identical_data : PairVerdict::uniqueness_violation;
        r.ratio = 0.0;
    } else {
        r.ratio = r.lhs / r.rhs;
    }
    return r;
}

inline PairReport run_pair(const PairExperiment& e, std::size_t workers = 1) {
    const PairRun pr = run_pair_trajectories(e, workers);
    PairReport r = compare_pair(pr.a, pr.b);
    r.eps = e.perturbation.eps;
    r.eps_effective = pr.eps_effective;
    r.clamped = pr.clamped;
    return r;
}

struct PointwiseRow {
    double time = 0.0;
    std::size_t worst_cell = 0;
    double L = 0.0;
    double R = 0.0;
    double ratio = 0.0;
};

struct PointwiseReport {
    std::vector<PointwiseRow> rows;  // one per time level
    double c_struct = 0.0;
    double worst_ratio = 0.0;
    bool accumulation_monotone = true;
    double worst_one_step_excess = -kInf;  // max over steps/cells of lhs - rhs of the one-step bound
    bool one_step_holds = true;
    bool passed = false;
};

/// 3 max(1, sup|g'|, L_{g'} sup mu1 + L_pi).
inline double structural_constant(const ModelSpec& m, double sup_mu1) {
    return 3.0 * std::max({1.0, sup_abs_g_prime(m.coupling),
                           m.coupling.g_prime_lipschitz * sup_mu1 + m.potential.pi_lipschitz});
}

/**
 * Cellwise audit, with d = (first - second):
 *   L(n) = |d rho^n| + sum_{k=1..n} tau (|d (rho^k - rho^{k-1}) / tau| + |d xi^k|)
 *   R(n) = |d rho^0| + sum_{k=0..n-1} tau (|d mu^k| + (1 + mu1^k) |d rho^k|)
 * PASS iff max L/R (over cells with R above the floor) <= C_struct (1 + slack), the
 * accumulated parts are nondecreasing, and every step satisfies the one-step bound
 *   |d rho^{k+1}| + tau |d xi^{k+1}| <= |d rho^k| + tau |d w^k| + step_slack,
 * w = mu g'(rho) - pi(rho).
 */
inline PointwiseReport pointwise_estimate_check(const Trajectory& first, const Trajectory& second, const ModelSpec& m,
                                                double slack = 1e-6, double step_slack = 1e-11) {
    if (first.tau != second.tau || first.states.size() != second.states.size() || first.states.empty())
        throw ShapeError("pointwise_estimate_check: trajectories differ in time step or length");
    if (first.states.size() != first.reports.size() + 1)
        throw ShapeError("pointwise_estimate_check: full output cadence required");
    const Grid& g = first.states.front().mu.grid;
    if (!(second.states.front().mu.grid == g)) throw ShapeError("pointwise_estimate_check: grids differ");

    const double tau = first.tau;
    const std::size_t cells = g.size();
    double sup_mu1 = 0.0;
    for (const auto& s : first.states) sup_mu1 = std::max(sup_mu1, s.mu.max());

    PointwiseReport rep;
    rep.c_struct = structural_constant(m, sup_mu1);
    auto w = [&m](double mu, double rho) { return mu * m.coupling.g_prime(rho) - m.potential.pi(rho); };

    std::vector<double> l_acc(cells, 0.0), r_acc(cells, 0.0), d0(cells);
    double floor = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        d0[c] = std::abs(first.states[0].rho[c] - second.states[0].rho[c]);
        floor = std::max(floor, std::abs(first.states[0].rho[c]));
    }
    floor = kRhsFloor * std::max(1.0, floor);

    for (std::size_t n = 0; n < first.states.size(); ++n) {
        const State& a = first.states[n];
        const State& b = second.states[n];
        if (n > 0) {
            const State& ap = first.states[n - 1];
            const State& bp = second.states[n - 1];
            for (std::size_t c = 0; c < cells; ++c) {
                const double drho_prev = ap.rho[c] - bp.rho[c];
                const double drho = a.rho[c] - b.rho[c];
                const double dxi = a.xi[c] - b.xi[c];
                const double dl = std::abs(drho - drho_prev) + tau * std::abs(dxi);
                const double dr = tau * (std::abs(ap.mu[c] - bp.mu[c]) + (1.0 + ap.mu[c]) * std::abs(drho_prev));
                if (dl < 0.0 || dr < 0.0) rep.accumulation_monotone = false;
                l_acc[c] += dl;
                r_acc[c] += dr;

                const double lhs = std::abs(drho) + tau * std::abs(dxi);
                const double rhs = std::abs(drho_prev) + tau * std::abs(w(ap.mu[c], ap.rho[c]) - w(bp.mu[c], bp.rho[c]));
                rep.worst_one_step_excess = std::max(rep.worst_one_step_excess, lhs - rhs);
                if (lhs > rhs + step_slack) rep.one_step_holds = false;
            }
        }
        PointwiseRow row;
        row.time = a.time;
        for (std::size_t c = 0; c < cells; ++c) {
            const double L = std::abs(a.rho[c] - b.rho[c]) + l_acc[c];
            const double R = d0[c] + r_acc[c];
            if (R <= floor) continue;
            const double ratio = L / R;
            if (ratio > row.ratio || (row.R == 0.0 && row.L == 0.0)) {
                row.ratio = ratio;
                row.worst_cell = c;
                row.L = L;
                row.R = R;
            }
        }
        rep.worst_ratio = std::max(rep.worst_ratio, row.ratio);
        rep.rows.push_back(row);
    }
    rep.passed = rep.worst_ratio <= rep.c_struct * (1.0 + slack) && rep.accumulation_monotone && rep.one_step_holds;
    return rep;
}

struct StudyRow {
    double eps = 0.0;
    double eps_effective = 0.0;
    bool clamped = false;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    PairVerdict verdict = PairVerdict::ratio;
    double pointwise_worst_ratio = 0.0;
    double pointwise_c_struct = 0.0;
};

struct StudyReport {
    std::vector<StudyRow> rows;  // in the order of the eps list
    double spread = 0.0;         // max ratio / min ratio
    bool growth_trend = false;
    bool all_finite = true;
    double pointwise_worst_ratio = 0.0;
    bool passed = false;
};

inline constexpr double kMaxRatioSpread = 4.0;

/**
 * True when the ratios grow at every decrease of eps without the increments shrinking,
 * i.e. no sign of levelling off. Relative changes below 1e-6 count as flat.
 */
inline bool has_growth_trend(const std::vector<double>& ratios_by_decreasing_eps) {
    const auto& r = ratios_by_decreasing_eps;
    if (r.size() < 2) return false;
    std::vector<double> inc;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        if (!(r[i + 1] > r[i] * (1.0 + 1e-6))) return false;
        inc.push_back(r[i + 1] - r[i]);
    }
    return inc.back() >= 0.5 * inc.front();
}

inline StudyReport continuous_dependence_study(const RunConfig& base, const Perturbation& shape,
                                               const std::vector<double>& eps_list, std::size_t workers = 0) {
    if (eps_list.empty()) throw InvalidParameter("continuous_dependence_study: empty eps list");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0)) throw InvalidParameter("continuous_dependence_study: eps values must be positive");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
            throw InvalidParameter("continuous_dependence_study: eps list must be decreasing");
    }
    validate_config(base);

    RunConfig ref_cfg = base;
    ref_cfg.output_every = 1;
    const Trajectory reference = run(ref_cfg);

    StudyReport rep;
    rep.rows.resize(eps_list.size());
    parallel_for(eps_list.size(), workers, [&](std::size_t i) {
        Perturbation p = shape;
        p.eps = eps_list[i];
        const PerturbedConfig pc = perturbed_config(ref_cfg, p);
        const Trajectory other = run(pc.config);
        const PairReport pr = compare_pair(reference, other);
        const PointwiseReport pw = pointwise_estimate_check(reference, other, base.model);
        StudyRow& row = rep.rows[i];
        row.eps = p.eps;
        row.eps_effective = pc.eps_effective;
        row.clamped = pc.clamped;
        row.lhs = pr.lhs;
        row.rhs = pr.rhs;
        row.ratio = pr.ratio;
        row.verdict = pr.verdict;
        row.pointwise_worst_ratio = pw.worst_ratio;
        row.pointwise_c_struct = pw.c_struct;
    });

    double lo = kInf, hi = 0.0;
    std::vector<double> ratios;
    for (const auto& row : rep.rows) {
        if (row.verdict != PairVerdict::ratio || !std::isfinite(row.ratio) || !(row.ratio > 0.0)) rep.all_finite = false;
        lo = std::min(lo, row.ratio);
        hi = std::max(hi, row.ratio);
        ratios.push_back(row.ratio);
        rep.pointwise_worst_ratio = std::max(rep.pointwise_worst_ratio, row.pointwise_worst_ratio);
    }
    rep.spread = lo > 0.0 ? hi / lo : kInf;
    rep.growth_trend = has_growth_trend(ratios);
    rep.passed = rep.all_finite && rep.spread <= kMaxRatioSpread && !rep.growth_trend;
    return rep;
}

struct ConvergenceRow {
    int level = 0;  // distance between level and level + 1
    double tau = 0.0;
    double distance = 0.0;
    double observed_order = std::numeric_limits<double>::quiet_NaN();
};

enum class ConvergenceVerdict { pass, fail, degenerate_exact };

inline const char* to_string(ConvergenceVerdict v) {
    switch (v) {
        case ConvergenceVerdict::pass: return "PASS";
        case ConvergenceVerdict::fail: return "FAIL";
        case ConvergenceVerdict::degenerate_exact: return "degenerate-exact";
    }
    return "?";
}

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    double finest_order = std::numeric_limits<double>::quiet_NaN();
    ConvergenceVerdict verdict = ConvergenceVerdict::fail;
};

inline constexpr double kOrderLow = 0.7;
inline constexpr double kOrderHigh = 1.3;

/// Runs at tau, tau/2, ..., tau/2^(levels-1) and measures successive distances on the
/// coarser level's time grid; observed order log2(d_k / d_{k+1}).
inline ConvergenceReport self_convergence_study(const RunConfig& base, int levels, std::size_t workers = 0) {
    if (levels < 3) throw InvalidParameter("self_convergence_study: levels >= 3 required");
    validate_config(base);
    std::vector<Trajectory> runs(static_cast<std::size_t>(levels));
    parallel_for(runs.size(), workers, [&](std::size_t k) {
        RunConfig c = base;
        c.tau = base.tau / std::ldexp(1.0, static_cast<int>(k));
        c.output_every = 1;
        runs[k] = run(c);
    });
    ConvergenceReport rep;
    bool all_zero = true;
    for (int k = 0; k + 1 < levels; ++k) {
        const auto& coarse = runs[static_cast<std::size_t>(k)];
        const auto& fine = runs[static_cast<std::size_t>(k) + 1];
        ConvergenceRow row;
        row.level = k;
        row.tau = coarse.tau;
        row.distance = trajectory_distance(state_ptrs(coarse), state_ptrs(fine, 2), coarse.tau).total();
        if (row.distance != 0.0) all_zero = false;
        if (k > 0) {
            const double prev = rep.rows.back().distance;
            if (prev > 0.0 && row.distance > 0.0) row.observed_order = std::log2(prev / row.distance);
        }
        rep.rows.push_back(row);
    }
    rep.finest_order = rep.rows.back().observed_order;
    if (all_zero)
        rep.verdict = ConvergenceVerdict::degenerate_exact;
    else
        rep.verdict = rep.finest_order >= kOrderLow && rep.finest_order <= kOrderHigh ? ConvergenceVerdict::pass
                                                                                      : ConvergenceVerdict::fail;
    return rep;
}

struct AuditReport {
    bool hard_passed = true;
    double min_mu = kInf;
    double mu_floor = 0.0;
    bool rho_in_domain = true;
    std::string failure;  // first hard failure, naming cell and time
    double rho_box_margin = kInf;  // min over cells/times of distance inside [rho_min, rho_max]
    double xi_box_margin = kInf;   // same for [xi_min, xi_max]
};

/// Hard: mu >= -1e-10 scale and rho in the closure of D(beta) (interior for the logarithmic
/// potential). Soft: margins of rho and xi inside the compatibility box.
inline AuditReport invariant_audit(const std::vector<State>& states, const ModelSpec& m) {
    AuditReport rep;
    if (states.empty()) return rep;
    const double scale = std::max(1.0, states.front().mu.max());
    rep.mu_floor = -1e-10 * scale;
    const auto& k = m.constants;
    const bool strict = m.potential.kind == PotentialKind::logarithmic;
    for (const auto& s : states) {
        for (std::size_t c = 0; c < s.mu.size(); ++c) {
            const double mu = s.mu[c], rho = s.rho[c], xi = s.xi[c];
            rep.min_mu = std::min(rep.min_mu, mu);
            if (rep.hard_passed && !(mu >= rep.mu_floor)) {
                rep.hard_passed = false;
                std::ostringstream os;
                os << "mu = " << mu << " below floor in cell " << c << " at time " << s.time;
                rep.failure = os.str();
            }
            const bool inside = strict ? m.potential.in_domain(rho) : m.potential.beta_domain.closure_contains(rho);
            if (!inside) {
                rep.rho_in_domain = false;
                if (rep.hard_passed) {
                    std::ostringstream os;
                    os << "rho = " << rho << " outside D(beta) in cell " << c << " at time " << s.time;
                    rep.failure = os.str();
                }
                rep.hard_passed = false;
            }
            rep.rho_box_margin = std::min({rep.rho_box_margin, rho - k.rho_min, k.rho_max - rho});
            rep.xi_box_margin = std::min({rep.xi_box_margin, xi - k.xi_min, k.xi_max - xi});
        }
    }
    return rep;
}

}  // namespace phaseseg
