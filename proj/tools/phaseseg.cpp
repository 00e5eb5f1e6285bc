// phaseseg: command-line driver for simulations, stability studies and model checks.
//
// Exit codes: 0 success / PASS, 1 verdict FAIL or numerical failure, 2 usage or config error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "phaseseg/config.hpp"
#include "phaseseg/harness.hpp"
#include "phaseseg/io.hpp"
#include "phaseseg/kirchhoff.hpp"
#include "phaseseg/prox.hpp"
#include "phaseseg/stepper.hpp"

namespace fs = std::filesystem;
using namespace phaseseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config_path;
    std::string out;
    // table commands
    double tau = 0.0;
    double from = -3.0, to = 3.0;
    double m_max = 10.0;
    int count = 61;
    int panels = 8;
};

struct Loaded {
    ConfigDocument doc;
    ExperimentConfig cfg;
};

Loaded load(const std::string& path, bool validate = true) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    Loaded l;
    l.doc = ConfigDocument::parse(ss.str());
    l.cfg = build_config(l.doc, validate);
    return l;
}

std::size_t worker_cap() {
    const char* env = std::getenv("PHASESEG_THREADS");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw UsageError("PHASESEG_THREADS must be a positive integer");
    return static_cast<std::size_t>(v);
}

fs::path require_out(const Options& o) {
    if (o.out.empty()) throw UsageError("--out <dir> is required for this command");
    fs::create_directories(o.out);
    return o.out;
}

/// Tracks emitted files for the manifest and writes it on every exit path.
class Session {
public:
    Session(std::string command, const Options& o) : command_(std::move(command)), opts_(o) {}

    void attach(const fs::path& dir, const std::string& hash) {
        dir_ = dir;
        hash_ = hash;
    }
    void emitted(const std::string& name) { files_.push_back(name); }

    void finish(const std::string& status) const {
        if (!dir_) return;
        try {
            write_manifest(*dir_, Manifest{command_, opts_.config_path, hash_, status, files_});
        } catch (const std::exception& e) {
            std::cerr << "warning: manifest not written: " << e.what() << '\n';
        }
    }

private:
    std::string command_;
    const Options& opts_;
    std::optional<fs::path> dir_;
    std::string hash_;
    std::vector<std::string> files_;
};

const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

std::string snapshot_name(const char* field, std::size_t step) {
    std::ostringstream os;
    os << "snapshots/" << field << '_' << std::setw(6) << std::setfill('0') << step << ".txt";
    return os.str();
}

int cmd_simulate(const Options& o, Session& session) {
    const Loaded l = load(o.config_path);
    const fs::path dir = require_out(o);
    session.attach(dir, l.doc.hash_hex());
    const RunConfig& cfg = l.cfg.run;

    OutputFile steps(dir, "steps.csv");
    CsvWriter csv(steps.stream(), steps_columns());
    bool balance_ok = true;
    double worst_balance = 0.0;
    auto on_state = [&](const State& s, const StepReport*) {
        const auto step = static_cast<std::size_t>(std::llround(s.time / cfg.tau));
        const std::pair<const char*, const ScalarField*> fields[] = {{"mu", &s.mu}, {"rho", &s.rho}, {"xi", &s.xi}};
        for (const auto& [name, f] : fields) {
            const std::string file = snapshot_name(name, step);
            OutputFile out(dir, file);
            write_snapshot(out.stream(), *f, s.time);
            out.commit();
            session.emitted(file);
        }
    };
    auto on_report = [&](const StepReport& r) {
        write_step_row(csv, r);
        const double rel = r.u_norm > 0.0 ? r.balance_residual / r.u_norm : r.balance_residual;
        worst_balance = std::max(worst_balance, rel);
        if (!(r.balance_residual <= 1e-8 * r.u_norm || r.balance_residual == 0.0)) balance_ok = false;
    };
    const Trajectory t = run(cfg, on_state, on_report);
    steps.commit();
    session.emitted("steps.csv");

    const AuditReport audit = invariant_audit(t.states, cfg.model);
    std::cout << "steps: " << t.reports.size() << ", final time " << format_double(t.states.back().time) << '\n';
    std::cout << "balance: worst residual / ||u|| = " << format_double(worst_balance) << "  " << verdict(balance_ok)
              << '\n';
    std::cout << "invariants: min mu = " << format_double(audit.min_mu)
              << ", rho box margin = " << format_double(audit.rho_box_margin)
              << ", xi box margin = " << format_double(audit.xi_box_margin) << "  " << verdict(audit.hard_passed)
              << '\n';
    if (!audit.hard_passed) std::cout << "  " << audit.failure << '\n';
    const bool pass = balance_ok && audit.hard_passed;
    session.finish(verdict(pass));
    return pass ? kExitOk : kExitFail;
}

int cmd_cdep(const Options& o, Session& session) {
    const Loaded l = load(o.config_path);
    const fs::path dir = require_out(o);
    session.attach(dir, l.doc.hash_hex());
    const StudyReport rep =
        continuous_dependence_study(l.cfg.run, l.cfg.study.perturbation, l.cfg.study.eps, worker_cap());
    OutputFile f(dir, "study.csv");
    write_study_csv(f.stream(), rep);
    f.commit();
    session.emitted("study.csv");
    std::cout << "eps,lhs,rhs,ratio\n";
    for (const auto& r : rep.rows)
        std::cout << format_double(r.eps) << ',' << format_double(r.lhs) << ',' << format_double(r.rhs) << ','
                  << format_double(r.ratio) << (r.clamped ? "  (eps clamped)" : "") << '\n';
    std::cout << "spread = " << format_double(rep.spread) << ", growth trend = " << (rep.growth_trend ? "yes" : "no")
              << ", pointwise worst ratio = " << format_double(rep.pointwise_worst_ratio) << "  "
              << verdict(rep.passed) << '\n';
    session.finish(verdict(rep.passed));
    return rep.passed ? kExitOk : kExitFail;
}

int cmd_pointwise(const Options& o, Session& session) {
    const Loaded l = load(o.config_path);
    const fs::path dir = require_out(o);
    session.attach(dir, l.doc.hash_hex());
    PairExperiment e{l.cfg.run, l.cfg.study.perturbation};
    e.perturbation.eps = l.cfg.study.pointwise_eps;
    const PairRun pr = run_pair_trajectories(e, worker_cap());
    const PointwiseReport rep = pointwise_estimate_check(pr.a, pr.b, l.cfg.run.model);
    OutputFile f(dir, "pointwise.csv");
    write_pointwise_csv(f.stream(), rep);
    f.commit();
    session.emitted("pointwise.csv");
    std::cout << "eps = " << format_double(pr.eps_effective) << (pr.clamped ? " (clamped)" : "") << '\n';
    std::cout << "worst L/R = " << format_double(rep.worst_ratio) << ", C_struct = " << format_double(rep.c_struct)
              << '\n';
    std::cout << "one-step bound: worst excess = " << format_double(rep.worst_one_step_excess) << "  "
              << verdict(rep.one_step_holds) << '\n';
    std::cout << verdict(rep.passed) << '\n';
    session.finish(verdict(rep.passed));
    return rep.passed ? kExitOk : kExitFail;
}

int cmd_converge(const Options& o, Session& session) {
    const Loaded l = load(o.config_path);
    const fs::path dir = require_out(o);
    session.attach(dir, l.doc.hash_hex());
    const ConvergenceReport rep = self_convergence_study(l.cfg.run, l.cfg.study.levels, worker_cap());
    OutputFile f(dir, "convergence.csv");
    write_convergence_csv(f.stream(), rep);
    f.commit();
    session.emitted("convergence.csv");
    std::cout << "level,tau,distance,observed_order\n";
    for (const auto& r : rep.rows)
        std::cout << r.level << ',' << format_double(r.tau) << ',' << format_double(r.distance) << ','
                  << (std::isnan(r.observed_order) ? std::string() : format_double(r.observed_order)) << '\n';
    std::cout << to_string(rep.verdict) << '\n';
    session.finish(to_string(rep.verdict));
    return rep.verdict == ConvergenceVerdict::fail ? kExitFail : kExitOk;
}

int cmd_validate(const Options& o, Session&) {
    const Loaded l = load(o.config_path, false);
    ValidationReport rep;
    try {
        rep = validate_model(l.cfg.run.model, l.cfg.validate_samples);
    } catch (const DomainError& e) {
        std::cout << "FAIL: " << e.what() << '\n';
        return kExitFail;
    }
    std::cout << std::left << std::setw(28) << "condition" << std::setw(8) << "status" << "worst_margin\n";
    for (const auto& c : rep.checks)
        std::cout << std::left << std::setw(28) << c.name << std::setw(8) << verdict(c.passed)
                  << format_double(c.worst_margin + 0.0) << '\n';
    bool ok = rep.all_passed();
    try {
        validate_config(l.cfg.run, l.cfg.validate_samples);
    } catch (const ValidationError& e) {
        if (ok) std::cout << "config: " << e.what() << '\n';
        ok = false;
    }
    std::cout << "config hash " << l.doc.hash_hex() << "  " << verdict(ok) << '\n';
    return ok ? kExitOk : kExitFail;
}

/// Writes to --out/<name> when given, else to stdout.
template <class Fn>
int emit_table(const Options& o, Session& session, const std::string& hash, const std::string& name, Fn&& fn) {
    if (o.out.empty()) {
        fn(std::cout);
        return kExitOk;
    }
    const fs::path dir = require_out(o);
    session.attach(dir, hash);
    OutputFile f(dir, name);
    fn(f.stream());
    f.commit();
    session.emitted(name);
    session.finish("OK");
    return kExitOk;
}

int cmd_prox_table(const Options& o, Session& session) {
    const Loaded l = load(o.config_path, false);
    const double tau = o.tau > 0.0 ? o.tau : l.cfg.run.tau;
    if (o.count < 2 || !(o.to > o.from)) throw UsageError("prox-table: need --count >= 2 and --to > --from");
    const PotentialSplit& p = l.cfg.run.model.potential;
    return emit_table(o, session, l.doc.hash_hex(), "prox_table.csv", [&](std::ostream& os) {
        CsvWriter w(os, {"r", "x", "xi", "iterations", "residual"});
        for (int i = 0; i < o.count; ++i) {
            const double r = o.from + (o.to - o.from) * i / (o.count - 1);
            const ProxResult res = resolve(p, tau, r);
            w.cell(r).cell(res.x).cell(res.xi).cell(res.iterations).cell(res.residual);
            w.end_row();
        }
    });
}

int cmd_kirchhoff_table(const Options& o, Session& session) {
    const Loaded l = load(o.config_path, false);
    if (o.count < 2 || !(o.m_max > 0.0)) throw UsageError("kirchhoff-table: need --count >= 2 and --m-max > 0");
    const KirchhoffTransform k(l.cfg.run.model.mobility, o.panels);
    return emit_table(o, session, l.doc.hash_hex(), "kirchhoff_table.csv", [&](std::ostream& os) {
        CsvWriter w(os, {"m", "kappa", "K"});
        for (int i = 0; i < o.count; ++i) {
            const double m = o.m_max * i / (o.count - 1);
            w.cell(m).cell(k.mobility()(m)).cell(k.K(m));
            w.end_row();
        }
    });
}

template <class Fn>
int guarded(const std::string& name, const Options& o, Fn&& fn) {
    Session session(name, o);
    try {
        return fn(o, session);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        session.finish(std::string("usage error: ") + e.what());
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        session.finish(std::string("config error: ") + e.what());
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        session.finish(std::string("validation error: ") + e.what());
        return kExitUsage;
    } catch (const InvalidParameter& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        session.finish(std::string("invalid parameter: ") + e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        session.finish(std::string("error: ") + e.what());
        return kExitFail;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phaseseg: phase-segregation solver with stability and convergence audits"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    Options o;
    struct Command {
        const char* name;
        const char* help;
        int (*fn)(const Options&, Session&);
        bool emits;
    };
    const Command commands[] = {
        {"simulate", "run one trajectory; writes steps.csv and snapshots/", cmd_simulate, true},
        {"cdep-study", "continuous-dependence ratio study over the eps list; writes study.csv", cmd_cdep, true},
        {"pointwise-check", "cellwise L/R audit for one perturbed pair; writes pointwise.csv", cmd_pointwise, true},
        {"converge", "temporal self-convergence over study.levels; writes convergence.csv", cmd_converge, true},
        {"validate", "check every model condition and print the table", cmd_validate, false},
        {"prox-table", "CSV of (r, x, xi) for the configured potential", cmd_prox_table, false},
        {"kirchhoff-table", "CSV of (m, kappa, K) for the configured mobility", cmd_kirchhoff_table, false},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("config", o.config_path, "configuration file (key = value)")->required();
        auto* out = sub->add_option("--out", o.out, "output directory");
        if (c.emits) out->required();
        if (std::string(c.name) == "prox-table") {
            sub->add_option("--tau", o.tau, "step size (default: time.tau)");
            sub->add_option("--from", o.from, "first r");
            sub->add_option("--to", o.to, "last r");
            sub->add_option("--count", o.count, "number of rows");
        }
        if (std::string(c.name) == "kirchhoff-table") {
            sub->add_option("--m-max", o.m_max, "largest m");
            sub->add_option("--count", o.count, "number of rows");
            sub->add_option("--panels", o.panels, "quadrature panels per breakpoint interval");
        }
        subs.emplace_back(sub, &c);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }
    for (const auto& [sub, c] : subs)
        if (sub->parsed()) return guarded(c->name, o, c->fn);
    std::cerr << app.help();
    return kExitUsage;
}
