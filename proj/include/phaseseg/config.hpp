#pragma once
/**
 * @brief Flat `key = value` configuration documents and their translation to run and
 * experiment settings.
 *
 * Syntax: one assignment per line, `#` starts a comment, blank lines ignored. Keys are
 * dotted identifiers from a fixed vocabulary; an unknown key is rejected with the nearest
 * known key as a suggestion. Numbers are read with std::from_chars (no locale).
 */

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "phaseseg/errors.hpp"
#include "phaseseg/grid.hpp"
#include "phaseseg/harness.hpp"
#include "phaseseg/model.hpp"
#include "phaseseg/stepper.hpp"

namespace phaseseg {

inline const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k{
            "grid.dim",         "grid.cells",     "grid.length",          "grid.cells_y",     "grid.length_y",
            "time.tau",         "time.final",     "potential",            "potential.c",      "obstacle.a",
            "obstacle.b",       "g",              "g.value",              "kappa",            "kappa.value",
            "kappa.min",        "kappa.max",      "bounds.rho_min",       "bounds.rho_max",   "bounds.xi_min",
            "bounds.xi_max",    "solver.linear",  "solver.tol",           "solver.max_iterations",
            "solver.prox_tol",  "output.every",   "study.target",         "study.mode",       "study.mode_y",
            "study.eps",        "study.levels",   "study.pointwise_eps",  "validate.samples",
        };
        for (const char* f : {"init.mu", "init.rho"}) {
            k.emplace_back(f);
            for (const char* s : {".mean", ".amplitude", ".mode", ".mode_y", ".center", ".width"})
                k.push_back(std::string(f) + s);
        }
        return k;
    }();
    return keys;
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::string nearest_config_key(std::string_view key) {
    const auto& keys = known_config_keys();
    std::string best = keys.front();
    std::size_t best_d = edit_distance(key, best);
    for (const auto& k : keys) {
        const std::size_t d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

/// Shortest decimal that reads back to the same double.
inline std::string shortest_decimal(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return false;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

class ConfigDocument {
public:
    static ConfigDocument parse(std::string_view text) {
        ConfigDocument doc;
        std::size_t line_no = 0;
        while (!text.empty()) {
            ++line_no;
            const std::size_t nl = text.find('\n');
            std::string_view line = text.substr(0, nl);
            text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
            if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (key.empty()) fail(line_no, "empty key");
            if (value.empty()) fail(line_no, "empty value for '" + key + "'");
            const auto& keys = known_config_keys();
            if (std::find(keys.begin(), keys.end(), key) == keys.end())
                fail(line_no, "unknown key '" + key + "' (did you mean '" + nearest_config_key(key) + "'?)");
            if (doc.values_.count(key)) fail(line_no, "duplicate key '" + key + "'");
            doc.values_[key] = value;
            doc.lines_[key] = line_no;
        }
        return doc;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

    void set(const std::string& key, const std::string& value) {
        const auto& keys = known_config_keys();
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError("unknown key '" + key + "' (did you mean '" + nearest_config_key(key) + "'?)");
        values_[key] = value;
    }

    const std::string& require(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const { return to_double(key, require(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? to_double(key, values_.at(key)) : fallback;
    }

    long long get_int(const std::string& key) const { return to_int(key, require(key)); }
    long long get_int(const std::string& key, long long fallback) const {
        return has(key) ? to_int(key, values_.at(key)) : fallback;
    }

    std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const {
        if (!has(key)) return fallback;
        std::vector<double> out;
        std::string_view rest = values_.at(key);
        while (true) {
            const std::size_t comma = rest.find(',');
            out.push_back(to_double(key, std::string(trim(rest.substr(0, comma)))));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        return out;
    }

    /// Sorted `key=value` lines; numbers rewritten in shortest round-trip form.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) {
            double d;
            out += k;
            out += '=';
            out += parse_double(v, d) ? shortest_decimal(d) : v;
            out += '\n';
        }
        return out;
    }

    /// 64-bit FNV-1a of canonical().
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : canonical()) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

    std::string hash_hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
        return buf;
    }

private:
    [[noreturn]] static void fail(std::size_t line, const std::string& msg) {
        throw ConfigError("line " + std::to_string(line) + ": " + msg);
    }

    std::string where(const std::string& key) const {
        const auto it = lines_.find(key);
        return it == lines_.end() ? std::string{} : "line " + std::to_string(it->second) + ": ";
    }

    double to_double(const std::string& key, const std::string& v) const {
        double d;
        if (!parse_double(v, d) || !std::isfinite(d))
            throw ConfigError(where(key) + "'" + key + "' expects a finite number (got '" + v + "')");
        return d;
    }

    long long to_int(const std::string& key, const std::string& v) const {
        long long i;
        std::string_view s = v;
        if (!s.empty() && s.front() == '+') s.remove_prefix(1);
        const auto res = std::from_chars(s.data(), s.data() + s.size(), i);
        if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw ConfigError(where(key) + "'" + key + "' expects an integer (got '" + v + "')");
        return i;
    }

    std::map<std::string, std::string> values_;
    std::map<std::string, std::size_t> lines_;
};

/// Settings for the pair, study and convergence commands.
struct StudySettings {
    Perturbation perturbation;  // eps unused; the list below drives the study
    std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
    int levels = 4;
    double pointwise_eps = 1e-2;
};

struct ExperimentConfig {
    RunConfig run;
    StudySettings study;
    std::size_t validate_samples = 1000;
};

namespace detail {

inline Profile read_profile(const ConfigDocument& doc, const std::string& prefix, const Profile& fallback) {
    Profile p = fallback;
    const std::string kind = doc.get_string(prefix, "");
    if (kind == "constant")
        p.kind = ProfileKind::constant;
    else if (kind == "cosine")
        p.kind = ProfileKind::cosine;
    else if (kind == "tanh")
        p.kind = ProfileKind::tanh;
    else if (!kind.empty())
        throw ConfigError("'" + prefix + "' must be constant, cosine or tanh (got '" + kind + "')");
    p.mean = doc.get_double(prefix + ".mean", p.mean);
    p.amplitude = doc.get_double(prefix + ".amplitude", p.amplitude);
    p.mode = static_cast<int>(doc.get_int(prefix + ".mode", p.mode));
    p.mode_y = static_cast<int>(doc.get_int(prefix + ".mode_y", p.mode_y));
    p.center = doc.get_double(prefix + ".center", p.center);
    p.width = doc.get_double(prefix + ".width", p.width);
    if (p.kind == ProfileKind::constant) p.amplitude = 0.0;
    return p;
}

template <class F>
auto as_validation_error(F&& f) {
    try {
        return f();
    } catch (const InvalidParameter& e) {
        throw ValidationError(e.what());
    }
}

}  // namespace detail

/**
 * Builds the experiment settings. Required keys: grid.cells, grid.length, time.tau,
 * time.final, potential, kappa. With validate = true every model condition is re-checked
 * and a failure raises ValidationError naming the condition.
 */
inline ExperimentConfig build_config(const ConfigDocument& doc, bool validate = true) {
    ExperimentConfig ex;
    RunConfig& c = ex.run;

    const long long dim = doc.get_int("grid.dim", 1);
    if (dim != 1 && dim != 2) throw ConfigError("grid.dim must be 1 or 2");
    const long long nx = doc.get_int("grid.cells");
    const double lx = doc.get_double("grid.length");
    if (nx < 1) throw ConfigError("grid.cells must be >= 1");
    if (dim == 1) {
        if (doc.has("grid.cells_y") || doc.has("grid.length_y"))
            throw ConfigError("grid.cells_y / grid.length_y require grid.dim = 2");
        c.grid = detail::as_validation_error([&] { return Grid::line(static_cast<std::size_t>(nx), lx); });
    } else {
        const long long ny = doc.get_int("grid.cells_y", nx);
        if (ny < 1) throw ConfigError("grid.cells_y must be >= 1");
        const double ly = doc.get_double("grid.length_y", lx);
        c.grid = detail::as_validation_error(
            [&] { return Grid::rectangle(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny), lx, ly); });
    }
    c.tau = doc.get_double("time.tau");
    c.t_final = doc.get_double("time.final");

    ModelSpec& m = c.model;
    const std::string pot = doc.require("potential");
    m.potential = detail::as_validation_error([&] {
        if (pot == "logarithmic") return make_logarithmic(doc.get_double("potential.c", 2.0));
        if (pot == "double_well") {
            if (doc.has("potential.c")) throw ConfigError("potential.c applies to logarithmic or obstacle only");
            return make_double_well();
        }
        if (pot == "obstacle") {
            const double k = doc.get_double("potential.c", 1.0);
            if (!(k >= 0.0)) throw ConfigError("potential.c must be >= 0 for the obstacle potential");
            return make_obstacle(doc.get_double("obstacle.a", -1.0), doc.get_double("obstacle.b", 1.0),
                                 [k](double r) { return -k * r; }, k);
        }
        throw ConfigError("potential must be logarithmic, double_well or obstacle (got '" + pot + "')");
    });
    if (pot != "obstacle" && (doc.has("obstacle.a") || doc.has("obstacle.b")))
        throw ConfigError("obstacle.a / obstacle.b require potential = obstacle");

    const std::string g = doc.get_string("g", "default_concave");
    if (g == "default_concave") {
        if (doc.has("g.value")) throw ConfigError("g.value requires g = constant");
        m.coupling = default_concave_coupling();
    } else if (g == "constant") {
        const Interval validity =
            m.potential.kind == PotentialKind::double_well ? Interval::real_line() : m.potential.beta_domain;
        m.coupling = detail::as_validation_error(
            [&] { return constant_coupling(doc.get_double("g.value"), Interval::closed(validity.lo, validity.hi)); });
    } else {
        throw ConfigError("g must be default_concave or constant (got '" + g + "')");
    }

    const std::string kappa = doc.require("kappa");
    m.mobility = detail::as_validation_error([&] {
        if (kappa == "constant") return constant_mobility(doc.get_double("kappa.value"));
        if (kappa == "rational") return rational_mobility(doc.get_double("kappa.min"), doc.get_double("kappa.max"));
        throw ConfigError("kappa must be constant or rational (got '" + kappa + "')");
    });

    m.constants = default_constants(m.potential);
    m.constants.rho_min = doc.get_double("bounds.rho_min", m.constants.rho_min);
    m.constants.rho_max = doc.get_double("bounds.rho_max", m.constants.rho_max);
    m.constants.xi_min = doc.get_double("bounds.xi_min", m.constants.xi_min);
    m.constants.xi_max = doc.get_double("bounds.xi_max", m.constants.xi_max);

    c.mu0 = detail::read_profile(doc, "init.mu", Profile::cosine(1.0, 0.5, 1));
    c.rho0 = detail::read_profile(doc, "init.rho", Profile::cosine(0.0, 0.5, 1));

    const std::string lin = doc.get_string("solver.linear", "auto");
    if (lin == "auto")
        c.solver.linear = LinearSolverChoice::automatic;
    else if (lin == "direct")
        c.solver.linear = LinearSolverChoice::direct;
    else if (lin == "cg")
        c.solver.linear = LinearSolverChoice::cg;
    else
        throw ConfigError("solver.linear must be auto, direct or cg (got '" + lin + "')");
    c.solver.linear_tol = doc.get_double("solver.tol", c.solver.linear_tol);
    if (!(c.solver.linear_tol > 0.0)) throw ConfigError("solver.tol must be > 0");
    const long long maxit = doc.get_int("solver.max_iterations", c.solver.max_cg_iterations);
    if (maxit < 1) throw ConfigError("solver.max_iterations must be >= 1");
    c.solver.max_cg_iterations = static_cast<int>(maxit);
    c.solver.prox_tol = doc.get_double("solver.prox_tol", 0.0);
    const long long every = doc.get_int("output.every", 1);
    if (every < 1) throw ConfigError("output.every must be >= 1");
    c.output_every = static_cast<std::size_t>(every);

    StudySettings& st = ex.study;
    const std::string target = doc.get_string("study.target", "rho0");
    if (target == "mu0")
        st.perturbation.target = PerturbTarget::mu0;
    else if (target == "rho0")
        st.perturbation.target = PerturbTarget::rho0;
    else if (target == "both")
        st.perturbation.target = PerturbTarget::both;
    else
        throw ConfigError("study.target must be mu0, rho0 or both (got '" + target + "')");
    st.perturbation.shape = Profile::cosine(0.0, 1.0, static_cast<int>(doc.get_int("study.mode", 2)),
                                            static_cast<int>(doc.get_int("study.mode_y", 0)));
    st.eps = doc.get_double_list("study.eps", st.eps);
    st.levels = static_cast<int>(doc.get_int("study.levels", st.levels));
    st.pointwise_eps = doc.get_double("study.pointwise_eps", st.pointwise_eps);
    const long long samples = doc.get_int("validate.samples", 1000);
    if (samples < 2) throw ConfigError("validate.samples must be >= 2");
    ex.validate_samples = static_cast<std::size_t>(samples);

    if (validate) validate_config(c, ex.validate_samples);
    return ex;
}

inline ExperimentConfig parse_config(std::string_view text, bool validate = true) {
    return build_config(ConfigDocument::parse(text), validate);
}

}  // namespace phaseseg
