#pragma once
/**
 * @brief Snapshot files, CSV emission and output directories.
 *
 * Snapshot layout:
 *   # grid dim=<d> cells=<nx>[,<ny>] lengths=<lx>[,<ly>] time=<t>
 * followed by one value per line, row-major (x fastest). Values use 17 significant digits,
 * which reads back bit-exactly. Every number is produced by std::to_chars, so neither
 * snapshots nor CSV depend on the locale.
 */

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "phaseseg/config.hpp"
#include "phaseseg/errors.hpp"
#include "phaseseg/grid.hpp"
#include "phaseseg/harness.hpp"
#include "phaseseg/stepper.hpp"

namespace phaseseg {

inline constexpr const char* kToolVersion = "1.0.0";

/// 17 significant digits, locale-free.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

struct Snapshot {
    ScalarField field;
    double time = 0.0;
};

inline void write_snapshot(std::ostream& os, const ScalarField& f, double time) {
    const Grid& g = f.grid;
    os << "# grid dim=" << g.dim << " cells=" << g.cells[0];
    if (g.dim == 2) os << ',' << g.cells[1];
    os << " lengths=" << format_double(g.lengths[0]);
    if (g.dim == 2) os << ',' << format_double(g.lengths[1]);
    os << " time=" << format_double(time) << '\n';
    for (double v : f.values) os << format_double(v) << '\n';
}

namespace detail {

[[noreturn]] inline void snapshot_error(std::size_t line, const std::string& msg) {
    throw Error("snapshot line " + std::to_string(line) + ": " + msg);
}

inline double snapshot_number(std::string_view s, std::size_t line) {
    double v;
    if (!parse_double(s, v)) snapshot_error(line, "invalid number '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    while (true) {
        const std::size_t p = s.find(sep);
        out.push_back(s.substr(0, p));
        if (p == std::string_view::npos) break;
        s = s.substr(p + 1);
    }
    return out;
}

}  // namespace detail

inline Snapshot read_snapshot(std::istream& is) {
    std::string header;
    if (!std::getline(is, header) || header.rfind("# grid ", 0) != 0) detail::snapshot_error(1, "missing '# grid' header");
    int dim = 0;
    std::vector<std::string_view> cells, lengths;
    double time = 0.0;
    bool have_time = false;
    for (std::string_view tok : detail::split(std::string_view(header).substr(7), ' ')) {
        if (tok.empty()) continue;
        const std::size_t eq = tok.find('=');
        if (eq == std::string_view::npos) detail::snapshot_error(1, "malformed header token");
        const std::string_view key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "dim")
            dim = static_cast<int>(detail::snapshot_number(val, 1));
        else if (key == "cells")
            cells = detail::split(val, ',');
        else if (key == "lengths")
            lengths = detail::split(val, ',');
        else if (key == "time") {
            time = detail::snapshot_number(val, 1);
            have_time = true;
        } else
            detail::snapshot_error(1, "unknown header key '" + std::string(key) + "'");
    }
    if ((dim != 1 && dim != 2) || cells.size() != static_cast<std::size_t>(dim) ||
        lengths.size() != static_cast<std::size_t>(dim) || !have_time)
        detail::snapshot_error(1, "incomplete grid header");
    std::size_t n[2] = {1, 1};
    double len[2] = {1.0, 1.0};
    for (int d = 0; d < dim; ++d) {
        const double c = detail::snapshot_number(cells[d], 1);
        if (!(c >= 1.0) || c != static_cast<double>(static_cast<std::size_t>(c)))
            detail::snapshot_error(1, "invalid cell count");
        n[d] = static_cast<std::size_t>(c);
        len[d] = detail::snapshot_number(lengths[d], 1);
    }
    Snapshot s;
    s.time = time;
    try {
        s.field = ScalarField(dim == 1 ? Grid::line(n[0], len[0]) : Grid::rectangle(n[0], n[1], len[0], len[1]));
    } catch (const InvalidParameter& e) {
        detail::snapshot_error(1, e.what());
    }
    std::string line;
    std::size_t line_no = 1, k = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string_view t = trim(line);
        if (t.empty()) continue;
        if (k == s.field.size()) detail::snapshot_error(line_no, "more values than cells");
        s.field[k++] = detail::snapshot_number(t, line_no);
    }
    if (k != s.field.size()) detail::snapshot_error(line_no, "fewer values than cells");
    return s;
}

/// Minimal CSV writer: fixed header, numeric cells via format_double.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& columns) : os_(os), width_(columns.size()) {
        for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
        os_ << '\n';
    }

    CsvWriter& cell(double v) { return raw(format_double(v)); }
    CsvWriter& cell(long long v) { return raw(std::to_string(v)); }
    CsvWriter& cell(std::size_t v) { return raw(std::to_string(v)); }
    CsvWriter& cell(int v) { return raw(std::to_string(v)); }
    CsvWriter& cell(const std::string& v) { return raw(v); }
    CsvWriter& cell(const char* v) { return raw(v); }

    void end_row() {
        if (filled_ != width_) throw Error("CsvWriter: row has " + std::to_string(filled_) + " cells, expected " +
                                           std::to_string(width_));
        os_ << '\n';
        filled_ = 0;
    }

private:
    CsvWriter& raw(const std::string& s) {
        os_ << (filled_ ? "," : "") << s;
        ++filled_;
        return *this;
    }

    std::ostream& os_;
    std::size_t width_;
    std::size_t filled_ = 0;
};

inline const std::vector<std::string>& steps_columns() {
    static const std::vector<std::string> c{"step",   "time",   "balance_residual", "min_mu",
                                            "rho_min", "rho_max", "xi_min",         "xi_max",
                                            "cg_iterations", "prox_max_iterations", "safeguard_margin"};
    return c;
}

inline void write_step_row(CsvWriter& w, const StepReport& r) {
    w.cell(r.step).cell(r.time).cell(r.balance_residual).cell(r.min_mu).cell(r.rho_min).cell(r.rho_max);
    w.cell(r.xi_min).cell(r.xi_max).cell(r.cg_iterations).cell(r.prox_max_iterations).cell(r.safeguard_margin);
    w.end_row();
}

inline void write_steps_csv(std::ostream& os, const std::vector<StepReport>& reports) {
    CsvWriter w(os, steps_columns());
    for (const auto& r : reports) write_step_row(w, r);
}

inline void write_study_csv(std::ostream& os, const StudyReport& rep) {
    CsvWriter w(os, {"eps", "lhs", "rhs", "ratio", "eps_effective", "clamped", "verdict", "pointwise_worst_ratio"});
    for (const auto& r : rep.rows) {
        w.cell(r.eps).cell(r.lhs).cell(r.rhs).cell(r.ratio).cell(r.eps_effective).cell(r.clamped ? 1 : 0);
        w.cell(to_string(r.verdict)).cell(r.pointwise_worst_ratio);
        w.end_row();
    }
}

inline void write_pointwise_csv(std::ostream& os, const PointwiseReport& rep) {
    CsvWriter w(os, {"time", "worst_cell", "L", "R", "ratio"});
    for (const auto& r : rep.rows) {
        w.cell(r.time).cell(r.worst_cell).cell(r.L).cell(r.R).cell(r.ratio);
        w.end_row();
    }
}

inline void write_convergence_csv(std::ostream& os, const ConvergenceReport& rep) {
    CsvWriter w(os, {"level", "tau", "distance", "observed_order"});
    for (const auto& r : rep.rows) {
        w.cell(r.level).cell(r.tau).cell(r.distance);
        if (std::isnan(r.observed_order))
            w.cell("");
        else
            w.cell(r.observed_order);
        w.end_row();
    }
}

/**
 * Files under an output directory are written as `<name>.partial` and renamed to `<name>`
 * on commit(). Anything not committed, e.g. after an error, keeps the suffix.
 */
class OutputFile {
public:
    OutputFile(const std::filesystem::path& dir, const std::string& name)
        : final_(dir / name), partial_(dir / (name + ".partial")) {
        std::filesystem::create_directories(final_.parent_path());
        stream_.open(partial_, std::ios::out | std::ios::trunc);
        if (!stream_) throw Error("cannot open " + partial_.string() + " for writing");
    }
    OutputFile(const OutputFile&) = delete;
    OutputFile& operator=(const OutputFile&) = delete;

    ~OutputFile() {
        if (stream_.is_open()) stream_.flush();
    }

    std::ostream& stream() { return stream_; }
    const std::filesystem::path& path() const { return final_; }

    void commit() {
        stream_.close();
        if (!stream_) throw Error("write failed: " + partial_.string());
        std::filesystem::rename(partial_, final_);
    }

private:
    std::filesystem::path final_;
    std::filesystem::path partial_;
    std::ofstream stream_;
};

struct Manifest {
    std::string command;
    std::string config_path;
    std::string config_hash;
    std::string status;
    std::vector<std::string> files;
};

inline void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
    OutputFile f(dir, "manifest.txt");
    auto& os = f.stream();
    os << "tool = phaseseg\n";
    os << "version = " << kToolVersion << '\n';
    os << "command = " << m.command << '\n';
    os << "config = " << m.config_path << '\n';
    os << "config_hash = " << m.config_hash << '\n';
    os << "status = " << m.status << '\n';
    for (const auto& file : m.files) os << "file = " << file << '\n';
    f.commit();
}

}  // namespace phaseseg
