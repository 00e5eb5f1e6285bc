#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "phaseseg/config.hpp"
#include "phaseseg/io.hpp"

using namespace phaseseg;
namespace fs = std::filesystem;

namespace {

const char* kMinimal =
    "grid.cells = 64\n"
    "grid.length = 1\n"
    "time.tau = 1e-3\n"
    "time.final = 0.1\n"
    "potential = double_well\n"
    "kappa = constant\n"
    "kappa.value = 1\n";

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("phaseseg_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path_ / name) << text;
        return path_ / name;
    }

private:
    fs::path path_;
};

int cli(const std::string& args) {
    const std::string cmd = std::string(PHASESEG_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli_stdout(const std::string& args) {
    const std::string cmd = std::string(PHASESEG_CLI) + " " + args + " 2>/dev/null";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    ::pclose(pipe);
    return out;
}

}  // namespace

TEST(Config, MinimalHappyPath) {
    const auto ex = parse_config(kMinimal);
    EXPECT_EQ(ex.run.grid.size(), 64u);
    EXPECT_EQ(ex.run.grid.dim, 1);
    EXPECT_EQ(ex.run.tau, 1e-3);
    EXPECT_EQ(ex.run.t_final, 0.1);
    EXPECT_EQ(ex.run.model.potential.kind, PotentialKind::double_well);
    EXPECT_TRUE(ex.run.model.mobility.constant);
    EXPECT_EQ(ex.run.model.mobility.kappa_min, 1.0);
}

TEST(Config, MissingKeyIsNamed) {
    std::string text = kMinimal;
    text.erase(text.find("time.tau"), std::string("time.tau = 1e-3\n").size());
    try {
        parse_config(text);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("time.tau"), std::string::npos) << e.what();
    }
}

TEST(Config, LogarithmicCBelowOneIsValidationError) {
    std::string text = kMinimal;
    text.replace(text.find("double_well"), 11, "logarithmic\npotential.c = 0.5");
    try {
        parse_config(text);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("c > 1 required"), std::string::npos) << e.what();
    }
}

TEST(Config, UnknownKeySuggestsNearest) {
    try {
        ConfigDocument::parse("grid.cells = 4\ntime.tua = 1\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("'time.tau'"), std::string::npos) << msg;
    }
    EXPECT_EQ(nearest_config_key("kapa.max"), "kappa.max");
    EXPECT_EQ(nearest_config_key("init.rho.amplitud"), "init.rho.amplitude");
}

TEST(Config, SyntaxErrorsCarryLineNumbers) {
    for (const auto& [text, line] : std::vector<std::pair<std::string, std::string>>{
             {"# comment\n\ngrid.cells 4\n", "line 3"},
             {"grid.cells = 4\ngrid.cells = 5\n", "line 2"},
             {"= 4\n", "line 1"},
             {"grid.cells =\n", "line 1"}}) {
        try {
            ConfigDocument::parse(text);
            FAIL() << text;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(line), std::string::npos) << e.what();
        }
    }
}

TEST(Config, BadNumbersRejected) {
    std::string text = kMinimal;
    text.replace(text.find("1e-3"), 4, "1e-3x");
    EXPECT_THROW(parse_config(text), ConfigError);
    EXPECT_THROW(parse_config(std::string(kMinimal) + "grid.dim = 1.5\n"), ConfigError);
    EXPECT_THROW(parse_config(std::string(kMinimal) + "solver.linear = lu\n"), ConfigError);
}

TEST(Config, ModelConditionFailureNamesCondition) {
    const std::string text = std::string(kMinimal) + "bounds.xi_max = -5\n";
    try {
        parse_config(text);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("xi_max"), std::string::npos) << e.what();
    }
    EXPECT_NO_THROW(parse_config(text, false));
}

TEST(Config, TwoDimensionalAndStudyKeys) {
    const auto ex = parse_config(
        "grid.dim = 2\ngrid.cells = 8\ngrid.cells_y = 4\ngrid.length = 2\ntime.tau = 0.01\ntime.final = 0.1\n"
        "potential = logarithmic\nkappa = rational\nkappa.min = 1\nkappa.max = 2\n"
        "study.eps = 0.1, 0.05\nstudy.target = both\nstudy.levels = 5\nsolver.linear = cg\n");
    EXPECT_EQ(ex.run.grid.dim, 2);
    EXPECT_EQ(ex.run.grid.cells[1], 4u);
    EXPECT_EQ(ex.run.grid.lengths[1], 2.0);
    EXPECT_EQ(ex.study.eps, (std::vector<double>{0.1, 0.05}));
    EXPECT_EQ(ex.study.perturbation.target, PerturbTarget::both);
    EXPECT_EQ(ex.study.levels, 5);
    EXPECT_EQ(ex.run.solver.linear, LinearSolverChoice::cg);
}

TEST(ConfigHash, InvariantUnderFormatting) {
    const auto a = ConfigDocument::parse(kMinimal);
    const auto b = ConfigDocument::parse(
        "# same settings, reordered\n"
        "kappa.value=1.0\n   kappa   =   constant   # trailing comment\n"
        "potential = double_well\ntime.final = 0.10\ntime.tau = 0.001\n\n"
        "grid.length = 1\ngrid.cells = 64\n");
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.hash_hex(), b.hash_hex());
    const auto c = ConfigDocument::parse(std::string(kMinimal) + "output.every = 2\n");
    EXPECT_NE(a.hash(), c.hash());
}

TEST(Snapshot, BitwiseRoundTrip) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (const Grid& g : {Grid::line(50, 0.7), Grid::rectangle(6, 5, 1.0 / 3.0, 2.0)}) {
        ScalarField f(g);
        for (double& v : f.values) v = u(rng) * std::pow(10.0, 40.0 * u(rng));
        f[0] = std::numeric_limits<double>::denorm_min();
        f[1] = -0.0;
        f[2] = std::nextafter(1.0, 2.0);
        std::stringstream ss;
        write_snapshot(ss, f, 0.1 + 0.2);
        const Snapshot s = read_snapshot(ss);
        EXPECT_TRUE(s.field.grid == g);
        EXPECT_EQ(s.time, 0.1 + 0.2);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double a = s.field[k], b = f[k];
            EXPECT_EQ(std::memcmp(&a, &b, sizeof(double)), 0) << k;
        }
    }
}

TEST(Snapshot, HeaderFormat) {
    const Grid g = Grid::rectangle(3, 2, 1.5, 1.0);
    std::stringstream ss;
    write_snapshot(ss, ScalarField(g, 0.25), 0.5);
    std::string header;
    std::getline(ss, header);
    EXPECT_EQ(header, "# grid dim=2 cells=3,2 lengths=1.5,1 time=0.5");
    std::string first;
    std::getline(ss, first);
    EXPECT_EQ(first, "0.25");
}

TEST(Snapshot, MalformedInputRejected) {
    for (const char* text : {"1\n2\n", "# grid dim=1 cells=2 lengths=1\n1\n2\n", "# grid dim=1 cells=2 lengths=1 time=0\n1\n",
                             "# grid dim=1 cells=2 lengths=1 time=0\n1\n2\n3\n", "# grid dim=1 cells=2 lengths=1 time=0\n1\nx\n"}) {
        std::stringstream ss(text);
        EXPECT_THROW(read_snapshot(ss), Error) << text;
    }
}

TEST(Csv, FixedColumnsAndRowWidth) {
    std::stringstream ss;
    write_steps_csv(ss, {StepReport{}});
    std::string header;
    std::getline(ss, header);
    EXPECT_EQ(header,
              "step,time,balance_residual,min_mu,rho_min,rho_max,xi_min,xi_max,cg_iterations,prox_max_iterations,"
              "safeguard_margin");
    std::stringstream bad;
    CsvWriter w(bad, {"a", "b"});
    w.cell(1.0);
    EXPECT_THROW(w.end_row(), Error);
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(1e-300), "1e-300");
    EXPECT_EQ(format_double(1.0 / 3.0), "0.33333333333333331");
}

TEST(OutputFileTest, PartialUntilCommitted) {
    TempDir dir;
    {
        OutputFile f(dir.path(), "a.csv");
        f.stream() << "x\n";
        EXPECT_TRUE(fs::exists(dir.path() / "a.csv.partial"));
        EXPECT_FALSE(fs::exists(dir.path() / "a.csv"));
        f.commit();
    }
    EXPECT_TRUE(fs::exists(dir.path() / "a.csv"));
    EXPECT_FALSE(fs::exists(dir.path() / "a.csv.partial"));
    { OutputFile f(dir.path(), "b.csv"); f.stream() << "y\n"; }
    EXPECT_EQ(slurp(dir.path() / "b.csv.partial"), "y\n");
}

TEST(Cli, ValidateGoodConfig) {
    TempDir dir;
    const auto cfg = dir.write("good.cfg", kMinimal);
    EXPECT_EQ(cli("validate " + cfg.string()), 0);
    const std::string out = cli_stdout("validate " + cfg.string());
    EXPECT_NE(out.find("kappa_lower_bound"), std::string::npos);
    EXPECT_NE(out.find("sign_upper"), std::string::npos);
}

TEST(Cli, ValidateFailingModelIsVerdictFail) {
    TempDir dir;
    const auto cfg = dir.write("bad.cfg", std::string(kMinimal) + "bounds.xi_max = -5\n");
    EXPECT_EQ(cli("validate " + cfg.string()), 1);
}

TEST(Cli, UsageErrors) {
    TempDir dir;
    const auto cfg = dir.write("good.cfg", kMinimal);
    EXPECT_EQ(cli("frobnicate " + cfg.string()), 2);
    EXPECT_EQ(cli(""), 2);
    EXPECT_EQ(cli("simulate " + cfg.string()), 2);  // --out missing
    EXPECT_EQ(cli("validate " + (dir.path() / "missing.cfg").string()), 2);
    const auto unknown = dir.write("unknown.cfg", std::string(kMinimal) + "time.tua = 1\n");
    EXPECT_EQ(cli("validate " + unknown.string()), 2);
    EXPECT_EQ(cli("cdep-study " + cfg.string() + " --out " + (dir.path() / "o").string() + " --bogus"), 2);
    const std::string env_cmd = "env PHASESEG_THREADS=abc " + std::string(PHASESEG_CLI) + " cdep-study " +
                                cfg.string() + " --out " + (dir.path() / "t").string() + " > /dev/null 2>&1";
    const int status = std::system(env_cmd.c_str());
    EXPECT_EQ(WEXITSTATUS(status), 2);
}

TEST(Cli, SimulateWritesOutputsAndManifest) {
    TempDir dir;
    const auto cfg = dir.write("run.cfg", std::string(kMinimal) + "output.every = 50\n");
    const fs::path out = dir.path() / "out";
    ASSERT_EQ(cli("simulate " + cfg.string() + " --out " + out.string()), 0);
    EXPECT_EQ(count_lines(out / "steps.csv"), 101u);
    for (const char* f : {"mu_000000.txt", "rho_000050.txt", "xi_000100.txt"})
        EXPECT_TRUE(fs::exists(out / "snapshots" / f)) << f;
    std::ifstream snap(out / "snapshots" / "mu_000100.txt");
    const Snapshot s = read_snapshot(snap);
    EXPECT_EQ(s.field.size(), 64u);
    EXPECT_NEAR(s.time, 0.1, 1e-15);
    const std::string manifest = slurp(out / "manifest.txt");
    EXPECT_NE(manifest.find("config_hash = " + ConfigDocument::parse(std::string(kMinimal) + "output.every = 50\n").hash_hex()),
              std::string::npos)
        << manifest;
    EXPECT_NE(manifest.find("version = "), std::string::npos);
    EXPECT_NE(manifest.find("status = PASS"), std::string::npos);
}

TEST(Cli, AbnormalExitLeavesPartialFiles) {
    TempDir dir;
    const auto cfg = dir.write("fail.cfg", std::string(kMinimal) +
                                               "solver.linear = cg\nsolver.tol = 1e-14\nsolver.max_iterations = 1\n");
    const fs::path out = dir.path() / "out";
    EXPECT_EQ(cli("simulate " + cfg.string() + " --out " + out.string()), 1);
    EXPECT_TRUE(fs::exists(out / "steps.csv.partial"));
    EXPECT_FALSE(fs::exists(out / "steps.csv"));
    EXPECT_NE(slurp(out / "manifest.txt").find("status = error"), std::string::npos);
}

TEST(Cli, StudyCommandsWriteCsv) {
    TempDir dir;
    const auto cfg = dir.write("study.cfg", "grid.cells = 32\ngrid.length = 1\ntime.tau = 4e-3\ntime.final = 0.08\n"
                                            "potential = logarithmic\nkappa = rational\nkappa.min = 1\nkappa.max = 2\n"
                                            "study.eps = 1e-1, 1e-2, 1e-3, 1e-4\nstudy.levels = 3\n");
    const fs::path out = dir.path() / "r";
    EXPECT_EQ(cli("cdep-study " + cfg.string() + " --out " + out.string()), 0);
    EXPECT_EQ(count_lines(out / "study.csv"), 5u);
    EXPECT_EQ(slurp(out / "study.csv").rfind("eps,lhs,rhs,ratio", 0), 0u);
    EXPECT_EQ(cli("pointwise-check " + cfg.string() + " --out " + out.string()), 0);
    EXPECT_EQ(count_lines(out / "pointwise.csv"), 22u);
    const int conv = cli("converge " + cfg.string() + " --out " + out.string());
    EXPECT_TRUE(conv == 0 || conv == 1);
    EXPECT_EQ(count_lines(out / "convergence.csv"), 3u);
}

TEST(Cli, TablesToStdoutAndFile) {
    TempDir dir;
    const auto cfg = dir.write("t.cfg", kMinimal);
    const std::string prox = cli_stdout("prox-table " + cfg.string() + " --tau 0.5 --from -1 --to 1 --count 3");
    EXPECT_EQ(prox.rfind("r,x,xi,", 0), 0u) << prox;
    EXPECT_NE(prox.find("\n0,0,0,"), std::string::npos) << prox;
    const fs::path out = dir.path() / "k";
    EXPECT_EQ(cli("kirchhoff-table " + cfg.string() + " --count 5 --m-max 4 --out " + out.string()), 0);
    const std::string k = slurp(out / "kirchhoff_table.csv");
    EXPECT_EQ(k.rfind("m,kappa,K\n0,1,0\n1,1,1\n", 0), 0u) << k;
    EXPECT_TRUE(fs::exists(out / "manifest.txt"));
}
