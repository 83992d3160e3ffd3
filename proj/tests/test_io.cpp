#include <catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "qsde/io.hpp"
#include "qsde/oscillator.hpp"

using namespace qsde;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("qsde_io_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(QSDE_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult r;
    std::array<char, 512> buf{};
    while (fgets(buf.data(), int(buf.size()), pipe) != nullptr) r.output += buf.data();
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

const char* kExampleConfig =
    "[problem]\n"
    "model = oscillator\n"
    "levels = 8\n"
    "\n"
    "[run]\n"
    "scheme = scheme2\n"
    "T = 1.0\n"
    "steps = 50\n"
    "trajectories = 40\n"
    "noise = rademacher\n"
    "seed = 4\n"
    "output_points = 5\n"
    "batches = 20\n";

} // namespace

TEST_CASE("config file parsing") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "a.cfg";
    write_file(cfg, "# comment\n[run]\nscheme = scheme2\nT = 2.5 # trailing\n"
                    "[problem]\nlindblad = one\nlindblad = two\n");
    const ConfigFile f = ConfigFile::parse_file(cfg.string());
    CHECK(f.get_required("run", "scheme") == "scheme2");
    CHECK(f.get_double("run", "T", 0.0) == 2.5);
    CHECK_FALSE(f.get("run", "missing").has_value());
    const auto all = f.get_all("problem", "lindblad");
    REQUIRE(all.size() == 2);
    CHECK(all[0] == "one");
    CHECK(all[1] == "two");
    CHECK_THROWS_WITH(f.get_required("run", "nope"),
                      Catch::Matchers::ContainsSubstring("run.nope"));
}

TEST_CASE("malformed config lines are reported with a line number") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "bad.cfg";
    write_file(cfg, "[run]\nthis line has no equals sign\n");
    CHECK_THROWS_WITH(ConfigFile::parse_file(cfg.string()), Catch::Matchers::ContainsSubstring(":2"));
}

TEST_CASE("matrix files round-trip at full precision") {
    std::mt19937 gen(8);
    std::normal_distribution<double> nd;
    Matrix m(4, 3);
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 4; ++i) m(i, j) = cx(nd(gen), nd(gen));
    TempDir tmp;
    const fs::path file = tmp.path / "m.mat";
    write_matrix(file.string(), m);
    const Matrix back = read_matrix(file.string());
    REQUIRE(back.rows() == 4);
    REQUIRE(back.cols() == 3);
    CHECK((m - back).max_abs() == 0.0);
}

TEST_CASE("problem and run configuration load from a config file") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "ex.cfg";
    write_file(cfg, kExampleConfig);
    const ConfigFile f = ConfigFile::parse_file(cfg.string());
    const SSEProblem p = problem_from_config(f);
    CHECK(p.dim == 9);
    CHECK(p.lindblads.size() == 4);
    const SchemeConfig rc = scheme_config_from(f);
    CHECK(rc.scheme == Scheme::scheme2);
    CHECK(rc.T == 1.0);
    CHECK(rc.steps == 50);
    CHECK(rc.trajectories == 40);
    CHECK(rc.seed == 4);
}

TEST_CASE("explicit operator files define a problem") {
    TempDir tmp;
    Matrix h(2, 2);
    h(0, 1) = h(1, 0) = 1.0;
    Matrix l(2, 2);
    l(0, 1) = 0.5;
    Matrix obs(2, 2);
    obs(1, 1) = 1.0;
    Matrix z0col(2, 1);
    z0col(1, 0) = 1.0;
    write_matrix((tmp.path / "h.mat").string(), h);
    write_matrix((tmp.path / "l.mat").string(), l);
    write_matrix((tmp.path / "obs.mat").string(), obs);
    write_matrix((tmp.path / "z0.mat").string(), z0col);
    write_file(tmp.path / "ops.cfg",
               "[problem]\nhamiltonian = " + (tmp.path / "h.mat").string() +
                   "\nlindblad = " + (tmp.path / "l.mat").string() +
                   "\nobservable = " + (tmp.path / "obs.mat").string() +
                   "\ninitial = " + (tmp.path / "z0.mat").string() + "\n");
    const ConfigFile f = ConfigFile::parse_file((tmp.path / "ops.cfg").string());
    const SSEProblem p = problem_from_config(f);
    CHECK(p.dim == 2);
    REQUIRE(p.lindblads.size() == 1);
    CHECK((p.lindblads[0] - l).max_abs() == 0.0);
}

TEST_CASE("csv output round-trips through the reader") {
    RunManifest m = make_manifest("test");
    m.add("seed", 4LL);
    const std::vector<std::string> header{"t", "value"};
    const std::vector<std::vector<double>> columns{{0.0, 0.5, 1.0}, {1.0, 0.25, 1.0 / 3.0}};
    TempDir tmp;
    const fs::path file = tmp.path / "out.csv";
    write_csv(file.string(), m, header, columns);
    const CsvTable back = read_csv(file.string());
    CHECK(back.manifest_value("command") == "test");
    CHECK(back.manifest_value("seed") == "4");
    REQUIRE(back.header == header);
    REQUIRE(back.columns.size() == 2);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t r = 0; r < 3; ++r) CHECK(back.columns[c][r] == columns[c][r]);
}

TEST_CASE("cli: reference and simulate produce usable csv") {
    TempDir tmp;
    write_file(tmp.path / "ex.cfg", kExampleConfig);
    const std::string cfg = (tmp.path / "ex.cfg").string();

    auto ref = run_cli("reference --config " + cfg + " --out " + (tmp.path / "ref.csv").string());
    INFO(ref.output);
    REQUIRE(ref.exit_code == 0);
    auto sim = run_cli("simulate --config " + cfg + " --out " + (tmp.path / "sim.csv").string());
    INFO(sim.output);
    REQUIRE(sim.exit_code == 0);

    const CsvTable rt = read_csv((tmp.path / "ref.csv").string());
    const CsvTable st = read_csv((tmp.path / "sim.csv").string());
    REQUIRE(rt.columns.at(0).size() == 6);
    REQUIRE(st.columns.at(0).size() == 6);
    // same time grid; estimate within a loose band of the reference
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(rt.columns[0][j] == st.columns[0][j]);
        CHECK(std::abs(rt.columns[1][j] - st.columns[1][j]) < 1.0);
    }
}

TEST_CASE("cli: repeated runs are byte-identical regardless of workers") {
    TempDir tmp;
    write_file(tmp.path / "ex.cfg", kExampleConfig);
    const std::string cfg = (tmp.path / "ex.cfg").string();
    const std::string a = (tmp.path / "a.csv").string();
    const std::string b = (tmp.path / "b.csv").string();
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + a + " --workers 1").exit_code == 0);
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + b + " --workers 3").exit_code == 0);
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("cli: error handling and exit codes") {
    TempDir tmp;
    write_file(tmp.path / "ex.cfg", kExampleConfig);
    const std::string cfg = (tmp.path / "ex.cfg").string();

    auto unknown = run_cli("simulate --config " + cfg + " --scheme bogus --out " +
                           (tmp.path / "x.csv").string());
    CHECK(unknown.exit_code == 1);
    // the message lists the valid scheme names
    CHECK(unknown.output.find("scheme2") != std::string::npos);
    CHECK(unknown.output.find("scheme3") != std::string::npos);

    Matrix h(2, 2);
    write_matrix((tmp.path / "h.mat").string(), h);
    write_file(tmp.path / "nokey.cfg",
               "[problem]\nhamiltonian = " + (tmp.path / "h.mat").string() + "\n[run]\nT = 1\n");
    auto missing = run_cli("simulate --config " + (tmp.path / "nokey.cfg").string() + " --out " +
                           (tmp.path / "y.csv").string());
    CHECK(missing.exit_code == 1);
    CHECK(missing.output.find("problem.") != std::string::npos);

    auto nofile = run_cli("simulate --config " + (tmp.path / "absent.cfg").string() + " --out " +
                          (tmp.path / "z.csv").string());
    CHECK(nofile.exit_code == 1);

    auto badflag = run_cli("simulate --no-such-flag");
    CHECK(badflag.exit_code == 1);

    auto help = run_cli("--help");
    CHECK(help.exit_code == 0);
    CHECK(help.output.find("simulate") != std::string::npos);
}
