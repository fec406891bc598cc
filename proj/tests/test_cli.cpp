#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

// ============================================================================
// Subprocess plumbing
// ============================================================================

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::size_t line_count(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

/// Fresh scratch directory per invocation, under one per-process root.
fs::path scratch_dir() {
    static int counter = 0;
    static const fs::path root =
        fs::temp_directory_path() / ("mirrorsim_cli_" + std::to_string(::getpid()));
    const fs::path dir = root / std::to_string(counter++);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// Run the CLI binary through the shell; `env_prefix` may export variables.
RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const fs::path dir = scratch_dir();
    const fs::path out_path = dir / "stdout.txt";
    const fs::path err_path = dir / "stderr.txt";
    const std::string cmd = env_prefix + "\"" + MIRRORSIM_BIN + "\" " + args + " > \"" +
                            out_path.string() + "\" 2> \"" + err_path.string() + "\"";
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_text(out_path);
    result.err = read_text(err_path);
    return result;
}

fs::path write_netlist(const std::string& text) {
    const fs::path path = scratch_dir() / "input.cir";
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

std::string bundled_path(const std::string& name) {
    return std::string(MIRRORSIM_SOURCE_DIR) + "/netlists/" + name + ".cir";
}

std::string quoted(const fs::path& path) { return "\"" + path.string() + "\""; }

/// Number printed after `label` in CLI output, e.g. label "v(mid) = ".
double printed_value(const std::string& text, const std::string& label) {
    const std::size_t at = text.find(label);
    REQUIRE(at != std::string::npos);
    return std::strtod(text.c_str() + at + label.size(), nullptr);
}

} // namespace

// ============================================================================
// Generic commands
// ============================================================================

TEST_CASE("version and usage") {
    const RunResult version = run_cli("--version");
    CHECK(version.exit_code == 0);
    CHECK(version.out.find("mirrorsim 0.1.0") != std::string::npos);

    const RunResult bare = run_cli("");
    CHECK(bare.exit_code == 2); // a subcommand is required
}

TEST_CASE("parse-check accepts every shipped netlist") {
    for (const char* name : {"set_branch", "reset_branch", "full_2m1r1b", "cascode_mirror"}) {
        const RunResult r = run_cli("parse-check --netlist \"" + bundled_path(name) + "\"");
        CHECK(r.exit_code == 0);
        CHECK(r.out.find("ok: ") != std::string::npos);
        CHECK(r.out.find("warning") == std::string::npos);
    }
}

TEST_CASE("parse-check diagnostics") {
    SUBCASE("syntax errors carry line numbers and exit 2") {
        const fs::path bad = write_netlist("r1 a 0 1k\nr2 a 0 5x\n");
        const RunResult r = run_cli("parse-check --netlist " + quoted(bad));
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("line 2") != std::string::npos);
    }
    SUBCASE("dangling nodes warn without failing") {
        const fs::path lonely = write_netlist("v1 a 0 dc 1\nr1 a 0 1k\nc9 b 0 1p\n");
        const RunResult r = run_cli("parse-check --netlist " + quoted(lonely));
        CHECK(r.exit_code == 0);
        CHECK(r.out.find("warning") != std::string::npos);
    }
    SUBCASE("missing files exit 3") {
        const RunResult r = run_cli("parse-check --netlist /nonexistent/nowhere.cir");
        CHECK(r.exit_code == 3);
        CHECK(r.err.find("cannot open") != std::string::npos);
    }
}

TEST_CASE("op prints the solved divider") {
    const fs::path divider = write_netlist("v1 top 0 dc 5\nr1 top mid 1k\nr2 mid 0 1k\n");
    const RunResult r = run_cli("op --netlist " + quoted(divider));
    CHECK(r.exit_code == 0);
    CHECK(printed_value(r.out, "v(mid) = ") == doctest::Approx(2.5).epsilon(1e-6));
    CHECK(r.out.find("homotopy = direct") != std::string::npos);
    CHECK(r.out.find("worst residual") != std::string::npos);
}

TEST_CASE("op reports unsolvable circuits as solver failures") {
    const fs::path conflict = write_netlist("v1 a 0 dc 1\nv2 a 0 dc 2\n");
    const RunResult r = run_cli("op --netlist " + quoted(conflict));
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("dc-sweep writes one CSV row per converged point") {
    const fs::path net = write_netlist("v1 a 0 dc 0\nr1 a 0 1k\n");
    const fs::path out = scratch_dir();
    const RunResult r = run_cli("dc-sweep --netlist " + quoted(net) +
                                " --source v1 --start 0 --stop 1 --step 0.25 --out " +
                                quoted(out));
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("5 of 5 points converged") != std::string::npos);

    const std::string csv = read_text(out / "sweep.csv");
    CHECK(line_count(csv) == 6); // header + 5 points
    CHECK(csv.rfind("v1,v(a),i(v1),i(r1)\n", 0) == 0);

    SUBCASE("empty grids exit 2") {
        const RunResult bad = run_cli("dc-sweep --netlist " + quoted(net) +
                                      " --source v1 --start 0 --stop 1 --step 0 --out " +
                                      quoted(out));
        CHECK(bad.exit_code == 2);
        CHECK(bad.err.find("empty grid") != std::string::npos);
    }
}

TEST_CASE("tran accepts unit suffixes and writes the trace") {
    const fs::path net = write_netlist("c1 a 0 1u ic=1\nr1 a 0 1k\n");
    const fs::path out = scratch_dir();
    const RunResult r = run_cli("tran --netlist " + quoted(net) +
                                " --tstop 1m --dt 100u --out " + quoted(out));
    CHECK(r.exit_code == 0);
    const std::string csv = read_text(out / "trace.csv");
    CHECK(line_count(csv) == 12); // header + t=0..1ms in 100us steps
    CHECK(csv.rfind("time,", 0) == 0);

    SUBCASE("the integrator can be switched") {
        const RunResult be = run_cli("tran --netlist " + quoted(net) +
                                     " --tstop 1m --dt 100u --method backward-euler --out " +
                                     quoted(out));
        CHECK(be.exit_code == 0);
        const RunResult bad = run_cli("tran --netlist " + quoted(net) +
                                      " --tstop 1m --dt 100u --method simpson --out " +
                                      quoted(out));
        CHECK(bad.exit_code == 2);
    }
    SUBCASE("absurd step counts are rejected") {
        const RunResult bad = run_cli("tran --netlist " + quoted(net) +
                                      " --tstop 100 --dt 1n --out " + quoted(out));
        CHECK(bad.exit_code == 2);
    }
}

// ============================================================================
// Experiments
// ============================================================================

TEST_CASE("dc-mirror experiment emits the report and a sorted manifest") {
    const fs::path out = scratch_dir();
    const RunResult r = run_cli("experiment dc-mirror --branch set --out " + quoted(out));
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("(9 rows)") != std::string::npos);

    const std::string csv = read_text(out / "dc_mirror.csv");
    CHECK(line_count(csv) == 10); // header + 50..450 uA in 50 uA steps
    CHECK(csv.rfind("iref,imirr,factor,deviation_pct\n", 0) == 0);

    const std::string manifest = read_text(out / "manifest.txt");
    CHECK(manifest.find("experiment=dc-mirror\n") != std::string::npos);
    CHECK(manifest.find("branch=set\n") != std::string::npos);
    CHECK(manifest.find("version=0.1.0\n") != std::string::npos);

    std::vector<std::string> lines;
    std::istringstream stream(manifest);
    for (std::string line; std::getline(stream, line);) lines.push_back(line);
    CHECK(std::is_sorted(lines.begin(), lines.end()));
}

TEST_CASE("experiment flags take unit suffixes") {
    const fs::path plain = scratch_dir();
    const fs::path suffixed = scratch_dir();
    REQUIRE(run_cli("experiment dc-mirror --out " + quoted(plain)).exit_code == 0);
    REQUIRE(run_cli("experiment dc-mirror --vdd 5000m --out " + quoted(suffixed)).exit_code == 0);
    CHECK(read_text(plain / "dc_mirror.csv") == read_text(suffixed / "dc_mirror.csv"));
    CHECK(read_text(plain / "manifest.txt") == read_text(suffixed / "manifest.txt"));
}

TEST_CASE("supply-range experiment reports vmin") {
    const fs::path out = scratch_dir();
    const RunResult r =
        run_cli("experiment supply-range --branch set --iref 400u --out " + quoted(out));
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("vmin = ") != std::string::npos);
    const std::string csv = read_text(out / "supply_range.csv");
    CHECK(line_count(csv) == 102); // header + 0..5 V in 50 mV steps
    CHECK(csv.rfind("vdd,imirr\n", 0) == 0);
}

TEST_CASE("rise-family experiment honors a single-point rise override") {
    const fs::path out = scratch_dir();
    const RunResult r = run_cli("experiment rise-family --rise 300n --out " + quoted(out));
    CHECK(r.exit_code == 0);
    const std::string csv = read_text(out / "rise_family.csv");
    CHECK(line_count(csv) == 2);
    CHECK(csv.rfind("rise,amplitude,rise_10_90,overshoot_pct\n", 0) == 0);
    CHECK(read_text(out / "manifest.txt").find("rise_grid=") != std::string::npos);
}

TEST_CASE("buffer experiment writes trace, summary, and plateau report") {
    const fs::path out = scratch_dir();
    const RunResult r = run_cli("experiment buffer --out " + quoted(out));
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("plateau mean = ") != std::string::npos);
    CHECK(read_text(out / "buffer_trace.csv").rfind("time,", 0) == 0);
    const std::string summary = read_text(out / "buffer_summary.csv");
    CHECK(line_count(summary) == 2);
    CHECK(summary.rfind("plateau_mean,plateau_flat_fraction,final_value,", 0) == 0);
}

TEST_CASE("wafer-mc experiment is byte-identical across worker counts") {
    const fs::path serial = scratch_dir();
    const fs::path parallel = scratch_dir();
    REQUIRE(run_cli("experiment wafer-mc --branch set --seed 1 --out " + quoted(serial))
                .exit_code == 0);
    REQUIRE(run_cli("experiment wafer-mc --branch set --seed 1 --jobs 4 --out " +
                    quoted(parallel))
                .exit_code == 0);

    const std::string csv = read_text(serial / "wafer.csv");
    CHECK(line_count(csv) == 361); // header + 180 dies x 2 circuits
    CHECK(csv == read_text(parallel / "wafer.csv"));

    const std::string manifest = read_text(serial / "manifest.txt");
    CHECK(manifest == read_text(parallel / "manifest.txt"));
    CHECK(manifest.find("jobs") == std::string::npos); // cannot affect the numbers
    CHECK(manifest.find("seed=1\n") != std::string::npos);
}

TEST_CASE("experiment validation") {
    CHECK(run_cli("experiment warp-core").exit_code == 2);
    const RunResult bad_branch = run_cli("experiment dc-mirror --branch both");
    CHECK(bad_branch.exit_code == 2);
    CHECK(bad_branch.err.find("unknown branch") != std::string::npos);
    CHECK(run_cli("experiment dc-mirror --vdd 5x").exit_code == 2);
}

TEST_CASE("the output directory falls back to the environment") {
    const fs::path out = scratch_dir();
    const fs::path net = write_netlist("v1 a 0 dc 0\nr1 a 0 1k\n");
    const RunResult r = run_cli("dc-sweep --netlist " + quoted(net) +
                                    " --source v1 --start 0 --stop 1 --step 0.5",
                                "MIRRORSIM_OUT=" + quoted(out) + " ");
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(out / "sweep.csv"));
}
