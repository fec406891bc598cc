// Command-line front end: netlist checking, generic analyses (op, dc-sweep,
// tran), and the canned characterization experiments. Experiments write CSV
// files plus a manifest.txt of resolved parameters into the output directory
// (--out, else $MIRRORSIM_OUT, else ./mirrorsim-out). Exit codes: 0 ok,
// 1 solver failure, 2 bad input or usage, 3 I/O failure.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "mirrorsim/analyses.hpp"
#include "mirrorsim/bundled.hpp"
#include "mirrorsim/engine.hpp"
#include "mirrorsim/error.hpp"
#include "mirrorsim/mcvariation.hpp"
#include "mirrorsim/netlist.hpp"

namespace fs = std::filesystem;
using namespace mirrorsim;

namespace {

constexpr const char* k_version = "0.1.0";

std::string fmt_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join_reals(const std::vector<Real>& values) {
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) joined += ',';
        joined += fmt_real(values[i]);
    }
    return joined;
}

const char* region_name(MosRegion region) {
    switch (region) {
        case MosRegion::cutoff: return "cutoff";
        case MosRegion::triode: return "triode";
        case MosRegion::saturation: return "saturation";
    }
    return "unknown";
}

const char* homotopy_name(HomotopyUsed homotopy) {
    switch (homotopy) {
        case HomotopyUsed::direct: return "direct";
        case HomotopyUsed::gmin_ladder: return "gmin-ladder";
        case HomotopyUsed::source_stepping: return "source-stepping";
    }
    return "unknown";
}

// ============================================================================
// File plumbing
// ============================================================================

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw Error(ErrorKind::io, "cannot read '" + path + "'");
    return buffer.str();
}

Circuit load_circuit(const std::string& path) { return parse_circuit(read_file(path)); }

fs::path resolve_out_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("MIRRORSIM_OUT"); env != nullptr && *env != '\0') {
        return env;
    }
    return "mirrorsim-out";
}

fs::path prepare_out_dir(const std::string& flag) {
    const fs::path dir = resolve_out_dir(flag);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::io,
                    "cannot create output directory '" + dir.string() + "': " + ec.message());
    }
    return dir;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw Error(ErrorKind::io, "failed while writing '" + path.string() + "'");
}

/// Resolved parameters, written as sorted key=value lines. Deliberately
/// excludes anything that cannot affect the numbers (paths, job counts), so
/// equal manifests imply byte-identical CSVs.
void write_manifest(const fs::path& dir, std::vector<std::pair<std::string, std::string>> entries) {
    entries.emplace_back("version", k_version);
    std::sort(entries.begin(), entries.end());
    const fs::path path = dir / "manifest.txt";
    std::ofstream out = open_output(path);
    for (const auto& [key, value] : entries) out << key << '=' << value << '\n';
    finish_output(out, path);
}

void report_written(const fs::path& path, std::size_t rows) {
    std::cout << "wrote " << path.string() << " (" << rows << " rows)\n";
}

// ============================================================================
// Generic commands
// ============================================================================

int cmd_parse_check(const std::string& netlist) {
    const Circuit circuit = load_circuit(netlist);
    for (const Diagnostic& warning : circuit.warnings) {
        std::cout << "warning: line " << warning.line << ": " << warning.message << '\n';
    }
    std::cout << "ok: " << circuit.elements.size() << " elements, "
              << circuit.node_names.size() - 1 << " nodes\n";
    return 0;
}

int cmd_op(const std::string& netlist) {
    const Circuit circuit = load_circuit(netlist);
    const OperatingPoint op = solve_op(circuit);
    for (std::size_t i = 1; i < op.node_names.size(); ++i) {
        std::cout << "v(" << op.node_names[i] << ") = " << fmt_real(op.v[i]) << '\n';
    }
    for (std::size_t i = 0; i < op.element_names.size(); ++i) {
        std::cout << "i(" << op.element_names[i] << ") = " << fmt_real(op.element_current[i]);
        if (circuit.elements[i].kind == ElementKind::mosfet) {
            std::cout << "  [" << region_name(op.mos_region[i]) << "]";
        }
        std::cout << '\n';
    }
    std::cout << "iterations = " << op.iterations << '\n';
    std::cout << "homotopy = " << homotopy_name(op.homotopy) << '\n';
    std::cout << "worst residual = " << fmt_real(op.worst_residual) << " A at node '"
              << op.worst_residual_node << "' (bound " << fmt_real(op.worst_residual_bound)
              << " A)\n";
    return 0;
}

int cmd_dc_sweep(const std::string& netlist, const std::string& source, Real start, Real stop,
                 Real step, const std::string& out_flag) {
    const Circuit circuit = load_circuit(netlist);
    const SweepResult sweep = dc_sweep(circuit, source, SweepGrid{start, stop, step});

    const fs::path dir = prepare_out_dir(out_flag);
    const fs::path path = dir / "sweep.csv";
    std::ofstream out = open_output(path);

    out << source;
    for (std::size_t i = 1; i < circuit.node_names.size(); ++i) {
        out << ",v(" << circuit.node_names[i] << ')';
    }
    for (const Element& el : circuit.elements) out << ",i(" << el.name << ')';
    out << '\n';

    std::size_t converged = 0;
    for (std::size_t p = 0; p < sweep.values.size(); ++p) {
        if (!sweep.points[p]) continue;
        const OperatingPoint& op = *sweep.points[p];
        out << fmt_real(sweep.values[p]);
        for (std::size_t i = 1; i < op.v.size(); ++i) out << ',' << fmt_real(op.v[i]);
        for (Real current : op.element_current) out << ',' << fmt_real(current);
        out << '\n';
        ++converged;
    }
    finish_output(out, path);
    report_written(path, converged);
    std::cout << converged << " of " << sweep.values.size() << " points converged\n";
    return 0;
}

int cmd_tran(const std::string& netlist, Real tstop, Real dt, const std::string& method,
             const std::string& out_flag) {
    const Circuit circuit = load_circuit(netlist);
    const TransientMethod integ = method == "backward-euler" ? TransientMethod::backward_euler
                                                             : TransientMethod::trapezoidal;
    const TraceSet trace = transient(circuit, tstop, dt, integ);

    const fs::path dir = prepare_out_dir(out_flag);
    const fs::path path = dir / "trace.csv";
    std::ofstream out = open_output(path);
    write_trace_csv(out, trace);
    finish_output(out, path);
    report_written(path, trace.time.size());
    return 0;
}

// ============================================================================
// Experiments
// ============================================================================

/// Numeric flags arrive as text so they accept the netlist unit suffixes
/// ("400u", "1meg"); an empty string means the flag was not given.
Real real_flag(const std::string& text, Real fallback) {
    return text.empty() ? fallback : parse_value(text);
}

struct ExperimentArgs {
    std::string branch = "set";
    std::string iref;   ///< empty means per-experiment default
    std::string vdd;
    std::string rise;
    std::string dt;
    std::string tstop;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out;
};

Branch parse_branch(const std::string& name) {
    if (name == "set") return Branch::set;
    if (name == "reset") return Branch::reset;
    throw Error(ErrorKind::validation, "unknown branch '" + name + "' (want set or reset)");
}

std::vector<Real> linear_grid(Real start, Real stop, Real step) {
    std::vector<Real> grid;
    for (int i = 0;; ++i) {
        const Real value = start + step * i;
        if (value > stop * (1.0 + 1e-12)) break;
        grid.push_back(value);
    }
    return grid;
}

int run_dc_mirror(const ExperimentArgs& args) {
    const Branch branch = parse_branch(args.branch);
    const Real vdd = real_flag(args.vdd, 5.0);
    const std::vector<Real> grid = linear_grid(50e-6, 450e-6, 50e-6);
    const MirrorReport report = mirror_factor_dc(branch, grid, vdd);

    const fs::path dir = prepare_out_dir(args.out);
    const fs::path path = dir / "dc_mirror.csv";
    std::ofstream out = open_output(path);
    write_mirror_csv(out, report);
    finish_output(out, path);

    write_manifest(dir, {{"experiment", "dc-mirror"},
                         {"branch", args.branch},
                         {"vdd", fmt_real(vdd)},
                         {"iref_grid", join_reals(grid)}});
    report_written(path, report.rows.size());
    return 0;
}

int run_supply_range(const ExperimentArgs& args) {
    const Branch branch = parse_branch(args.branch);
    const Real iref = real_flag(args.iref, 400e-6);
    const SweepGrid grid{0.0, 5.0, 0.05};
    const SupplyRange range = supply_range(branch, iref, grid);

    const fs::path dir = prepare_out_dir(args.out);
    const fs::path path = dir / "supply_range.csv";
    std::ofstream out = open_output(path);
    write_supply_csv(out, range);
    finish_output(out, path);

    write_manifest(dir, {{"experiment", "supply-range"},
                         {"branch", args.branch},
                         {"iref", fmt_real(iref)},
                         {"vdd_start", fmt_real(grid.start)},
                         {"vdd_stop", fmt_real(grid.stop)},
                         {"vdd_step", fmt_real(grid.step)}});
    report_written(path, range.vdd.size());
    if (range.vmin_found) {
        std::cout << "vmin = " << fmt_real(range.vmin) << " V (imirr >= 98% of iref)\n";
    } else {
        std::cout << "vmin not reached within the sweep\n";
    }
    return 0;
}

int run_tran_mirror(const ExperimentArgs& args) {
    const Branch branch = parse_branch(args.branch);
    const Real vdd = real_flag(args.vdd, 5.0);
    const std::vector<Real> grid = linear_grid(50e-6, 400e-6, 50e-6);
    const MirrorReport report = mirror_factor_transient(branch, grid, vdd);

    const fs::path dir = prepare_out_dir(args.out);
    const fs::path path = dir / "tran_mirror.csv";
    std::ofstream out = open_output(path);
    write_mirror_csv(out, report);
    finish_output(out, path);

    write_manifest(dir, {{"experiment", "tran-mirror"},
                         {"branch", args.branch},
                         {"vdd", fmt_real(vdd)},
                         {"iref_grid", join_reals(grid)}});
    report_written(path, report.rows.size());
    return 0;
}

int run_rise_family(const ExperimentArgs& args) {
    const Branch branch = parse_branch(args.branch);
    const Real iref = real_flag(args.iref, 400e-6);
    const Real vdd = real_flag(args.vdd, 5.0);
    const std::vector<Real> grid = args.rise.empty()
                                       ? std::vector<Real>{100e-9, 300e-9, 1e-6}
                                       : std::vector<Real>{parse_value(args.rise)};
    const std::vector<RisePoint> family = rise_time_family(branch, iref, grid, vdd);

    const fs::path dir = prepare_out_dir(args.out);
    const fs::path path = dir / "rise_family.csv";
    std::ofstream out = open_output(path);
    write_rise_csv(out, family);
    finish_output(out, path);

    write_manifest(dir, {{"experiment", "rise-family"},
                         {"branch", args.branch},
                         {"iref", fmt_real(iref)},
                         {"vdd", fmt_real(vdd)},
                         {"rise_grid", join_reals(grid)}});
    report_written(path, family.size());
    return 0;
}

int run_buffer(const ExperimentArgs& args) {
    BufferOptions options;
    if (!args.iref.empty()) {
        options.iref_set = parse_value(args.iref);
        options.iref_reset = options.iref_set;
    }
    options.vdd = real_flag(args.vdd, options.vdd);
    options.dt = real_flag(args.dt, options.dt);
    options.tstop = real_flag(args.tstop, options.tstop);
    const BufferResult result = buffer_experiment(options);

    const fs::path dir = prepare_out_dir(args.out);
    const fs::path trace_path = dir / "buffer_trace.csv";
    std::ofstream trace_out = open_output(trace_path);
    write_trace_csv(trace_out, result.trace);
    finish_output(trace_out, trace_path);

    const fs::path summary_path = dir / "buffer_summary.csv";
    std::ofstream summary_out = open_output(summary_path);
    summary_out << "plateau_mean,plateau_flat_fraction,final_value,overlap_begin,overlap_end\n"
                << fmt_real(result.plateau_mean) << ',' << fmt_real(result.plateau_flat_fraction)
                << ',' << fmt_real(result.final_value) << ',' << fmt_real(result.overlap_begin)
                << ',' << fmt_real(result.overlap_end) << '\n';
    finish_output(summary_out, summary_path);

    write_manifest(dir, {{"experiment", "buffer"},
                         {"iref_set", fmt_real(options.iref_set)},
                         {"iref_reset", fmt_real(options.iref_reset)},
                         {"vdd", fmt_real(options.vdd)},
                         {"vtail", fmt_real(options.vtail)},
                         {"chop_delay", fmt_real(options.chop_delay)},
                         {"chops_active", options.chops_active ? "1" : "0"},
                         {"dt", fmt_real(options.dt)},
                         {"tstop", fmt_real(options.tstop)}});
    report_written(trace_path, result.trace.time.size());
    std::cout << "plateau mean = " << fmt_real(result.plateau_mean) << " V over ["
              << fmt_real(result.overlap_begin) << ", " << fmt_real(result.overlap_end) << "] s\n";
    return 0;
}

int run_wafer_mc(const ExperimentArgs& args) {
    const Branch branch = parse_branch(args.branch);
    MismatchSpec spec;
    spec.seed = args.seed;
    WaferRunOptions options;
    options.vdd = real_flag(args.vdd, options.vdd);
    options.jobs = args.jobs;
    const WaferMap map = wafer_run(branch, spec, options);

    const fs::path dir = prepare_out_dir(args.out);
    const fs::path path = dir / "wafer.csv";
    std::ofstream out = open_output(path);
    write_wafer_csv(out, map);
    finish_output(out, path);

    write_manifest(dir, {{"experiment", "wafer-mc"},
                         {"branch", args.branch},
                         {"seed", std::to_string(args.seed)},
                         {"dies", std::to_string(options.dies)},
                         {"circuits_per_die", std::to_string(options.circuits_per_die)},
                         {"iref_grid", join_reals(options.iref_grid)},
                         {"vdd", fmt_real(options.vdd)},
                         {"avt", fmt_real(spec.avt)},
                         {"abeta", fmt_real(spec.abeta)},
                         {"die_sigma_vth", fmt_real(spec.die_sigma_vth)}});
    report_written(path, map.cells.size());
    return 0;
}

int run_experiment(const std::string& name, const ExperimentArgs& args) {
    if (name == "dc-mirror") return run_dc_mirror(args);
    if (name == "supply-range") return run_supply_range(args);
    if (name == "tran-mirror") return run_tran_mirror(args);
    if (name == "rise-family") return run_rise_family(args);
    if (name == "buffer") return run_buffer(args);
    if (name == "wafer-mc") return run_wafer_mc(args);
    throw Error(ErrorKind::validation, "unknown experiment '" + name + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mirrorsim: compact simulator for RRAM current-pulse mirror circuits"};
    app.set_version_flag("--version", std::string("mirrorsim ") + k_version);
    app.require_subcommand(1);

    std::string netlist;
    std::string out_flag;

    CLI::App* parse_check = app.add_subcommand("parse-check", "Parse and validate a netlist");
    parse_check->add_option("--netlist", netlist, "netlist file")->required();

    CLI::App* op = app.add_subcommand("op", "Solve the DC operating point");
    op->add_option("--netlist", netlist, "netlist file")->required();

    std::string sweep_source;
    std::string sweep_start;
    std::string sweep_stop;
    std::string sweep_step;
    CLI::App* sweep = app.add_subcommand("dc-sweep", "Sweep a source and record each solution");
    sweep->add_option("--netlist", netlist, "netlist file")->required();
    sweep->add_option("--source", sweep_source, "swept V or I source element")->required();
    sweep->add_option("--start", sweep_start, "first value")->required();
    sweep->add_option("--stop", sweep_stop, "last value")->required();
    sweep->add_option("--step", sweep_step, "increment")->required();
    sweep->add_option("--out", out_flag, "output directory");

    std::string tran_tstop;
    std::string tran_dt;
    std::string tran_method = "trapezoidal";
    CLI::App* tran = app.add_subcommand("tran", "Fixed-step transient analysis");
    tran->add_option("--netlist", netlist, "netlist file")->required();
    tran->add_option("--tstop", tran_tstop, "end time, s")->required();
    tran->add_option("--dt", tran_dt, "time step, s")->required();
    tran->add_option("--method", tran_method, "trapezoidal | backward-euler")
        ->check(CLI::IsMember({"trapezoidal", "backward-euler"}));
    tran->add_option("--out", out_flag, "output directory");

    std::string experiment_name;
    ExperimentArgs args;
    CLI::App* experiment = app.add_subcommand("experiment", "Run a canned characterization");
    experiment->add_option("name", experiment_name,
                           "dc-mirror | supply-range | tran-mirror | rise-family | buffer | wafer-mc")
        ->required();
    experiment->add_option("--branch", args.branch, "set | reset");
    experiment->add_option("--iref", args.iref, "reference current, A");
    experiment->add_option("--vdd", args.vdd, "supply voltage, V");
    experiment->add_option("--rise", args.rise, "chop rise time, s (rise-family)");
    experiment->add_option("--dt", args.dt, "time step override, s");
    experiment->add_option("--tstop", args.tstop, "end time override, s");
    experiment->add_option("--seed", args.seed, "mismatch seed (wafer-mc)");
    experiment->add_option("--jobs", args.jobs, "worker threads (wafer-mc)");
    experiment->add_option("--out", args.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (parse_check->parsed()) return cmd_parse_check(netlist);
        if (op->parsed()) return cmd_op(netlist);
        if (sweep->parsed()) {
            return cmd_dc_sweep(netlist, sweep_source, parse_value(sweep_start),
                                parse_value(sweep_stop), parse_value(sweep_step), out_flag);
        }
        if (tran->parsed()) {
            return cmd_tran(netlist, parse_value(tran_tstop), parse_value(tran_dt), tran_method,
                            out_flag);
        }
        if (experiment->parsed()) return run_experiment(experiment_name, args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind) {
            case ErrorKind::solver: return 1;
            case ErrorKind::syntax: return 2;
            case ErrorKind::validation: return 2;
            case ErrorKind::io: return 3;
        }
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
