#include "mirrorsim/analyses.hpp"

#include "mirrorsim/bundled.hpp"
#include "mirrorsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <utility>

namespace mirrorsim {

namespace {

// ============================================================================
// Small helpers
// ============================================================================

std::string fmt_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Element& named_element(Circuit& circuit, std::string_view name, const char* role) {
    int idx = circuit.element_index(name);
    if (idx < 0) {
        throw Error(ErrorKind::validation, "circuit has no element '" + std::string(name) +
                                               "' to use as the " + role);
    }
    return circuit.elements[static_cast<std::size_t>(idx)];
}

/// Replace a source's waveform with a DC level.
void set_source_dc(Circuit& circuit, std::string_view name, Real value, const char* role) {
    Element& el = named_element(circuit, name, role);
    if (el.kind != ElementKind::vsource && el.kind != ElementKind::isource) {
        throw Error(ErrorKind::validation,
                    "element '" + std::string(name) + "' is not a source (wanted for " + role + ")");
    }
    el.waveform = waveform_dc(value);
}

std::vector<Real> sorted_positive_grid(const std::vector<Real>& grid, const char* what) {
    if (grid.empty()) throw Error(ErrorKind::validation, std::string("empty ") + what + " grid");
    std::vector<Real> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() <= 0.0) {
        throw Error(ErrorKind::validation, std::string(what) + " grid values must be positive");
    }
    return sorted;
}

/// Chop gate levels that switch a branch off/on. The set-branch switch is a
/// PMOS whose off level must track the supply; the reset-branch switch is an
/// NMOS with a grounded source, so a fixed 5 V drive turns it on at any
/// supply (and matches the DC override level in branch_probe).
struct ChopLevels {
    Real idle;
    Real active;
};

ChopLevels chop_levels(Branch branch, Real vdd) {
    if (branch == Branch::set) return {vdd, 0.0};
    return {0.0, 5.0};
}

const char* branch_netlist_name(Branch branch) {
    return branch == Branch::set ? "set_branch" : "reset_branch";
}

} // namespace

// ============================================================================
// Bundled branch access
// ============================================================================

Circuit branch_circuit(Branch branch) {
    return parse_circuit(bundled_netlist(branch_netlist_name(branch)));
}

MirrorProbe branch_probe(Branch branch) {
    MirrorProbe probe;
    probe.chop_on = branch == Branch::set ? 0.0 : 5.0;
    return probe;
}

// ============================================================================
// DC analyses
// ============================================================================

MirrorReport mirror_factor_dc(const Circuit& circuit, const MirrorProbe& probe,
                              const std::vector<Real>& iref_grid, Real vdd,
                              const NewtonConfig& config) {
    std::vector<Real> grid = sorted_positive_grid(iref_grid, "reference-current");

    Circuit work = circuit;
    set_source_dc(work, probe.vdd, vdd, "supply");
    if (!probe.chop.empty()) set_source_dc(work, probe.chop, probe.chop_on, "chop drive");

    MirrorReport report;
    report.rows.reserve(grid.size());
    OperatingPoint previous;
    bool have_previous = false;
    for (Real iref : grid) {
        set_source_dc(work, probe.iref, iref, "reference source");
        MirrorRow row;
        row.iref = iref;
        try {
            OperatingPoint op = solve_op(work, config, have_previous ? &previous : nullptr);
            row.imirr = std::abs(op.current_of(probe.sense));
            row.factor = row.imirr / iref;
            row.deviation_pct = std::abs(row.factor - 1.0) * 100.0;
            previous = std::move(op);
            have_previous = true;
        } catch (const Error& err) {
            if (err.kind != ErrorKind::solver) throw;
            row.valid = false;
        }
        report.rows.push_back(row);
    }
    return report;
}

MirrorReport mirror_factor_dc(Branch branch, const std::vector<Real>& iref_grid, Real vdd,
                              const NewtonConfig& config) {
    return mirror_factor_dc(branch_circuit(branch), branch_probe(branch), iref_grid, vdd, config);
}

SupplyRange supply_range(const Circuit& circuit, const MirrorProbe& probe, Real iref,
                         const SweepGrid& vdd_grid, const NewtonConfig& config) {
    if (iref < 0.0) {
        throw Error(ErrorKind::validation, "reference current must be non-negative");
    }

    Circuit work = circuit;
    set_source_dc(work, probe.iref, iref, "reference source");
    if (!probe.chop.empty()) set_source_dc(work, probe.chop, probe.chop_on, "chop drive");

    SweepResult sweep = dc_sweep(work, probe.vdd, vdd_grid, config);

    SupplyRange range;
    range.vdd = sweep.values;
    range.imirr.reserve(sweep.points.size());
    for (const auto& point : sweep.points) {
        range.imirr.push_back(point ? std::abs(point->current_of(probe.sense)) : 0.0);
    }
    if (iref > 0.0) {
        const Real threshold = 0.98 * iref;
        for (std::size_t i = 0; i < range.vdd.size(); ++i) {
            if (range.imirr[i] < threshold) continue;
            if (!range.vmin_found || range.vdd[i] < range.vmin) range.vmin = range.vdd[i];
            range.vmin_found = true;
        }
    }
    return range;
}

SupplyRange supply_range(Branch branch, Real iref, const SweepGrid& vdd_grid,
                         const NewtonConfig& config) {
    return supply_range(branch_circuit(branch), branch_probe(branch), iref, vdd_grid, config);
}

// ============================================================================
// Pulse metrics
// ============================================================================

PulseMetrics pulse_metrics(const TraceSet& trace, std::string_view signal,
                           const FlatTopWindow& window) {
    const std::vector<Real>& s = trace.signal(signal);
    const std::vector<Real>& t = trace.time;
    const std::size_t n = s.size();
    if (n < 3) {
        throw Error(ErrorKind::validation,
                    "trace of signal '" + std::string(signal) + "' is too short to measure");
    }

    const Real baseline = s[0];
    std::size_t peak_index = 0;
    Real peak_abs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Real dev = std::abs(s[i] - baseline);
        if (dev > peak_abs) {
            peak_abs = dev;
            peak_index = i;
        }
    }
    if (peak_abs == 0.0) {
        throw Error(ErrorKind::validation,
                    "signal '" + std::string(signal) + "' never leaves its baseline");
    }
    const Real polarity = s[peak_index] >= baseline ? 1.0 : -1.0;

    std::vector<Real> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = polarity * (s[i] - baseline);
    const Real peak = d[peak_index];

    // Robust flat-top reference: deriving the window from the raw peak would
    // let a short overshoot spike capture the window onto itself and hide the
    // very overshoot being measured. Take the median deviation across the
    // active extent of the pulse instead; a spike is short next to the flat
    // top, so the median lands on the flat level.
    const Real active = 0.1 * peak;
    std::size_t lo = 0;
    while (lo < n && d[lo] < active) ++lo;
    std::size_t hi = n - 1;
    while (hi > lo && d[hi] < active) --hi;
    std::vector<Real> body(d.begin() + static_cast<std::ptrdiff_t>(lo),
                           d.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    std::nth_element(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(body.size() / 2),
                     body.end());
    const Real reference = std::max(body[body.size() / 2], active);

    // Pulse extent from the level_fraction crossings of the reference, then
    // the central central_fraction of that extent becomes the flat-top window.
    const Real level = window.level_fraction * reference;
    std::size_t first_hi = peak_index;
    while (first_hi > 0 && d[first_hi - 1] >= level) --first_hi;
    for (std::size_t i = 0; i < first_hi; ++i) {
        if (d[i] >= level) {
            first_hi = i;
            break;
        }
    }
    std::size_t last_hi = peak_index;
    for (std::size_t i = n; i-- > peak_index;) {
        if (d[i] >= level) {
            last_hi = i;
            break;
        }
    }
    const Real mid = 0.5 * (t[first_hi] + t[last_hi]);
    const Real half = 0.5 * window.central_fraction * (t[last_hi] - t[first_hi]);
    const Real w0 = mid - half;
    const Real w1 = mid + half;

    Real sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (t[i] < w0 || t[i] > w1) continue;
        sum += s[i];
        ++count;
    }
    PulseMetrics metrics;
    metrics.amplitude = count > 0 ? sum / static_cast<Real>(count) : s[peak_index];
    const Real amp_dev = polarity * (metrics.amplitude - baseline);
    if (amp_dev <= 0.0) {
        throw Error(ErrorKind::validation,
                    "signal '" + std::string(signal) + "' has no measurable pulse amplitude");
    }

    // Rising-edge timing from interpolated 10% / 90% crossings.
    auto first_crossing = [&](Real threshold, std::size_t from) {
        for (std::size_t i = from + 1; i < n; ++i) {
            if (d[i - 1] < threshold && d[i] >= threshold) {
                const Real frac = (threshold - d[i - 1]) / (d[i] - d[i - 1]);
                return std::make_pair(t[i - 1] + frac * (t[i] - t[i - 1]), i);
            }
        }
        return std::make_pair(t[from], from);
    };
    auto [t10, i10] = first_crossing(0.1 * amp_dev, 0);
    auto [t90, i90] = first_crossing(0.9 * amp_dev, i10 > 0 ? i10 - 1 : 0);
    (void)i90;
    metrics.rise_10_90 = t90 - t10;

    metrics.overshoot_pct = std::max(0.0, (peak - amp_dev) / amp_dev * 100.0);

    Real last_violation = t10;
    for (std::size_t i = 0; i < n; ++i) {
        if (t[i] < t10 || t[i] > w1) continue;
        if (std::abs(d[i] - amp_dev) > 0.01 * amp_dev) last_violation = t[i];
    }
    metrics.settle_time = last_violation - t10;
    return metrics;
}

// ============================================================================
// Transient analyses
// ============================================================================

MirrorReport mirror_factor_transient(Branch branch, const std::vector<Real>& iref_grid, Real vdd,
                                     const NewtonConfig& config) {
    std::vector<Real> grid = sorted_positive_grid(iref_grid, "reference-current");
    const Circuit base = branch_circuit(branch);
    const MirrorProbe probe = branch_probe(branch);
    const ChopLevels levels = chop_levels(branch, vdd);

    MirrorReport report;
    report.rows.reserve(grid.size());
    for (Real iref : grid) {
        Circuit work = base;
        set_source_dc(work, probe.vdd, vdd, "supply");
        set_source_dc(work, probe.iref, iref, "reference source");

        Element& chop = named_element(work, probe.chop, "chop drive");
        Waveform pulse = chop.waveform;
        pulse.v1 = levels.idle;
        pulse.v2 = levels.active;
        chop.waveform = pulse;

        const Real dt = pulse.rise / 50.0;
        const Real tstop = pulse.delay + 2.0 * pulse.rise + pulse.width + pulse.fall;

        MirrorRow row;
        row.iref = iref;
        try {
            TraceSet trace = transient(work, tstop, dt, TransientMethod::trapezoidal, config);
            PulseMetrics metrics = pulse_metrics(trace, "i(" + probe.sense + ")");
            row.imirr = std::abs(metrics.amplitude);
            row.factor = row.imirr / iref;
            row.deviation_pct = std::abs(row.factor - 1.0) * 100.0;
        } catch (const Error& err) {
            if (err.kind != ErrorKind::solver) throw;
            row.valid = false;
        }
        report.rows.push_back(row);
    }
    return report;
}

std::vector<RisePoint> rise_time_family(Branch branch, Real iref,
                                        const std::vector<Real>& chop_rise_grid, Real vdd,
                                        const NewtonConfig& config) {
    std::vector<Real> grid = sorted_positive_grid(chop_rise_grid, "chop-rise");
    if (iref <= 0.0) {
        throw Error(ErrorKind::validation, "reference current must be positive");
    }
    const Circuit base = branch_circuit(branch);
    const MirrorProbe probe = branch_probe(branch);
    const ChopLevels levels = chop_levels(branch, vdd);

    std::vector<RisePoint> family;
    family.reserve(grid.size());
    for (Real rise : grid) {
        Circuit work = base;
        set_source_dc(work, probe.vdd, vdd, "supply");
        set_source_dc(work, probe.iref, iref, "reference source");

        Element& chop = named_element(work, probe.chop, "chop drive");
        Waveform pulse = chop.waveform;
        pulse.v1 = levels.idle;
        pulse.v2 = levels.active;
        pulse.delay = rise;
        pulse.rise = rise;
        pulse.fall = rise;
        pulse.period = 0.0;
        chop.waveform = pulse;

        const Real dt = rise / 50.0;
        const Real tstop = pulse.delay + 2.0 * pulse.rise + pulse.width + pulse.fall;

        TraceSet trace = transient(work, tstop, dt, TransientMethod::trapezoidal, config);
        RisePoint point;
        point.chop_rise = rise;
        point.metrics = pulse_metrics(trace, "i(" + probe.sense + ")");
        family.push_back(point);
    }
    return family;
}

// ============================================================================
// Buffer experiment
// ============================================================================

BufferResult buffer_experiment(const BufferOptions& options, const NewtonConfig& config) {
    if (options.iref_set <= 0.0 || options.iref_reset <= 0.0) {
        throw Error(ErrorKind::validation, "reference currents must be positive");
    }
    if (options.vdd <= 0.0) throw Error(ErrorKind::validation, "supply must be positive");
    if (options.chop_delay < 0.0) {
        throw Error(ErrorKind::validation, "chop delay must be non-negative");
    }

    Circuit work = parse_circuit(bundled_netlist("full_2m1r1b"));
    set_source_dc(work, "vdd", options.vdd, "supply");
    set_source_dc(work, "irefset", options.iref_set, "set reference source");
    set_source_dc(work, "irefres", options.iref_reset, "reset reference source");

    Element& chop_set = named_element(work, "vchopset", "set chop drive");
    Element& chop_reset = named_element(work, "vchopres", "reset chop drive");
    const Waveform timing = chop_set.waveform;

    Waveform set_pulse = timing;
    Waveform reset_pulse = timing;
    if (options.chops_active) {
        set_pulse.v1 = options.vdd;
        set_pulse.v2 = 0.0;
        reset_pulse.v1 = 0.0;
        reset_pulse.v2 = options.vdd;
        reset_pulse.delay = timing.delay + options.chop_delay;
        chop_set.waveform = set_pulse;
        chop_reset.waveform = reset_pulse;
    } else {
        chop_set.waveform = waveform_dc(options.vdd);
        chop_reset.waveform = waveform_dc(0.0);
    }

    if (options.pad_capacitance >= 0.0) {
        named_element(work, "cpad", "pad capacitance").capacitance = options.pad_capacitance;
    }

    const Real dt = options.dt > 0.0 ? options.dt : timing.rise / 50.0;
    const Real tstop = options.tstop > 0.0 ? options.tstop : timing.delay + timing.period;

    BufferResult result;
    result.trace = transient(work, tstop, dt, TransientMethod::trapezoidal, config);
    result.probe = "v(bufout)";

    if (options.chops_active) {
        result.overlap_begin = std::max(set_pulse.delay + set_pulse.rise,
                                        reset_pulse.delay + reset_pulse.rise);
        result.overlap_end = std::min(set_pulse.delay + set_pulse.rise + set_pulse.width,
                                      reset_pulse.delay + reset_pulse.rise + reset_pulse.width);
        result.overlap_end = std::min(result.overlap_end, tstop);
        if (result.overlap_end <= result.overlap_begin) {
            throw Error(ErrorKind::validation,
                        "chop pulses do not overlap; reduce the chop delay");
        }
    } else {
        result.overlap_begin = 0.0;
        result.overlap_end = tstop;
    }

    const std::vector<Real>& out = result.trace.signal(result.probe);
    Real sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Real ti = result.trace.time[i];
        if (ti < result.overlap_begin || ti > result.overlap_end) continue;
        sum += out[i];
        ++count;
    }
    if (count == 0) {
        throw Error(ErrorKind::validation, "no trace samples inside the chop overlap window");
    }
    result.plateau_mean = sum / static_cast<Real>(count);

    const Real tolerance = 0.05 * std::abs(result.plateau_mean) + 1e-9;
    std::size_t flat = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Real ti = result.trace.time[i];
        if (ti < result.overlap_begin || ti > result.overlap_end) continue;
        if (std::abs(out[i] - result.plateau_mean) <= tolerance) ++flat;
    }
    result.plateau_flat_fraction = static_cast<Real>(flat) / static_cast<Real>(count);
    result.final_value = out.back();
    return result;
}

// ============================================================================
// CSV writers
// ============================================================================

void write_mirror_csv(std::ostream& out, const MirrorReport& report) {
    out << "iref,imirr,factor,deviation_pct\n";
    for (const MirrorRow& row : report.rows) {
        out << fmt_real(row.iref) << ',' << fmt_real(row.imirr) << ',' << fmt_real(row.factor)
            << ',' << fmt_real((row.factor - 1.0) * 100.0) << '\n';
    }
}

void write_supply_csv(std::ostream& out, const SupplyRange& range) {
    out << "vdd,imirr\n";
    for (std::size_t i = 0; i < range.vdd.size(); ++i) {
        out << fmt_real(range.vdd[i]) << ',' << fmt_real(range.imirr[i]) << '\n';
    }
}

void write_rise_csv(std::ostream& out, const std::vector<RisePoint>& family) {
    out << "rise,amplitude,rise_10_90,overshoot_pct\n";
    for (const RisePoint& point : family) {
        out << fmt_real(point.chop_rise) << ',' << fmt_real(point.metrics.amplitude) << ','
            << fmt_real(point.metrics.rise_10_90) << ',' << fmt_real(point.metrics.overshoot_pct)
            << '\n';
    }
}

void write_trace_csv(std::ostream& out, const TraceSet& trace) {
    out << "time";
    for (const std::string& name : trace.signal_names) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < trace.time.size(); ++i) {
        out << fmt_real(trace.time[i]);
        for (const auto& series : trace.samples) out << ',' << fmt_real(series[i]);
        out << '\n';
    }
}

} // namespace mirrorsim
