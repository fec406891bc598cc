#pragma once

// Characterization layer on top of the solver: DC mirror factors, supply
// operation ranges, pulse metrics from traces, the rise-time family, and the
// full-circuit buffer read-out experiment. Each analysis clones the bundled
// branch circuit, overrides the relevant sources, and reduces the solver
// output to report rows.
//
// CSV formats (stable interfaces):
//   mirror reports   iref,imirr,factor,deviation_pct   (deviation signed)
//   supply range     vdd,imirr
//   rise family      rise,amplitude,rise_10_90,overshoot_pct
//   traces           time,v(<node>)...,i(<element>)...

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mirrorsim/engine.hpp"
#include "mirrorsim/netlist.hpp"

namespace mirrorsim {

/// Which current-pulse branch of the 2M1R1B circuit an analysis targets.
enum class Branch { set, reset };

// ============================================================================
// Report types
// ============================================================================

struct MirrorRow {
    Real iref = 0.0;           ///< A
    Real imirr = 0.0;          ///< A, magnitude of the sensed output current
    Real factor = 0.0;         ///< imirr / iref
    Real deviation_pct = 0.0;  ///< |factor - 1| * 100
    bool valid = true;         ///< false when the solver failed at this row
};

/// Rows sorted by iref. CSV rendering preserves the sign of (factor - 1).
struct MirrorReport {
    std::vector<MirrorRow> rows;
};

struct PulseMetrics {
    Real amplitude = 0.0;      ///< mean over the flat-top window
    Real rise_10_90 = 0.0;     ///< s, between 10% and 90% amplitude crossings
    Real overshoot_pct = 0.0;  ///< peak excess over amplitude, in percent
    Real settle_time = 0.0;    ///< s, from 10% crossing until within 1% of amplitude
};

/// Flat-top definition: the window spans the central `central_fraction` of the
/// interval between the `level_fraction` crossings of the pulse.
struct FlatTopWindow {
    Real level_fraction = 0.9;
    Real central_fraction = 0.5;
};

struct SupplyRange {
    std::vector<Real> vdd;
    std::vector<Real> imirr;   ///< magnitude, 0 recorded for failed points
    Real vmin = 0.0;           ///< smallest vdd with imirr >= 0.98 * iref
    bool vmin_found = false;
};

struct RisePoint {
    Real chop_rise = 0.0;  ///< s, commanded chop rise time
    PulseMetrics metrics;  ///< measured on the sensed output current
};

// ============================================================================
// Probe descriptions
// ============================================================================

/// Names the elements an analysis drives and observes inside a circuit.
/// `chop` may be empty when the circuit has no chop switch; otherwise its
/// waveform is replaced by a DC source at `chop_on` for DC analyses.
struct MirrorProbe {
    std::string iref = "iref";
    std::string vdd = "vdd";
    std::string chop = "vchop";
    Real chop_on = 0.0;
    std::string sense = "rsense";
};

/// Bundled circuit plus the canonical probe for one branch.
[[nodiscard]] Circuit branch_circuit(Branch branch);
[[nodiscard]] MirrorProbe branch_probe(Branch branch);

// ============================================================================
// DC analyses
// ============================================================================

/// Mirror factor at each reference current with the chop switch held on.
[[nodiscard]] MirrorReport mirror_factor_dc(const Circuit& circuit, const MirrorProbe& probe,
                                            const std::vector<Real>& iref_grid, Real vdd,
                                            const NewtonConfig& config = {});
[[nodiscard]] MirrorReport mirror_factor_dc(Branch branch, const std::vector<Real>& iref_grid,
                                            Real vdd, const NewtonConfig& config = {});

/// Output current versus supply voltage at a fixed reference current.
[[nodiscard]] SupplyRange supply_range(const Circuit& circuit, const MirrorProbe& probe,
                                       Real iref, const SweepGrid& vdd_grid,
                                       const NewtonConfig& config = {});
[[nodiscard]] SupplyRange supply_range(Branch branch, Real iref, const SweepGrid& vdd_grid,
                                       const NewtonConfig& config = {});

// ============================================================================
// Transient analyses
// ============================================================================

/// Reduce one trace signal to pulse metrics. Throws Error(validation) when the
/// signal never leaves its baseline (no pulse to measure).
[[nodiscard]] PulseMetrics pulse_metrics(const TraceSet& trace, std::string_view signal,
                                         const FlatTopWindow& window = {});

/// Mirror factor measured from transient flat-top amplitudes, one chop pulse
/// per reference current. Complements mirror_factor_dc for consistency checks.
[[nodiscard]] MirrorReport mirror_factor_transient(Branch branch,
                                                   const std::vector<Real>& iref_grid, Real vdd,
                                                   const NewtonConfig& config = {});

/// Output rise time for each commanded chop rise time (dt = rise / 50).
[[nodiscard]] std::vector<RisePoint> rise_time_family(Branch branch, Real iref,
                                                      const std::vector<Real>& chop_rise_grid,
                                                      Real vdd = 5.0,
                                                      const NewtonConfig& config = {});

// ============================================================================
// Full-circuit buffer experiment
// ============================================================================

struct BufferOptions {
    Real iref_set = 100e-6;    ///< A
    Real iref_reset = 100e-6;  ///< A
    Real vdd = 5.0;            ///< V
    Real vtail = 1.0;          ///< V, recorded for the manifest
    Real chop_delay = 1e-6;    ///< s, reset chop start relative to set chop start
    Real pad_capacitance = -1.0;  ///< F, overrides the netlist pad value when >= 0
    bool chops_active = true;  ///< false leaves both chop switches off
    Real dt = 0.0;             ///< s, 0 picks rise / 50
    Real tstop = 0.0;          ///< s, 0 picks one chop period plus margin
};

struct BufferResult {
    TraceSet trace;
    std::string probe;             ///< buffer output signal name in `trace`
    Real plateau_mean = 0.0;       ///< V, mean buffer output while both chops on
    Real plateau_flat_fraction = 0.0;  ///< fraction of overlap within 5% of the mean
    Real final_value = 0.0;        ///< V, buffer output at tstop
    Real overlap_begin = 0.0;      ///< s
    Real overlap_end = 0.0;        ///< s
};

/// Drive both branches of the full circuit and summarize the buffer read-out.
[[nodiscard]] BufferResult buffer_experiment(const BufferOptions& options = {},
                                             const NewtonConfig& config = {});

// ============================================================================
// CSV writers
// ============================================================================

void write_mirror_csv(std::ostream& out, const MirrorReport& report);
void write_supply_csv(std::ostream& out, const SupplyRange& range);
void write_rise_csv(std::ostream& out, const std::vector<RisePoint>& family);
void write_trace_csv(std::ostream& out, const TraceSet& trace);

} // namespace mirrorsim
