#pragma once

// Monte-Carlo device mismatch. Per-transistor threshold and gain deltas follow
// the Pelgrom law (sigma proportional to 1 / sqrt(W*L)) plus a shared per-die
// threshold offset. Draws come from a counter-based generator keyed by
// (seed, die, circuit, element name), so any (die, circuit) cell can be
// evaluated in isolation and in parallel with bit-identical results.

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "mirrorsim/analyses.hpp"
#include "mirrorsim/netlist.hpp"

namespace mirrorsim {

struct MismatchSpec {
    Real avt = 5e-9;           ///< V*m, sigma(dvth) = avt / sqrt(W*L)
    Real abeta = 1e-8;         ///< m, sigma(dbeta) = abeta / sqrt(W*L), relative
    Real die_sigma_vth = 5e-3; ///< V, shared per-die threshold offset
    std::uint64_t seed = 1;
};

struct MosDeltas {
    Real dvth = 0.0;
    Real dbeta = 0.0;
};

/// One delta pair per circuit element (zero for non-mosfets). A pure function
/// of (spec.seed, die, circuit_index, element name); no sequential RNG state.
[[nodiscard]] std::vector<MosDeltas> sample_instance_deltas(const MismatchSpec& spec,
                                                            const Circuit& circuit, int die,
                                                            int circuit_index);

// ============================================================================
// Wafer-level study
// ============================================================================

struct WaferCell {
    int die_x = 0;
    int die_y = 0;
    int circuit = 0;                ///< circuit index on the die
    Real mean_deviation_pct = 0.0;  ///< mean |factor - 1| * 100 over the iref grid
    bool valid = true;              ///< false when any grid point failed to solve
};

struct WaferMap {
    int grid = 16;  ///< raster is grid x grid, masked to a disc
    std::vector<WaferCell> cells;
};

struct WaferRunOptions {
    int dies = 180;
    int circuits_per_die = 2;
    std::vector<Real> iref_grid = {100e-6, 200e-6, 300e-6, 400e-6};
    Real vdd = 5.0;
    int jobs = 1;  ///< worker threads; results are identical for any value
};

/// Die coordinates on the raster: the `dies` sites nearest the wafer center,
/// emitted in row-major order. Deterministic for fixed (dies, grid).
[[nodiscard]] std::vector<std::pair<int, int>> wafer_sites(int dies, int grid = 16);

/// Sample mismatch for every (die, circuit) cell, run the DC mirror analysis
/// over the iref grid, and record the mean absolute deviation per cell.
[[nodiscard]] WaferMap wafer_run(Branch branch, const MismatchSpec& spec,
                                 const WaferRunOptions& options = {},
                                 const NewtonConfig& config = {});

/// CSV rows: die_x,die_y,circuit,mean_deviation_pct (invalid cells skipped).
void write_wafer_csv(std::ostream& out, const WaferMap& map);

} // namespace mirrorsim
