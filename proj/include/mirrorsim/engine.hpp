#pragma once

// MNA assembly and solution: DC operating point via damped Newton with
// gmin-ladder and source-stepping homotopies, warm-started DC sweeps, and
// fixed-step transient integration with companion models.
//
// Unknown ordering: non-ground node voltages first (node index 1..N-1 maps to
// unknown 0..N-2), then one branch current per voltage-defined element
// (voltage sources and buffers) in element order.
//
// Branch current conventions, reported per element by name:
//   resistor / capacitor / rram  current entering the first node's terminal
//   mosfet                       drain terminal current (negative for a
//                                conducting PMOS)
//   vsource                      current entering the positive terminal and
//                                leaving the negative one (a sourcing battery
//                                therefore reads negative)
//   isource                      the programmed value (flows n+ -> n-)
//   buffer                       current delivered into the output node

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mirrorsim/devices.hpp"
#include "mirrorsim/netlist.hpp"

namespace mirrorsim {

// ============================================================================
// Dense linear algebra
// ============================================================================

/// Row-major dense square matrix.
struct Matrix {
    Index n = 0;
    std::vector<Real> a;

    Matrix() = default;
    explicit Matrix(Index size) : n(size), a(static_cast<size_t>(size) * size, 0.0) {}

    [[nodiscard]] Real& at(Index i, Index j) { return a[static_cast<size_t>(i) * n + j]; }
    [[nodiscard]] Real at(Index i, Index j) const { return a[static_cast<size_t>(i) * n + j]; }
};

/// Solve A x = b by LU with partial pivoting. Throws Error(solver) naming the
/// pivot index when the matrix is singular to working precision.
[[nodiscard]] std::vector<Real> linear_solve(const Matrix& matrix, const std::vector<Real>& rhs);

/// One stamped linearization of the circuit at a trial point.
struct MnaSystem {
    Index n = 0;
    Matrix matrix;
    std::vector<Real> rhs;
};

// ============================================================================
// Newton configuration
// ============================================================================

/// Which continuation finally produced the reported operating point.
enum class HomotopyUsed { direct, gmin_ladder, source_stepping };

struct NewtonConfig {
    Real abstol = 1e-9;   ///< A, absolute KCL residual floor
    Real reltol = 1e-6;   ///< relative tolerance on currents and voltages
    Real vntol = 1e-6;    ///< V, node-voltage update floor
    int max_iter = 100;
    Real vstep_limit = 0.5;   ///< V, max node-voltage change per iteration
    Real gmin_floor = 1e-12;  ///< S, always-on node-to-ground leak

    /// Continuation ladders, tried in order after a direct failure.
    std::vector<Real> gmin_ladder = {1e-3, 1e-4, 1e-5, 1e-6, 1e-7,
                                     1e-8, 1e-9, 1e-10, 1e-11, 1e-12};
    std::vector<Real> source_fractions = {0.1, 0.2, 0.3, 0.4, 0.5,
                                          0.6, 0.7, 0.8, 0.9, 1.0};
};

// ============================================================================
// Solution containers
// ============================================================================

/// Converged DC solution. Self-contained: carries the node and element names
/// so lookups do not need the originating circuit.
struct OperatingPoint {
    std::vector<std::string> node_names;   ///< [0] is ground
    std::vector<Real> v;                   ///< per node, v[0] == 0
    std::vector<std::string> element_names;
    std::vector<Real> element_current;     ///< per element, conventions above
    std::vector<MosRegion> mos_region;     ///< per element, cutoff when not a mosfet

    int iterations = 0;
    HomotopyUsed homotopy = HomotopyUsed::direct;
    Real worst_residual = 0.0;        ///< A, largest per-node KCL residual
    Real worst_residual_bound = 0.0;  ///< A, tolerance bound at that node
    std::string worst_residual_node;

    [[nodiscard]] Real voltage_of(std::string_view node) const;
    [[nodiscard]] Real current_of(std::string_view element) const;
    [[nodiscard]] MosRegion region_of(std::string_view element) const;
};

/// Time-domain solution. Signals are node voltages `v(<node>)` followed by
/// element branch currents `i(<element>)`; RRAM state trajectories are kept
/// alongside under the element's name.
struct TraceSet {
    std::vector<Real> time;
    std::vector<std::string> signal_names;
    std::vector<std::vector<Real>> samples;  ///< samples[k] parallels time

    std::vector<std::string> rram_names;
    std::vector<std::vector<Real>> rram_state;

    Real max_kcl_residual = 0.0;  ///< worst per-node residual over all steps
    Real max_kcl_bound = 0.0;     ///< tolerance bound at that worst point

    [[nodiscard]] const std::vector<Real>& signal(std::string_view name) const;
};

// ============================================================================
// Analyses
// ============================================================================

/// Stamp one Newton linearization at the trial point `x` (unknown ordering as
/// documented above; pass an empty vector for the all-zero point). The rhs is
/// the negated KCL/KVL residual, so solving gives the Newton update.
[[nodiscard]] MnaSystem stamp_operating_point(const Circuit& circuit,
                                              const std::vector<Real>& x = {},
                                              const NewtonConfig& config = {});

/// DC operating point with all waveform sources evaluated at t = 0. Tries a
/// direct damped Newton first, then the gmin ladder, then source stepping;
/// throws Error(solver) naming the worst-residual node when all fail.
[[nodiscard]] OperatingPoint solve_op(const Circuit& circuit, const NewtonConfig& config = {},
                                      const OperatingPoint* warm_start = nullptr);

struct SweepGrid {
    Real start = 0.0;
    Real stop = 0.0;
    Real step = 0.0;
};

/// One grid point of a DC sweep; `op` is empty when Newton failed there.
struct SweepResult {
    std::string source;
    std::vector<Real> values;
    std::vector<std::optional<OperatingPoint>> points;
};

/// Sweep the DC level of one independent source, warm-starting each point
/// from the previous converged one. Failed points are recorded as gaps and
/// the sweep continues.
[[nodiscard]] SweepResult dc_sweep(const Circuit& circuit, std::string_view source,
                                   const SweepGrid& grid, const NewtonConfig& config = {});

enum class TransientMethod { backward_euler, trapezoidal };

/// Fixed-step transient from a t = 0 operating point. Capacitors become
/// per-method companion models; RRAM states advance explicitly after each
/// accepted step using the step's resolved device voltage.
[[nodiscard]] TraceSet transient(const Circuit& circuit, Real tstop, Real dt,
                                 TransientMethod method = TransientMethod::trapezoidal,
                                 const NewtonConfig& config = {});

} // namespace mirrorsim
