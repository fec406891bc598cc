#pragma once

// Device models: level-1 (square-law) MOSFET, piecewise-linear pulse
// waveforms, and a behavioral RRAM with linear switching kinetics.
//
// Everything here is a pure function of its arguments; the engine owns
// all state except RramState, which the transient loop threads through
// rram_step explicitly.

#include <string>

namespace mirrorsim {

using Real = double;

// ============================================================================
// MOSFET
// ============================================================================

enum class MosPolarity { nmos, pmos };

enum class MosRegion { cutoff, triode, saturation };

/// Model-card parameters shared by all instances referencing the card.
struct MosModelParams {
    MosPolarity polarity = MosPolarity::nmos;
    Real vth = 0.7;    ///< threshold voltage [V]; negative for PMOS cards
    Real kp = 170e-6;  ///< transconductance parameter [A/V^2]
    Real lambda = 0.0; ///< channel-length modulation [1/V]
};

/// Per-instance geometry plus optional mismatch deltas.
///
/// dvth shifts the effective threshold (vth + dvth); dbeta scales the
/// current factor by (1 + dbeta). Both default to zero and are what the
/// Monte-Carlo layer perturbs.
struct MosInstance {
    Real w = 1e-6; ///< channel width [m]
    Real l = 1e-6; ///< channel length [m]
    Real dvth = 0.0;
    Real dbeta = 0.0;
};

/// Point evaluation of the square-law model.
///
/// Conventions: vgs/vds are the N-equivalent controlling voltages (for a
/// PMOS instance pass vsg/vsd, i.e. the sign-flipped terminal differences);
/// id flows drain->source. gm = did/dvgs, gds = did/dvds, both exact
/// partial derivatives of the region equations:
///
///   cutoff      (vov <= 0)   id = 0
///   triode      (vds <  vov) id = B (vov vds - vds^2/2)(1 + lambda vds)
///   saturation  (vds >= vov) id = B/2 vov^2 (1 + lambda vds)
///
/// with vov = vgs - (vth + dvth) and B = kp (1 + dbeta) w/l. The
/// (1 + lambda vds) factor applies in both conducting regions so id and
/// its first derivatives are continuous across vds = vov.
struct MosEval {
    Real id = 0.0;
    Real gm = 0.0;
    Real gds = 0.0;
    MosRegion region = MosRegion::cutoff;
};

[[nodiscard]] MosEval mos_eval(const MosModelParams& model, const MosInstance& inst,
                               Real vgs, Real vds);

/// As mos_eval, but in actual node-voltage convention for either polarity:
/// terminal voltages vd/vg/vs, current returned as the current flowing into
/// the drain terminal (negative for a conducting PMOS). gm and gds stay
/// positive for both polarities, which lets the MNA stamp treat N and P
/// identically.
[[nodiscard]] MosEval mos_eval_terminal(const MosModelParams& model, const MosInstance& inst,
                                        Real vd, Real vg, Real vs);

/// Geometric mirror gain of an output/reference transistor pair.
[[nodiscard]] Real mirror_ratio_ideal(Real w0, Real l0, Real w1, Real l1);

/// Mirror gain including channel-length modulation at the two operating
/// drain-source voltages:
///   (w1 l0)/(w0 l1) * (1 + lambda vds1)/(1 + lambda vds0)
[[nodiscard]] Real mirror_ratio_clm(Real w0, Real l0, Real w1, Real l1,
                                    Real lambda, Real vds0, Real vds1);

// ============================================================================
// Source waveforms
// ============================================================================

enum class WaveformKind { dc, pulse };

/// Piecewise-linear pulse train. For t < delay the value is v1; afterwards
/// the cycle (rise to v2, hold for width, fall to v1, idle until period)
/// repeats every `period` seconds. period <= 0 means single-shot: the value
/// holds at v1 after the first cycle completes.
struct Waveform {
    WaveformKind kind = WaveformKind::dc;
    Real dc = 0.0;

    Real v1 = 0.0;
    Real v2 = 0.0;
    Real delay = 0.0;
    Real rise = 0.0;
    Real width = 0.0;
    Real fall = 0.0;
    Real period = 0.0;
};

[[nodiscard]] Waveform waveform_dc(Real value);
[[nodiscard]] Waveform waveform_pulse(Real v1, Real v2, Real delay, Real rise,
                                      Real width, Real fall, Real period);

/// Value at time t (t < 0 is treated as t = 0).
[[nodiscard]] Real waveform_value(const Waveform& w, Real t);

// ============================================================================
// Behavioral RRAM
// ============================================================================

/// Linear-kinetics threshold-switching resistor. The internal state
/// x in [0,1] interpolates conductance between r_off (x=0) and r_on (x=1):
///
///   r(x) = r_on r_off / (x r_off + (1-x) r_on)
///
/// i.e. conductance is linear in x. Switching is driven by the applied
/// voltage (top minus bottom electrode) against the two thresholds:
///
///   dx = +dt/tau_set   * max(v - v_set,   0)   toward low resistance
///   dx = -dt/tau_reset * max(v_reset - v, 0)   toward high resistance
///
/// with v_set > 0 > v_reset, integrated by explicit Euler and clamped.
struct RramModelParams {
    Real r_on = 5e3;
    Real r_off = 100e3;
    Real v_set = 1.2;
    Real v_reset = -1.0;
    Real tau_set = 10e-6;
    Real tau_reset = 10e-6;
};

struct RramState {
    Real x = 0.0;
};

[[nodiscard]] Real rram_resistance(const RramModelParams& p, const RramState& s);

/// One explicit-Euler step of the state ODE under applied voltage v.
[[nodiscard]] RramState rram_step(const RramModelParams& p, RramState s, Real v, Real dt);

} // namespace mirrorsim
