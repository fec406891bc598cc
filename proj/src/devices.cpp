#include "mirrorsim/devices.hpp"

#include <algorithm>
#include <cmath>

#include "mirrorsim/error.hpp"

namespace mirrorsim {

MosEval mos_eval(const MosModelParams& model, const MosInstance& inst, Real vgs, Real vds) {
    if (!std::isfinite(vgs) || !std::isfinite(vds))
        throw Error(ErrorKind::validation, "non-finite mosfet terminal voltage");
    MosEval out;
    const Real vth_eff = (model.polarity == MosPolarity::pmos ? -model.vth : model.vth) + inst.dvth;
    const Real vov = vgs - vth_eff;
    if (vov <= 0.0) {
        out.region = MosRegion::cutoff;
        return out;
    }
    const Real beta = model.kp * (1.0 + inst.dbeta) * (inst.w / inst.l);
    const Real clm = 1.0 + model.lambda * vds;
    if (vds < vov) {
        out.region = MosRegion::triode;
        const Real shape = vov * vds - 0.5 * vds * vds;
        out.id = beta * shape * clm;
        out.gm = beta * vds * clm;
        out.gds = beta * ((vov - vds) * clm + shape * model.lambda);
    } else {
        out.region = MosRegion::saturation;
        const Real shape = 0.5 * vov * vov;
        out.id = beta * shape * clm;
        out.gm = beta * vov * clm;
        out.gds = beta * shape * model.lambda;
    }
    return out;
}

MosEval mos_eval_terminal(const MosModelParams& model, const MosInstance& inst,
                          Real vd, Real vg, Real vs) {
    if (model.polarity == MosPolarity::nmos) {
        return mos_eval(model, inst, vg - vs, vd - vs);
    }
    // PMOS: evaluate the N-equivalent with flipped signs, then negate the
    // current. Derivatives w.r.t. the actual (vg-vs), (vd-vs) pick up two
    // sign flips and stay positive.
    MosEval e = mos_eval(model, inst, vs - vg, vs - vd);
    e.id = -e.id;
    return e;
}

Real mirror_ratio_ideal(Real w0, Real l0, Real w1, Real l1) {
    if (w0 <= 0.0 || l0 <= 0.0 || w1 <= 0.0 || l1 <= 0.0)
        throw Error(ErrorKind::validation, "mirror geometry must be positive");
    return (w1 / l1) / (w0 / l0);
}

Real mirror_ratio_clm(Real w0, Real l0, Real w1, Real l1, Real lambda, Real vds0, Real vds1) {
    const Real reference = 1.0 + lambda * vds0;
    if (reference == 0.0)
        throw Error(ErrorKind::validation, "reference transistor has zero (1 + lambda vds)");
    return mirror_ratio_ideal(w0, l0, w1, l1) * (1.0 + lambda * vds1) / reference;
}

Waveform waveform_dc(Real value) {
    Waveform w;
    w.kind = WaveformKind::dc;
    w.dc = value;
    return w;
}

Waveform waveform_pulse(Real v1, Real v2, Real delay, Real rise, Real width, Real fall,
                        Real period) {
    Waveform w;
    w.kind = WaveformKind::pulse;
    w.v1 = v1;
    w.v2 = v2;
    w.delay = delay;
    w.rise = rise;
    w.width = width;
    w.fall = fall;
    w.period = period;
    return w;
}

Real waveform_value(const Waveform& w, Real t) {
    if (w.kind == WaveformKind::dc) return w.dc;
    if (t < w.delay) return w.v1;
    Real tau = t - w.delay;
    const Real cycle = w.rise + w.width + w.fall;
    if (w.period > 0.0) {
        tau = std::fmod(tau, w.period);
    } else if (tau >= cycle) {
        return w.v1;
    }
    if (tau < w.rise) {
        return w.rise > 0.0 ? w.v1 + (w.v2 - w.v1) * (tau / w.rise) : w.v2;
    }
    tau -= w.rise;
    if (tau < w.width) return w.v2;
    tau -= w.width;
    if (tau < w.fall) {
        return w.fall > 0.0 ? w.v2 + (w.v1 - w.v2) * (tau / w.fall) : w.v1;
    }
    return w.v1;
}

Real rram_resistance(const RramModelParams& p, const RramState& s) {
    return p.r_on * p.r_off / (s.x * p.r_off + (1.0 - s.x) * p.r_on);
}

RramState rram_step(const RramModelParams& p, RramState s, Real v, Real dt) {
    if (v > p.v_set) {
        s.x += dt / p.tau_set * (v - p.v_set);
    } else if (v < p.v_reset) {
        s.x -= dt / p.tau_reset * (p.v_reset - v);
    }
    s.x = std::clamp(s.x, 0.0, 1.0);
    return s;
}

} // namespace mirrorsim
