#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "mirrorsim/devices.hpp"
#include "mirrorsim/error.hpp"

using namespace mirrorsim;

namespace {

MosModelParams nmos_model(Real vth, Real kp, Real lambda) {
    MosModelParams m;
    m.polarity = MosPolarity::nmos;
    m.vth = vth;
    m.kp = kp;
    m.lambda = lambda;
    return m;
}

MosModelParams pmos_model(Real vth, Real kp, Real lambda) {
    MosModelParams m = nmos_model(vth, kp, lambda);
    m.polarity = MosPolarity::pmos;
    return m;
}

MosInstance geometry(Real w, Real l) {
    MosInstance inst;
    inst.w = w;
    inst.l = l;
    return inst;
}

} // namespace

// ============================================================================
// Square-law hand values
// ============================================================================

TEST_CASE("square law regions match hand evaluation") {
    const MosInstance wl10 = geometry(10e-6, 1e-6);

    SUBCASE("below threshold the device is cut off") {
        const MosEval e = mos_eval(nmos_model(0.5, 1e-4, 0.0), wl10, 0.0, 2.0);
        CHECK(e.id == 0.0);
        CHECK(e.gm == 0.0);
        CHECK(e.region == MosRegion::cutoff);
    }

    SUBCASE("saturation without channel-length modulation") {
        // id = 1/2 * 1e-4 * 10 * (1.0 - 0.5)^2 = 1.25e-4 A
        const MosEval e = mos_eval(nmos_model(0.5, 1e-4, 0.0), wl10, 1.0, 2.0);
        CHECK(e.region == MosRegion::saturation);
        CHECK(e.id == doctest::Approx(1.25e-4).epsilon(1e-12));
    }

    SUBCASE("channel-length modulation scales by (1 + lambda vds)") {
        const MosEval e = mos_eval(nmos_model(0.5, 1e-4, 0.1), wl10, 1.0, 2.0);
        CHECK(e.region == MosRegion::saturation);
        CHECK(e.id == doctest::Approx(1.25e-4 * 1.2).epsilon(1e-12));
    }

    SUBCASE("triode current follows the full quadratic") {
        // vov = 1.0, vds = 0.4: id = 1e-3 * (1.0*0.4 - 0.08) = 3.2e-4 A
        const MosEval e = mos_eval(nmos_model(0.5, 1e-4, 0.0), wl10, 1.5, 0.4);
        CHECK(e.region == MosRegion::triode);
        CHECK(e.id == doctest::Approx(3.2e-4).epsilon(1e-12));
    }

    SUBCASE("mismatch deltas shift threshold and scale gain") {
        MosInstance inst = wl10;
        inst.dvth = 0.2; // vov becomes 1.0 - 0.7 = 0.3
        const MosEval shifted = mos_eval(nmos_model(0.5, 1e-4, 0.0), inst, 1.0, 2.0);
        CHECK(shifted.id == doctest::Approx(0.5 * 1e-3 * 0.09).epsilon(1e-12));

        inst.dvth = 0.0;
        inst.dbeta = 0.5;
        const MosEval scaled = mos_eval(nmos_model(0.5, 1e-4, 0.0), inst, 1.0, 2.0);
        CHECK(scaled.id == doctest::Approx(1.5 * 1.25e-4).epsilon(1e-12));
    }

    SUBCASE("non-finite input is rejected") {
        CHECK_THROWS_AS((void)mos_eval(nmos_model(0.5, 1e-4, 0.0), wl10,
                                       std::numeric_limits<Real>::quiet_NaN(), 1.0),
                        Error);
    }
}

// ============================================================================
// Continuity across region boundaries
// ============================================================================

TEST_CASE("drain current is continuous at the triode/saturation boundary") {
    const MosInstance unit = geometry(1.0, 1.0);
    const Real eps = 1e-9;

    SUBCASE("without channel-length modulation the parabola peak is flat") {
        const MosModelParams model = nmos_model(0.5, 1.0, 0.0);
        for (Real vgs : {0.8, 1.3, 2.0, 4.0}) {
            const Real vov = vgs - model.vth;
            const MosEval lo = mos_eval(model, unit, vgs, vov - eps);
            const MosEval hi = mos_eval(model, unit, vgs, vov + eps);
            CHECK(lo.region == MosRegion::triode);
            CHECK(hi.region == MosRegion::saturation);
            CHECK(std::abs(lo.id - hi.id) <= 1e-12);
        }
    }

    SUBCASE("with modulation the jump shrinks to the local slope") {
        const MosModelParams model = nmos_model(0.5, 1.0, 0.3);
        for (Real vgs : {0.8, 1.3, 2.0, 4.0}) {
            const Real vov = vgs - model.vth;
            const MosEval lo = mos_eval(model, unit, vgs, vov - eps);
            const MosEval hi = mos_eval(model, unit, vgs, vov + eps);
            // The samples straddle the boundary by eps each, so a continuous
            // current may differ by up to about 2 eps times the slope there.
            CHECK(std::abs(lo.id - hi.id) <= 2.1 * eps * hi.gds + 1e-15);
            // First derivatives stay continuous because (1 + lambda vds)
            // applies in both conducting regions.
            CHECK(std::abs(lo.gm - hi.gm) <= 1e-6 * std::abs(hi.gm) + 1e-12);
            CHECK(std::abs(lo.gds - hi.gds) <= 1e-6 * std::abs(hi.gds) + 1e-12);
        }
    }
}

TEST_CASE("drain current is continuous at the cutoff boundary") {
    const MosModelParams model = nmos_model(0.7, 170e-6, 0.05);
    const MosInstance inst = geometry(10e-6, 1e-6);
    const Real eps = 1e-9;
    for (Real vds : {0.1, 1.0, 3.0}) {
        const MosEval below = mos_eval(model, inst, model.vth - eps, vds);
        const MosEval above = mos_eval(model, inst, model.vth + eps, vds);
        CHECK(below.id == 0.0);
        CHECK(std::abs(above.id) <= 1e-12);
    }
}

// ============================================================================
// Derivative consistency
// ============================================================================

TEST_CASE("gm and gds match central finite differences on a 50x50 grid") {
    const MosModelParams model = nmos_model(0.7, 170e-6, 0.05);
    const MosInstance inst = geometry(10e-6, 1e-6);
    const Real h = 1e-6;
    const int n = 50;

    Real worst_gm = 0.0;
    Real worst_gds = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const Real vgs = 5.0 * i / (n - 1);
            const Real vds = 5.0 * j / (n - 1);
            const MosEval e = mos_eval(model, inst, vgs, vds);
            const Real fd_gm = (mos_eval(model, inst, vgs + h, vds).id -
                                mos_eval(model, inst, vgs - h, vds).id) /
                               (2.0 * h);
            const Real fd_gds = (mos_eval(model, inst, vgs, vds + h).id -
                                 mos_eval(model, inst, vgs, vds - h).id) /
                                (2.0 * h);
            const Real gm_rel = std::abs(e.gm - fd_gm) / std::max({std::abs(e.gm), 1e-9});
            const Real gds_rel = std::abs(e.gds - fd_gds) / std::max({std::abs(e.gds), 1e-9});
            worst_gm = std::max(worst_gm, gm_rel);
            worst_gds = std::max(worst_gds, gds_rel);
        }
    }
    CHECK(worst_gm <= 1e-6);
    CHECK(worst_gds <= 1e-6);
}

// ============================================================================
// Polarity symmetry
// ============================================================================

TEST_CASE("a PMOS with negated terminals mirrors the NMOS current") {
    const MosModelParams n = nmos_model(0.7, 170e-6, 0.05);
    const MosModelParams p = pmos_model(-0.7, 170e-6, 0.05);
    const MosInstance inst = geometry(10e-6, 1e-6);

    for (Real vd : {0.0, 0.5, 1.5, 3.0}) {
        for (Real vg : {0.0, 1.0, 2.5}) {
            for (Real vs : {0.0, 0.3}) {
                const MosEval en = mos_eval_terminal(n, inst, vd, vg, vs);
                const MosEval ep = mos_eval_terminal(p, inst, -vd, -vg, -vs);
                CHECK(ep.id == doctest::Approx(-en.id).epsilon(1e-12));
                CHECK(ep.region == en.region);
                // Transconductances stay positive for both polarities so the
                // MNA stamp treats them identically.
                CHECK(ep.gm == doctest::Approx(en.gm).epsilon(1e-12));
                CHECK(ep.gds == doctest::Approx(en.gds).epsilon(1e-12));
            }
        }
    }
}

// ============================================================================
// Mirror-ratio oracles
// ============================================================================

TEST_CASE("ideal mirror ratio is the geometry ratio") {
    CHECK(mirror_ratio_ideal(1e-6, 1e-6, 1e-6, 1e-6) == doctest::Approx(1.0));
    CHECK(mirror_ratio_ideal(1e-6, 1e-6, 2e-6, 1e-6) == doctest::Approx(2.0));
    // w1/l1 = 5, w0/l0 = 2 -> 2.5
    CHECK(mirror_ratio_ideal(2e-6, 1e-6, 5e-6, 1e-6) == doctest::Approx(2.5));
    CHECK_THROWS_AS((void)mirror_ratio_ideal(0.0, 1e-6, 1e-6, 1e-6), Error);
    CHECK_THROWS_AS((void)mirror_ratio_ideal(1e-6, -1e-6, 1e-6, 1e-6), Error);
}

TEST_CASE("mirror ratio with channel-length modulation") {
    SUBCASE("equal geometry, lambda 0.1, vds 1 vs 2") {
        CHECK(mirror_ratio_clm(1e-6, 1e-6, 1e-6, 1e-6, 0.1, 1.0, 2.0) ==
              doctest::Approx(1.2 / 1.1).epsilon(1e-12));
    }

    SUBCASE("matched drains reduce to the geometric ratio") {
        CHECK(mirror_ratio_clm(2e-6, 1e-6, 5e-6, 1e-6, 0.1, 1.7, 1.7) ==
              doctest::Approx(2.5).epsilon(1e-12));
    }

    SUBCASE("lambda 0 equals the ideal ratio for random geometry") {
        std::mt19937 rng(2024);
        std::uniform_real_distribution<Real> dim(0.1e-6, 50e-6);
        for (int k = 0; k < 200; ++k) {
            const Real w0 = dim(rng), l0 = dim(rng), w1 = dim(rng), l1 = dim(rng);
            CHECK(mirror_ratio_clm(w0, l0, w1, l1, 0.0, 1.0, 3.0) ==
                  doctest::Approx(mirror_ratio_ideal(w0, l0, w1, l1)).epsilon(1e-12));
        }
    }

    SUBCASE("a vanishing reference denominator is rejected") {
        CHECK_THROWS_AS((void)mirror_ratio_clm(1e-6, 1e-6, 1e-6, 1e-6, 0.5, -2.0, 1.0), Error);
    }
}

// ============================================================================
// Pulse waveforms
// ============================================================================

TEST_CASE("pulse waveform evaluates the documented trapezoid") {
    // 5 -> 0 pulse: delay 0, rise 1 us, width 10 us, fall 1 us, period 20 us.
    const Waveform w = waveform_pulse(5.0, 0.0, 0.0, 1e-6, 10e-6, 1e-6, 20e-6);

    CHECK(waveform_value(w, 0.0) == doctest::Approx(5.0));
    CHECK(waveform_value(w, 0.5e-6) == doctest::Approx(2.5));  // rise midpoint
    CHECK(waveform_value(w, 5e-6) == doctest::Approx(0.0));    // mid-width
    CHECK(waveform_value(w, 11.5e-6) == doctest::Approx(2.5)); // fall midpoint
    CHECK(waveform_value(w, 15e-6) == doctest::Approx(5.0));   // idle tail

    SUBCASE("periodic extension repeats the cycle") {
        for (Real t : {0.0, 0.3e-6, 2e-6, 7e-6, 11.2e-6, 14e-6}) {
            CHECK(waveform_value(w, t + 20e-6) == doctest::Approx(waveform_value(w, t)));
            CHECK(waveform_value(w, t + 60e-6) == doctest::Approx(waveform_value(w, t)));
        }
    }

    SUBCASE("single-shot waveforms hold v1 after one cycle") {
        const Waveform once = waveform_pulse(0.0, 1.0, 1e-6, 1e-6, 2e-6, 1e-6, 0.0);
        CHECK(waveform_value(once, 2.5e-6) == doctest::Approx(1.0));
        CHECK(waveform_value(once, 50e-6) == doctest::Approx(0.0));
    }

    SUBCASE("negative time clamps to t = 0") {
        CHECK(waveform_value(w, -1.0) == doctest::Approx(5.0));
    }

    SUBCASE("dc waveforms are constant") {
        const Waveform d = waveform_dc(3.3);
        CHECK(waveform_value(d, 0.0) == doctest::Approx(3.3));
        CHECK(waveform_value(d, 1.0) == doctest::Approx(3.3));
    }
}

// ============================================================================
// Behavioral RRAM
// ============================================================================

TEST_CASE("rram resistance interpolates monotonically between r_off and r_on") {
    const RramModelParams p; // 5 kOhm / 100 kOhm defaults
    CHECK(rram_resistance(p, RramState{1.0}) == doctest::Approx(p.r_on));
    CHECK(rram_resistance(p, RramState{0.0}) == doctest::Approx(p.r_off));

    Real previous = rram_resistance(p, RramState{0.0});
    for (int k = 1; k <= 20; ++k) {
        const Real r = rram_resistance(p, RramState{k / 20.0});
        CHECK(r < previous);
        previous = r;
    }
}

TEST_CASE("rram state kinetics") {
    const RramModelParams p;

    SUBCASE("voltages between the thresholds leave the state unchanged") {
        for (Real v : {-0.9, 0.0, 1.1}) {
            const RramState s = rram_step(p, RramState{0.4}, v, 1e-6);
            CHECK(s.x == doctest::Approx(0.4));
        }
    }

    SUBCASE("a full filament cannot grow further") {
        const RramState s = rram_step(p, RramState{1.0}, p.v_set + 3.0, p.tau_set);
        CHECK(s.x == doctest::Approx(1.0));
    }

    SUBCASE("one explicit Euler step of the set kinetics") {
        // dx = dt/tau_set * (v - v_set) = 1.0 from x = 0
        const RramState s = rram_step(p, RramState{0.0}, p.v_set + 1.0, p.tau_set);
        CHECK(s.x == doctest::Approx(1.0));

        const RramState partial = rram_step(p, RramState{0.3}, p.v_set + 0.5, p.tau_set / 10.0);
        CHECK(partial.x == doctest::Approx(0.35));
    }

    SUBCASE("reset drive erases toward x = 0 and clamps") {
        const RramState s = rram_step(p, RramState{1.0}, p.v_reset - 1.0, p.tau_reset);
        CHECK(s.x == doctest::Approx(0.0));
        const RramState clamped = rram_step(p, RramState{0.0}, p.v_reset - 5.0, p.tau_reset);
        CHECK(clamped.x == doctest::Approx(0.0));
    }

    SUBCASE("the state never leaves the unit interval under a random drive") {
        std::mt19937 rng(7);
        std::uniform_real_distribution<Real> volt(-4.0, 4.0);
        RramState s{0.5};
        for (int k = 0; k < 2000; ++k) {
            s = rram_step(p, s, volt(rng), 0.5e-6);
            CHECK(s.x >= 0.0);
            CHECK(s.x <= 1.0);
        }
    }
}
