#include "mirrorsim/bundled.hpp"

#include "mirrorsim/error.hpp"

#include <array>

namespace mirrorsim {

// ============================================================================
// Embedded netlist texts
// ============================================================================
//
// These strings are byte-identical copies of the files under netlists/.
// A unit test diffs them against the files so the two cannot drift apart.

namespace {

constexpr const char* k_set_branch = R"(* SET branch of the 2M1R1B current-pulse generator.
* Reference leg: vdd -> m4 (switch, gate grounded, deep triode) -> m6 (diode)
*                -> iref sink. The leg conducts whenever vdd is up, so the
*                mirror bias node g67 is always defined.
* Output leg:    vdd -> m5 (switch, gate driven by vchop, active low) -> m7
*                (mirror output) -> m0 (diode load) -> rsense (scope, 50 ohm).
* m4 and m5 carry equal currents when both are on, so their drops match and
* the m6:m7 source voltages track. The residual mirror error is the drain
* mismatch: v(g67) is regulated by the current sink, v(d7) by the diode m0.

.model pmm pmos vth=-0.7 kp=60u lambda=0.005
.model pch pmos vth=-0.7 kp=60u lambda=0.05
.model nmm nmos vth=0.7 kp=170u lambda=0.005

m4 s6 0 vdd vdd pch w=50u l=0.5u
m6 g67 g67 s6 s6 pmm w=1000u l=0.5u
m5 s7 chop vdd vdd pch w=50u l=0.5u
m7 d7 g67 s7 s7 pmm w=1000u l=0.5u
m0 d7 d7 vo vo nmm w=2u l=4.8u
rsense vo 0 50

iref g67 0 dc 400u
vdd vdd 0 dc 5
vchop chop 0 pulse(5 0 1u 1u 1u 10u 20u)
.end
)";

constexpr const char* k_reset_branch = R"(* RESET branch of the 2M1R1B current-pulse generator.
* Reference leg: iref sources into m9 (diode) -> m11 (switch, gate tied to
*                the vdd node, always on) -> rbal -> ground. rbal matches the
*                scope resistor in the output leg so both mirror sources sit
*                at the same potential and source degeneration cancels.
* Output leg:    vdd -> m3 (diode, generates the bias reused by the full
*                circuit) -> m8 (mirror output) -> m10 (switch, gate driven
*                by vchop, active high) -> rsense (scope, 50 ohm).
* cpar models the parasitic capacitance at the switch drain node (m8 source).
* While the chop is low that node floats one threshold below the mirror gate;
* at turn-on the stored charge dumps through m10 straight into rsense, which
* reproduces the rising-edge current overshoot. It defaults to zero (ideal).

.model nmm nmos vth=0.7 kp=170u lambda=0.005
.model nch nmos vth=0.7 kp=170u lambda=0.05
.model pmm pmos vth=-0.7 kp=60u lambda=0.005

iref vdd g89 dc 400u
m9 g89 g89 s9 s9 nmm w=8u l=2u
m11 s9 vdd n11 n11 nch w=50u l=0.5u
rbal n11 0 50

m3 dm dm vdd vdd pmm w=3u l=2u
m8 dm g89 s8 s8 nmm w=8u l=2u
m10 s8 chop n10 n10 nch w=50u l=0.5u
rsense n10 0 50
cpar s8 0 0

vdd vdd 0 dc 5
vchop chop 0 pulse(0 5 1u 1u 1u 10u 20u)
.end
)";

constexpr const char* k_full_2m1r1b = R"(* Full 2M1R1B circuit: SET branch, RESET branch, one RRAM cell, one buffer.
* The SET pulse is copied by the n-mirror m0:m1, which sinks current from the
* RRAM bottom electrode (rbot). The RESET pulse is copied by the p-mirror
* m3:m2, which sources current into the RRAM top electrode (rtop). With both
* chops active the two mirrors form a series path through the RRAM and the
* read node rbot settles near 2 V with m1 and m2 both saturated.
* The unity-gain buffer senses rbot (the bottom-electrode pad). cpad models
* the pad parasitic: after the pulses end, rbot decays through rbleed with
* a time constant of rbleed*cpad. rload is the high-impedance scope input
* at the buffer output.

.model pmm pmos vth=-0.7 kp=60u lambda=0.005
.model pch pmos vth=-0.7 kp=60u lambda=0.05
.model nmm nmos vth=0.7 kp=170u lambda=0.005
.model nch nmos vth=0.7 kp=170u lambda=0.05
.model mem1 rram ron=5k roff=100k vset=1.2 vreset=-1 tauset=10u taureset=10u

* SET branch (reference leg, then output leg into the diode m0)
m4 s6 0 vdd vdd pch w=50u l=0.5u
m6 g67 g67 s6 s6 pmm w=1000u l=0.5u
m5 s7 chopset vdd vdd pch w=50u l=0.5u
m7 d7 g67 s7 s7 pmm w=1000u l=0.5u
m0 d7 d7 0 0 nmm w=2u l=4.8u
irefset g67 0 dc 100u
vchopset chopset 0 pulse(5 0 1u 1u 1u 10u 20u)

* SET output mirror: m1 sinks the pulse from the RRAM bottom electrode
m1 rbot d7 0 0 nmm w=2u l=4.8u

* RESET branch (reference leg, then output leg through the diode m3)
irefres vdd g89 dc 100u
m9 g89 g89 s9 s9 nmm w=8u l=2u
m11 s9 vdd 0 0 nch w=50u l=0.5u
m3 dm dm vdd vdd pmm w=3u l=2u
m8 dm g89 s8 s8 nmm w=8u l=2u
m10 s8 chopres 0 0 nch w=50u l=0.5u
vchopres chopres 0 pulse(0 5 2u 1u 1u 10u 20u)

* RESET output mirror: m2 sources the pulse into the RRAM top electrode
m2 rtop dm vdd vdd pmm w=3u l=2u

* Memory cell, bottom-electrode pad, buffer, and scope load
xmem rtop rbot mem1 x0=1
cpad rbot 0 0
rbleed rbot 0 10meg
xbuf rbot bufout buf cin=0
rload bufout 0 1meg

vdd vdd 0 dc 5
.end
)";

constexpr const char* k_cascode_mirror = R"(* Low-voltage cascode n-mirror. The cascode pair (mc0, mc1) pins the drains
* of the bottom pair (mb0, mb1) to the same voltage, so the copy error from
* channel-length modulation nearly vanishes even with a deliberately large
* lambda. A plain two-transistor mirror built from the same model would show
* a copy error of several percent at v(out) = 2 V.

.model ncas nmos vth=0.7 kp=170u lambda=0.05

iref 0 nref dc 100u
mc0 nref nb d0 d0 ncas w=20u l=1u
mb0 d0 nref 0 0 ncas w=20u l=1u

mc1 out nb d1 d1 ncas w=20u l=1u
mb1 d1 nref 0 0 ncas w=20u l=1u

vbias nb 0 dc 1.5
vout out 0 dc 2
.end
)";

struct BundledEntry {
    const char* name;
    const char* text;
};

constexpr std::array<BundledEntry, 4> k_bundled = {{
    {"set_branch", k_set_branch},
    {"reset_branch", k_reset_branch},
    {"full_2m1r1b", k_full_2m1r1b},
    {"cascode_mirror", k_cascode_mirror},
}};

} // namespace

std::string_view bundled_netlist(std::string_view name) {
    for (const auto& entry : k_bundled) {
        if (name == entry.name) return entry.text;
    }
    throw Error(ErrorKind::validation,
                "unknown bundled netlist '" + std::string(name) + "'");
}

const std::vector<std::string_view>& bundled_netlist_names() {
    static const std::vector<std::string_view> names = [] {
        std::vector<std::string_view> list;
        list.reserve(k_bundled.size());
        for (const auto& entry : k_bundled) list.push_back(entry.name);
        return list;
    }();
    return names;
}

} // namespace mirrorsim
