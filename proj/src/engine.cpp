#include "mirrorsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "mirrorsim/error.hpp"

namespace mirrorsim {

// ============================================================================
// Dense LU with partial pivoting
// ============================================================================

std::vector<Real> linear_solve(const Matrix& matrix, const std::vector<Real>& rhs) {
    const Index n = matrix.n;
    if (rhs.size() != static_cast<size_t>(n))
        throw Error(ErrorKind::validation, "linear_solve: matrix/rhs size mismatch");
    if (n == 0) return {};

    Matrix lu = matrix;
    std::vector<Real> x = rhs;

    // Column scales from the original matrix; a pivot is "singular to working
    // precision" when it collapses far below its column's natural magnitude.
    std::vector<Real> colscale(static_cast<size_t>(n), 0.0);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            colscale[static_cast<size_t>(j)] =
                std::max(colscale[static_cast<size_t>(j)], std::abs(lu.at(i, j)));

    for (Index k = 0; k < n; ++k) {
        Index pivot = k;
        Real best = std::abs(lu.at(k, k));
        for (Index i = k + 1; i < n; ++i) {
            const Real cand = std::abs(lu.at(i, k));
            if (cand > best) {
                best = cand;
                pivot = i;
            }
        }
        const Real floor = colscale[static_cast<size_t>(k)] * 1e-14;
        if (best <= floor || best < std::numeric_limits<Real>::min())
            throw Error(ErrorKind::solver,
                        "singular matrix: no usable pivot at index " + std::to_string(k));
        if (pivot != k) {
            for (Index j = 0; j < n; ++j) std::swap(lu.at(k, j), lu.at(pivot, j));
            std::swap(x[static_cast<size_t>(k)], x[static_cast<size_t>(pivot)]);
        }
        const Real inv = 1.0 / lu.at(k, k);
        for (Index i = k + 1; i < n; ++i) {
            const Real f = lu.at(i, k) * inv;
            if (f == 0.0) continue;
            lu.at(i, k) = f;
            for (Index j = k + 1; j < n; ++j) lu.at(i, j) -= f * lu.at(k, j);
            x[static_cast<size_t>(i)] -= f * x[static_cast<size_t>(k)];
        }
    }
    for (Index k = n - 1; k >= 0; --k) {
        Real acc = x[static_cast<size_t>(k)];
        for (Index j = k + 1; j < n; ++j) acc -= lu.at(k, j) * x[static_cast<size_t>(j)];
        x[static_cast<size_t>(k)] = acc / lu.at(k, k);
    }
    return x;
}

// ============================================================================
// Assembly
// ============================================================================

namespace {

/// Per-capacitor companion model for one transient step: the element behaves
/// as i = g*(v1-v2) + ieq while the step is being solved.
struct CapCompanion {
    Real g = 0.0;
    Real ieq = 0.0;
};

struct EvalContext {
    Real time = 0.0;
    Real srcscale = 1.0;    ///< source-stepping fraction
    Real gmin_extra = 0.0;  ///< homotopy shunt on top of the floor
    bool ic_mode = false;   ///< stamp ic-capacitors as stiff Norton sources
    const std::vector<CapCompanion>* companions = nullptr;  ///< per element
    const std::vector<Real>* rram_conductance = nullptr;    ///< per element
};

/// Conductance of the stiff Norton equivalent that pins an ic-capacitor's
/// voltage during the t = 0 solve. Large enough that the pinning error is
/// nanovolts, small enough to keep the matrix well within double range.
constexpr Real k_ic_norton_g = 1e6;

struct EvalResult {
    std::vector<Real> residual;  ///< KCL rows in A, then constraint rows in V
    Matrix jacobian;
    std::vector<Real> element_current;
    std::vector<MosRegion> mos_region;
    std::vector<Real> node_scale;  ///< per node row: max incident |current|
};

class Assembler {
public:
    Assembler(const Circuit& circuit, const NewtonConfig& config)
        : c_(circuit), cfg_(config), branch_of_(circuit.elements.size(), -1) {
        const Index nv = static_cast<Index>(c_.node_names.size()) - 1;
        Index next = nv;
        for (size_t e = 0; e < c_.elements.size(); ++e) {
            const ElementKind k = c_.elements[e].kind;
            if (k == ElementKind::vsource || k == ElementKind::buffer) branch_of_[e] = next++;
        }
        n_ = next;
    }

    [[nodiscard]] Index n() const { return n_; }
    [[nodiscard]] Index node_rows() const {
        return static_cast<Index>(c_.node_names.size()) - 1;
    }
    [[nodiscard]] const Circuit& circuit() const { return c_; }

    void eval(const std::vector<Real>& x, const EvalContext& ctx, EvalResult& out) const {
        const size_t ne = c_.elements.size();
        out.residual.assign(static_cast<size_t>(n_), 0.0);
        if (out.jacobian.n != n_) out.jacobian = Matrix(n_);
        else std::fill(out.jacobian.a.begin(), out.jacobian.a.end(), 0.0);
        out.element_current.assign(ne, 0.0);
        out.mos_region.assign(ne, MosRegion::cutoff);
        out.node_scale.assign(static_cast<size_t>(node_rows()), 0.0);

        auto v = [&](Index node) -> Real {
            return node == 0 ? 0.0 : x[static_cast<size_t>(node - 1)];
        };
        // Current `i` leaves `node` through the element under evaluation.
        auto kcl = [&](Index node, Real i) {
            if (node == 0) return;
            out.residual[static_cast<size_t>(node - 1)] += i;
            Real& scale = out.node_scale[static_cast<size_t>(node - 1)];
            scale = std::max(scale, std::abs(i));
        };
        auto jac = [&](Index row_node, Index col_node, Real g) {
            if (row_node == 0 || col_node == 0) return;
            out.jacobian.at(row_node - 1, col_node - 1) += g;
        };
        // Norton form i = g*(v1-v2) + ieq covers resistors, RRAM at a frozen
        // state, and capacitor companions alike.
        auto stamp_g = [&](Index n1, Index n2, Real g, Real ieq, Real& current) {
            const Real i = g * (v(n1) - v(n2)) + ieq;
            kcl(n1, i);
            kcl(n2, -i);
            jac(n1, n1, g);
            jac(n1, n2, -g);
            jac(n2, n1, -g);
            jac(n2, n2, g);
            current = i;
        };

        for (size_t e = 0; e < ne; ++e) {
            const Element& el = c_.elements[e];
            switch (el.kind) {
            case ElementKind::resistor: {
                stamp_g(el.nodes[0], el.nodes[1], 1.0 / el.resistance, 0.0,
                        out.element_current[e]);
                break;
            }
            case ElementKind::rram: {
                const Real g = ctx.rram_conductance
                                   ? (*ctx.rram_conductance)[e]
                                   : 1.0 / rram_resistance(
                                             c_.rram_models[static_cast<size_t>(el.model)].params,
                                             RramState{el.x0});
                stamp_g(el.nodes[0], el.nodes[1], g, 0.0, out.element_current[e]);
                break;
            }
            case ElementKind::capacitor: {
                if (ctx.companions) {
                    const CapCompanion& cm = (*ctx.companions)[e];
                    stamp_g(el.nodes[0], el.nodes[1], cm.g, cm.ieq, out.element_current[e]);
                } else if (ctx.ic_mode && el.has_ic) {
                    stamp_g(el.nodes[0], el.nodes[1], k_ic_norton_g, -k_ic_norton_g * el.ic,
                            out.element_current[e]);
                }
                // otherwise open at DC
                break;
            }
            case ElementKind::mosfet: {
                const MosModelParams& m = c_.mos_models[static_cast<size_t>(el.model)].params;
                const Index d = el.nodes[0], g = el.nodes[1], s = el.nodes[2];
                const MosEval me = mos_eval_terminal(m, el.mos, v(d), v(g), v(s));
                kcl(d, me.id);
                kcl(s, -me.id);
                jac(d, d, me.gds);
                jac(d, g, me.gm);
                jac(d, s, -(me.gm + me.gds));
                jac(s, d, -me.gds);
                jac(s, g, -me.gm);
                jac(s, s, me.gm + me.gds);
                out.element_current[e] = me.id;
                out.mos_region[e] = me.region;
                break;
            }
            case ElementKind::vsource: {
                const Index np = el.nodes[0], nn = el.nodes[1];
                const Index br = branch_of_[e];
                const Real value = waveform_value(el.waveform, ctx.time) * ctx.srcscale;
                const Real ibr = x[static_cast<size_t>(br)];
                kcl(np, ibr);
                kcl(nn, -ibr);
                if (np != 0) out.jacobian.at(np - 1, br) += 1.0;
                if (nn != 0) out.jacobian.at(nn - 1, br) -= 1.0;
                out.residual[static_cast<size_t>(br)] = v(np) - v(nn) - value;
                if (np != 0) out.jacobian.at(br, np - 1) += 1.0;
                if (nn != 0) out.jacobian.at(br, nn - 1) -= 1.0;
                out.element_current[e] = ibr;
                break;
            }
            case ElementKind::isource: {
                const Real value = waveform_value(el.waveform, ctx.time) * ctx.srcscale;
                kcl(el.nodes[0], value);
                kcl(el.nodes[1], -value);
                out.element_current[e] = value;
                break;
            }
            case ElementKind::buffer: {
                const Index in = el.nodes[0], outn = el.nodes[1];
                const Index br = branch_of_[e];
                const Real ibr = x[static_cast<size_t>(br)];  // delivered into `outn`
                kcl(outn, -ibr);
                if (outn != 0) out.jacobian.at(outn - 1, br) -= 1.0;
                out.residual[static_cast<size_t>(br)] = v(outn) - v(in);
                if (outn != 0) out.jacobian.at(br, outn - 1) += 1.0;
                if (in != 0) out.jacobian.at(br, in - 1) -= 1.0;
                out.element_current[e] = ibr;
                // input capacitance, to ground, via the same companion slot
                if (ctx.companions && el.cin > 0.0) {
                    const CapCompanion& cm = (*ctx.companions)[e];
                    const Real i = cm.g * v(in) + cm.ieq;
                    kcl(in, i);
                    jac(in, in, cm.g);
                }
                break;
            }
            }
        }

        // Always-on leak to ground plus any homotopy shunt; these are honest
        // currents, counted in the residual like any other element.
        const Real gshunt = cfg_.gmin_floor + ctx.gmin_extra;
        if (gshunt > 0.0) {
            for (Index node = 1; node <= node_rows(); ++node) {
                kcl(node, gshunt * v(node));
                jac(node, node, gshunt);
            }
        }
    }

    /// Companion history for the buffer input capacitance lives in the same
    /// per-element slot as a capacitor's would.
    [[nodiscard]] Real cap_value(const Element& el) const {
        return el.kind == ElementKind::buffer ? el.cin : el.capacitance;
    }

private:
    const Circuit& c_;
    const NewtonConfig& cfg_;
    std::vector<Index> branch_of_;
    Index n_ = 0;
};

// ============================================================================
// Damped Newton
// ============================================================================

struct ResidualCheck {
    bool ok = true;
    Real worst = 0.0;
    Real worst_bound = 0.0;
    Index worst_node = 0;  ///< circuit node index (not unknown index)
};

ResidualCheck check_residual(const Assembler& as, const EvalResult& ev,
                             const NewtonConfig& cfg) {
    ResidualCheck rc;
    Real worst_ratio = 0.0;
    for (Index row = 0; row < as.node_rows(); ++row) {
        const Real r = std::abs(ev.residual[static_cast<size_t>(row)]);
        const Real bound = cfg.abstol + cfg.reltol * ev.node_scale[static_cast<size_t>(row)];
        if (r > bound) rc.ok = false;
        const Real ratio = r / bound;
        if (ratio > worst_ratio) {
            worst_ratio = ratio;
            rc.worst = r;
            rc.worst_bound = bound;
            rc.worst_node = row + 1;
        }
    }
    for (Index row = as.node_rows(); row < as.n(); ++row) {
        if (std::abs(ev.residual[static_cast<size_t>(row)]) > cfg.vntol) rc.ok = false;
    }
    return rc;
}

struct NewtonOutcome {
    bool converged = false;
    int iterations = 0;
    ResidualCheck residual;
};

/// Damped Newton on the stamped system; mutates x in place. Non-convergence is
/// reported in the outcome, singular systems propagate as Error(solver).
NewtonOutcome newton(const Assembler& as, std::vector<Real>& x, const EvalContext& ctx,
                     const NewtonConfig& cfg, EvalResult& ev) {
    NewtonOutcome outcome;
    bool step_small = false;
    for (int iter = 0; iter <= cfg.max_iter; ++iter) {
        as.eval(x, ctx, ev);
        outcome.residual = check_residual(as, ev, cfg);
        if (outcome.residual.ok && step_small) {
            outcome.converged = true;
            outcome.iterations = iter;
            return outcome;
        }
        if (iter == cfg.max_iter) break;

        std::vector<Real> rhs(ev.residual.size());
        for (size_t i = 0; i < rhs.size(); ++i) rhs[i] = -ev.residual[i];
        const std::vector<Real> delta = linear_solve(ev.jacobian, rhs);

        Real dvmax = 0.0;
        for (Index row = 0; row < as.node_rows(); ++row)
            dvmax = std::max(dvmax, std::abs(delta[static_cast<size_t>(row)]));
        const Real damp = dvmax > cfg.vstep_limit ? cfg.vstep_limit / dvmax : 1.0;

        step_small = true;
        bool finite = true;
        for (size_t i = 0; i < x.size(); ++i) {
            const Real d = damp * delta[i];
            x[i] += d;
            if (static_cast<Index>(i) < as.node_rows() &&
                std::abs(d) > cfg.vntol + cfg.reltol * std::abs(x[i]))
                step_small = false;
            if (!std::isfinite(x[i])) finite = false;
        }
        if (!finite) break;
    }
    outcome.iterations = cfg.max_iter;
    return outcome;
}

struct SolveInternal {
    std::vector<Real> x;
    EvalResult ev;
    int iterations = 0;
    HomotopyUsed homotopy = HomotopyUsed::direct;
    ResidualCheck residual;
};

/// Direct Newton, then the gmin ladder, then (when allowed) source stepping.
SolveInternal solve_internal(const Assembler& as, const EvalContext& base_ctx,
                             const NewtonConfig& cfg, const std::vector<Real>* warm,
                             bool allow_source_stepping) {
    SolveInternal s;
    const std::vector<Real> start =
        warm ? *warm : std::vector<Real>(static_cast<size_t>(as.n()), 0.0);

    auto attempt = [&](const std::vector<Real>& x0, const EvalContext& ctx,
                       int& iters) -> bool {
        s.x = x0;
        try {
            const NewtonOutcome out = newton(as, s.x, ctx, cfg, s.ev);
            iters += out.iterations;
            s.residual = out.residual;
            return out.converged;
        } catch (const Error& err) {
            if (err.kind != ErrorKind::solver) throw;
            return false;  // singular along the way: try the next continuation
        }
    };

    const std::vector<Real> zeros(static_cast<size_t>(as.n()), 0.0);

    int iters = 0;
    if (attempt(start, base_ctx, iters)) {
        s.iterations = iters;
        s.homotopy = HomotopyUsed::direct;
        return s;
    }
    // A stale warm start (for example across a sweep discontinuity) can be
    // worse than no information; retry cold before escalating.
    if (warm != nullptr && attempt(zeros, base_ctx, iters)) {
        s.iterations = iters;
        s.homotopy = HomotopyUsed::direct;
        return s;
    }

    // gmin ladder: relax every node toward ground, then release. The ladder
    // is a global continuation, so it always begins from the cold state.
    {
        int ladder_iters = 0;
        std::vector<Real> x = zeros;
        bool alive = true;
        for (const Real gmin : cfg.gmin_ladder) {
            EvalContext ctx = base_ctx;
            ctx.gmin_extra = gmin;
            if (!attempt(x, ctx, ladder_iters)) {
                alive = false;
                break;
            }
            x = s.x;
        }
        if (alive && attempt(x, base_ctx, ladder_iters)) {
            s.iterations = ladder_iters;
            s.homotopy = HomotopyUsed::gmin_ladder;
            return s;
        }
    }

    if (allow_source_stepping) {
        int step_iters = 0;
        std::vector<Real> x(static_cast<size_t>(as.n()), 0.0);
        bool alive = true;
        for (const Real frac : cfg.source_fractions) {
            EvalContext ctx = base_ctx;
            ctx.srcscale = base_ctx.srcscale * frac;
            if (!attempt(x, ctx, step_iters)) {
                alive = false;
                break;
            }
            x = s.x;
        }
        if (alive) {
            s.iterations = step_iters;
            s.homotopy = HomotopyUsed::source_stepping;
            return s;
        }
    }

    const std::string node = s.residual.worst_node > 0
                                 ? as.circuit().node_names[static_cast<size_t>(
                                       s.residual.worst_node)]
                                 : std::string("?");
    throw Error(ErrorKind::solver,
                "Newton failed to converge after all homotopies; worst residual " +
                    std::to_string(s.residual.worst) + " A at node '" + node + "' (bound " +
                    std::to_string(s.residual.worst_bound) + " A)");
}

OperatingPoint make_operating_point(const Assembler& as, const SolveInternal& s) {
    const Circuit& c = as.circuit();
    OperatingPoint op;
    op.node_names = c.node_names;
    op.v.assign(c.node_names.size(), 0.0);
    for (Index node = 1; node <= as.node_rows(); ++node)
        op.v[static_cast<size_t>(node)] = s.x[static_cast<size_t>(node - 1)];
    op.element_names.reserve(c.elements.size());
    for (const Element& e : c.elements) op.element_names.push_back(e.name);
    op.element_current = s.ev.element_current;
    op.mos_region = s.ev.mos_region;
    op.iterations = s.iterations;
    op.homotopy = s.homotopy;
    op.worst_residual = s.residual.worst;
    op.worst_residual_bound = s.residual.worst_bound;
    op.worst_residual_node =
        s.residual.worst_node > 0 ? c.node_names[static_cast<size_t>(s.residual.worst_node)]
                                  : std::string();
    return op;
}

std::vector<Real> unknowns_from(const Assembler& as, const OperatingPoint& warm) {
    // Only the node voltages are portable between solve contexts; branch
    // currents restart at zero (they are linear unknowns, recovered in one
    // solve).
    std::vector<Real> x(static_cast<size_t>(as.n()), 0.0);
    const size_t n = std::min(warm.v.size() - 1, static_cast<size_t>(as.node_rows()));
    for (size_t i = 0; i < n; ++i) x[i] = warm.v[i + 1];
    return x;
}

} // namespace

// ============================================================================
// Public entry points
// ============================================================================

MnaSystem stamp_operating_point(const Circuit& circuit, const std::vector<Real>& x,
                                const NewtonConfig& config) {
    const Assembler as(circuit, config);
    std::vector<Real> point = x;
    point.resize(static_cast<size_t>(as.n()), 0.0);
    EvalResult ev;
    as.eval(point, EvalContext{}, ev);
    MnaSystem sys;
    sys.n = as.n();
    sys.matrix = ev.jacobian;
    sys.rhs.resize(ev.residual.size());
    for (size_t i = 0; i < ev.residual.size(); ++i) sys.rhs[i] = -ev.residual[i];
    return sys;
}

OperatingPoint solve_op(const Circuit& circuit, const NewtonConfig& config,
                        const OperatingPoint* warm_start) {
    const Assembler as(circuit, config);
    EvalContext ctx;
    std::vector<Real> warm;
    const std::vector<Real>* warm_ptr = nullptr;
    if (warm_start) {
        warm = unknowns_from(as, *warm_start);
        warm_ptr = &warm;
    }
    const SolveInternal s = solve_internal(as, ctx, config, warm_ptr, true);
    return make_operating_point(as, s);
}

SweepResult dc_sweep(const Circuit& circuit, std::string_view source, const SweepGrid& grid,
                     const NewtonConfig& config) {
    const int src = circuit.element_index(source);
    if (src < 0)
        throw Error(ErrorKind::validation, "unknown source '" + std::string(source) + "'");
    {
        const ElementKind k = circuit.elements[static_cast<size_t>(src)].kind;
        if (k != ElementKind::vsource && k != ElementKind::isource)
            throw Error(ErrorKind::validation,
                        "'" + std::string(source) + "' is not an independent source");
    }
    if (grid.step == 0.0) throw Error(ErrorKind::validation, "empty grid: step is zero");
    const Real span = (grid.stop - grid.start) / grid.step;
    if (span < -1e-9) throw Error(ErrorKind::validation, "empty grid: step points away from stop");
    const int npoints = static_cast<int>(std::floor(span + 1e-9)) + 1;

    Circuit work = circuit;
    Element& swept = work.elements[static_cast<size_t>(src)];

    SweepResult result;
    result.source = work.elements[static_cast<size_t>(src)].name;
    result.values.reserve(static_cast<size_t>(npoints));
    result.points.reserve(static_cast<size_t>(npoints));

    const Assembler as(work, config);
    std::vector<Real> warm;
    bool have_warm = false;
    for (int k = 0; k < npoints; ++k) {
        const Real value = grid.start + grid.step * k;
        result.values.push_back(value);
        swept.waveform = waveform_dc(value);
        try {
            const SolveInternal s =
                solve_internal(as, EvalContext{}, config, have_warm ? &warm : nullptr, true);
            warm = s.x;
            have_warm = true;
            result.points.emplace_back(make_operating_point(as, s));
        } catch (const Error& err) {
            if (err.kind != ErrorKind::solver) throw;
            result.points.emplace_back(std::nullopt);
        }
    }
    return result;
}

TraceSet transient(const Circuit& circuit, Real tstop, Real dt, TransientMethod method,
                   const NewtonConfig& config) {
    if (dt <= 0.0) throw Error(ErrorKind::validation, "transient: dt must be positive");
    if (tstop <= dt) throw Error(ErrorKind::validation, "transient: tstop must exceed dt");
    const Real raw_steps = std::ceil(tstop / dt - 1e-9);
    if (raw_steps > 10e6)
        throw Error(ErrorKind::validation,
                    "transient: step count overflow (" + std::to_string(raw_steps) +
                        " steps; raise dt or lower tstop)");
    const int nsteps = static_cast<int>(raw_steps);

    const Assembler as(circuit, config);
    const size_t ne = circuit.elements.size();

    // t = 0 operating point; ic-capacitors pinned by stiff Norton sources so
    // the recovered branch currents are the physically consistent initial
    // currents (needed for a clean second-order trapezoidal start).
    EvalContext ctx0;
    ctx0.ic_mode = true;
    std::vector<Real> rram_g(ne, 0.0);
    std::vector<RramState> rram_states(ne);
    for (size_t e = 0; e < ne; ++e) {
        const Element& el = circuit.elements[e];
        if (el.kind == ElementKind::rram) {
            rram_states[e].x = el.x0;
            rram_g[e] = 1.0 / rram_resistance(
                                  circuit.rram_models[static_cast<size_t>(el.model)].params,
                                  rram_states[e]);
        }
    }
    ctx0.rram_conductance = &rram_g;
    SolveInternal state = solve_internal(as, ctx0, config, nullptr, true);

    // Per-capacitor history (voltage across, current through).
    std::vector<Real> cap_v(ne, 0.0), cap_i(ne, 0.0);
    auto across = [&](const Element& el) {
        auto v = [&](Index node) {
            return node == 0 ? 0.0 : state.x[static_cast<size_t>(node - 1)];
        };
        if (el.kind == ElementKind::buffer) return v(el.nodes[0]);  // cin is to ground
        return v(el.nodes[0]) - v(el.nodes[1]);
    };
    for (size_t e = 0; e < ne; ++e) {
        const Element& el = circuit.elements[e];
        if (el.kind == ElementKind::capacitor) {
            cap_v[e] = across(el);
            cap_i[e] = el.has_ic ? state.ev.element_current[e] : 0.0;
        } else if (el.kind == ElementKind::buffer && el.cin > 0.0) {
            cap_v[e] = across(el);
            cap_i[e] = 0.0;
        }
    }

    // Trace layout: node voltages then element currents.
    TraceSet trace;
    const Index nv = as.node_rows();
    trace.signal_names.reserve(static_cast<size_t>(nv) + ne);
    for (Index node = 1; node <= nv; ++node)
        trace.signal_names.push_back("v(" + circuit.node_names[static_cast<size_t>(node)] + ")");
    for (const Element& el : circuit.elements) trace.signal_names.push_back("i(" + el.name + ")");
    trace.samples.assign(trace.signal_names.size(), {});
    for (size_t e = 0; e < ne; ++e)
        if (circuit.elements[e].kind == ElementKind::rram)
            trace.rram_names.push_back(circuit.elements[e].name);
    trace.rram_state.assign(trace.rram_names.size(), {});

    auto record = [&](Real t) {
        trace.time.push_back(t);
        for (Index k = 0; k < nv; ++k)
            trace.samples[static_cast<size_t>(k)].push_back(state.x[static_cast<size_t>(k)]);
        for (size_t e = 0; e < ne; ++e)
            trace.samples[static_cast<size_t>(nv) + e].push_back(state.ev.element_current[e]);
        size_t slot = 0;
        for (size_t e = 0; e < ne; ++e)
            if (circuit.elements[e].kind == ElementKind::rram)
                trace.rram_state[slot++].push_back(rram_states[e].x);
        if (state.residual.worst / std::max(state.residual.worst_bound, 1e-300) >
            trace.max_kcl_residual / std::max(trace.max_kcl_bound, 1e-300)) {
            trace.max_kcl_residual = state.residual.worst;
            trace.max_kcl_bound = state.residual.worst_bound;
        }
    };
    record(0.0);

    std::vector<CapCompanion> companions(ne);
    for (int k = 1; k <= nsteps; ++k) {
        const Real t = dt * k;
        for (size_t e = 0; e < ne; ++e) {
            const Element& el = circuit.elements[e];
            const Real cap = as.cap_value(el);
            if ((el.kind != ElementKind::capacitor && el.kind != ElementKind::buffer) ||
                cap <= 0.0) {
                companions[e] = {};
                continue;
            }
            if (method == TransientMethod::backward_euler) {
                const Real g = cap / dt;
                companions[e] = {g, -g * cap_v[e]};
            } else {
                const Real g = 2.0 * cap / dt;
                companions[e] = {g, -g * cap_v[e] - cap_i[e]};
            }
        }
        EvalContext ctx;
        ctx.time = t;
        ctx.companions = &companions;
        ctx.rram_conductance = &rram_g;

        std::vector<Real> warm = state.x;
        try {
            state = solve_internal(as, ctx, config, &warm, false);
        } catch (const Error& err) {
            if (err.kind != ErrorKind::solver) throw;
            throw Error(ErrorKind::solver,
                        "transient: " + std::string(err.what()) + " at t=" + std::to_string(t));
        }

        for (size_t e = 0; e < ne; ++e) {
            const Element& el = circuit.elements[e];
            const Real cap = as.cap_value(el);
            if ((el.kind == ElementKind::capacitor || el.kind == ElementKind::buffer) &&
                cap > 0.0) {
                cap_v[e] = across(el);
                cap_i[e] = companions[e].g * cap_v[e] + companions[e].ieq;
            }
            if (el.kind == ElementKind::rram) {
                auto v = [&](Index node) {
                    return node == 0 ? 0.0 : state.x[static_cast<size_t>(node - 1)];
                };
                const Real vr = v(el.nodes[0]) - v(el.nodes[1]);
                rram_states[e] =
                    rram_step(circuit.rram_models[static_cast<size_t>(el.model)].params,
                              rram_states[e], vr, dt);
                rram_g[e] = 1.0 / rram_resistance(
                                      circuit.rram_models[static_cast<size_t>(el.model)].params,
                                      rram_states[e]);
            }
        }
        record(t);
    }
    return trace;
}

// ============================================================================
// Lookup helpers
// ============================================================================

namespace {

[[noreturn]] void missing(const char* what, std::string_view name) {
    throw Error(ErrorKind::validation,
                std::string("no ") + what + " named '" + std::string(name) + "'");
}

} // namespace

Real OperatingPoint::voltage_of(std::string_view node) const {
    for (size_t i = 0; i < node_names.size(); ++i)
        if (node_names[i] == node) return v[i];
    missing("node", node);
}

Real OperatingPoint::current_of(std::string_view element) const {
    for (size_t i = 0; i < element_names.size(); ++i)
        if (element_names[i] == element) return element_current[i];
    missing("element", element);
}

MosRegion OperatingPoint::region_of(std::string_view element) const {
    for (size_t i = 0; i < element_names.size(); ++i)
        if (element_names[i] == element) return mos_region[i];
    missing("element", element);
}

const std::vector<Real>& TraceSet::signal(std::string_view name) const {
    for (size_t i = 0; i < signal_names.size(); ++i)
        if (signal_names[i] == name) return samples[i];
    missing("signal", name);
}

} // namespace mirrorsim
