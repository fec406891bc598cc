#include "mirrorsim/mcvariation.hpp"

#include "mirrorsim/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string_view>
#include <thread>

namespace mirrorsim {

namespace {

// ============================================================================
// Counter-based Gaussian draws
// ============================================================================
//
// A keyed bit mixer stands in for a sequential RNG: every draw is addressed
// by (seed, die, circuit, element, dimension), so draws are reproducible no
// matter which order cells are evaluated in.

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (char c : text) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::uint64_t keyed_bits(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2, std::uint64_t k3,
                         std::uint64_t dim) {
    std::uint64_t h = mix64(seed ^ 0x5851f42d4c957f2dull);
    h = mix64(h ^ k1);
    h = mix64(h ^ k2);
    h = mix64(h ^ k3);
    h = mix64(h ^ dim);
    return h;
}

/// Uniform in (0, 1]: the top 53 bits shifted into the mantissa, offset so the
/// value never reaches zero (log() stays finite).
Real uniform_01(std::uint64_t bits) {
    return (static_cast<Real>(bits >> 11) + 1.0) * 0x1p-53;
}

/// Standard normal via Box-Muller on two keyed uniform draws.
Real keyed_gauss(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2, std::uint64_t k3,
                 std::uint64_t dim) {
    const Real u1 = uniform_01(keyed_bits(seed, k1, k2, k3, 2 * dim));
    const Real u2 = uniform_01(keyed_bits(seed, k1, k2, k3, 2 * dim + 1));
    constexpr Real two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

std::string fmt_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

// ============================================================================
// Mismatch sampling
// ============================================================================

std::vector<MosDeltas> sample_instance_deltas(const MismatchSpec& spec, const Circuit& circuit,
                                              int die, int circuit_index) {
    if (die < 0 || circuit_index < 0) {
        throw Error(ErrorKind::validation, "die and circuit indices must be non-negative");
    }

    const auto die_key = static_cast<std::uint64_t>(die);
    const auto cell_key = static_cast<std::uint64_t>(circuit_index);

    // The die offset shifts every threshold on the die together; it is keyed
    // by the die alone so both circuits of one die share it.
    const Real die_offset =
        spec.die_sigma_vth != 0.0
            ? spec.die_sigma_vth * keyed_gauss(spec.seed, die_key, 0, fnv1a("die-offset"), 0)
            : 0.0;

    std::vector<MosDeltas> deltas(circuit.elements.size());
    for (std::size_t i = 0; i < circuit.elements.size(); ++i) {
        const Element& el = circuit.elements[i];
        if (el.kind != ElementKind::mosfet) continue;

        const Real area = el.mos.w * el.mos.l;  // m^2
        const Real root_area = std::sqrt(area);
        const std::uint64_t name_key = fnv1a(el.name);

        MosDeltas d;
        d.dvth = die_offset;
        if (spec.avt != 0.0) {
            d.dvth += spec.avt / root_area * keyed_gauss(spec.seed, die_key, cell_key, name_key, 0);
        }
        if (spec.abeta != 0.0) {
            d.dbeta = spec.abeta / root_area * keyed_gauss(spec.seed, die_key, cell_key, name_key, 1);
            // Keep the effective gain positive even for absurd draws.
            d.dbeta = std::max(d.dbeta, -0.95);
        }
        deltas[i] = d;
    }
    return deltas;
}

// ============================================================================
// Wafer raster
// ============================================================================

std::vector<std::pair<int, int>> wafer_sites(int dies, int grid) {
    if (grid <= 0) throw Error(ErrorKind::validation, "wafer grid must be positive");
    if (dies <= 0 || dies > grid * grid) {
        throw Error(ErrorKind::validation, "die count must be in [1, grid^2]");
    }

    struct Site {
        int x;
        int y;
        Real r2;
    };
    const Real center = (static_cast<Real>(grid) - 1.0) / 2.0;
    std::vector<Site> sites;
    sites.reserve(static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid));
    for (int y = 0; y < grid; ++y) {
        for (int x = 0; x < grid; ++x) {
            const Real dx = static_cast<Real>(x) - center;
            const Real dy = static_cast<Real>(y) - center;
            sites.push_back({x, y, dx * dx + dy * dy});
        }
    }
    std::stable_sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) {
        if (a.r2 != b.r2) return a.r2 < b.r2;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    sites.resize(static_cast<std::size_t>(dies));
    std::sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) {
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });

    std::vector<std::pair<int, int>> result;
    result.reserve(sites.size());
    for (const Site& s : sites) result.emplace_back(s.x, s.y);
    return result;
}

// ============================================================================
// Wafer study
// ============================================================================

WaferMap wafer_run(Branch branch, const MismatchSpec& spec, const WaferRunOptions& options,
                   const NewtonConfig& config) {
    if (options.circuits_per_die <= 0) {
        throw Error(ErrorKind::validation, "circuits per die must be positive");
    }
    if (options.jobs <= 0) throw Error(ErrorKind::validation, "job count must be positive");
    if (options.iref_grid.empty()) {
        throw Error(ErrorKind::validation, "empty reference-current grid");
    }
    for (Real iref : options.iref_grid) {
        if (iref <= 0.0) {
            throw Error(ErrorKind::validation, "reference-current grid values must be positive");
        }
    }

    const std::vector<std::pair<int, int>> sites = wafer_sites(options.dies);
    const Circuit base = branch_circuit(branch);
    const MirrorProbe probe = branch_probe(branch);

    WaferMap map;
    map.cells.resize(static_cast<std::size_t>(options.dies) *
                     static_cast<std::size_t>(options.circuits_per_die));

    // Cells are preassigned to result slots, so worker count and scheduling
    // order cannot change the output.
    auto run_cell = [&](std::size_t slot) {
        const int die = static_cast<int>(slot) / options.circuits_per_die;
        const int circuit_index = static_cast<int>(slot) % options.circuits_per_die;

        WaferCell cell;
        cell.die_x = sites[static_cast<std::size_t>(die)].first;
        cell.die_y = sites[static_cast<std::size_t>(die)].second;
        cell.circuit = circuit_index;

        Circuit varied = base;
        const std::vector<MosDeltas> deltas =
            sample_instance_deltas(spec, varied, die, circuit_index);
        for (std::size_t i = 0; i < varied.elements.size(); ++i) {
            Element& el = varied.elements[i];
            if (el.kind != ElementKind::mosfet) continue;
            el.mos.dvth = deltas[i].dvth;
            el.mos.dbeta = deltas[i].dbeta;
        }

        const MirrorReport report =
            mirror_factor_dc(varied, probe, options.iref_grid, options.vdd, config);
        Real sum = 0.0;
        bool all_valid = true;
        for (const MirrorRow& row : report.rows) {
            if (!row.valid) {
                all_valid = false;
                break;
            }
            sum += row.deviation_pct;
        }
        if (all_valid && !report.rows.empty()) {
            cell.mean_deviation_pct = sum / static_cast<Real>(report.rows.size());
        } else {
            cell.valid = false;
        }
        map.cells[slot] = cell;
    };

    if (options.jobs == 1) {
        for (std::size_t slot = 0; slot < map.cells.size(); ++slot) run_cell(slot);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t slot = next.fetch_add(1);
                if (slot >= map.cells.size()) return;
                run_cell(slot);
            }
        };
        const int thread_count = std::min<int>(options.jobs, static_cast<int>(map.cells.size()));
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(thread_count));
        for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    return map;
}

void write_wafer_csv(std::ostream& out, const WaferMap& map) {
    out << "die_x,die_y,circuit,mean_deviation_pct\n";
    for (const WaferCell& cell : map.cells) {
        if (!cell.valid) continue;
        out << cell.die_x << ',' << cell.die_y << ',' << cell.circuit << ','
            << fmt_real(cell.mean_deviation_pct) << '\n';
    }
}

} // namespace mirrorsim
