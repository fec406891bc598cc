#pragma once

// SPICE-like netlist front end. Grammar (full reference in README):
//
//   R<name> n1 n2 <value>
//   C<name> n1 n2 <value> [ic=<v>]
//   M<name> d g s b <model> [w=..] [l=..] [dvth=..] [dbeta=..]
//   V<name> n+ n- [dc] <value>
//   V<name> n+ n- pulse(v1 v2 tdelay trise tfall twidth tperiod)
//   I<name> n+ n- ...                 (same value forms as V)
//   X<name> top bot <rram-model> [x0=..]
//   X<name> in out buf [cin=..]
//   .model <name> nmos|pmos|rram [k=v ...]
//   .title <text>
//   .end
//
// Lines starting with "*" are comments, ";" starts an inline comment,
// continuation lines start with "+". Keywords and identifiers are
// case-insensitive (folded to lower case). Numbers accept the SI suffixes
// f, p, n, u, m, k, meg. Analysis directives are not netlist content and
// are rejected.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mirrorsim/devices.hpp"
#include "mirrorsim/error.hpp"

namespace mirrorsim {

using Index = int;

struct Diagnostic {
    enum class Severity { warning, error };
    Severity severity = Severity::warning;
    int line = 0;
    std::string message;
};

// ============================================================================
// Parsed document (pre-elaboration)
// ============================================================================

/// One logical card: continuation lines already joined, comments stripped,
/// tokens case-folded. `line` is the first physical line of the card.
struct Card {
    int line = 0;
    std::vector<std::string> tokens;
};

struct ModelCard {
    int line = 0;
    std::string name;
    std::string kind; // "nmos", "pmos", "rram"
    std::map<std::string, Real> params;
};

struct NetlistDocument {
    std::string title;
    std::vector<Card> element_cards;
    std::vector<ModelCard> model_cards;
};

// ============================================================================
// Elaborated circuit
// ============================================================================

enum class ElementKind { resistor, capacitor, mosfet, vsource, isource, rram, buffer };

/// Flat element record; only the fields of the active kind are meaningful.
/// Kept flat (no variant) so analyses can clone a Circuit and tweak values
/// (source levels, capacitances) without visitation boilerplate.
struct Element {
    ElementKind kind = ElementKind::resistor;
    std::string name;
    int line = 0;
    std::vector<Index> nodes; // terminal order as in the card

    Real resistance = 0.0;

    Real capacitance = 0.0;
    bool has_ic = false;
    Real ic = 0.0;

    int model = -1; // index into Circuit::mos_models or rram_models
    MosInstance mos;

    Waveform waveform; // vsource / isource

    Real x0 = 0.0; // rram initial state

    Real cin = 0.0; // buffer input capacitance
};

struct NamedMosModel {
    std::string name;
    MosModelParams params;
};

struct NamedRramModel {
    std::string name;
    RramModelParams params;
};

struct Circuit {
    std::vector<std::string> node_names; // [0] == "0" (ground)
    std::vector<Element> elements;
    std::vector<NamedMosModel> mos_models;
    std::vector<NamedRramModel> rram_models;
    std::vector<Diagnostic> warnings; // dangling-node and similar notes

    [[nodiscard]] Index node_index(std::string_view name) const; // -1 if absent
    [[nodiscard]] int element_index(std::string_view name) const; // -1 if absent

    /// Mutable lookup for analyses that override source values; throws
    /// a validation Error when the element does not exist.
    [[nodiscard]] Element& element(std::string_view name);
    [[nodiscard]] const Element& element(std::string_view name) const;
};

// ============================================================================
// Operations
// ============================================================================

/// Decode one numeric field ("10u" -> 1e-5). Throws a syntax Error on
/// malformed numbers or unknown suffixes.
[[nodiscard]] Real parse_value(std::string_view text, int line = 0);

[[nodiscard]] NetlistDocument parse(std::string_view text);

[[nodiscard]] Circuit elaborate(const NetlistDocument& doc);

/// parse + elaborate.
[[nodiscard]] Circuit parse_circuit(std::string_view text);

/// Canonical card text for a circuit; re-parsing it yields an equivalent
/// circuit (same element/model structure under node-name mapping).
[[nodiscard]] std::string serialize(const Circuit& circuit);

} // namespace mirrorsim
