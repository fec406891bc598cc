#include "mirrorsim/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace mirrorsim {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Physical lines -> logical lines (comments stripped, continuations joined).
struct LogicalLine {
    int line = 0;
    std::string text;
};

std::vector<LogicalLine> logical_lines(std::string_view text) {
    std::vector<LogicalLine> out;
    int line_no = 0;
    std::string_view rest = text;
    while (!rest.empty()) {
        ++line_no;
        const size_t nl = rest.find('\n');
        std::string_view raw = rest.substr(0, nl);
        rest = (nl == std::string_view::npos) ? std::string_view{} : rest.substr(nl + 1);

        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        if (const size_t semi = raw.find(';'); semi != std::string_view::npos)
            raw = raw.substr(0, semi);

        size_t first = raw.find_first_not_of(" \t");
        if (first == std::string_view::npos) continue;
        if (raw[first] == '*') continue;

        if (raw[first] == '+') {
            if (out.empty())
                throw Error(ErrorKind::syntax, "continuation line with nothing to continue",
                            line_no);
            out.back().text += ' ';
            out.back().text += raw.substr(first + 1);
        } else {
            out.push_back({line_no, std::string(raw.substr(first))});
        }
    }
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::string spaced;
    spaced.reserve(text.size() + 8);
    for (char c : text) {
        if (c == '(' || c == ')' || c == ',') {
            spaced += ' ';
        } else {
            spaced += c;
        }
    }
    std::vector<std::string> tokens;
    std::istringstream in(spaced);
    std::string tok;
    while (in >> tok) tokens.push_back(to_lower(tok));
    return tokens;
}

/// Split "k=v" -> {k, v}; returns false for plain tokens.
bool split_kv(const std::string& tok, std::string& key, std::string& value) {
    const size_t eq = tok.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= tok.size()) return false;
    key = tok.substr(0, eq);
    value = tok.substr(eq + 1);
    return true;
}

std::map<std::string, Real> parse_params(const std::vector<std::string>& tokens, size_t from,
                                         int line, const char* card_name) {
    std::map<std::string, Real> params;
    for (size_t i = from; i < tokens.size(); ++i) {
        std::string key, value;
        if (!split_kv(tokens[i], key, value))
            throw Error(ErrorKind::syntax,
                        std::string(card_name) + ": expected key=value, got '" + tokens[i] + "'",
                        line);
        if (!params.emplace(key, parse_value(value, line)).second)
            throw Error(ErrorKind::syntax,
                        std::string(card_name) + ": duplicate parameter '" + key + "'", line);
    }
    return params;
}

Real take_param(std::map<std::string, Real>& params, const std::string& key, Real fallback) {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    const Real v = it->second;
    params.erase(it);
    return v;
}

void reject_leftovers(const std::map<std::string, Real>& params, int line, const char* card_name) {
    if (!params.empty())
        throw Error(ErrorKind::syntax,
                    std::string(card_name) + ": unknown parameter '" + params.begin()->first + "'",
                    line);
}

} // namespace

Real parse_value(std::string_view text, int line) {
    if (text.empty()) throw Error(ErrorKind::syntax, "empty numeric field", line);
    const std::string buf(text);
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (end == buf.c_str())
        throw Error(ErrorKind::syntax, "malformed number '" + buf + "'", line);
    std::string suffix = to_lower(end);
    if (suffix.empty()) {
        if (!std::isfinite(v))
            throw Error(ErrorKind::syntax, "non-finite number '" + buf + "'", line);
        return v;
    }
    Real scale = 0.0;
    if (suffix == "meg") scale = 1e6;
    else if (suffix == "f") scale = 1e-15;
    else if (suffix == "p") scale = 1e-12;
    else if (suffix == "n") scale = 1e-9;
    else if (suffix == "u") scale = 1e-6;
    else if (suffix == "m") scale = 1e-3;
    else if (suffix == "k") scale = 1e3;
    else
        throw Error(ErrorKind::syntax, "unknown suffix '" + suffix + "' in '" + buf + "'", line);
    return v * scale;
}

NetlistDocument parse(std::string_view text) {
    NetlistDocument doc;
    std::unordered_set<std::string> element_names;
    std::unordered_set<std::string> model_names;

    for (const LogicalLine& ll : logical_lines(text)) {
        std::vector<std::string> tokens = tokenize(ll.text);
        if (tokens.empty()) continue;
        const std::string& head = tokens[0];

        if (head[0] == '.') {
            if (head == ".end") break;
            if (head == ".title") {
                // preserve original spacing/case of the title text
                const size_t pos = ll.text.find_first_of(" \t");
                doc.title = (pos == std::string::npos)
                                ? ""
                                : ll.text.substr(ll.text.find_first_not_of(" \t", pos));
                continue;
            }
            if (head == ".model") {
                if (tokens.size() < 3)
                    throw Error(ErrorKind::syntax, ".model needs a name and a kind", ll.line);
                ModelCard mc;
                mc.line = ll.line;
                mc.name = tokens[1];
                mc.kind = tokens[2];
                if (mc.kind != "nmos" && mc.kind != "pmos" && mc.kind != "rram")
                    throw Error(ErrorKind::syntax, "unknown model kind '" + mc.kind + "'", ll.line);
                mc.params = parse_params(tokens, 3, ll.line, ".model");
                if (!model_names.insert(mc.name).second)
                    throw Error(ErrorKind::syntax, "duplicate model name '" + mc.name + "'",
                                ll.line);
                doc.model_cards.push_back(std::move(mc));
                continue;
            }
            if (head == ".op" || head == ".dc" || head == ".tran" || head == ".ac")
                throw Error(ErrorKind::syntax,
                            "analysis directives are not netlist content (use the CLI)", ll.line);
            throw Error(ErrorKind::syntax, "unknown directive '" + head + "'", ll.line);
        }

        const char kind = head[0];
        if (std::string("rcmvix").find(kind) == std::string::npos)
            throw Error(ErrorKind::syntax, "unknown card '" + head + "'", ll.line);
        if (head.size() < 2)
            throw Error(ErrorKind::syntax, "element needs a name after its kind letter", ll.line);
        if (!element_names.insert(head).second)
            throw Error(ErrorKind::syntax, "duplicate element name '" + head + "'", ll.line);
        doc.element_cards.push_back({ll.line, std::move(tokens)});
    }
    return doc;
}

namespace {

struct NodeTable {
    std::vector<std::string> names{"0"};
    std::unordered_map<std::string, Index> index{{"0", 0}};
    bool ground_seen = false;

    Index intern(const std::string& name) {
        if (name == "0") ground_seen = true;
        auto it = index.find(name);
        if (it != index.end()) return it->second;
        const Index id = static_cast<Index>(names.size());
        names.push_back(name);
        index.emplace(name, id);
        return id;
    }
};

Waveform parse_source_value(const std::vector<std::string>& tokens, size_t from, int line) {
    if (from >= tokens.size())
        throw Error(ErrorKind::syntax, "source card needs a value", line);
    const std::string& first = tokens[from];
    if (first == "dc") {
        if (tokens.size() != from + 2)
            throw Error(ErrorKind::syntax, "dc source takes exactly one value", line);
        return waveform_dc(parse_value(tokens[from + 1], line));
    }
    if (first == "pulse") {
        if (tokens.size() != from + 8)
            throw Error(ErrorKind::syntax,
                        "pulse source takes 7 values: v1 v2 tdelay trise tfall twidth tperiod",
                        line);
        Real a[7];
        for (int i = 0; i < 7; ++i) a[i] = parse_value(tokens[from + 1 + i], line);
        Waveform w = waveform_pulse(a[0], a[1], a[2], a[3], a[5], a[4], a[6]);
        if (w.rise <= 0.0 || w.fall <= 0.0)
            throw Error(ErrorKind::syntax, "pulse rise/fall times must be positive", line);
        if (w.width < 0.0 || w.delay < 0.0)
            throw Error(ErrorKind::syntax, "pulse delay/width must be non-negative", line);
        if (w.period > 0.0 && w.period < w.rise + w.width + w.fall)
            throw Error(ErrorKind::syntax, "pulse period shorter than rise+width+fall", line);
        return w;
    }
    if (tokens.size() != from + 1)
        throw Error(ErrorKind::syntax, "unexpected tokens after source value", line);
    return waveform_dc(parse_value(first, line));
}

} // namespace

Circuit elaborate(const NetlistDocument& doc) {
    if (doc.element_cards.empty())
        throw Error(ErrorKind::validation, "no elements");

    Circuit c;
    std::unordered_map<std::string, int> mos_model_index;
    std::unordered_map<std::string, int> rram_model_index;

    for (const ModelCard& mc : doc.model_cards) {
        std::map<std::string, Real> p = mc.params;
        if (mc.kind == "rram") {
            NamedRramModel m;
            m.name = mc.name;
            m.params.r_on = take_param(p, "ron", m.params.r_on);
            m.params.r_off = take_param(p, "roff", m.params.r_off);
            m.params.v_set = take_param(p, "vset", m.params.v_set);
            m.params.v_reset = take_param(p, "vreset", m.params.v_reset);
            m.params.tau_set = take_param(p, "tauset", m.params.tau_set);
            m.params.tau_reset = take_param(p, "taureset", m.params.tau_reset);
            reject_leftovers(p, mc.line, ".model");
            if (m.params.r_on <= 0.0 || m.params.r_off <= m.params.r_on)
                throw Error(ErrorKind::validation,
                            "rram model '" + mc.name + "' needs 0 < ron < roff", mc.line);
            rram_model_index.emplace(mc.name, static_cast<int>(c.rram_models.size()));
            c.rram_models.push_back(std::move(m));
        } else {
            NamedMosModel m;
            m.name = mc.name;
            m.params.polarity = (mc.kind == "pmos") ? MosPolarity::pmos : MosPolarity::nmos;
            m.params.vth =
                take_param(p, "vth", m.params.polarity == MosPolarity::pmos ? -0.7 : 0.7);
            m.params.kp =
                take_param(p, "kp", m.params.polarity == MosPolarity::pmos ? 60e-6 : 170e-6);
            m.params.lambda = take_param(p, "lambda", 0.0);
            reject_leftovers(p, mc.line, ".model");
            if (m.params.kp <= 0.0 || m.params.lambda < 0.0)
                throw Error(ErrorKind::validation,
                            "mos model '" + mc.name + "' needs kp > 0 and lambda >= 0", mc.line);
            mos_model_index.emplace(mc.name, static_cast<int>(c.mos_models.size()));
            c.mos_models.push_back(std::move(m));
        }
    }

    NodeTable nodes;
    auto need_nodes = [&](const Card& card, size_t count, Element& e) {
        if (card.tokens.size() < 1 + count)
            throw Error(ErrorKind::syntax,
                        "'" + card.tokens[0] + "' needs " + std::to_string(count) + " nodes",
                        card.line);
        for (size_t i = 0; i < count; ++i) e.nodes.push_back(nodes.intern(card.tokens[1 + i]));
    };

    for (const Card& card : doc.element_cards) {
        Element e;
        e.name = card.tokens[0];
        e.line = card.line;
        switch (e.name[0]) {
        case 'r': {
            e.kind = ElementKind::resistor;
            need_nodes(card, 2, e);
            if (card.tokens.size() != 4)
                throw Error(ErrorKind::syntax, "resistor card: R<name> n1 n2 value", card.line);
            e.resistance = parse_value(card.tokens[3], card.line);
            if (e.resistance <= 0.0)
                throw Error(ErrorKind::validation, "resistance must be positive", card.line);
            break;
        }
        case 'c': {
            e.kind = ElementKind::capacitor;
            need_nodes(card, 2, e);
            if (card.tokens.size() < 4)
                throw Error(ErrorKind::syntax, "capacitor card: C<name> n1 n2 value [ic=v]",
                            card.line);
            e.capacitance = parse_value(card.tokens[3], card.line);
            if (e.capacitance < 0.0)
                throw Error(ErrorKind::validation, "capacitance must be non-negative", card.line);
            auto params = parse_params(card.tokens, 4, card.line, "capacitor");
            if (auto it = params.find("ic"); it != params.end()) {
                e.has_ic = true;
                e.ic = it->second;
                params.erase(it);
            }
            reject_leftovers(params, card.line, "capacitor");
            break;
        }
        case 'm': {
            e.kind = ElementKind::mosfet;
            need_nodes(card, 4, e);
            if (card.tokens.size() < 6)
                throw Error(ErrorKind::syntax, "mosfet card: M<name> d g s b model [w= l= ...]",
                            card.line);
            const std::string& model = card.tokens[5];
            auto it = mos_model_index.find(model);
            if (it == mos_model_index.end())
                throw Error(ErrorKind::validation, "unresolved mos model '" + model + "'",
                            card.line);
            e.model = it->second;
            auto params = parse_params(card.tokens, 6, card.line, "mosfet");
            e.mos.w = take_param(params, "w", e.mos.w);
            e.mos.l = take_param(params, "l", e.mos.l);
            e.mos.dvth = take_param(params, "dvth", 0.0);
            e.mos.dbeta = take_param(params, "dbeta", 0.0);
            reject_leftovers(params, card.line, "mosfet");
            if (e.mos.w <= 0.0 || e.mos.l <= 0.0)
                throw Error(ErrorKind::validation, "mosfet w and l must be positive", card.line);
            break;
        }
        case 'v':
        case 'i': {
            e.kind = e.name[0] == 'v' ? ElementKind::vsource : ElementKind::isource;
            need_nodes(card, 2, e);
            e.waveform = parse_source_value(card.tokens, 3, card.line);
            break;
        }
        case 'x': {
            need_nodes(card, 2, e);
            if (card.tokens.size() < 4)
                throw Error(ErrorKind::syntax,
                            "x card: X<name> n1 n2 <rram-model>|buf [params]", card.line);
            const std::string& what = card.tokens[3];
            if (what == "buf") {
                e.kind = ElementKind::buffer;
                auto params = parse_params(card.tokens, 4, card.line, "buffer");
                e.cin = take_param(params, "cin", 0.0);
                reject_leftovers(params, card.line, "buffer");
                if (e.cin < 0.0)
                    throw Error(ErrorKind::validation, "buffer cin must be non-negative",
                                card.line);
            } else {
                auto it = rram_model_index.find(what);
                if (it == rram_model_index.end())
                    throw Error(ErrorKind::validation, "unresolved rram model '" + what + "'",
                                card.line);
                e.kind = ElementKind::rram;
                e.model = it->second;
                auto params = parse_params(card.tokens, 4, card.line, "rram");
                e.x0 = take_param(params, "x0", 0.0);
                reject_leftovers(params, card.line, "rram");
                if (e.x0 < 0.0 || e.x0 > 1.0)
                    throw Error(ErrorKind::validation, "rram x0 must lie in [0,1]", card.line);
            }
            break;
        }
        default:
            throw Error(ErrorKind::syntax, "unknown card '" + e.name + "'", card.line);
        }
        c.elements.push_back(std::move(e));
    }

    if (!nodes.ground_seen)
        throw Error(ErrorKind::validation, "no ground node (name one node \"0\")");
    c.node_names = std::move(nodes.names);

    // Dangling-node check: a non-ground node touched by a single terminal is
    // suspicious but not fatal (e.g. an intentionally open probe node).
    std::vector<int> touches(c.node_names.size(), 0);
    for (const Element& e : c.elements)
        for (Index n : e.nodes) ++touches[static_cast<size_t>(n)];
    for (size_t n = 1; n < c.node_names.size(); ++n) {
        if (touches[n] == 1)
            c.warnings.push_back({Diagnostic::Severity::warning, 0,
                                  "node '" + c.node_names[n] + "' touched by a single terminal"});
    }
    return c;
}

Circuit parse_circuit(std::string_view text) { return elaborate(parse(text)); }

Index Circuit::node_index(std::string_view name) const {
    const std::string folded = to_lower(name);
    for (size_t i = 0; i < node_names.size(); ++i)
        if (node_names[i] == folded) return static_cast<Index>(i);
    return -1;
}

int Circuit::element_index(std::string_view name) const {
    const std::string folded = to_lower(name);
    for (size_t i = 0; i < elements.size(); ++i)
        if (elements[i].name == folded) return static_cast<int>(i);
    return -1;
}

Element& Circuit::element(std::string_view name) {
    const int i = element_index(name);
    if (i < 0)
        throw Error(ErrorKind::validation, "no element named '" + std::string(name) + "'");
    return elements[static_cast<size_t>(i)];
}

const Element& Circuit::element(std::string_view name) const {
    const int i = element_index(name);
    if (i < 0)
        throw Error(ErrorKind::validation, "no element named '" + std::string(name) + "'");
    return elements[static_cast<size_t>(i)];
}

namespace {

std::string fmt(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string serialize(const Circuit& circuit) {
    std::ostringstream out;
    for (const NamedMosModel& m : circuit.mos_models) {
        out << ".model " << m.name << ' '
            << (m.params.polarity == MosPolarity::pmos ? "pmos" : "nmos")
            << " vth=" << fmt(m.params.vth) << " kp=" << fmt(m.params.kp)
            << " lambda=" << fmt(m.params.lambda) << '\n';
    }
    for (const NamedRramModel& m : circuit.rram_models) {
        out << ".model " << m.name << " rram ron=" << fmt(m.params.r_on)
            << " roff=" << fmt(m.params.r_off) << " vset=" << fmt(m.params.v_set)
            << " vreset=" << fmt(m.params.v_reset) << " tauset=" << fmt(m.params.tau_set)
            << " taureset=" << fmt(m.params.tau_reset) << '\n';
    }
    auto node = [&](const Element& e, size_t i) -> const std::string& {
        return circuit.node_names[static_cast<size_t>(e.nodes[i])];
    };
    auto source_value = [&](const Waveform& w) {
        if (w.kind == WaveformKind::dc) return " dc " + fmt(w.dc);
        return " pulse(" + fmt(w.v1) + ' ' + fmt(w.v2) + ' ' + fmt(w.delay) + ' ' + fmt(w.rise) +
               ' ' + fmt(w.fall) + ' ' + fmt(w.width) + ' ' + fmt(w.period) + ')';
    };
    for (const Element& e : circuit.elements) {
        out << e.name;
        for (size_t i = 0; i < e.nodes.size(); ++i) out << ' ' << node(e, i);
        switch (e.kind) {
        case ElementKind::resistor:
            out << ' ' << fmt(e.resistance);
            break;
        case ElementKind::capacitor:
            out << ' ' << fmt(e.capacitance);
            if (e.has_ic) out << " ic=" << fmt(e.ic);
            break;
        case ElementKind::mosfet:
            out << ' ' << circuit.mos_models[static_cast<size_t>(e.model)].name
                << " w=" << fmt(e.mos.w) << " l=" << fmt(e.mos.l);
            if (e.mos.dvth != 0.0) out << " dvth=" << fmt(e.mos.dvth);
            if (e.mos.dbeta != 0.0) out << " dbeta=" << fmt(e.mos.dbeta);
            break;
        case ElementKind::vsource:
        case ElementKind::isource:
            out << source_value(e.waveform);
            break;
        case ElementKind::rram:
            out << ' ' << circuit.rram_models[static_cast<size_t>(e.model)].name
                << " x0=" << fmt(e.x0);
            break;
        case ElementKind::buffer:
            out << " buf cin=" << fmt(e.cin);
            break;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace mirrorsim
