#pragma once

#include "shapmine/error.hpp"
#include "shapmine/eventlog.hpp"
#include "shapmine/features.hpp"
#include "shapmine/process_tree.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace shapmine {

// ---------------------------------------------------------------------------
// Gateway graph (BPMN-like node set used by the complexity metrics)
// ---------------------------------------------------------------------------

enum class GatewayKind { Start, End, Task, XorSplit, XorJoin, AndSplit, AndJoin };

inline const char* gateway_kind_name(GatewayKind k) {
    switch (k) {
        case GatewayKind::Start: return "start";
        case GatewayKind::End: return "end";
        case GatewayKind::Task: return "task";
        case GatewayKind::XorSplit: return "xor-split";
        case GatewayKind::XorJoin: return "xor-join";
        case GatewayKind::AndSplit: return "and-split";
        case GatewayKind::AndJoin: return "and-join";
    }
    return "?";
}

inline GatewayKind gateway_kind_from_name(const std::string& s) {
    for (GatewayKind k : {GatewayKind::Start, GatewayKind::End, GatewayKind::Task, GatewayKind::XorSplit,
                          GatewayKind::XorJoin, GatewayKind::AndSplit, GatewayKind::AndJoin})
        if (s == gateway_kind_name(k)) return k;
    throw ParseError("unknown gateway node kind '" + s + "'");
}

struct GatewayNode {
    std::string id;
    GatewayKind kind = GatewayKind::Task;
    std::string label; // Task only

    friend bool operator==(const GatewayNode&, const GatewayNode&) = default;
};

struct GatewayGraph {
    std::vector<GatewayNode> nodes;
    std::vector<std::pair<std::string, std::string>> edges;

    friend bool operator==(const GatewayGraph&, const GatewayGraph&) = default;

    const GatewayNode* find(const std::string& id) const {
        for (const auto& n : nodes)
            if (n.id == id) return &n;
        return nullptr;
    }

    std::size_t out_degree(const std::string& id) const {
        std::size_t d = 0;
        for (const auto& [u, v] : edges)
            if (u == id) ++d;
        return d;
    }

    std::size_t in_degree(const std::string& id) const {
        std::size_t d = 0;
        for (const auto& [u, v] : edges)
            if (v == id) ++d;
        return d;
    }
};

/// Structural invariants: unique start (no incoming) / end (no outgoing),
/// splits out-degree >= 2, joins in-degree >= 2, every node on a start-to-end
/// path.
inline void validate(const GatewayGraph& g) {
    const GatewayNode* start = nullptr;
    const GatewayNode* end = nullptr;
    for (const auto& n : g.nodes) {
        if (n.kind == GatewayKind::Start) {
            if (start) throw DomainError("gateway graph: multiple start nodes");
            start = &n;
        }
        if (n.kind == GatewayKind::End) {
            if (end) throw DomainError("gateway graph: multiple end nodes");
            end = &n;
        }
    }
    if (!start || !end) throw DomainError("gateway graph: missing start or end");
    if (g.in_degree(start->id) != 0) throw DomainError("gateway graph: start has incoming edges");
    if (g.out_degree(end->id) != 0) throw DomainError("gateway graph: end has outgoing edges");
    for (const auto& n : g.nodes) {
        if ((n.kind == GatewayKind::XorSplit || n.kind == GatewayKind::AndSplit) && g.out_degree(n.id) < 2)
            throw DomainError("gateway graph: split '" + n.id + "' has out-degree < 2");
        if ((n.kind == GatewayKind::XorJoin || n.kind == GatewayKind::AndJoin) && g.in_degree(n.id) < 2)
            throw DomainError("gateway graph: join '" + n.id + "' has in-degree < 2");
    }
    // forward/backward reachability
    std::map<std::string, std::vector<std::string>> succ, pred;
    for (const auto& [u, v] : g.edges) {
        succ[u].push_back(v);
        pred[v].push_back(u);
    }
    auto bfs = [&](const std::string& from, std::map<std::string, std::vector<std::string>>& adj) {
        std::set<std::string> seen{from};
        std::deque<std::string> q{from};
        while (!q.empty()) {
            auto cur = q.front();
            q.pop_front();
            for (const auto& nxt : adj[cur])
                if (seen.insert(nxt).second) q.push_back(nxt);
        }
        return seen;
    };
    auto fwd = bfs(start->id, succ);
    auto bwd = bfs(end->id, pred);
    for (const auto& n : g.nodes)
        if (!fwd.count(n.id) || !bwd.count(n.id))
            throw DomainError("gateway graph: node '" + n.id + "' not on a start-to-end path");
}

/// Line-based text form, one node/arc per line.
inline std::string to_string(const GatewayGraph& g) {
    std::string out;
    for (const auto& n : g.nodes) {
        out += "node " + n.id + " " + gateway_kind_name(n.kind);
        if (n.kind == GatewayKind::Task) out += " " + n.label;
        out += "\n";
    }
    for (const auto& [u, v] : g.edges) out += "arc " + u + " " + v + "\n";
    return out;
}

inline GatewayGraph parse_gateway_graph(const std::string& text) {
    GatewayGraph g;
    for (const auto& line : csv::split_lines(text)) {
        if (line.empty()) continue;
        auto fields = csv::split(line, ' ');
        if (fields[0] == "node") {
            if (fields.size() < 3) throw ParseError("gateway graph: bad node line '" + line + "'");
            GatewayNode n;
            n.id = fields[1];
            n.kind = gateway_kind_from_name(fields[2]);
            if (n.kind == GatewayKind::Task) {
                if (fields.size() < 4) throw ParseError("gateway graph: task without label: '" + line + "'");
                n.label = fields[3];
            }
            g.nodes.push_back(n);
        } else if (fields[0] == "arc") {
            if (fields.size() != 3) throw ParseError("gateway graph: bad arc line '" + line + "'");
            g.edges.emplace_back(fields[1], fields[2]);
        } else {
            throw ParseError("gateway graph: unknown line '" + line + "'");
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Petri net (workflow-net shape)
// ---------------------------------------------------------------------------

struct PetriNet {
    struct Transition {
        std::string id;
        std::string label; // empty = silent
        std::vector<int> inputs;
        std::vector<int> outputs;

        friend bool operator==(const Transition&, const Transition&) = default;
    };

    std::vector<std::string> places;
    std::vector<Transition> transitions;
    int source = -1;
    int sink = -1;

    friend bool operator==(const PetriNet&, const PetriNet&) = default;

    int add_place(const std::string& id) {
        places.push_back(id);
        return static_cast<int>(places.size()) - 1;
    }

    void add_transition(const std::string& id, const std::string& label, std::vector<int> in,
                        std::vector<int> out) {
        transitions.push_back(Transition{id, label, std::move(in), std::move(out)});
    }
};

inline void validate(const PetriNet& net) {
    if (net.source < 0 || net.sink < 0 || net.source >= static_cast<int>(net.places.size()) ||
        net.sink >= static_cast<int>(net.places.size()))
        throw DomainError("petri net: missing source or sink place");
    for (const auto& t : net.transitions) {
        for (int p : t.outputs)
            if (p == net.source) throw DomainError("petri net: source place has incoming arc");
        for (int p : t.inputs)
            if (p == net.sink) throw DomainError("petri net: sink place has outgoing arc");
    }
}

inline std::string to_string(const PetriNet& net) {
    std::string out;
    for (const auto& p : net.places) out += "place " + p + "\n";
    for (const auto& t : net.transitions) {
        out += "transition " + t.id + " " + (t.label.empty() ? "tau" : t.label) + "\n";
        for (int p : t.inputs) out += "arc " + net.places[p] + " " + t.id + "\n";
        for (int p : t.outputs) out += "arc " + t.id + " " + net.places[p] + "\n";
    }
    out += "initial " + net.places[net.source] + "\n";
    out += "final " + net.places[net.sink] + "\n";
    return out;
}

inline PetriNet parse_petri(const std::string& text) {
    PetriNet net;
    std::map<std::string, int> place_index;
    std::map<std::string, int> transition_index;
    for (const auto& line : csv::split_lines(text)) {
        if (line.empty()) continue;
        auto fields = csv::split(line, ' ');
        if (fields[0] == "place" && fields.size() == 2) {
            place_index[fields[1]] = net.add_place(fields[1]);
        } else if (fields[0] == "transition" && fields.size() == 3) {
            transition_index[fields[1]] = static_cast<int>(net.transitions.size());
            net.add_transition(fields[1], fields[2] == "tau" ? "" : fields[2], {}, {});
        } else if (fields[0] == "arc" && fields.size() == 3) {
            auto p = place_index.find(fields[1]);
            if (p != place_index.end()) {
                auto t = transition_index.find(fields[2]);
                if (t == transition_index.end()) throw ParseError("petri net: unknown transition in '" + line + "'");
                net.transitions[t->second].inputs.push_back(p->second);
            } else {
                auto t = transition_index.find(fields[1]);
                auto p2 = place_index.find(fields[2]);
                if (t == transition_index.end() || p2 == place_index.end())
                    throw ParseError("petri net: unknown endpoint in '" + line + "'");
                net.transitions[t->second].outputs.push_back(p2->second);
            }
        } else if (fields[0] == "initial" && fields.size() == 2) {
            net.source = place_index.at(fields[1]);
        } else if (fields[0] == "final" && fields.size() == 2) {
            net.sink = place_index.at(fields[1]);
        } else {
            throw ParseError("petri net: unknown line '" + line + "'");
        }
    }
    return net;
}

// ---------------------------------------------------------------------------
// Tree -> gateway graph
// ---------------------------------------------------------------------------

namespace detail {

struct GraphBuilder {
    GatewayGraph g;
    int counter = 0;
    std::set<std::pair<std::string, std::string>> edge_set;

    std::string fresh(GatewayKind kind, const std::string& label = {}) {
        std::string id = "n" + std::to_string(counter++);
        g.nodes.push_back(GatewayNode{id, kind, label});
        return id;
    }

    void edge(const std::string& u, const std::string& v) {
        if (edge_set.insert({u, v}).second) g.edges.emplace_back(u, v);
    }
};

struct Block {
    std::string entry;
    std::string exit;
    bool empty = false; // silent leaf: pass-through, no nodes
};

inline Block build_block(GraphBuilder& b, const ProcessTree& t) {
    switch (t.kind) {
        case ProcessTree::Kind::Silent:
            return Block{{}, {}, true};
        case ProcessTree::Kind::Leaf: {
            auto id = b.fresh(GatewayKind::Task, t.label);
            return Block{id, id, false};
        }
        case ProcessTree::Kind::Operator:
            break;
    }
    if (t.op == TreeOp::SEQ || (t.children.size() == 1 && t.op != TreeOp::LOOP)) {
        // chain; single-child XOR/AND degenerate to their child
        Block whole{{}, {}, true};
        for (const auto& c : t.children) {
            Block cb = build_block(b, c);
            if (cb.empty) continue;
            if (whole.empty) {
                whole = cb;
            } else {
                b.edge(whole.exit, cb.entry);
                whole.exit = cb.exit;
            }
        }
        return whole;
    }
    if (t.op == TreeOp::XOR || t.op == TreeOp::AND) {
        bool is_xor = t.op == TreeOp::XOR;
        auto split = b.fresh(is_xor ? GatewayKind::XorSplit : GatewayKind::AndSplit);
        auto join = b.fresh(is_xor ? GatewayKind::XorJoin : GatewayKind::AndJoin);
        for (const auto& c : t.children) {
            Block cb = build_block(b, c);
            if (cb.empty) {
                b.edge(split, join);
            } else {
                b.edge(split, cb.entry);
                b.edge(cb.exit, join);
            }
        }
        return Block{split, join, false};
    }
    // LOOP: xor-join entry, do body, xor-split exit, back edge through redo
    auto entry = b.fresh(GatewayKind::XorJoin);
    auto exit = b.fresh(GatewayKind::XorSplit);
    Block done = build_block(b, t.children[0]);
    if (done.empty) {
        b.edge(entry, exit);
    } else {
        b.edge(entry, done.entry);
        b.edge(done.exit, exit);
    }
    Block redo = build_block(b, t.children[1]);
    if (redo.empty) {
        b.edge(exit, entry);
    } else {
        b.edge(exit, redo.entry);
        b.edge(redo.exit, entry);
    }
    return Block{entry, exit, false};
}

} // namespace detail

inline GatewayGraph tree_to_gateway_graph(const ProcessTree& tree) {
    validate(tree);
    detail::GraphBuilder b;
    auto start = b.fresh(GatewayKind::Start);
    auto end = b.fresh(GatewayKind::End);
    detail::Block block = detail::build_block(b, tree);
    if (block.empty) {
        b.edge(start, end);
    } else {
        b.edge(start, block.entry);
        b.edge(block.exit, end);
    }
    return b.g;
}

// ---------------------------------------------------------------------------
// Tree -> Petri net (compositional)
// ---------------------------------------------------------------------------

namespace detail {

struct NetBuilder {
    PetriNet net;
    int place_counter = 0;
    int transition_counter = 0;

    int place() { return net.add_place("p" + std::to_string(place_counter++)); }

    void transition(const std::string& label, std::vector<int> in, std::vector<int> out) {
        net.add_transition("t" + std::to_string(transition_counter++), label, std::move(in), std::move(out));
    }
};

inline void build_net(NetBuilder& b, const ProcessTree& t, int in, int out) {
    switch (t.kind) {
        case ProcessTree::Kind::Leaf:
            b.transition(t.label, {in}, {out});
            return;
        case ProcessTree::Kind::Silent:
            b.transition("", {in}, {out});
            return;
        case ProcessTree::Kind::Operator:
            break;
    }
    switch (t.op) {
        case TreeOp::SEQ: {
            int cur = in;
            for (std::size_t i = 0; i < t.children.size(); ++i) {
                int next = (i + 1 == t.children.size()) ? out : b.place();
                build_net(b, t.children[i], cur, next);
                cur = next;
            }
            return;
        }
        case TreeOp::XOR:
            for (const auto& c : t.children) build_net(b, c, in, out);
            return;
        case TreeOp::AND: {
            std::vector<int> ins, outs;
            for (std::size_t i = 0; i < t.children.size(); ++i) {
                ins.push_back(b.place());
                outs.push_back(b.place());
            }
            b.transition("", {in}, ins);
            for (std::size_t i = 0; i < t.children.size(); ++i) build_net(b, t.children[i], ins[i], outs[i]);
            b.transition("", outs, {out});
            return;
        }
        case TreeOp::LOOP: {
            int body_in = b.place();
            int body_out = b.place();
            b.transition("", {in}, {body_in});
            build_net(b, t.children[0], body_in, body_out);
            build_net(b, t.children[1], body_out, body_in);
            b.transition("", {body_out}, {out});
            return;
        }
    }
}

} // namespace detail

inline PetriNet to_petri(const ProcessTree& tree) {
    validate(tree);
    detail::NetBuilder b;
    int source = b.place();
    int sink = b.place();
    detail::build_net(b, tree, source, sink);
    b.net.source = source;
    b.net.sink = sink;
    return b.net;
}

/// Gateway graph to Petri net: tasks become labeled transitions, edges become
/// places, and-gateways become silent transitions, xor-gateways merge their
/// incident edge places.
inline PetriNet to_petri(const GatewayGraph& graph) {
    validate(graph);
    // union-find over edges
    std::map<std::pair<std::string, std::string>, std::size_t> edge_index;
    for (std::size_t i = 0; i < graph.edges.size(); ++i) edge_index[graph.edges[i]] = i;
    std::vector<std::size_t> parent(graph.edges.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto unite = [&](std::size_t a, std::size_t b) { parent[find(a)] = find(b); };

    std::string start_id, end_id;
    for (const auto& n : graph.nodes) {
        if (n.kind == GatewayKind::Start) start_id = n.id;
        if (n.kind == GatewayKind::End) end_id = n.id;
        if (n.kind != GatewayKind::XorSplit && n.kind != GatewayKind::XorJoin) continue;
        std::vector<std::size_t> incident;
        for (std::size_t i = 0; i < graph.edges.size(); ++i)
            if (graph.edges[i].first == n.id || graph.edges[i].second == n.id) incident.push_back(i);
        for (std::size_t i = 1; i < incident.size(); ++i) unite(incident[0], incident[i]);
    }

    PetriNet net;
    std::map<std::size_t, int> class_place;
    auto place_of = [&](std::size_t edge) {
        std::size_t root = find(edge);
        auto it = class_place.find(root);
        if (it != class_place.end()) return it->second;
        int p = net.add_place("p" + std::to_string(class_place.size()));
        class_place[root] = p;
        return p;
    };

    auto in_edges = [&](const std::string& id) {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < graph.edges.size(); ++i)
            if (graph.edges[i].second == id) out.push_back(i);
        return out;
    };
    auto out_edges = [&](const std::string& id) {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < graph.edges.size(); ++i)
            if (graph.edges[i].first == id) out.push_back(i);
        return out;
    };

    int tcount = 0;
    for (const auto& n : graph.nodes) {
        if (n.kind == GatewayKind::Task || n.kind == GatewayKind::AndSplit || n.kind == GatewayKind::AndJoin) {
            std::vector<int> ins, outs;
            for (auto e : in_edges(n.id)) ins.push_back(place_of(e));
            for (auto e : out_edges(n.id)) outs.push_back(place_of(e));
            net.add_transition("t" + std::to_string(tcount++),
                               n.kind == GatewayKind::Task ? n.label : std::string{}, ins, outs);
        }
    }

    // source/sink places; keep the workflow shape even when xor merging pulls
    // producers into the start class (or consumers into the end class)
    auto start_out = out_edges(start_id);
    auto end_in = in_edges(end_id);
    if (start_out.size() != 1 || end_in.size() != 1)
        throw DomainError("gateway graph: start/end must have exactly one incident edge");
    int start_place = place_of(start_out[0]);
    int end_place = place_of(end_in[0]);
    bool start_has_producer = false, end_has_consumer = false;
    for (const auto& t : net.transitions) {
        for (int p : t.outputs)
            if (p == start_place) start_has_producer = true;
        for (int p : t.inputs)
            if (p == end_place) end_has_consumer = true;
    }
    if (start_has_producer) {
        int src = net.add_place("source");
        net.add_transition("t" + std::to_string(tcount++), "", {src}, {start_place});
        net.source = src;
    } else {
        net.source = start_place;
    }
    if (end_has_consumer) {
        int snk = net.add_place("sink");
        net.add_transition("t" + std::to_string(tcount++), "", {end_place}, {snk});
        net.sink = snk;
    } else {
        net.sink = end_place;
    }
    return net;
}

// ---------------------------------------------------------------------------
// Soundness (bounded explicit-state exploration)
// ---------------------------------------------------------------------------

enum class Soundness { Sound, Unsound, Unknown };

inline const char* soundness_name(Soundness s) {
    switch (s) {
        case Soundness::Sound: return "sound";
        case Soundness::Unsound: return "unsound";
        case Soundness::Unknown: return "unknown";
    }
    return "?";
}

namespace detail {

struct MarkingHash {
    std::size_t operator()(const std::vector<int>& m) const {
        std::size_t h = 1469598103934665603ull;
        for (int v : m) {
            h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull;
            h *= 1099511628211ull;
        }
        return h;
    }
};

inline bool enabled(const PetriNet::Transition& t, const std::vector<int>& m) {
    // duplicate input arcs demand multiple tokens from the same place
    for (std::size_t i = 0; i < t.inputs.size(); ++i) {
        int need = 1;
        for (std::size_t j = 0; j < i; ++j)
            if (t.inputs[j] == t.inputs[i]) ++need;
        if (m[t.inputs[i]] < need) return false;
    }
    return true;
}

inline std::vector<int> fire(const PetriNet::Transition& t, std::vector<int> m) {
    for (int p : t.inputs) --m[p];
    for (int p : t.outputs) ++m[p];
    return m;
}

} // namespace detail

/// Explores up to state_cap distinct markings. Sound iff the final marking is
/// reachable from every explored marking, no marking strictly covers it, and
/// no transition is dead. Cap overrun without a definite violation -> Unknown.
inline Soundness check_soundness(const PetriNet& net, std::size_t state_cap) {
    validate(net);
    std::vector<int> initial(net.places.size(), 0);
    initial[net.source] = 1;
    std::vector<int> final_marking(net.places.size(), 0);
    final_marking[net.sink] = 1;

    std::unordered_map<std::vector<int>, std::size_t, detail::MarkingHash> index;
    std::vector<std::vector<int>> markings;
    std::vector<std::vector<std::size_t>> successors;
    std::vector<bool> fired(net.transitions.size(), false);
    std::deque<std::size_t> queue;

    auto intern = [&](const std::vector<int>& m) {
        auto it = index.find(m);
        if (it != index.end()) return std::make_pair(it->second, false);
        std::size_t id = markings.size();
        index.emplace(m, id);
        markings.push_back(m);
        successors.emplace_back();
        queue.push_back(id);
        return std::make_pair(id, true);
    };

    intern(initial);
    bool capped = false;
    bool violation = false;
    std::size_t final_id = static_cast<std::size_t>(-1);
    if (initial == final_marking) final_id = 0;

    while (!queue.empty()) {
        std::size_t cur = queue.front();
        queue.pop_front();
        const auto m = markings[cur];

        // strict cover of the final marking => no proper completion
        if (m[net.sink] >= 1 && m != final_marking) {
            bool covers = true;
            for (std::size_t p = 0; p < m.size(); ++p)
                if (m[p] < final_marking[p]) {
                    covers = false;
                    break;
                }
            if (covers) {
                violation = true;
                break;
            }
        }

        bool any = false;
        for (std::size_t ti = 0; ti < net.transitions.size(); ++ti) {
            if (!detail::enabled(net.transitions[ti], m)) continue;
            any = true;
            fired[ti] = true;
            auto [succ, fresh] = intern(detail::fire(net.transitions[ti], m));
            successors[cur].push_back(succ);
            if (fresh && markings[succ] == final_marking) final_id = succ;
        }
        if (!any && m != final_marking) { // deadlock
            violation = true;
            break;
        }
        if (markings.size() > state_cap) {
            capped = true;
            break;
        }
    }

    if (violation) return Soundness::Unsound;
    if (capped) return Soundness::Unknown;
    if (final_id == static_cast<std::size_t>(-1)) return Soundness::Unsound;

    // option to complete: reverse reachability from the final marking
    std::vector<std::vector<std::size_t>> rev(markings.size());
    for (std::size_t i = 0; i < markings.size(); ++i)
        for (auto s : successors[i]) rev[s].push_back(i);
    std::vector<bool> reaches(markings.size(), false);
    std::deque<std::size_t> rq{final_id};
    reaches[final_id] = true;
    while (!rq.empty()) {
        auto cur = rq.front();
        rq.pop_front();
        for (auto p : rev[cur])
            if (!reaches[p]) {
                reaches[p] = true;
                rq.push_back(p);
            }
    }
    for (bool r : reaches)
        if (!r) return Soundness::Unsound;
    for (bool f : fired)
        if (!f) return Soundness::Unsound;
    return Soundness::Sound;
}

// ---------------------------------------------------------------------------
// Inductive miner (basic cuts on the directly-follows graph)
// ---------------------------------------------------------------------------

namespace detail {

using Sublog = std::vector<std::vector<std::string>>;

struct Dfg {
    std::set<std::string> activities;
    std::set<std::pair<std::string, std::string>> edges;
    std::set<std::string> starts, ends;
};

inline Dfg build_dfg(const Sublog& traces) {
    Dfg d;
    for (const auto& t : traces) {
        if (t.empty()) continue;
        d.starts.insert(t.front());
        d.ends.insert(t.back());
        for (const auto& a : t) d.activities.insert(a);
        for (std::size_t i = 0; i + 1 < t.size(); ++i) d.edges.insert({t[i], t[i + 1]});
    }
    return d;
}

inline std::string part_key(const std::set<std::string>& part) { return *part.begin(); }

// weakly connected components of the DFG
inline std::vector<std::set<std::string>> weak_components(const Dfg& d) {
    std::map<std::string, std::string> parent;
    for (const auto& a : d.activities) parent[a] = a;
    std::function<std::string(std::string)> find = [&](std::string x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [u, v] : d.edges) parent[find(u)] = find(v);
    std::map<std::string, std::set<std::string>> comps;
    for (const auto& a : d.activities) comps[find(a)].insert(a);
    std::vector<std::set<std::string>> out;
    for (auto& [root, members] : comps) out.push_back(members);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return part_key(a) < part_key(b); });
    return out;
}

inline ProcessTree im(const Sublog& traces);

inline ProcessTree im_partition_xor(const std::vector<std::set<std::string>>& parts, const Sublog& traces) {
    std::map<std::string, std::size_t> part_of;
    for (std::size_t i = 0; i < parts.size(); ++i)
        for (const auto& a : parts[i]) part_of[a] = i;
    std::vector<Sublog> sublogs(parts.size());
    for (const auto& t : traces) sublogs[part_of.at(t.front())].push_back(t);
    std::vector<ProcessTree> children;
    for (auto& sl : sublogs) children.push_back(im(sl));
    return ProcessTree::node(TreeOp::XOR, std::move(children));
}

inline Sublog project(const Sublog& traces, const std::set<std::string>& part) {
    Sublog out;
    out.reserve(traces.size());
    for (const auto& t : traces) {
        std::vector<std::string> proj;
        for (const auto& a : t)
            if (part.count(a)) proj.push_back(a);
        out.push_back(std::move(proj));
    }
    return out;
}

// maximal sequence cut: SCC condensation, incomparable groups merged, checked
// for a strict total order
inline std::optional<std::vector<std::set<std::string>>> sequence_cut(const Dfg& d) {
    std::vector<std::string> acts(d.activities.begin(), d.activities.end());
    std::size_t n = acts.size();
    if (n < 2) return std::nullopt;
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) idx[acts[i]] = i;
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (const auto& [u, v] : d.edges) reach[idx[u]][idx[v]] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (reach[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (reach[k][j]) reach[i][j] = true;

    // group indices: same SCC or mutually unreachable
    std::vector<std::size_t> group(n);
    for (std::size_t i = 0; i < n; ++i) group[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (group[x] != x) x = group[x] = group[group[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (reach[i][j] == reach[j][i]) group[find(i)] = find(j); // both or neither
    std::map<std::size_t, std::set<std::string>> members;
    for (std::size_t i = 0; i < n; ++i) members[find(i)].insert(acts[i]);
    if (members.size() < 2) return std::nullopt;

    // verify a strict total order over ALL cross pairs: for any two groups,
    // reachability must run in exactly one direction
    std::vector<std::set<std::string>> groups;
    for (auto& [root, part] : members) groups.push_back(part);
    auto relation = [&](const std::set<std::string>& ga, const std::set<std::string>& gb) {
        bool fwd = false, bwd = false;
        for (const auto& a : ga)
            for (const auto& b : gb) {
                fwd = fwd || reach[idx[a]][idx[b]];
                bwd = bwd || reach[idx[b]][idx[a]];
            }
        return std::make_pair(fwd, bwd);
    };
    for (std::size_t a = 0; a < groups.size(); ++a)
        for (std::size_t b = a + 1; b < groups.size(); ++b) {
            auto [fwd, bwd] = relation(groups[a], groups[b]);
            if (fwd == bwd) return std::nullopt; // cycle or leftover incomparability
        }
    std::sort(groups.begin(), groups.end(), [&](const auto& ga, const auto& gb) {
        return relation(ga, gb).first && !relation(ga, gb).second;
    });
    return groups;
}

inline std::optional<std::vector<std::set<std::string>>> parallel_cut(const Dfg& d) {
    std::vector<std::string> acts(d.activities.begin(), d.activities.end());
    std::size_t n = acts.size();
    if (n < 2) return std::nullopt;
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) idx[acts[i]] = i;
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    // connect activities that are NOT mutually directly-following
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            bool ij = d.edges.count({acts[i], acts[j]}) > 0;
            bool ji = d.edges.count({acts[j], acts[i]}) > 0;
            if (!(ij && ji)) parent[find(i)] = find(j);
        }
    std::map<std::size_t, std::set<std::string>> comps;
    for (std::size_t i = 0; i < n; ++i) comps[find(i)].insert(acts[i]);
    if (comps.size() < 2) return std::nullopt;
    std::vector<std::set<std::string>> parts;
    for (auto& [root, members] : comps) parts.push_back(members);
    for (const auto& p : parts) {
        bool has_start = false, has_end = false;
        for (const auto& a : p) {
            has_start = has_start || d.starts.count(a);
            has_end = has_end || d.ends.count(a);
        }
        if (!has_start || !has_end) return std::nullopt;
    }
    std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return part_key(a) < part_key(b); });
    return parts;
}

// basic loop cut: body = components containing start/end activities; redo
// components must enter the body only at starts and leave it only from ends
inline std::optional<std::pair<std::set<std::string>, std::vector<std::set<std::string>>>> loop_cut(const Dfg& d) {
    std::set<std::string> body;
    for (const auto& s : d.starts) body.insert(s);
    for (const auto& e : d.ends) body.insert(e);
    if (body.size() == d.activities.size()) return std::nullopt;

    for (;;) {
        // undirected components of the non-body activities
        std::map<std::string, std::string> parent;
        for (const auto& a : d.activities)
            if (!body.count(a)) parent[a] = a;
        std::function<std::string(std::string)> find = [&](std::string x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto& [u, v] : d.edges)
            if (parent.count(u) && parent.count(v)) parent[find(u)] = find(v);
        std::map<std::string, std::set<std::string>> comps;
        for (auto& [a, p] : parent) comps[find(a)].insert(a);
        if (comps.empty()) return std::nullopt;

        bool grew = false;
        for (auto& [root, comp] : comps) {
            bool ok = true;
            for (const auto& [u, v] : d.edges) {
                if (body.count(u) && comp.count(v) && !d.ends.count(u)) ok = false;
                if (comp.count(u) && body.count(v) && !d.starts.count(v)) ok = false;
                if (!ok) break;
            }
            if (!ok) {
                for (const auto& a : comp) body.insert(a);
                grew = true;
                break;
            }
        }
        if (grew) continue;

        std::vector<std::set<std::string>> redos;
        for (auto& [root, comp] : comps) redos.push_back(comp);
        std::sort(redos.begin(), redos.end(),
                  [](const auto& a, const auto& b) { return part_key(a) < part_key(b); });
        return std::make_pair(body, redos);
    }
}

// segments a trace into maximal runs inside/outside the body
inline void split_loop_runs(const Sublog& traces, const std::set<std::string>& body,
                            const std::vector<std::set<std::string>>& redos, Sublog& body_runs,
                            std::vector<Sublog>& redo_runs) {
    std::map<std::string, std::size_t> redo_of;
    for (std::size_t i = 0; i < redos.size(); ++i)
        for (const auto& a : redos[i]) redo_of[a] = i;
    for (const auto& t : traces) {
        std::vector<std::string> run;
        bool in_body = true;
        std::size_t current_redo = 0;
        auto flush = [&]() {
            if (run.empty()) return;
            if (in_body)
                body_runs.push_back(run);
            else
                redo_runs[current_redo].push_back(run);
            run.clear();
        };
        for (const auto& a : t) {
            bool a_in_body = body.count(a) > 0;
            if (a_in_body != in_body) {
                flush();
                in_body = a_in_body;
                if (!in_body) current_redo = redo_of.at(a);
            } else if (!in_body && redo_of.at(a) != current_redo) {
                flush();
                current_redo = redo_of.at(a);
            }
            run.push_back(a);
        }
        flush();
    }
}

inline std::string min_label(const ProcessTree& t) {
    auto labels = tree_labels(t);
    return labels.empty() ? std::string{} : *labels.begin();
}

inline ProcessTree im(const Sublog& traces) {
    bool any_empty = false, all_empty = true;
    for (const auto& t : traces) {
        if (t.empty())
            any_empty = true;
        else
            all_empty = false;
    }
    if (traces.empty() || all_empty) return ProcessTree::silent();
    if (any_empty) {
        Sublog nonempty;
        for (const auto& t : traces)
            if (!t.empty()) nonempty.push_back(t);
        return ProcessTree::node(TreeOp::XOR, {ProcessTree::silent(), im(nonempty)});
    }

    Dfg d = build_dfg(traces);
    if (d.activities.size() == 1) {
        const std::string& a = *d.activities.begin();
        bool all_single = true;
        for (const auto& t : traces)
            if (t.size() != 1) all_single = false;
        if (all_single) return ProcessTree::leaf(a);
        return ProcessTree::node(TreeOp::LOOP, {ProcessTree::leaf(a), ProcessTree::silent()});
    }

    auto xor_parts = weak_components(d);
    if (xor_parts.size() >= 2) return im_partition_xor(xor_parts, traces);

    if (auto seq = sequence_cut(d)) {
        std::vector<ProcessTree> children;
        for (const auto& part : *seq) children.push_back(im(project(traces, part)));
        return ProcessTree::node(TreeOp::SEQ, std::move(children));
    }

    if (auto par = parallel_cut(d)) {
        std::vector<ProcessTree> children;
        for (const auto& part : *par) children.push_back(im(project(traces, part)));
        return ProcessTree::node(TreeOp::AND, std::move(children));
    }

    if (auto loop = loop_cut(d)) {
        auto& [body, redos] = *loop;
        Sublog body_runs;
        std::vector<Sublog> redo_runs(redos.size());
        split_loop_runs(traces, body, redos, body_runs, redo_runs);
        ProcessTree body_tree = im(body_runs);
        ProcessTree redo_tree;
        if (redos.size() == 1) {
            redo_tree = im(redo_runs[0]);
        } else {
            std::vector<ProcessTree> alternatives;
            for (auto& rl : redo_runs) alternatives.push_back(im(rl));
            redo_tree = ProcessTree::node(TreeOp::XOR, std::move(alternatives));
        }
        return ProcessTree::node(TreeOp::LOOP, {std::move(body_tree), std::move(redo_tree)});
    }

    // fall-through: flower over all activities
    std::vector<ProcessTree> leaves;
    for (const auto& a : d.activities) leaves.push_back(ProcessTree::leaf(a));
    ProcessTree body = leaves.size() == 1 ? leaves[0] : ProcessTree::node(TreeOp::XOR, std::move(leaves));
    return ProcessTree::node(TreeOp::LOOP, {std::move(body), ProcessTree::silent()});
}

} // namespace detail

inline ProcessTree inductive_discover(const EventLog& log) {
    if (log.empty()) throw DomainError("inductive_discover: empty log");
    detail::Sublog traces;
    traces.reserve(log.trace_count());
    for (const auto& t : log.traces) traces.push_back(t.activities());
    ProcessTree tree = detail::im(traces);
    validate(tree);
    return tree;
}

// ---------------------------------------------------------------------------
// Directly-follows miner (frequency pruning + gateway insertion)
// ---------------------------------------------------------------------------

namespace dfgnames {
inline const std::string start = "__start__";
inline const std::string end = "__end__";
} // namespace dfgnames

/// eta: percentile in [0,1] of arc frequencies; arcs strictly below the
/// eta-quantile are pruned unless removal would take a task off every
/// start-to-end path. `balance` is the concurrency-detection threshold.
inline GatewayGraph dfg_discover(const EventLog& log, double eta, double balance = 0.7) {
    if (log.empty()) throw DomainError("dfg_discover: empty log");
    if (eta < 0.0 || eta > 1.0) throw DomainError("dfg_discover: eta outside [0,1]");

    std::map<std::pair<std::string, std::string>, long> freq;
    std::set<std::string> tasks;
    for (const auto& t : log.traces) {
        auto acts = t.activities();
        for (const auto& a : acts) tasks.insert(a);
        freq[{dfgnames::start, acts.front()}] += 1;
        freq[{acts.back(), dfgnames::end}] += 1;
        for (std::size_t i = 0; i + 1 < acts.size(); ++i) freq[{acts[i], acts[i + 1]}] += 1;
    }

    std::vector<double> all_freqs;
    for (auto& [arc, f] : freq) all_freqs.push_back(static_cast<double>(f));
    double threshold = quantile(all_freqs, eta);

    std::set<std::pair<std::string, std::string>> retained;
    for (auto& [arc, f] : freq) retained.insert(arc);

    auto connected = [&]() {
        std::map<std::string, std::vector<std::string>> succ, pred;
        for (const auto& [u, v] : retained) {
            succ[u].push_back(v);
            pred[v].push_back(u);
        }
        auto bfs = [&](const std::string& from, std::map<std::string, std::vector<std::string>>& adj) {
            std::set<std::string> seen{from};
            std::deque<std::string> q{from};
            while (!q.empty()) {
                auto cur = q.front();
                q.pop_front();
                for (const auto& nxt : adj[cur])
                    if (seen.insert(nxt).second) q.push_back(nxt);
            }
            return seen;
        };
        auto fwd = bfs(dfgnames::start, succ);
        auto bwd = bfs(dfgnames::end, pred);
        for (const auto& a : tasks)
            if (!fwd.count(a) || !bwd.count(a)) return false;
        return true;
    };

    // candidates in ascending frequency order, never disconnecting a task
    std::vector<std::pair<std::string, std::string>> candidates;
    for (auto& [arc, f] : freq)
        if (static_cast<double>(f) < threshold) candidates.push_back(arc);
    std::sort(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) {
        if (freq[a] != freq[b]) return freq[a] < freq[b];
        return a < b;
    });
    for (const auto& arc : candidates) {
        retained.erase(arc);
        if (!connected()) retained.insert(arc);
    }

    // successor/predecessor sets over retained arcs
    std::map<std::string, std::set<std::string>> succ, pred;
    for (const auto& [u, v] : retained) {
        succ[u].insert(v);
        pred[v].insert(u);
    }
    auto concurrent = [&](const std::string& a, const std::string& b) {
        if (a == dfgnames::start || a == dfgnames::end || b == dfgnames::start || b == dfgnames::end)
            return false;
        if (!retained.count({a, b}) || !retained.count({b, a})) return false;
        double fab = static_cast<double>(freq[{a, b}]);
        double fba = static_cast<double>(freq[{b, a}]);
        return std::fabs(fab - fba) / (fab + fba) < balance;
    };

    GatewayGraph g;
    g.nodes.push_back(GatewayNode{"start", GatewayKind::Start, {}});
    g.nodes.push_back(GatewayNode{"end", GatewayKind::End, {}});
    std::size_t task_counter = 0;
    std::map<std::string, std::string> task_id;
    for (const auto& a : tasks) {
        task_id[a] = "t" + std::to_string(task_counter++);
        g.nodes.push_back(GatewayNode{task_id[a], GatewayKind::Task, a});
    }
    auto base_id = [&](const std::string& a) {
        if (a == dfgnames::start) return std::string("start");
        if (a == dfgnames::end) return std::string("end");
        return task_id.at(a);
    };

    std::map<std::string, std::string> split_of, join_of;
    for (const auto& [a, ss] : succ) {
        if (ss.size() < 2) continue;
        bool all_conc = true;
        for (auto it = ss.begin(); it != ss.end() && all_conc; ++it)
            for (auto jt = std::next(it); jt != ss.end() && all_conc; ++jt)
                if (!concurrent(*it, *jt)) all_conc = false;
        std::string id = (all_conc ? "as_" : "xs_") + base_id(a);
        g.nodes.push_back(GatewayNode{id, all_conc ? GatewayKind::AndSplit : GatewayKind::XorSplit, {}});
        split_of[a] = id;
    }
    for (const auto& [a, ps] : pred) {
        if (ps.size() < 2) continue;
        bool all_conc = true;
        for (auto it = ps.begin(); it != ps.end() && all_conc; ++it)
            for (auto jt = std::next(it); jt != ps.end() && all_conc; ++jt)
                if (!concurrent(*it, *jt)) all_conc = false;
        std::string id = (all_conc ? "aj_" : "xj_") + base_id(a);
        g.nodes.push_back(GatewayNode{id, all_conc ? GatewayKind::AndJoin : GatewayKind::XorJoin, {}});
        join_of[a] = id;
    }

    std::set<std::pair<std::string, std::string>> edge_set;
    auto add_edge = [&](const std::string& u, const std::string& v) {
        if (edge_set.insert({u, v}).second) g.edges.emplace_back(u, v);
    };
    for (const auto& [a, id] : split_of) add_edge(base_id(a), id);
    for (const auto& [a, id] : join_of) add_edge(id, base_id(a));
    for (const auto& [u, v] : retained) {
        std::string from = split_of.count(u) ? split_of[u] : base_id(u);
        std::string to = join_of.count(v) ? join_of[v] : base_id(v);
        add_edge(from, to);
    }
    validate(g);
    return g;
}

// ---------------------------------------------------------------------------
// Discovered model + miner registry
// ---------------------------------------------------------------------------

struct DiscoveredModel {
    std::string miner;
    std::optional<ProcessTree> tree; // tree-based miners only
    GatewayGraph graph;
    PetriNet net;
};

inline DiscoveredModel discover_with_inductive(const EventLog& log) {
    DiscoveredModel m;
    m.miner = "inductive";
    m.tree = inductive_discover(log);
    m.graph = tree_to_gateway_graph(*m.tree);
    m.net = to_petri(*m.tree);
    return m;
}

inline DiscoveredModel discover_with_dfg(const EventLog& log, double eta, double balance = 0.7) {
    DiscoveredModel m;
    m.miner = "dfg";
    m.graph = dfg_discover(log, eta, balance);
    m.net = to_petri(m.graph);
    return m;
}

struct MinerConfig {
    double dfg_eta = 0.0;
    double concurrency_balance = 0.7;
};

class MinerRegistry {
public:
    using MinerFn = std::function<DiscoveredModel(const EventLog&)>;

    void register_miner(const std::string& name, MinerFn fn) { miners_[name] = std::move(fn); }

    bool has(const std::string& name) const { return miners_.count(name) > 0; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [n, fn] : miners_) out.push_back(n);
        return out;
    }

    DiscoveredModel run(const std::string& name, const EventLog& log) const {
        auto it = miners_.find(name);
        if (it == miners_.end()) throw DomainError("unknown miner '" + name + "'");
        return it->second(log);
    }

    /// The two built-in paradigms; further miners plug in via register_miner
    /// (an external region-based miner would use the same adapter slot).
    static MinerRegistry builtin(const MinerConfig& cfg = {}) {
        MinerRegistry r;
        r.register_miner("inductive", [](const EventLog& log) { return discover_with_inductive(log); });
        r.register_miner("dfg", [cfg](const EventLog& log) {
            return discover_with_dfg(log, cfg.dfg_eta, cfg.concurrency_balance);
        });
        return r;
    }

private:
    std::map<std::string, MinerFn> miners_;
};

} // namespace shapmine
