#pragma once

#include "shapmine/error.hpp"

#include <memory>
#include <set>
#include <string>
#include <vector>

namespace shapmine {

enum class TreeOp { SEQ, XOR, AND, LOOP };

inline const char* tree_op_name(TreeOp op) {
    switch (op) {
        case TreeOp::SEQ: return "SEQ";
        case TreeOp::XOR: return "XOR";
        case TreeOp::AND: return "AND";
        case TreeOp::LOOP: return "LOOP";
    }
    return "?";
}

/// Block-structured process tree. A node is either an activity leaf, a
/// silent leaf (tau), or an operator over children. LOOP has exactly two
/// children: do and redo.
struct ProcessTree {
    enum class Kind { Leaf, Silent, Operator };

    Kind kind = Kind::Silent;
    std::string label;  // Leaf only
    TreeOp op = TreeOp::SEQ;
    std::vector<ProcessTree> children;

    static ProcessTree leaf(std::string activity) {
        ProcessTree t;
        t.kind = Kind::Leaf;
        t.label = std::move(activity);
        return t;
    }

    static ProcessTree silent() { return ProcessTree{}; }

    static ProcessTree node(TreeOp op, std::vector<ProcessTree> children) {
        ProcessTree t;
        t.kind = Kind::Operator;
        t.op = op;
        t.children = std::move(children);
        return t;
    }

    friend bool operator==(const ProcessTree&, const ProcessTree&) = default;
};

/// Checks the structural invariants (child counts, non-empty labels).
inline void validate(const ProcessTree& tree) {
    switch (tree.kind) {
        case ProcessTree::Kind::Leaf:
            if (tree.label.empty()) throw DomainError("process tree: empty leaf label");
            return;
        case ProcessTree::Kind::Silent:
            return;
        case ProcessTree::Kind::Operator:
            if (tree.op == TreeOp::LOOP) {
                if (tree.children.size() != 2) throw DomainError("process tree: LOOP needs exactly 2 children");
            } else if (tree.children.empty()) {
                throw DomainError("process tree: operator without children");
            }
            for (const auto& c : tree.children) validate(c);
            return;
    }
}

inline int tree_depth(const ProcessTree& tree) {
    if (tree.kind != ProcessTree::Kind::Operator) return 1;
    int deepest = 0;
    for (const auto& c : tree.children) deepest = std::max(deepest, tree_depth(c));
    return deepest + 1;
}

inline void collect_labels(const ProcessTree& tree, std::set<std::string>& out) {
    if (tree.kind == ProcessTree::Kind::Leaf) out.insert(tree.label);
    for (const auto& c : tree.children) collect_labels(c, out);
}

inline std::set<std::string> tree_labels(const ProcessTree& tree) {
    std::set<std::string> out;
    collect_labels(tree, out);
    return out;
}

// Parenthesized text form, e.g. SEQ(a,XOR(b,tau)). Silent leaves print as
// `tau`; activity labels therefore must not be literally "tau" and must not
// contain '(' ')' ',' or whitespace.
inline std::string to_string(const ProcessTree& tree) {
    switch (tree.kind) {
        case ProcessTree::Kind::Leaf: return tree.label;
        case ProcessTree::Kind::Silent: return "tau";
        case ProcessTree::Kind::Operator: {
            std::string out = tree_op_name(tree.op);
            out.push_back('(');
            for (std::size_t i = 0; i < tree.children.size(); ++i) {
                if (i) out.push_back(',');
                out += to_string(tree.children[i]);
            }
            out.push_back(')');
            return out;
        }
    }
    return {};
}

namespace detail {

inline ProcessTree parse_tree_at(const std::string& text, std::size_t& pos) {
    auto fail = [&](const std::string& msg) {
        throw ParseError("process tree parse error at offset " + std::to_string(pos) + ": " + msg);
    };
    std::size_t start = pos;
    while (pos < text.size() && text[pos] != '(' && text[pos] != ')' && text[pos] != ',') ++pos;
    std::string word = text.substr(start, pos - start);
    if (word.empty()) fail("expected node");
    if (pos < text.size() && text[pos] == '(') {
        ++pos;
        TreeOp op;
        if (word == "SEQ") op = TreeOp::SEQ;
        else if (word == "XOR") op = TreeOp::XOR;
        else if (word == "AND") op = TreeOp::AND;
        else if (word == "LOOP") op = TreeOp::LOOP;
        else fail("unknown operator '" + word + "'");
        std::vector<ProcessTree> children;
        for (;;) {
            children.push_back(parse_tree_at(text, pos));
            if (pos >= text.size()) fail("unterminated node");
            if (text[pos] == ',') {
                ++pos;
                continue;
            }
            if (text[pos] == ')') {
                ++pos;
                break;
            }
            fail("expected ',' or ')'");
        }
        return ProcessTree::node(op, std::move(children));
    }
    if (word == "tau") return ProcessTree::silent();
    return ProcessTree::leaf(word);
}

} // namespace detail

inline ProcessTree parse_tree(const std::string& text) {
    std::size_t pos = 0;
    ProcessTree t = detail::parse_tree_at(text, pos);
    if (pos != text.size()) throw ParseError("process tree parse error: trailing input");
    validate(t);
    return t;
}

} // namespace shapmine
