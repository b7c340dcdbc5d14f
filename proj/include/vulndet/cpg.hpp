#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "vulndet/parser.hpp"

namespace vulndet {

// Five forward edge kinds; every non-Ast edge also gets a mirrored
// reverse edge whose type code is offset by 5, for 10 codes total.
enum class EdgeKind { Ast = 0, FlowTo = 1, DefineUse = 2, Reach = 3, Control = 4 };

constexpr int kEdgeTypeCount = 10;

inline int edge_type_code(EdgeKind k, bool reversed) {
    return int(k) + (reversed ? 5 : 0);
}

inline const char* edge_kind_name(EdgeKind k) {
    switch (k) {
        case EdgeKind::Ast: return "ast";
        case EdgeKind::FlowTo: return "flow_to";
        case EdgeKind::DefineUse: return "define_use";
        case EdgeKind::Reach: return "reach";
        case EdgeKind::Control: return "control";
    }
    return "?";
}

struct CpgNode {
    int id = 0;
    AstKind kind = AstKind::Expr;
    std::vector<std::string> code; // the node's own token texts
};

struct CpgEdge {
    int src = 0;
    int dst = 0;
    EdgeKind kind = EdgeKind::Ast;
    bool reversed = false;

    int type_code() const { return edge_type_code(kind, reversed); }

    friend bool operator<(const CpgEdge& a, const CpgEdge& b) {
        return std::tie(a.src, a.dst, a.kind, a.reversed) <
               std::tie(b.src, b.dst, b.kind, b.reversed);
    }
    friend bool operator==(const CpgEdge& a, const CpgEdge& b) {
        return a.src == b.src && a.dst == b.dst && a.kind == b.kind &&
               a.reversed == b.reversed;
    }
};

struct Cpg {
    std::vector<CpgNode> nodes;           // node id == Ast id == index
    std::vector<CpgEdge> edges;           // sorted, unique
    std::unordered_map<int, int> stmt_of; // statement node id -> stmt id
    std::string function_id;
};

enum class PdgEdgeKind { Data, Control };

// Statement-level dependence graph: the slicing substrate.
struct Pdg {
    struct Edge {
        int src = 0;
        int dst = 0;
        PdgEdgeKind kind = PdgEdgeKind::Data;

        friend bool operator<(const Edge& a, const Edge& b) {
            return std::tie(a.src, a.dst, a.kind) < std::tie(b.src, b.dst, b.kind);
        }
        friend bool operator==(const Edge& a, const Edge& b) {
            return a.src == b.src && a.dst == b.dst && a.kind == b.kind;
        }
    };
    int stmt_count = 0;
    std::vector<Edge> edges;
};

struct FlowEdge {
    int src = 0; // statement node ids
    int dst = 0;
    friend bool operator<(const FlowEdge& a, const FlowEdge& b) {
        return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
    }
    friend bool operator==(const FlowEdge& a, const FlowEdge& b) {
        return a.src == b.src && a.dst == b.dst;
    }
};

namespace detail {

// Entry/exit frontier of a statement or block. A construct with neither
// (an empty block) is transparent to sequencing.
struct Flow {
    std::vector<NodeId> entries;
    std::vector<NodeId> exits;
    bool transparent() const { return entries.empty() && exits.empty(); }
};

class CfgBuilder {
public:
    explicit CfgBuilder(const Ast& ast) : ast_(ast) {}

    std::vector<FlowEdge> build() {
        const AstNode& fn = ast_.node(ast_.root);
        for (NodeId c : fn.children)
            if (ast_.node(c).kind == AstKind::Block) flow_of(c);
        std::sort(edges_.begin(), edges_.end());
        edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
        return std::move(edges_);
    }

private:
    const Ast& ast_;
    std::vector<FlowEdge> edges_;

    void connect(const std::vector<NodeId>& from, const std::vector<NodeId>& to) {
        for (NodeId s : from)
            for (NodeId t : to) edges_.push_back({s, t});
    }

    Flow flow_of(NodeId id) {
        const AstNode& n = ast_.node(id);
        switch (n.kind) {
            case AstKind::Block: {
                Flow seq;
                std::vector<NodeId> frontier;
                bool started = false;
                for (NodeId c : n.children) {
                    Flow f = flow_of(c);
                    if (f.transparent()) continue;
                    if (!started) {
                        seq.entries = f.entries;
                        started = true;
                    } else {
                        connect(frontier, f.entries);
                    }
                    frontier = f.exits;
                }
                seq.exits = frontier;
                return seq;
            }
            case AstKind::If: {
                NodeId cond = n.children.at(0);
                Flow out;
                out.entries = {cond};
                std::vector<NodeId> branches(n.children.begin() + 1,
                                             n.children.end());
                bool has_else = branches.size() >= 2;
                for (NodeId b : branches) {
                    Flow f = flow_of(b);
                    if (f.transparent()) {
                        out.exits.push_back(cond);
                    } else {
                        connect({cond}, f.entries);
                        out.exits.insert(out.exits.end(), f.exits.begin(),
                                         f.exits.end());
                    }
                }
                if (!has_else) out.exits.push_back(cond); // false path
                return out;
            }
            case AstKind::While:
            case AstKind::For: {
                NodeId cond = n.children.at(0);
                Flow out;
                out.entries = {cond};
                out.exits = {cond}; // loop exit
                if (n.children.size() >= 2) {
                    Flow body = flow_of(n.children[1]);
                    if (!body.transparent()) {
                        connect({cond}, body.entries);
                        connect(body.exits, {cond}); // back edge
                    }
                }
                return out;
            }
            case AstKind::Return:
                return {{id}, {}};
            default:
                if (is_statement_kind(n.kind)) return {{id}, {id}};
                return {};
        }
    }
};

} // namespace detail

// Intra-procedural control flow at statement granularity: sequential
// chaining, branch heads + join for `if`, condition/body/back-edge for
// loops, no successor after `return`.
inline std::vector<FlowEdge> build_cfg(const Ast& ast) {
    return detail::CfgBuilder(ast).build();
}

// Classic reaching definitions to a fixed point over the (possibly
// cyclic) flow graph; emits one def-site -> use-site pair per variable
// whose definition survives to the use.
inline std::vector<FlowEdge> build_dataflow(const Ast& ast,
                                            const std::vector<FlowEdge>& cfg) {
    std::vector<NodeId> stmts = statement_nodes(ast);
    std::map<NodeId, DefUse> du;
    for (NodeId s : stmts) du[s] = statement_def_use(ast.node(s));

    std::map<NodeId, std::vector<NodeId>> preds;
    for (const FlowEdge& e : cfg) preds[e.dst].push_back(e.src);

    // (variable, def statement) fact sets
    using Facts = std::set<std::pair<std::string, NodeId>>;
    std::map<NodeId, Facts> in, out;

    auto transfer = [&](NodeId s, const Facts& in_facts) {
        Facts o;
        const std::vector<std::string>& defs = du[s].defs;
        for (const auto& f : in_facts)
            if (std::find(defs.begin(), defs.end(), f.first) == defs.end())
                o.insert(f);
        for (const std::string& v : defs) o.insert({v, s});
        return o;
    };

    std::deque<NodeId> work(stmts.begin(), stmts.end());
    while (!work.empty()) {
        NodeId s = work.front();
        work.pop_front();
        Facts i;
        for (NodeId p : preds[s]) i.insert(out[p].begin(), out[p].end());
        Facts o = transfer(s, i);
        in[s] = std::move(i);
        if (o != out[s]) {
            out[s] = std::move(o);
            for (const FlowEdge& e : cfg)
                if (e.src == s) work.push_back(e.dst);
        }
    }

    std::vector<FlowEdge> edges;
    for (NodeId s : stmts) {
        const std::vector<std::string>& uses = du[s].uses;
        for (const auto& [var, def_site] : in[s])
            if (std::find(uses.begin(), uses.end(), var) != uses.end())
                edges.push_back({def_site, s});
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

// Syntactic control dependence: each statement in a branch or loop body
// depends on its nearest governing condition.
inline std::vector<FlowEdge> build_control_dep(const Ast& ast) {
    std::vector<FlowEdge> edges;

    std::function<void(NodeId, NodeId)> walk = [&](NodeId id, NodeId governor) {
        const AstNode& n = ast.node(id);
        switch (n.kind) {
            case AstKind::If:
            case AstKind::While:
            case AstKind::For: {
                NodeId cond = n.children.at(0);
                if (governor >= 0) edges.push_back({governor, cond});
                for (std::size_t i = 1; i < n.children.size(); ++i)
                    walk(n.children[i], cond);
                return;
            }
            case AstKind::Block:
            case AstKind::Function:
                for (NodeId c : n.children) walk(c, governor);
                return;
            default:
                if (is_statement_kind(n.kind) && governor >= 0)
                    edges.push_back({governor, id});
                return;
        }
    };
    walk(ast.root, -1);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

// Assemble the joint graph: the AST backbone plus flow, dataflow (as both
// DefineUse and Reach kinds) and control dependence, with reverse mirrors
// for every non-Ast edge.
inline Cpg build_cpg(const Ast& ast, const std::string& function_id = "") {
    Cpg g;
    g.function_id = function_id;
    for (const AstNode& n : ast.nodes) {
        CpgNode cn;
        cn.id = n.id;
        cn.kind = n.kind;
        for (const Token& t : n.tokens) cn.code.push_back(t.text);
        g.nodes.push_back(std::move(cn));
        if (n.stmt_id) g.stmt_of[n.id] = *n.stmt_id;
    }

    std::vector<CpgEdge> edges;
    for (const AstNode& n : ast.nodes)
        for (NodeId c : n.children) edges.push_back({n.id, c, EdgeKind::Ast, false});

    auto add_mirrored = [&edges](const std::vector<FlowEdge>& es, EdgeKind k) {
        for (const FlowEdge& e : es) {
            edges.push_back({e.src, e.dst, k, false});
            edges.push_back({e.dst, e.src, k, true});
        }
    };
    std::vector<FlowEdge> cfg = build_cfg(ast);
    add_mirrored(cfg, EdgeKind::FlowTo);
    std::vector<FlowEdge> dataflow = build_dataflow(ast, cfg);
    add_mirrored(dataflow, EdgeKind::DefineUse);
    add_mirrored(dataflow, EdgeKind::Reach);
    add_mirrored(build_control_dep(ast), EdgeKind::Control);

    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    g.edges = std::move(edges);
    return g;
}

// Project onto statement ids: DefineUse/Reach -> data, Control ->
// control; forward edges only.
inline Pdg project_pdg(const Cpg& cpg) {
    Pdg pdg;
    for (const auto& [node, stmt] : cpg.stmt_of)
        pdg.stmt_count = std::max(pdg.stmt_count, stmt + 1);

    std::vector<Pdg::Edge> edges;
    for (const CpgEdge& e : cpg.edges) {
        if (e.reversed) continue;
        PdgEdgeKind k;
        if (e.kind == EdgeKind::DefineUse || e.kind == EdgeKind::Reach)
            k = PdgEdgeKind::Data;
        else if (e.kind == EdgeKind::Control)
            k = PdgEdgeKind::Control;
        else
            continue;
        auto s = cpg.stmt_of.find(e.src);
        auto d = cpg.stmt_of.find(e.dst);
        if (s == cpg.stmt_of.end() || d == cpg.stmt_of.end()) continue;
        edges.push_back({s->second, d->second, k});
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    pdg.edges = std::move(edges);
    return pdg;
}

inline Cpg cpg_from_source(const std::string& source,
                           const std::string& function_id = "") {
    return build_cpg(parse_source(source), function_id);
}

} // namespace vulndet
