#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vulndet/parser.hpp"
#include "vulndet/records.hpp"
#include "vulndet/rng.hpp"
#include "vulndet/slicer.hpp"

namespace vulndet {

// A generated vulnerable variant. Only vulnerable functions are mutated,
// so the label is always 1.
struct MutatedFunction {
    std::string code;
    std::string parent_id;
    MutationOp op = MutationOp::Rn;
    std::uint64_t seed = 0;
    int label = 1;
    Cwe cwe = Cwe::Cwe404;
    std::map<std::string, std::string> rename; // old -> new, rn/add provenance
};

namespace detail {

struct ParentInfo {
    NodeId parent = -1;
    std::size_t position = 0; // index into parent's children
};

inline std::map<NodeId, ParentInfo> parent_map(const Ast& ast) {
    std::map<NodeId, ParentInfo> out;
    for (const AstNode& n : ast.nodes)
        for (std::size_t i = 0; i < n.children.size(); ++i)
            out[n.children[i]] = {n.id, i};
    return out;
}

inline Token make_token(const std::string& text, TokenKind kind) {
    Token t;
    t.text = text;
    t.kind = kind;
    t.line = 1;
    t.col = 1;
    return t;
}

inline NodeId append_node(Ast& ast, AstKind kind) {
    AstNode n;
    n.id = NodeId(ast.nodes.size());
    n.kind = kind;
    ast.nodes.push_back(std::move(n));
    return ast.nodes.back().id;
}

inline void own_token(Ast& ast, NodeId id, Token t) {
    AstNode& n = ast.node(id);
    n.layout.push_back({false, int(n.tokens.size())});
    n.tokens.push_back(std::move(t));
}

inline void append_child(Ast& ast, NodeId parent, NodeId child) {
    AstNode& n = ast.node(parent);
    n.layout.push_back({true, int(n.children.size())});
    n.children.push_back(child);
}

inline void replace_child(Ast& ast, NodeId parent, std::size_t position,
                          NodeId new_child) {
    ast.node(parent).children[position] = new_child;
}

inline void remove_child(Ast& ast, NodeId parent, std::size_t position) {
    AstNode& n = ast.node(parent);
    n.children.erase(n.children.begin() + long(position));
    for (std::size_t i = 0; i < n.layout.size(); ++i) {
        if (!n.layout[i].is_child) continue;
        if (n.layout[i].index == int(position)) {
            n.layout.erase(n.layout.begin() + long(i));
            --i;
            continue;
        }
        if (n.layout[i].index > int(position)) --n.layout[i].index;
    }
}

inline void insert_child_after(Ast& ast, NodeId parent, std::size_t position,
                               NodeId new_child) {
    AstNode& n = ast.node(parent);
    n.children.insert(n.children.begin() + long(position) + 1, new_child);
    std::size_t anchor_layout = 0;
    for (std::size_t i = 0; i < n.layout.size(); ++i) {
        if (!n.layout[i].is_child) continue;
        if (n.layout[i].index == int(position)) anchor_layout = i;
        if (n.layout[i].index > int(position)) ++n.layout[i].index;
    }
    n.layout.insert(n.layout.begin() + long(anchor_layout) + 1,
                    LayoutItem{true, int(position + 1)});
}

// `{ stmt }` wrapper used when a bare branch body needs to hold more than
// one statement.
inline NodeId wrap_in_block(Ast& ast, NodeId stmt) {
    NodeId block = append_node(ast, AstKind::Block);
    own_token(ast, block, make_token("{", TokenKind::Punctuation));
    append_child(ast, block, stmt);
    own_token(ast, block, make_token("}", TokenKind::Punctuation));
    return block;
}

inline std::set<std::string> all_identifiers(const Ast& ast) {
    std::set<std::string> ids;
    for (const AstNode& n : ast.nodes)
        for (const Token& t : n.tokens)
            if (t.kind == TokenKind::Identifier) ids.insert(t.text);
    return ids;
}

// v0, v1, ... skipping anything already visible in the function.
class FreshNames {
public:
    explicit FreshNames(const Ast& ast) : taken_(all_identifiers(ast)) {}

    std::string next() {
        for (;;) {
            std::string name = "v" + std::to_string(counter_++);
            if (!taken_.count(name) && !c_keywords().count(name)) {
                taken_.insert(name);
                return name;
            }
        }
    }

private:
    std::set<std::string> taken_;
    int counter_ = 0;
};

inline void rename_everywhere(Ast& ast,
                              const std::map<std::string, std::string>& renames) {
    for (AstNode& n : ast.nodes)
        for (std::size_t i = 0; i < n.tokens.size(); ++i) {
            Token& t = n.tokens[i];
            if (t.kind != TokenKind::Identifier) continue;
            if (is_member_name(n.tokens, i)) continue; // field names stay
            auto it = renames.find(t.text);
            if (it != renames.end()) t.text = it->second;
        }
}

// Declared-variable universe: parameters plus every statement def, in
// source order.
inline std::vector<std::string> local_variables(const Ast& ast) {
    std::vector<std::string> locals = parameter_names(ast);
    for (NodeId id : statement_nodes(ast)) {
        DefUse du = statement_def_use(ast.node(id));
        for (const std::string& d : du.defs) push_unique(locals, d);
    }
    return locals;
}

inline bool has_initializer(const AstNode& n) {
    return find_assign_op(n.tokens, 0, n.tokens.size()).has_value();
}

inline bool is_assignment_like(const AstNode& n) {
    if (n.kind == AstKind::Assign) return true;
    return n.kind == AstKind::Decl && has_initializer(n);
}

inline bool is_leaf_statement(AstKind k) {
    switch (k) {
        case AstKind::Decl:
        case AstKind::Assign:
        case AstKind::Call:
        case AstKind::Return:
        case AstKind::Expr:
            return true;
        default:
            return false;
    }
}

inline MutatedFunction finish(const Ast& ast, const FunctionRecord& f_v,
                              MutationOp op, std::uint64_t seed,
                              std::map<std::string, std::string> rename = {}) {
    MutatedFunction m;
    m.code = emit_source(ast);
    m.parent_id = f_v.id;
    m.op = op;
    m.seed = seed;
    m.cwe = f_v.cwe;
    m.rename = std::move(rename);
    parse_source(m.code); // every emitted mutant must re-parse
    return m;
}

} // namespace detail

// rn: rename a random non-empty subset of local variables to fresh names
// at every occurrence. Alpha-renaming preserves semantics, so frozen
// statements may be touched; the renaming map is recorded.
inline MutatedFunction mutate_rn(const FunctionRecord& f_v,
                                 const std::set<int>& /*frozen*/,
                                 std::uint64_t seed) {
    Ast ast = parse_source(f_v.code);
    std::vector<std::string> locals = detail::local_variables(ast);
    if (locals.empty())
        throw NoCandidates("rn: function declares no local variables");

    Rng rng(seed);
    std::size_t k = 1 + std::size_t(rng.below(locals.size()));
    rng.shuffle(locals);
    locals.resize(k);

    detail::FreshNames fresh(ast);
    std::map<std::string, std::string> renames;
    for (const std::string& old : locals) renames[old] = fresh.next();
    detail::rename_everywhere(ast, renames);
    return detail::finish(ast, f_v, MutationOp::Rn, seed, renames);
}

// ai: wrap one unrelated assignment (or initialized declaration) in an
// always-true guard: `s` -> `if (1) { s }`.
inline MutatedFunction mutate_ai(const FunctionRecord& f_v,
                                 const std::set<int>& frozen,
                                 std::uint64_t seed) {
    Ast ast = parse_source(f_v.code);
    std::vector<NodeId> candidates;
    for (NodeId id : statement_nodes(ast)) {
        const AstNode& n = ast.node(id);
        if (detail::is_assignment_like(n) && !frozen.count(*n.stmt_id))
            candidates.push_back(id);
    }
    if (candidates.empty())
        throw NoCandidates("ai: every assignment is vulnerability-related");

    Rng rng(seed);
    NodeId target = candidates[std::size_t(rng.below(candidates.size()))];
    auto parents = detail::parent_map(ast);
    detail::ParentInfo pi = parents.at(target);

    NodeId cond = detail::append_node(ast, AstKind::Condition);
    detail::own_token(ast, cond, detail::make_token("1", TokenKind::Number));
    NodeId block = detail::wrap_in_block(ast, target);
    NodeId guard = detail::append_node(ast, AstKind::If);
    detail::own_token(ast, guard, detail::make_token("if", TokenKind::Keyword));
    detail::own_token(ast, guard, detail::make_token("(", TokenKind::Punctuation));
    detail::append_child(ast, guard, cond);
    detail::own_token(ast, guard, detail::make_token(")", TokenKind::Punctuation));
    detail::append_child(ast, guard, block);

    detail::replace_child(ast, pi.parent, pi.position, guard);
    return detail::finish(ast, f_v, MutationOp::Ai, seed);
}

// del: remove a random non-empty subset of unrelated leaf statements.
// Statements whose definitions are used anywhere else are exempt so no
// surviving statement loses a definition it reads.
inline MutatedFunction mutate_del(const FunctionRecord& f_v,
                                  const std::set<int>& frozen,
                                  std::uint64_t seed) {
    Ast ast = parse_source(f_v.code);
    std::vector<NodeId> stmts = statement_nodes(ast);

    std::map<NodeId, DefUse> du;
    for (NodeId id : stmts) du[id] = statement_def_use(ast.node(id));

    std::vector<NodeId> deletable;
    for (NodeId id : stmts) {
        const AstNode& n = ast.node(id);
        if (!detail::is_leaf_statement(n.kind) || frozen.count(*n.stmt_id))
            continue;
        bool feeds_someone = false;
        for (NodeId other : stmts) {
            if (other == id) continue;
            for (const std::string& d : du[id].defs)
                if (std::find(du[other].uses.begin(), du[other].uses.end(), d) !=
                    du[other].uses.end()) {
                    feeds_someone = true;
                    break;
                }
            if (feeds_someone) break;
        }
        if (!feeds_someone) deletable.push_back(id);
    }
    if (deletable.empty())
        throw NoCandidates("del: no deletable statement after exemptions");

    Rng rng(seed);
    std::size_t k = 1 + std::size_t(rng.below(deletable.size()));
    rng.shuffle(deletable);
    deletable.resize(k);

    for (NodeId id : deletable) {
        auto parents = detail::parent_map(ast);
        detail::ParentInfo pi = parents.at(id);
        if (ast.node(pi.parent).kind == AstKind::Block) {
            detail::remove_child(ast, pi.parent, pi.position);
        } else {
            // bare branch body: leave an empty statement behind
            NodeId empty = detail::append_node(ast, AstKind::Expr);
            detail::own_token(ast, empty,
                              detail::make_token(";", TokenKind::Punctuation));
            detail::replace_child(ast, pi.parent, pi.position, empty);
        }
    }
    return detail::finish(ast, f_v, MutationOp::Del, seed);
}

// add: copy one unrelated assignment, rename every identifier in the copy
// to a fresh name, and insert it right after the original.
inline MutatedFunction mutate_add(const FunctionRecord& f_v,
                                  const std::set<int>& frozen,
                                  std::uint64_t seed) {
    Ast ast = parse_source(f_v.code);
    std::vector<NodeId> candidates;
    for (NodeId id : statement_nodes(ast)) {
        const AstNode& n = ast.node(id);
        if (detail::is_assignment_like(n) && !frozen.count(*n.stmt_id))
            candidates.push_back(id);
    }
    if (candidates.empty())
        throw NoCandidates("add: no unrelated assignment to copy");

    Rng rng(seed);
    NodeId source = candidates[std::size_t(rng.below(candidates.size()))];

    NodeId clone = detail::append_node(ast, ast.node(source).kind);
    detail::FreshNames fresh(ast);
    std::map<std::string, std::string> renames;
    {
        const AstNode& src = ast.node(source);
        for (std::size_t i = 0; i < src.tokens.size(); ++i) {
            Token t = src.tokens[i];
            if (t.kind == TokenKind::Identifier &&
                !detail::is_member_name(src.tokens, i)) {
                auto it = renames.find(t.text);
                if (it == renames.end())
                    it = renames.emplace(t.text, fresh.next()).first;
                t.text = it->second;
            }
            detail::own_token(ast, clone, std::move(t));
        }
    }

    auto parents = detail::parent_map(ast);
    detail::ParentInfo pi = parents.at(source);
    if (ast.node(pi.parent).kind == AstKind::Block) {
        detail::insert_child_after(ast, pi.parent, pi.position, clone);
    } else {
        NodeId block = detail::append_node(ast, AstKind::Block);
        detail::own_token(ast, block, detail::make_token("{", TokenKind::Punctuation));
        detail::append_child(ast, block, source);
        detail::append_child(ast, block, clone);
        detail::own_token(ast, block, detail::make_token("}", TokenKind::Punctuation));
        detail::replace_child(ast, pi.parent, pi.position, block);
    }
    return detail::finish(ast, f_v, MutationOp::Add, seed, renames);
}

// ro: swap one adjacent pair of unrelated assignment statements with no
// def-use dependence between them in either direction.
inline MutatedFunction mutate_ro(const FunctionRecord& f_v,
                                 const std::set<int>& frozen,
                                 std::uint64_t seed) {
    Ast ast = parse_source(f_v.code);

    struct Pair {
        NodeId block;
        std::size_t position; // swap children[position], children[position+1]
    };
    std::vector<Pair> pairs;
    for (const AstNode& n : ast.nodes) {
        if (n.kind != AstKind::Block) continue;
        for (std::size_t i = 0; i + 1 < n.children.size(); ++i) {
            const AstNode& a = ast.node(n.children[i]);
            const AstNode& b = ast.node(n.children[i + 1]);
            if (a.kind != AstKind::Assign || b.kind != AstKind::Assign) continue;
            if (frozen.count(*a.stmt_id) || frozen.count(*b.stmt_id)) continue;
            DefUse da = statement_def_use(a), db = statement_def_use(b);
            auto depends = [](const DefUse& from, const DefUse& to) {
                for (const std::string& d : from.defs)
                    if (std::find(to.uses.begin(), to.uses.end(), d) !=
                        to.uses.end())
                        return true;
                return false;
            };
            if (depends(da, db) || depends(db, da)) continue;
            pairs.push_back({n.id, i});
        }
    }
    if (pairs.empty())
        throw NoCandidates("ro: no independent adjacent assignment pair");

    Rng rng(seed);
    Pair p = pairs[std::size_t(rng.below(pairs.size()))];
    AstNode& block = ast.node(p.block);
    std::swap(block.children[p.position], block.children[p.position + 1]);
    return detail::finish(ast, f_v, MutationOp::Ro, seed);
}

inline MutatedFunction apply_mutation(MutationOp op, const FunctionRecord& f_v,
                                      const std::set<int>& frozen,
                                      std::uint64_t seed) {
    switch (op) {
        case MutationOp::Rn: return mutate_rn(f_v, frozen, seed);
        case MutationOp::Ai: return mutate_ai(f_v, frozen, seed);
        case MutationOp::Del: return mutate_del(f_v, frozen, seed);
        case MutationOp::Add: return mutate_add(f_v, frozen, seed);
        case MutationOp::Ro: return mutate_ro(f_v, frozen, seed);
    }
    throw Error("unknown mutation op");
}

// The testable form of the preservation obligation: every frozen
// statement of the original appears token-identically in the mutant
// (modulo the recorded renaming for rn/add).
inline bool mutant_preserves_frozen(const FunctionRecord& f_v,
                                    const std::set<int>& frozen,
                                    const MutatedFunction& m) {
    Ast original = parse_source(f_v.code);
    Ast mutant = parse_source(m.code);

    std::multiset<std::string> mutant_stmts;
    for (const std::string& s : statement_texts(mutant)) mutant_stmts.insert(s);

    std::vector<NodeId> stmts = statement_nodes(original);
    for (int f : frozen) {
        AstNode n = original.node(stmts.at(std::size_t(f)));
        for (std::size_t i = 0; i < n.tokens.size(); ++i) {
            Token& t = n.tokens[i];
            if (t.kind != TokenKind::Identifier) continue;
            if (detail::is_member_name(n.tokens, i)) continue;
            auto it = m.rename.find(t.text);
            if (it != m.rename.end() && m.op == MutationOp::Rn)
                t.text = it->second;
        }
        auto hit = mutant_stmts.find(statement_text(n));
        if (hit == mutant_stmts.end()) return false;
        mutant_stmts.erase(hit);
    }
    return true;
}

struct AugmentStats {
    int attempted = 0;
    int produced = 0;
    int no_candidates = 0;
    int failed = 0;
};

inline std::uint64_t mutant_seed(std::uint64_t run_seed,
                                 const std::string& parent_id, MutationOp op) {
    return splitmix64(run_seed ^ fnv1a64(parent_id) ^
                      ((std::uint64_t(op) + 1) * 0x9e3779b97f4a7c15ULL));
}

// For each requested operator, up to `per_op_target` mutants across the
// pairs (<=0 means one attempt per vulnerable function). Pairs whose
// operator has no candidates are skipped, not fatal.
inline std::vector<MutatedFunction> augment_dataset(
    const std::vector<PatchTuple>& pairs, const std::set<MutationOp>& ops,
    int per_op_target, std::uint64_t run_seed, AugmentStats* stats = nullptr) {
    AugmentStats local;
    AugmentStats& st = stats ? *stats : local;
    std::vector<MutatedFunction> out;

    for (MutationOp op : all_mutation_ops()) {
        if (!ops.count(op)) continue;
        int produced_for_op = 0;
        for (const PatchTuple& pair : pairs) {
            if (per_op_target > 0 && produced_for_op >= per_op_target) break;
            ++st.attempted;
            try {
                Ast ast_v = parse_source(pair.f_v.code);
                Ast ast_p = parse_source(pair.f_p.code);
                SliceOutcome slice =
                    slice_patch(ast_v, ast_p, pair.s_del, pair.s_add);
                MutatedFunction m = apply_mutation(
                    op, pair.f_v, slice.frozen_v,
                    mutant_seed(run_seed, pair.f_v.id, op));
                ++st.produced;
                ++produced_for_op;
                out.push_back(std::move(m));
            } catch (const NoCandidates&) {
                ++st.no_candidates;
            } catch (const Error&) {
                ++st.failed;
            }
        }
    }
    return out;
}

inline FunctionRecord to_function_record(const MutatedFunction& m) {
    FunctionRecord r;
    r.id = m.parent_id + ":" + mutation_op_name(m.op);
    r.project = "";
    r.sha = "";
    r.cwe = m.cwe;
    r.role = Role::Mutated;
    r.label = 1;
    r.code = m.code;
    r.parent_id = m.parent_id;
    r.mutation = m.op;
    r.seed = m.seed;
    r.rename = m.rename;
    return r;
}

} // namespace vulndet
