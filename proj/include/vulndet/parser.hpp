#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "vulndet/errors.hpp"
#include "vulndet/lexer.hpp"

namespace vulndet {

enum class AstKind {
    Function,
    Param,
    Block,
    Decl,
    Assign,
    Call,
    If,
    While,
    For,
    Return,
    Expr,
    Condition,
};

inline const char* ast_kind_name(AstKind k) {
    switch (k) {
        case AstKind::Function: return "function";
        case AstKind::Param: return "param";
        case AstKind::Block: return "block";
        case AstKind::Decl: return "decl";
        case AstKind::Assign: return "assign";
        case AstKind::Call: return "call";
        case AstKind::If: return "if";
        case AstKind::While: return "while";
        case AstKind::For: return "for";
        case AstKind::Return: return "return";
        case AstKind::Expr: return "expr";
        case AstKind::Condition: return "condition";
    }
    return "?";
}

// Statement-granular node kinds: these carry stmt ids and are the
// endpoints of every flow/dependence edge.
inline bool is_statement_kind(AstKind k) {
    switch (k) {
        case AstKind::Decl:
        case AstKind::Assign:
        case AstKind::Call:
        case AstKind::Return:
        case AstKind::Expr:
        case AstKind::Condition:
            return true;
        default:
            return false;
    }
}

using NodeId = int;

// A node interleaves the tokens it owns directly with its children; the
// layout preserves source order so the original token stream can be
// reproduced exactly.
struct LayoutItem {
    bool is_child = false;
    int index = 0; // into tokens or children
};

struct AstNode {
    NodeId id = -1;
    AstKind kind = AstKind::Expr;
    std::vector<NodeId> children;
    std::vector<Token> tokens; // directly owned, in source order
    std::optional<int> stmt_id;
    std::vector<LayoutItem> layout;
};

struct Ast {
    std::vector<AstNode> nodes; // index == id
    NodeId root = 0;
    int stmt_count = 0;

    const AstNode& node(NodeId id) const { return nodes[std::size_t(id)]; }
    AstNode& node(NodeId id) { return nodes[std::size_t(id)]; }
};

namespace detail {

inline const std::unordered_set<std::string>& type_start_keywords() {
    static const std::unordered_set<std::string> kw = {
        "void", "char", "short", "int", "long", "float", "double",
        "signed", "unsigned", "struct", "union", "enum", "const",
        "static", "volatile", "register", "extern", "auto", "inline",
        "typedef"};
    return kw;
}

inline bool looks_like_decl(const std::vector<Token>& toks, std::size_t begin,
                            std::size_t end) {
    if (begin >= end) return false;
    const Token& t0 = toks[begin];
    if (t0.kind == TokenKind::Keyword && type_start_keywords().count(t0.text))
        return true;
    if (t0.kind == TokenKind::Identifier) {
        // `type x`, `type * x` (typedef'd type name)
        std::size_t k = begin + 1;
        while (k < end && toks[k].is("*")) ++k;
        return k < end && toks[k].kind == TokenKind::Identifier;
    }
    return false;
}

inline bool is_open(const std::string& t) {
    return t == "(" || t == "[" || t == "{";
}
inline bool is_close(const std::string& t) {
    return t == ")" || t == "]" || t == "}";
}

// First top-level assignment operator in [begin,end): plain `=`, `+=` or
// `-=`. Compound forms the lexer splits (`*=` -> `*` `=`) are reported at
// the `=` position.
inline std::optional<std::size_t> find_assign_op(const std::vector<Token>& toks,
                                                 std::size_t begin,
                                                 std::size_t end) {
    int depth = 0;
    for (std::size_t i = begin; i < end; ++i) {
        const std::string& t = toks[i].text;
        if (is_open(t)) ++depth;
        else if (is_close(t)) --depth;
        else if (depth == 0 && (t == "=" || t == "+=" || t == "-="))
            return i;
    }
    return std::nullopt;
}

} // namespace detail

class Parser {
public:
    explicit Parser(const std::vector<Token>& toks) : toks_(toks) {}

    Ast parse() {
        check_braces();
        find_signature();

        NodeId fn = new_node(AstKind::Function);
        // return type + name
        for (std::size_t i = 0; i < name_pos_ + 1; ++i) own(fn, toks_[i]);
        pos_ = name_pos_ + 1;
        own(fn, toks_[pos_]); // '('
        ++pos_;
        parse_params(fn);
        expect(fn, ")");
        if (at_end() || !cur().is("{"))
            throw NotAFunction("expected `{` after parameter list");
        NodeId body = parse_block();
        add_child(fn, body);
        if (!at_end())
            throw NotAFunction("trailing tokens after function body");
        number_statements();
        return std::move(ast_);
    }

private:
    const std::vector<Token>& toks_;
    std::size_t pos_ = 0;
    std::size_t name_pos_ = 0;
    Ast ast_;

    bool at_end() const { return pos_ >= toks_.size(); }
    const Token& cur() const { return toks_[pos_]; }
    const Token& peek(std::size_t n) const { return toks_[pos_ + n]; }
    bool has(std::size_t n) const { return pos_ + n < toks_.size(); }

    NodeId new_node(AstKind k) {
        AstNode n;
        n.id = NodeId(ast_.nodes.size());
        n.kind = k;
        ast_.nodes.push_back(std::move(n));
        return ast_.nodes.back().id;
    }

    void own(NodeId id, const Token& t) {
        AstNode& n = ast_.node(id);
        n.layout.push_back({false, int(n.tokens.size())});
        n.tokens.push_back(t);
    }

    void add_child(NodeId parent, NodeId child) {
        AstNode& n = ast_.node(parent);
        n.layout.push_back({true, int(n.children.size())});
        n.children.push_back(child);
    }

    void expect(NodeId owner, const char* text) {
        if (at_end() || !cur().is(text))
            throw NotAFunction(std::string("expected `") + text + "`");
        own(owner, cur());
        ++pos_;
    }

    void check_braces() {
        int depth = 0;
        for (const Token& t : toks_) {
            if (t.is("{")) ++depth;
            if (t.is("}")) {
                --depth;
                if (depth < 0) throw UnbalancedBraces("unexpected `}`");
            }
        }
        if (depth != 0) throw UnbalancedBraces("unclosed `{`");
    }

    // Locate `name (`...`) {` at top level; everything before is the
    // return type.
    void find_signature() {
        int depth = 0;
        for (std::size_t i = 0; i + 1 < toks_.size(); ++i) {
            const Token& t = toks_[i];
            if (t.is("{")) break; // body reached without a signature
            if (detail::is_open(t.text)) ++depth;
            if (detail::is_close(t.text)) --depth;
            if (depth == 0 && t.kind == TokenKind::Identifier &&
                toks_[i + 1].is("(")) {
                // match the parameter parens
                int d = 0;
                std::size_t j = i + 1;
                for (; j < toks_.size(); ++j) {
                    if (toks_[j].is("(")) ++d;
                    if (toks_[j].is(")")) {
                        --d;
                        if (d == 0) break;
                    }
                }
                if (d == 0 && j + 1 < toks_.size() && toks_[j + 1].is("{")) {
                    name_pos_ = i;
                    return;
                }
            }
        }
        throw NotAFunction("no function signature found");
    }

    void parse_params(NodeId fn) {
        if (!at_end() && cur().is(")")) return;
        for (;;) {
            NodeId p = new_node(AstKind::Param);
            int depth = 0;
            while (!at_end()) {
                const Token& t = cur();
                if (depth == 0 && (t.is(",") || t.is(")"))) break;
                if (detail::is_open(t.text)) ++depth;
                if (detail::is_close(t.text)) --depth;
                own(p, t);
                ++pos_;
            }
            add_child(fn, p);
            if (at_end() || cur().is(")")) return;
            own(fn, cur()); // ','
            ++pos_;
        }
    }

    NodeId parse_block() {
        NodeId b = new_node(AstKind::Block);
        own(b, cur()); // '{'
        ++pos_;
        while (!at_end() && !cur().is("}")) add_child(b, parse_statement());
        if (at_end()) throw UnbalancedBraces("unclosed `{`");
        own(b, cur()); // '}'
        ++pos_;
        return b;
    }

    NodeId parse_statement() {
        const Token& t = cur();
        if (t.is("{")) return parse_block();
        if (t.kind == TokenKind::Keyword) {
            if (t.is("if")) return parse_if();
            if (t.is("while")) return parse_loop(AstKind::While);
            if (t.is("for")) return parse_loop(AstKind::For);
            if (t.is("return")) {
                NodeId n = new_node(AstKind::Return);
                consume_simple(n);
                return n;
            }
            if (t.is("break") || t.is("continue")) {
                NodeId n = new_node(AstKind::Expr);
                consume_simple(n);
                return n;
            }
        }
        return parse_simple();
    }

    NodeId parse_if() {
        std::size_t mark = pos_;
        NodeId n = new_node(AstKind::If);
        own(n, cur()); // 'if'
        ++pos_;
        if (!parse_cond_into(n)) return opaque_from(mark, n);
        add_child(n, parse_statement());
        if (!at_end() && cur().is("else")) {
            own(n, cur());
            ++pos_;
            add_child(n, parse_statement());
        }
        return n;
    }

    NodeId parse_loop(AstKind kind) {
        std::size_t mark = pos_;
        NodeId n = new_node(kind);
        own(n, cur()); // 'while' / 'for'
        ++pos_;
        if (!parse_cond_into(n)) return opaque_from(mark, n);
        add_child(n, parse_statement());
        return n;
    }

    // `( header )` -> Condition child owning the header tokens.
    bool parse_cond_into(NodeId n) {
        if (at_end() || !cur().is("(")) return false;
        own(n, cur());
        ++pos_;
        NodeId cond = new_node(AstKind::Condition);
        int depth = 1;
        while (!at_end()) {
            const Token& t = cur();
            if (t.is("(")) ++depth;
            if (t.is(")")) {
                --depth;
                if (depth == 0) break;
            }
            own(cond, t);
            ++pos_;
        }
        if (at_end()) return false;
        add_child(n, cond);
        own(n, cur()); // ')'
        ++pos_;
        if (at_end()) return false;
        return true;
    }

    // A structured statement that failed to parse degrades to an opaque
    // expr statement spanning the generic terminator rule.
    NodeId opaque_from(std::size_t mark, NodeId reuse) {
        pos_ = mark;
        AstNode& n = ast_.node(reuse);
        n.kind = AstKind::Expr;
        n.children.clear();
        n.tokens.clear();
        n.layout.clear();
        consume_simple(reuse);
        return reuse;
    }

    // Consume one simple statement: through `;` at depth 0, stopping early
    // at a block-closing `}` / stray closer, or after a balanced `{...}`
    // group not followed by `;`.
    void consume_simple(NodeId n) {
        int depth = 0;
        while (!at_end()) {
            const Token& t = cur();
            if (depth == 0 && (t.is("}") || t.is(")") || t.is("]"))) return;
            if (detail::is_open(t.text)) ++depth;
            if (detail::is_close(t.text)) --depth;
            own(n, t);
            ++pos_;
            if (depth == 0) {
                if (t.is(";")) return;
                if (t.is("}") && !(!at_end() && cur().is(";"))) return;
            }
        }
    }

    NodeId parse_simple() {
        NodeId n = new_node(AstKind::Expr);
        consume_simple(n);
        AstNode& node = ast_.node(n);
        const std::vector<Token>& tk = node.tokens;
        if (tk.empty()) {
            // single stray token; consume to guarantee progress
            own(n, cur());
            ++pos_;
            return n;
        }
        if (detail::looks_like_decl(tk, 0, tk.size()))
            node.kind = AstKind::Decl;
        else if (detail::find_assign_op(tk, 0, tk.size()))
            node.kind = AstKind::Assign;
        else if (tk.size() >= 2 && tk[0].kind == TokenKind::Identifier &&
                 tk[1].is("("))
            node.kind = AstKind::Call;
        return n;
    }

    void number_statements() {
        int next = 0;
        number_dfs(ast_.root, next);
        ast_.stmt_count = next;
    }

    void number_dfs(NodeId id, int& next) {
        AstNode& n = ast_.node(id);
        if (is_statement_kind(n.kind)) n.stmt_id = next++;
        for (const LayoutItem& item : n.layout)
            if (item.is_child) number_dfs(n.children[std::size_t(item.index)], next);
    }
};

inline Ast parse_function(const std::vector<Token>& tokens) {
    if (tokens.empty()) throw NotAFunction("empty input");
    return Parser(tokens).parse();
}

inline Ast parse_source(const std::string& source) {
    return parse_function(tokenize(source));
}

// Flatten back to the exact token stream the parser consumed.
inline void collect_tokens(const Ast& ast, NodeId id, std::vector<Token>& out) {
    const AstNode& n = ast.node(id);
    for (const LayoutItem& item : n.layout) {
        if (item.is_child)
            collect_tokens(ast, n.children[std::size_t(item.index)], out);
        else
            out.push_back(n.tokens[std::size_t(item.index)]);
    }
}

inline std::vector<Token> token_stream(const Ast& ast) {
    std::vector<Token> out;
    collect_tokens(ast, ast.root, out);
    return out;
}

// Node ids of statement nodes ordered by stmt id.
inline std::vector<NodeId> statement_nodes(const Ast& ast) {
    std::vector<NodeId> ids(std::size_t(ast.stmt_count), -1);
    for (const AstNode& n : ast.nodes)
        if (n.stmt_id) ids[std::size_t(*n.stmt_id)] = n.id;
    return ids;
}

inline std::string statement_text(const AstNode& n) {
    return join_token_texts(n.tokens);
}

inline std::vector<std::string> statement_texts(const Ast& ast) {
    std::vector<std::string> out;
    for (NodeId id : statement_nodes(ast))
        out.push_back(statement_text(ast.node(id)));
    return out;
}

// ---------------------------------------------------------------------
// def/use extraction (statement granularity, alias-unaware: subscripts
// and field accesses resolve to the base identifier)

struct DefUse {
    std::vector<std::string> defs;
    std::vector<std::string> uses;
};

namespace detail {

inline void push_unique(std::vector<std::string>& xs, const std::string& s) {
    if (std::find(xs.begin(), xs.end(), s) == xs.end()) xs.push_back(s);
}

inline bool is_member_name(const std::vector<Token>& tk, std::size_t i) {
    return i > 0 && (tk[i - 1].is("->") || tk[i - 1].is("."));
}

inline void collect_identifier_uses(const std::vector<Token>& tk,
                                    std::size_t begin, std::size_t end,
                                    std::vector<std::string>& uses) {
    for (std::size_t i = begin; i < end; ++i)
        if (tk[i].kind == TokenKind::Identifier && !is_member_name(tk, i))
            push_unique(uses, tk[i].text);
}

// Walk back from position `end` (exclusive) over one lvalue suffix chain
// to its base identifier.
inline std::optional<std::size_t> lvalue_base_before(const std::vector<Token>& tk,
                                                     std::size_t end) {
    std::size_t i = end;
    while (i > 0) {
        const Token& t = tk[i - 1];
        if (t.is("]")) { // skip [ ... ]
            int d = 0;
            while (i > 0) {
                if (tk[i - 1].is("]")) ++d;
                if (tk[i - 1].is("[")) --d;
                --i;
                if (d == 0) break;
            }
            continue;
        }
        if (t.kind == TokenKind::Identifier) {
            if (is_member_name(tk, i - 1)) {
                i -= 2; // skip field + accessor
                continue;
            }
            return i - 1;
        }
        return std::nullopt;
    }
    return std::nullopt;
}

inline void incr_decr_scan(const std::vector<Token>& tk, DefUse& du) {
    for (std::size_t i = 0; i < tk.size(); ++i) {
        if (!tk[i].is("++") && !tk[i].is("--")) continue;
        std::optional<std::size_t> base;
        if (i > 0) base = lvalue_base_before(tk, i);
        if (!base && i + 1 < tk.size() && tk[i + 1].kind == TokenKind::Identifier)
            base = i + 1;
        if (base) {
            push_unique(du.defs, tk[*base].text);
            push_unique(du.uses, tk[*base].text);
        }
    }
}

// Shared by assignments, conditions and generic expressions: segments a
// top-level chain `lhs = lhs = rhs` and derives defs from each lhs.
inline void assign_style_def_use(const std::vector<Token>& tk,
                                 std::size_t begin, std::size_t end,
                                 DefUse& du) {
    std::vector<std::size_t> ops;
    {
        std::size_t from = begin;
        while (auto p = find_assign_op(tk, from, end)) {
            ops.push_back(*p);
            from = *p + 1;
        }
    }
    if (ops.empty()) {
        collect_identifier_uses(tk, begin, end, du.uses);
        return;
    }
    std::size_t seg_start = begin;
    for (std::size_t op : ops) {
        bool compound = tk[op].is("+=") || tk[op].is("-=");
        // lexer-split compounds: `*` `=` etc.
        std::size_t lhs_end = op;
        while (lhs_end > seg_start) {
            const std::string& p = tk[lhs_end - 1].text;
            if (p == "*" || p == "/" || p == "%" || p == "&" || p == "|" ||
                p == "^" || p == "<" || p == ">" || p == "~") {
                compound = true;
                --lhs_end;
            } else {
                break;
            }
        }
        auto base = lvalue_base_before(tk, lhs_end);
        if (!base) {
            // fall back: first identifier in the lhs span
            for (std::size_t i = seg_start; i < lhs_end; ++i)
                if (tk[i].kind == TokenKind::Identifier && !is_member_name(tk, i)) {
                    base = i;
                    break;
                }
        }
        if (base) {
            push_unique(du.defs, tk[*base].text);
            bool complex_lhs = (lhs_end - seg_start) > 1;
            if (complex_lhs || compound) push_unique(du.uses, tk[*base].text);
            // identifiers in subscripts etc. of the lhs
            for (std::size_t i = seg_start; i < lhs_end; ++i)
                if (i != *base && tk[i].kind == TokenKind::Identifier &&
                    !is_member_name(tk, i))
                    push_unique(du.uses, tk[i].text);
        }
        seg_start = op + 1;
    }
    collect_identifier_uses(tk, seg_start, end, du.uses);
}

inline void decl_def_use(const std::vector<Token>& tk, std::size_t begin,
                         std::size_t end, DefUse& du) {
    // split at top-level commas
    std::vector<std::pair<std::size_t, std::size_t>> segs;
    int depth = 0;
    std::size_t start = begin;
    for (std::size_t i = begin; i < end; ++i) {
        const std::string& t = tk[i].text;
        if (is_open(t)) ++depth;
        else if (is_close(t)) --depth;
        else if (depth == 0 && t == ",") {
            segs.emplace_back(start, i);
            start = i + 1;
        }
    }
    segs.emplace_back(start, end);

    for (auto [s, e] : segs) {
        auto eq = find_assign_op(tk, s, e);
        std::size_t left_end = eq ? *eq : e;
        // declarator name: last identifier before any top-level '['
        std::size_t name_scan_end = left_end;
        int d2 = 0;
        for (std::size_t i = s; i < left_end; ++i) {
            if (tk[i].is("[") && d2 == 0) {
                name_scan_end = i;
                break;
            }
            if (is_open(tk[i].text)) ++d2;
            else if (is_close(tk[i].text)) --d2;
        }
        std::optional<std::size_t> name;
        for (std::size_t i = s; i < name_scan_end; ++i)
            if (tk[i].kind == TokenKind::Identifier && !is_member_name(tk, i))
                name = i;
        if (name) push_unique(du.defs, tk[*name].text);
        // array extents are uses
        for (std::size_t i = name_scan_end; i < left_end; ++i)
            if (tk[i].kind == TokenKind::Identifier && !is_member_name(tk, i))
                push_unique(du.uses, tk[i].text);
        if (eq) collect_identifier_uses(tk, *eq + 1, e, du.uses);
    }
}

} // namespace detail

// Variables a statement defines and uses. Conditions (including `for`
// headers, which may hold `;`-separated clauses) run each clause through
// the decl/assign extractors.
inline DefUse statement_def_use(const AstNode& n) {
    DefUse du;
    const std::vector<Token>& tk = n.tokens;
    std::size_t end = tk.size();
    while (end > 0 && tk[end - 1].is(";")) --end; // trailing terminator

    switch (n.kind) {
        case AstKind::Decl:
            detail::decl_def_use(tk, 0, end, du);
            break;
        case AstKind::Condition: {
            // split clauses at top-level ';'
            int depth = 0;
            std::size_t start = 0;
            std::vector<std::pair<std::size_t, std::size_t>> clauses;
            for (std::size_t i = 0; i < tk.size(); ++i) {
                const std::string& t = tk[i].text;
                if (detail::is_open(t)) ++depth;
                else if (detail::is_close(t)) --depth;
                else if (depth == 0 && t == ";") {
                    clauses.emplace_back(start, i);
                    start = i + 1;
                }
            }
            clauses.emplace_back(start, tk.size());
            for (auto [s, e] : clauses) {
                if (detail::looks_like_decl(tk, s, e))
                    detail::decl_def_use(tk, s, e, du);
                else
                    detail::assign_style_def_use(tk, s, e, du);
            }
            break;
        }
        default:
            detail::assign_style_def_use(tk, 0, end, du);
            break;
    }
    detail::incr_decr_scan(tk, du);
    return du;
}

// Parameter names of the function (the declared-variable universe also
// includes every statement def).
inline std::vector<std::string> parameter_names(const Ast& ast) {
    std::vector<std::string> names;
    const AstNode& fn = ast.node(ast.root);
    for (NodeId c : fn.children) {
        const AstNode& p = ast.node(c);
        if (p.kind != AstKind::Param) continue;
        // rightmost identifier outside brackets
        std::optional<std::size_t> name;
        int depth = 0;
        for (std::size_t i = 0; i < p.tokens.size(); ++i) {
            const std::string& t = p.tokens[i].text;
            if (detail::is_open(t)) ++depth;
            else if (detail::is_close(t)) --depth;
            else if (depth == 0 && p.tokens[i].kind == TokenKind::Identifier)
                name = i;
        }
        if (name) names.push_back(p.tokens[*name].text);
    }
    return names;
}

// ---------------------------------------------------------------------
// source emission

inline void emit_tokens(const Ast& ast, NodeId id, std::string& out,
                        int& indent, int& paren_depth, bool& line_start) {
    const AstNode& n = ast.node(id);
    for (const LayoutItem& item : n.layout) {
        if (item.is_child) {
            emit_tokens(ast, n.children[std::size_t(item.index)], out, indent,
                        paren_depth, line_start);
            continue;
        }
        const std::string& t = n.tokens[std::size_t(item.index)].text;
        if (t == "}") --indent;
        if (line_start) {
            for (int k = 0; k < indent; ++k) out += "    ";
            line_start = false;
        } else if (!out.empty() && out.back() != ' ') {
            bool glue = (t == ";" || t == "," || t == ")" || t == "]" ||
                         out.back() == '(' || out.back() == '[');
            if (!glue) out += ' ';
        }
        out += t;
        if (t == "(") ++paren_depth;
        if (t == ")" && paren_depth > 0) --paren_depth;
        if (t == "{") ++indent;
        if ((t == ";" && paren_depth == 0) || t == "{" || t == "}") {
            out += '\n';
            line_start = true;
        }
    }
}

// Pretty-print the tree back to compilable text. Lexing the result gives
// the same token texts the tree holds.
inline std::string emit_source(const Ast& ast) {
    std::string out;
    int indent = 0, paren_depth = 0;
    bool line_start = true;
    emit_tokens(ast, ast.root, out, indent, paren_depth, line_start);
    if (!out.empty() && out.back() != '\n') out += '\n';
    return out;
}

} // namespace vulndet
