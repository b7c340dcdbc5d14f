#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "vulndet/cpg.hpp"
#include "vulndet/rng.hpp"

using namespace vulndet;

namespace {

// statement-id level view of node-id edges
std::set<std::pair<int, int>> stmt_pairs(const Ast& ast,
                                         const std::vector<FlowEdge>& edges) {
    std::map<NodeId, int> stmt;
    for (const AstNode& n : ast.nodes)
        if (n.stmt_id) stmt[n.id] = *n.stmt_id;
    std::set<std::pair<int, int>> out;
    for (const FlowEdge& e : edges) out.insert({stmt.at(e.src), stmt.at(e.dst)});
    return out;
}

std::string wrap_body(const std::string& body) {
    return "void f() {\n" + body + "\n}\n";
}

using Pairs = std::set<std::pair<int, int>>;

} // namespace

TEST(Cfg, StraightLineChainsStatements) {
    Ast ast = parse_source(wrap_body("a = 1; b = 2; c = 3;"));
    EXPECT_EQ(stmt_pairs(ast, build_cfg(ast)), (Pairs{{0, 1}, {1, 2}}));
}

TEST(Cfg, WhileLoop) {
    // while(c){s1;} s2;  =>  c->s1, s1->c, c->s2
    Ast ast = parse_source(wrap_body("while (c) { s1(); } s2();"));
    EXPECT_EQ(stmt_pairs(ast, build_cfg(ast)), (Pairs{{0, 1}, {1, 0}, {0, 2}}));
}

TEST(Cfg, ReturnHasNoSuccessor) {
    Ast ast = parse_source(wrap_body("return;"));
    EXPECT_TRUE(build_cfg(ast).empty());

    Ast ast2 = parse_source(wrap_body("a = 1; return; b = 2;"));
    Pairs got = stmt_pairs(ast2, build_cfg(ast2));
    EXPECT_EQ(got, (Pairs{{0, 1}}));
}

TEST(Cfg, IfJoinsBothWays) {
    Ast ast = parse_source(wrap_body("a = 1; if (c) { b = 2; } d = 3;"));
    // stmts: a=1(0), c(1), b=2(2), d=3(3)
    EXPECT_EQ(stmt_pairs(ast, build_cfg(ast)),
              (Pairs{{0, 1}, {1, 2}, {2, 3}, {1, 3}}));
}

TEST(Dataflow, SingleDefUse) {
    Ast ast = parse_source(wrap_body("int a = 1; b = a;"));
    EXPECT_EQ(stmt_pairs(ast, build_dataflow(ast, build_cfg(ast))),
              (Pairs{{0, 1}}));
}

TEST(Dataflow, KilledDefinition) {
    Ast ast = parse_source(wrap_body("a = 1; a = 2; b = a;"));
    EXPECT_EQ(stmt_pairs(ast, build_dataflow(ast, build_cfg(ast))),
              (Pairs{{1, 2}}));
}

TEST(Dataflow, BothBranchDefsReachJoin) {
    Ast ast = parse_source(wrap_body("a = 1; if (c) { a = 2; } b = a;"));
    // stmts: a=1(0), c(1), a=2(2), b=a(3)
    EXPECT_EQ(stmt_pairs(ast, build_dataflow(ast, build_cfg(ast))),
              (Pairs{{0, 3}, {2, 3}}));
}

TEST(Dataflow, LoopCarriedDefUse) {
    Ast ast = parse_source(wrap_body("int i = 0; while (i < 3) { i = i + 1; }"));
    // decl(0), cond(1), i=i+1(2)
    Pairs got = stmt_pairs(ast, build_dataflow(ast, build_cfg(ast)));
    EXPECT_TRUE(got.count({0, 1}));
    EXPECT_TRUE(got.count({0, 2}));
    EXPECT_TRUE(got.count({2, 1})); // around the back edge
    EXPECT_TRUE(got.count({2, 2})); // loop-carried self dependence
}

TEST(ControlDep, DirectNesting) {
    Ast ast = parse_source(wrap_body("if (c) { s1(); s2(); }"));
    EXPECT_EQ(stmt_pairs(ast, build_control_dep(ast)), (Pairs{{0, 1}, {0, 2}}));
}

TEST(ControlDep, NearestGovernorOnly) {
    Ast ast = parse_source(wrap_body("if (c1) { if (c2) { s(); } }"));
    EXPECT_EQ(stmt_pairs(ast, build_control_dep(ast)), (Pairs{{0, 1}, {1, 2}}));
}

TEST(ControlDep, StraightLineHasNone) {
    Ast ast = parse_source(wrap_body("a = 1; b = 2;"));
    EXPECT_TRUE(build_control_dep(ast).empty());
}

TEST(Cpg, ComposedSmallFunction) {
    Cpg g = cpg_from_source("void f(){int a=1; return a;}", "f");
    std::map<int, int> stmt(g.stmt_of.begin(), g.stmt_of.end());

    bool flow01 = false, du01 = false, reach01 = false, ast_edges = false;
    for (const CpgEdge& e : g.edges) {
        if (e.kind == EdgeKind::Ast) {
            ast_edges = true;
            EXPECT_FALSE(e.reversed);
        }
        if (e.reversed) continue;
        if (!stmt.count(e.src) || !stmt.count(e.dst)) continue;
        if (stmt[e.src] == 0 && stmt[e.dst] == 1) {
            if (e.kind == EdgeKind::FlowTo) flow01 = true;
            if (e.kind == EdgeKind::DefineUse) du01 = true;
            if (e.kind == EdgeKind::Reach) reach01 = true;
        }
    }
    EXPECT_TRUE(ast_edges);
    EXPECT_TRUE(flow01);
    EXPECT_TRUE(du01);
    EXPECT_TRUE(reach01);
}

TEST(Cpg, EmptyBodyHasOnlyAstEdges) {
    Cpg g = cpg_from_source("void f() { }", "f");
    for (const CpgEdge& e : g.edges) EXPECT_EQ(e.kind, EdgeKind::Ast);
    EXPECT_FALSE(g.edges.empty());
}

TEST(Cpg, MirrorSymmetry) {
    const char* sources[] = {fixtures::kVulnCopyPayload, fixtures::kLoopFunction,
                             fixtures::kBranchFunction};
    for (const char* src : sources) {
        Cpg g = cpg_from_source(src, "f");
        std::set<CpgEdge> all(g.edges.begin(), g.edges.end());
        EXPECT_EQ(all.size(), g.edges.size()); // no duplicate triples
        for (const CpgEdge& e : g.edges) {
            if (e.kind == EdgeKind::Ast) continue;
            CpgEdge mirror{e.dst, e.src, e.kind, !e.reversed};
            EXPECT_TRUE(all.count(mirror))
                << "missing mirror for " << e.src << "->" << e.dst;
        }
    }
}

TEST(Cpg, EdgeTypeCodesCoverTenSlots) {
    EXPECT_EQ(edge_type_code(EdgeKind::Ast, false), 0);
    EXPECT_EQ(edge_type_code(EdgeKind::Control, false), 4);
    EXPECT_EQ(edge_type_code(EdgeKind::FlowTo, true), 6);
    EXPECT_EQ(edge_type_code(EdgeKind::Control, true), 9);
}

TEST(Cpg, FlowEdgesConnectOnlyStatementNodes) {
    Cpg g = cpg_from_source(fixtures::kLoopFunction, "f");
    for (const CpgEdge& e : g.edges) {
        if (e.kind != EdgeKind::FlowTo) continue;
        EXPECT_TRUE(g.stmt_of.count(e.src));
        EXPECT_TRUE(g.stmt_of.count(e.dst));
    }
}

TEST(Pdg, ProjectionBasics) {
    Pdg pdg = project_pdg(cpg_from_source(wrap_body("a = 1; b = a;"), "f"));
    ASSERT_EQ(pdg.stmt_count, 2);
    ASSERT_EQ(pdg.edges.size(), 1u);
    EXPECT_EQ(pdg.edges[0].src, 0);
    EXPECT_EQ(pdg.edges[0].dst, 1);
    EXPECT_EQ(pdg.edges[0].kind, PdgEdgeKind::Data);
}

TEST(Pdg, IsolatedStatements) {
    Pdg pdg = project_pdg(cpg_from_source(wrap_body("a = 1; b = 2; c = 3;"), "f"));
    EXPECT_EQ(pdg.stmt_count, 3);
    EXPECT_TRUE(pdg.edges.empty());
}

TEST(Pdg, NestedIfControlChain) {
    Pdg pdg = project_pdg(
        cpg_from_source(wrap_body("if (c1) { if (c2) { s(); } }"), "f"));
    std::set<std::pair<int, int>> control;
    for (const Pdg::Edge& e : pdg.edges)
        if (e.kind == PdgEdgeKind::Control) control.insert({e.src, e.dst});
    EXPECT_EQ(control, (Pairs{{0, 1}, {1, 2}}));
}

TEST(Pdg, FixtureGuardGovernsCall) {
    Cpg g = cpg_from_source(fixtures::kVulnCopyPayload, "fv");
    Pdg pdg = project_pdg(g);
    // stmt 1 is the length guard, stmt 2 the copy call
    bool guard_controls_call = false;
    for (const Pdg::Edge& e : pdg.edges)
        if (e.kind == PdgEdgeKind::Control && e.src == 1 && e.dst == 2)
            guard_controls_call = true;
    EXPECT_TRUE(guard_controls_call);
}

TEST(Pdg, ProjectionSoundness) {
    Cpg g = cpg_from_source(fixtures::kLoopFunction, "f");
    Pdg pdg = project_pdg(g);
    for (const Pdg::Edge& pe : pdg.edges) {
        bool witnessed = false;
        for (const CpgEdge& ce : g.edges) {
            if (ce.reversed) continue;
            auto s = g.stmt_of.find(ce.src);
            auto d = g.stmt_of.find(ce.dst);
            if (s == g.stmt_of.end() || d == g.stmt_of.end()) continue;
            if (s->second == pe.src && d->second == pe.dst) {
                witnessed = true;
                break;
            }
        }
        EXPECT_TRUE(witnessed);
    }
}

// Random straight-line + single-branch programs checked against full
// path enumeration.
TEST(Dataflow, MatchesPathEnumerationOracle) {
    Rng rng(20240811);
    const char* vars[] = {"v0", "v1", "v2", "v3"};

    for (int iter = 0; iter < 300; ++iter) {
        int n_stmts = 3 + int(rng.below(8)); // <= 10
        bool with_branch = rng.below(2) == 1;
        int branch_at = with_branch ? 1 + int(rng.below(std::uint64_t(n_stmts - 1)))
                                    : -1;
        int branch_len = with_branch ? 1 + int(rng.below(2)) : 0;

        std::ostringstream body;
        auto rand_stmt = [&](int indent) {
            const char* lhs = vars[rng.below(4)];
            for (int k = 0; k < indent; ++k) body << "    ";
            if (rng.below(3) == 0) {
                body << lhs << " = " << rng.below(100) << ";\n";
            } else {
                body << lhs << " = " << vars[rng.below(4)] << " + "
                     << vars[rng.below(4)] << ";\n";
            }
        };
        int emitted = 0;
        for (int s = 0; s < n_stmts; ++s) {
            if (s == branch_at) {
                body << "if (" << vars[rng.below(4)] << " > 0) {\n";
                for (int b = 0; b < branch_len; ++b) rand_stmt(1);
                body << "}\n";
                emitted += 1 + branch_len;
            }
            rand_stmt(0);
            ++emitted;
        }

        Ast ast = parse_source(wrap_body(body.str()));
        auto cfg = build_cfg(ast);
        auto got = stmt_pairs(ast, build_dataflow(ast, cfg));

        std::vector<int> nodes;
        std::map<int, std::vector<std::string>> defs, uses;
        std::map<NodeId, int> stmt;
        for (const AstNode& n : ast.nodes)
            if (n.stmt_id) {
                stmt[n.id] = *n.stmt_id;
                nodes.push_back(*n.stmt_id);
                DefUse du = statement_def_use(n);
                defs[*n.stmt_id] = du.defs;
                uses[*n.stmt_id] = du.uses;
            }
        std::vector<std::pair<int, int>> cfg_pairs;
        for (const FlowEdge& e : cfg)
            cfg_pairs.push_back({stmt.at(e.src), stmt.at(e.dst)});

        auto expected = oracles::reaching_def_use(nodes, defs, uses, cfg_pairs);
        EXPECT_EQ(got, expected) << "program:\n" << body.str();
        if (got != expected) break;
    }
}
