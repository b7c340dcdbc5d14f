#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "vulndet/cpg.hpp"
#include "vulndet/mutate.hpp"

using namespace vulndet;

namespace {

FunctionRecord record(const std::string& code, const std::string& id = "fx") {
    FunctionRecord r;
    r.id = id;
    r.cwe = Cwe::Cwe120;
    r.role = Role::Vulnerable;
    r.label = 1;
    r.code = code;
    return r;
}

bool contains(const std::vector<std::string>& xs, const std::string& s) {
    return std::find(xs.begin(), xs.end(), s) != xs.end();
}

} // namespace

TEST(MutateRn, SingleVariableForcedRename) {
    auto m = mutate_rn(record("void f() { int a = 1; return a; }"), {}, 3);
    auto texts = statement_texts(parse_source(m.code));
    EXPECT_TRUE(contains(texts, "int v0 = 1 ;"));
    EXPECT_TRUE(contains(texts, "return v0 ;"));
    EXPECT_EQ(m.rename.at("a"), "v0");
}

TEST(MutateRn, FreshNameSkipsCollision) {
    auto m = mutate_rn(record("void f() { int a = 1; int v0 = 2; a = v0; }"), {}, 9);
    // whichever subset was renamed, no two variables may collapse
    std::set<std::string> targets;
    for (auto& [from, to] : m.rename) {
        EXPECT_NE(to, "a");
        EXPECT_NE(to, "v0");
        EXPECT_TRUE(targets.insert(to).second);
    }
    parse_source(m.code);
}

TEST(MutateRn, RenamingTouchesFrozenStatementsSafely) {
    FunctionRecord f = record(fixtures::kVulnCopyPayload);
    std::set<int> frozen{0, 1, 2};
    auto m = mutate_rn(f, frozen, 17);
    EXPECT_TRUE(mutant_preserves_frozen(f, frozen, m));
}

TEST(MutateRn, GraphIsomorphicUnderIdentityMap) {
    FunctionRecord f = record(fixtures::kVulnCopyPayload);
    auto m = mutate_rn(f, {}, 5);

    Cpg before = cpg_from_source(f.code);
    Cpg after = cpg_from_source(m.code);
    ASSERT_EQ(before.nodes.size(), after.nodes.size());
    EXPECT_EQ(before.edges, after.edges);
    for (std::size_t i = 0; i < before.nodes.size(); ++i) {
        EXPECT_EQ(before.nodes[i].kind, after.nodes[i].kind);
        ASSERT_EQ(before.nodes[i].code.size(), after.nodes[i].code.size());
        for (std::size_t j = 0; j < before.nodes[i].code.size(); ++j) {
            const std::string& old_text = before.nodes[i].code[j];
            const std::string& new_text = after.nodes[i].code[j];
            auto it = m.rename.find(old_text);
            if (it != m.rename.end())
                EXPECT_TRUE(new_text == it->second || new_text == old_text);
            else
                EXPECT_EQ(new_text, old_text);
        }
    }
}

TEST(MutateRn, NoLocalsMeansNoCandidates) {
    EXPECT_THROW(mutate_rn(record("void f() { return; }"), {}, 1), NoCandidates);
}

TEST(MutateAi, WrapsAssignmentInTrueGuard) {
    auto m = mutate_ai(record("void f() { int a = b; }"), {}, 11);
    Ast ast = parse_source(m.code);
    auto texts = statement_texts(ast);
    ASSERT_EQ(texts.size(), 2u);
    EXPECT_EQ(texts[0], "1");           // synthesized condition
    EXPECT_EQ(texts[1], "int a = b ;"); // untouched statement inside
    EXPECT_NE(m.code.find("if"), std::string::npos);
}

TEST(MutateAi, AllAssignmentsFrozen) {
    EXPECT_THROW(mutate_ai(record("void f() { int a = b; }"), {0}, 1),
                 NoCandidates);
}

TEST(MutateAi, WrappedStatementGainsControlEdge) {
    FunctionRecord f = record("void f() { int a = b; }");
    auto m = mutate_ai(f, {}, 2);
    Pdg pdg = project_pdg(cpg_from_source(m.code));
    // stmt 0 is the new `1` condition, stmt 1 the wrapped assignment
    bool guard_edge = false;
    for (const Pdg::Edge& e : pdg.edges)
        if (e.kind == PdgEdgeKind::Control && e.src == 0 && e.dst == 1)
            guard_edge = true;
    EXPECT_TRUE(guard_edge);
}

TEST(MutateDel, OnlyLegalChoiceDeleted) {
    FunctionRecord f = record("void f() { a = 1; b = 2; c = 3; }");
    auto m = mutate_del(f, {0, 2}, 21);
    auto texts = statement_texts(parse_source(m.code));
    EXPECT_EQ(texts, (std::vector<std::string>{"a = 1 ;", "c = 3 ;"}));
}

TEST(MutateDel, DefFeedingUseIsExempt) {
    FunctionRecord f = record("void f() { a = 1; b = a; }");
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto m = mutate_del(f, {}, seed);
        auto texts = statement_texts(parse_source(m.code));
        EXPECT_EQ(texts, (std::vector<std::string>{"a = 1 ;"}))
            << "seed " << seed;
    }
}

TEST(MutateDel, AllFrozenMeansNoCandidates) {
    EXPECT_THROW(mutate_del(record("void f() { a = 1; }"), {0}, 1), NoCandidates);
}

TEST(MutateDel, BareBranchBodyStaysParseable) {
    FunctionRecord f = record("void f(int c) { if (c > 0) x = 1; }");
    auto m = mutate_del(f, {0}, 4); // condition frozen, body deletable
    Ast ast = parse_source(m.code);
    EXPECT_GE(ast.stmt_count, 1);
}

TEST(MutateAdd, CopiesWithFreshNames) {
    auto m = mutate_add(record("void f() { int a = b; }"), {}, 6);
    auto texts = statement_texts(parse_source(m.code));
    ASSERT_EQ(texts.size(), 2u);
    EXPECT_EQ(texts[0], "int a = b ;");
    EXPECT_EQ(texts[1], "int v0 = v1 ;");
}

TEST(MutateAdd, NoUnrelatedAssignmentMeansNoCandidates) {
    EXPECT_THROW(mutate_add(record("void f() { int a = b; }"), {0}, 1),
                 NoCandidates);
    EXPECT_THROW(mutate_add(record("void f() { g(); return; }"), {}, 1),
                 NoCandidates);
}

TEST(MutateAdd, InsertionIsDataflowIsolated) {
    FunctionRecord f = record("void f() { int a = b; c = a; }");
    auto m = mutate_add(f, {}, 13);
    Ast orig = parse_source(f.code);
    Ast mut = parse_source(m.code);
    ASSERT_EQ(mut.stmt_count, orig.stmt_count + 1);

    // locate the inserted statement: the one whose text is not among the
    // original statements
    auto orig_texts = statement_texts(orig);
    auto mut_texts = statement_texts(mut);
    int inserted = -1;
    for (std::size_t i = 0; i < mut_texts.size(); ++i)
        if (!contains(orig_texts, mut_texts[i])) inserted = int(i);
    ASSERT_GE(inserted, 0);

    Pdg pdg = project_pdg(build_cpg(mut));
    for (const Pdg::Edge& e : pdg.edges)
        if (e.kind == PdgEdgeKind::Data)
            EXPECT_NE(e.src, inserted)
                << "fresh-named insertion must not define anything used "
                   "by original statements";
}

TEST(MutateRo, IndependentAdjacentPairSwaps) {
    auto m = mutate_ro(record("void f() { a = 1; b = 2; }"), {}, 8);
    auto texts = statement_texts(parse_source(m.code));
    EXPECT_EQ(texts, (std::vector<std::string>{"b = 2 ;", "a = 1 ;"}));
}

TEST(MutateRo, DependentPairBlocksSwap) {
    EXPECT_THROW(mutate_ro(record("void f() { a = 1; b = a; }"), {}, 1),
                 NoCandidates);
}

TEST(MutateRo, ExactlyTheIndependentPairSwaps) {
    FunctionRecord f = record("void f() { a = 1; b = a; c = b; d = 9; }");
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto m = mutate_ro(f, {}, seed);
        auto texts = statement_texts(parse_source(m.code));
        EXPECT_EQ(texts, (std::vector<std::string>{"a = 1 ;", "b = a ;",
                                                   "d = 9 ;", "c = b ;"}))
            << "seed " << seed;
    }
}

TEST(Mutate, Determinism) {
    FunctionRecord f = record(fixtures::kLoopFunction);
    for (MutationOp op : all_mutation_ops()) {
        try {
            auto a = apply_mutation(op, f, {}, 42);
            auto b = apply_mutation(op, f, {}, 42);
            EXPECT_EQ(a.code, b.code) << mutation_op_name(op);
            EXPECT_EQ(a.rename, b.rename);
        } catch (const NoCandidates&) {
            // acceptable per-op outcome for this fixture
        }
    }
}

TEST(Mutate, PreservationAcrossOpsOnFixture) {
    Ast v = parse_source(fixtures::kVulnCopyPayload);
    Ast p = parse_source(fixtures::kPatchedCopyPayload);
    SliceOutcome slice = slice_patch(v, p, {1, 2}, {1, 2});

    FunctionRecord f = record(fixtures::kVulnCopyPayload);
    for (MutationOp op : all_mutation_ops()) {
        try {
            auto m = apply_mutation(op, f, slice.frozen_v, 99);
            EXPECT_TRUE(mutant_preserves_frozen(f, slice.frozen_v, m))
                << mutation_op_name(op);
        } catch (const NoCandidates&) {
        }
    }
}

TEST(Augment, EmptyInputGivesEmptyOutput) {
    AugmentStats st;
    auto out = augment_dataset({}, {MutationOp::Rn}, 10, 1, &st);
    EXPECT_TRUE(out.empty());
    EXPECT_EQ(st.attempted, 0);
}

TEST(Augment, OnePerFunctionTarget) {
    std::vector<PatchTuple> pairs;
    for (int i = 0; i < 10; ++i) {
        PatchTuple t;
        t.f_v = record("void f(int p) { int a = p; int b = 2; q = a + b; }",
                       "fn" + std::to_string(i));
        t.f_p = record("void f(int p) { int a = p; int b = 2; q = a - b; }",
                       "fn" + std::to_string(i) + "p");
        t.s_del = {2};
        t.s_add = {2};
        pairs.push_back(std::move(t));
    }
    AugmentStats st;
    auto out = augment_dataset(pairs, {MutationOp::Rn}, 10, 7, &st);
    EXPECT_LE(out.size(), 10u);
    EXPECT_EQ(st.produced, int(out.size()));
    for (const MutatedFunction& m : out) {
        EXPECT_EQ(m.label, 1);
        EXPECT_NO_THROW(parse_source(m.code));
    }
}

TEST(Augment, SkipsNoCandidatesWithoutFailing) {
    PatchTuple t;
    t.f_v = record("void f() { g(); return; }", "bare");
    t.f_p = record("void f() { h(); return; }", "barep");
    t.s_del = {0};
    t.s_add = {0};
    AugmentStats st;
    auto out = augment_dataset({t}, {MutationOp::Ai, MutationOp::Add}, 0, 3, &st);
    EXPECT_TRUE(out.empty());
    EXPECT_EQ(st.no_candidates, 2);
    EXPECT_EQ(st.failed, 0);
}
