#include <gtest/gtest.h>

#include <cmath>

#include "support/dense_ref.hpp"
#include "vulndet/checkpoint.hpp"
#include "vulndet/ensemble.hpp"
#include "vulndet/model.hpp"

using namespace vulndet;

namespace {

// single-token vocabulary: <unk>, <pad>, x, y, z
Vocabulary tiny_vocab() {
    std::vector<std::vector<std::string>> docs = {
        {"x", "x", "x", "y", "y", "y", "z", "z", "z"}};
    return Vocabulary::build(docs, 3, 100);
}

EncodedGraph path_graph(int nodes, int token, int code = 1) {
    EncodedGraph g;
    g.id = "path";
    g.label = 1;
    for (int i = 0; i < nodes; ++i) g.node_tokens.push_back({token});
    for (int i = 0; i + 1 < nodes; ++i) {
        g.edges.push_back({i, i + 1, code});
        g.edges.push_back({i + 1, i, code + 5});
    }
    return g;
}

Hyper small_hyper(GnnVariant variant, int hops, int d = 6) {
    Hyper hp;
    hp.d = d;
    hp.d_edge = d;
    hp.hops = hops;
    hp.dropout = 0.0;
    hp.seed = 11;
    hp.variant = variant;
    return hp;
}

void zero_gru(ModelState& m) {
    const char* names[] = {"W_z", "U_z", "b_z", "W_r", "U_r",
                           "b_r", "W_h", "U_h", "b_h"};
    for (const char* n : names)
        for (double& v : m.params.at(n).data) v = 0.0;
}

} // namespace

TEST(Vocab, FrequencyThresholdAndOrdering) {
    std::vector<std::vector<std::string>> docs = {
        {"b", "b", "b", "b"}, {"a", "a", "a"}, {"c", "c", "c"}, {"rare"}};
    Vocabulary v = Vocabulary::build(docs, 3, 100);
    EXPECT_EQ(v.size(), 5); // unk, pad, b, a, c
    EXPECT_EQ(v.lookup("b"), 2);
    EXPECT_EQ(v.lookup("a"), 3); // freq tie vs c broken lexicographically
    EXPECT_EQ(v.lookup("c"), 4);
    EXPECT_EQ(v.lookup("rare"), Vocabulary::kUnk);
    EXPECT_EQ(v.lookup("never_seen"), Vocabulary::kUnk);
}

TEST(Vocab, SizeCap) {
    std::vector<std::vector<std::string>> docs;
    for (int i = 0; i < 50; ++i)
        docs.push_back({"t" + std::to_string(i), "t" + std::to_string(i),
                        "t" + std::to_string(i)});
    Vocabulary v = Vocabulary::build(docs, 3, 10);
    EXPECT_EQ(v.size(), 10);
}

TEST(Vocab, SubtokenSplitting) {
    EXPECT_EQ(split_subtokens("fooBarBaz"),
              (std::vector<std::string>{"foo", "Bar", "Baz"}));
    EXPECT_EQ(split_subtokens("snake_case_name"),
              (std::vector<std::string>{"snake", "case", "name"}));
    EXPECT_EQ(split_subtokens("x"), (std::vector<std::string>{"x"}));
    EXPECT_EQ(split_subtokens("->"), (std::vector<std::string>{"->"}));
    EXPECT_EQ(split_subtokens("123"), (std::vector<std::string>{"123"}));
}

TEST(InitNodes, SumOfTokenEmbeddingsAndEmptyNodes) {
    ModelState m = init_model(small_hyper(GnnVariant::EdgeAware, 0), tiny_vocab());

    EncodedGraph g;
    g.id = "t";
    g.node_tokens = {{2}, {2, 3}, {}};

    Tape tape;
    BoundModel bound = bind_model(tape, m);
    Rng rng(0);
    Tape::Id h = detail::init_nodes(bound, g, false, rng);
    Tensor H = tape.value(h);

    const Tensor& E = m.params.at("E_seqtoken");
    for (int j = 0; j < m.hp.d; ++j) {
        EXPECT_DOUBLE_EQ(H.at(0, j), E.at(2, j));
        EXPECT_DOUBLE_EQ(H.at(1, j), E.at(2, j) + E.at(3, j));
        EXPECT_DOUBLE_EQ(H.at(2, j), 0.0);
    }
}

TEST(EdgeAware, ZeroGruHalvesState) {
    ModelState m = init_model(small_hyper(GnnVariant::EdgeAware, 1), tiny_vocab());
    zero_gru(m);
    EncodedGraph g = path_graph(3, 2);

    Tape tape;
    BoundModel bound = bind_model(tape, m);
    Rng rng(0);
    Tape::Id h0 = detail::init_nodes(bound, g, false, rng);
    Tensor H0 = tape.value(h0);
    Tape::Id h1 = detail::edge_aware_step(bound, h0, g, detail::group_in_edges(g));
    Tensor H1 = tape.value(h1);

    for (std::size_t i = 0; i < H0.data.size(); ++i)
        EXPECT_NEAR(H1.data[i], 0.5 * H0.data[i], 1e-12);
}

TEST(EdgeAware, IsolatedNodeGetsZeroAggregate) {
    ModelState m = init_model(small_hyper(GnnVariant::EdgeAware, 1), tiny_vocab());
    zero_gru(m);
    EncodedGraph g;
    g.node_tokens = {{2}};

    Tape tape;
    BoundModel bound = bind_model(tape, m);
    Rng rng(0);
    Tape::Id h0 = detail::init_nodes(bound, g, false, rng);
    Tensor H0 = tape.value(h0);
    Tape::Id h1 = detail::edge_aware_step(bound, h0, g, detail::group_in_edges(g));
    Tensor H1 = tape.value(h1);
    for (std::size_t i = 0; i < H0.data.size(); ++i)
        EXPECT_NEAR(H1.data[i], 0.5 * H0.data[i], 1e-12); // GRU(h, 0) with zero params
}

TEST(Ggnn, IdentityMatricesZeroGruHalvesState) {
    ModelState m = init_model(small_hyper(GnnVariant::Ggnn, 1), tiny_vocab());
    zero_gru(m);
    for (int k = 0; k < kEdgeTypeCount; ++k) {
        Tensor& e = m.params.at("E_k_" + std::to_string(k));
        for (int i = 0; i < m.hp.d; ++i)
            for (int j = 0; j < m.hp.d; ++j) e.at(i, j) = i == j ? 1.0 : 0.0;
    }
    EncodedGraph g = path_graph(3, 2);

    Tape tape;
    BoundModel bound = bind_model(tape, m);
    Rng rng(0);
    Tape::Id h0 = detail::init_nodes(bound, g, false, rng);
    Tensor H0 = tape.value(h0);
    Tape::Id h1 = detail::ggnn_step(bound, h0, g, detail::group_in_edges(g));
    Tensor H1 = tape.value(h1);
    for (std::size_t i = 0; i < H0.data.size(); ++i)
        EXPECT_NEAR(H1.data[i], 0.5 * H0.data[i], 1e-12);
}

TEST(Gcn, IdentityOnIsolatedNodeIsRelu) {
    Hyper hp = small_hyper(GnnVariant::Gcn, 1, 2);
    ModelState m = init_model(hp, tiny_vocab());
    Tensor& w = m.params.at("gcn_w_0");
    w.at(0, 0) = 1.0;
    w.at(0, 1) = 0.0;
    w.at(1, 0) = 0.0;
    w.at(1, 1) = 1.0;
    Tensor& E = m.params.at("E_seqtoken");
    E.at(2, 0) = -1.0;
    E.at(2, 1) = 2.0;

    EncodedGraph g;
    g.node_tokens = {{2}};

    Tape tape;
    BoundModel bound = bind_model(tape, m);
    Rng rng(0);
    Tape::Id h0 = detail::init_nodes(bound, g, false, rng);
    Tape::Id h1 = detail::gcn_step(bound, h0, g, detail::group_in_edges(g), 0);
    Tensor H1 = tape.value(h1);
    EXPECT_DOUBLE_EQ(H1.at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(H1.at(0, 1), 2.0);
}

TEST(Variants, MatchDenseReference) {
    EncodedGraph path = path_graph(3, 2);
    EncodedGraph diamond;
    diamond.node_tokens = {{2}, {3}, {2, 3}, {4}};
    int spec[][3] = {{0, 1, 1}, {0, 2, 2}, {1, 3, 4}, {2, 3, 1}};
    for (auto& e : spec) {
        diamond.edges.push_back({e[0], e[1], e[2]});
        diamond.edges.push_back({e[1], e[0], e[2] + 5});
    }

    for (GnnVariant variant :
         {GnnVariant::EdgeAware, GnnVariant::Ggnn, GnnVariant::Gcn}) {
        for (const EncodedGraph& g : {path, diamond}) {
            ModelState m = init_model(small_hyper(variant, 2), tiny_vocab());
            double got = predict(m, g);
            double expected = dense_ref::predict(m, g);
            EXPECT_NEAR(got, expected, 1e-12) << variant_name(variant);
        }
    }
}

TEST(Predict, ZeroClassifierGivesHalf) {
    ModelState m = init_model(small_hyper(GnnVariant::EdgeAware, 2), tiny_vocab());
    for (double& v : m.params.at("W_prime").data) v = 0.0;
    EXPECT_DOUBLE_EQ(predict(m, path_graph(4, 2)), 0.5);
}

TEST(Predict, ZeroHopsIgnoresEdges) {
    ModelState m = init_model(small_hyper(GnnVariant::EdgeAware, 0), tiny_vocab());
    EncodedGraph a = path_graph(3, 2, 1);
    EncodedGraph b = path_graph(3, 2, 4); // different edge types
    EncodedGraph c = path_graph(3, 2, 1);
    c.edges.clear(); // no edges at all
    EXPECT_DOUBLE_EQ(predict(m, a), predict(m, b));
    EXPECT_DOUBLE_EQ(predict(m, a), predict(m, c));
}

TEST(Predict, NodePermutationInvariance) {
    ModelState m = init_model(small_hyper(GnnVariant::EdgeAware, 2), tiny_vocab());
    EncodedGraph g;
    g.node_tokens = {{2}, {3}, {4}, {2, 4}};
    int spec[][3] = {{0, 1, 1}, {1, 2, 2}, {2, 3, 4}, {0, 3, 3}};
    for (auto& e : spec) {
        g.edges.push_back({e[0], e[1], e[2]});
        g.edges.push_back({e[1], e[0], e[2] + 5});
    }
    double base = predict(m, g);

    std::vector<int> perm = {2, 0, 3, 1};
    EncodedGraph p;
    p.node_tokens.resize(g.node_tokens.size());
    for (std::size_t v = 0; v < g.node_tokens.size(); ++v)
        p.node_tokens[std::size_t(perm[v])] = g.node_tokens[v];
    for (const EncodedGraph::Edge& e : g.edges)
        p.edges.push_back({perm[std::size_t(e.src)], perm[std::size_t(e.dst)],
                           e.code});
    EXPECT_NEAR(predict(m, p), base, 1e-12);
}

TEST(Predict, EdgeTypeSensitivity) {
    // one designated edge differs in type between the two graphs
    EncodedGraph a = path_graph(3, 2, 1);
    EncodedGraph b = path_graph(3, 2, 1);
    b.edges[0].code = 4;
    b.edges[1].code = 9;

    ModelState aware =
        init_model(small_hyper(GnnVariant::EdgeAware, 1), tiny_vocab());
    EXPECT_GT(std::fabs(predict(aware, a) - predict(aware, b)), 1e-9);

    Hyper tied_hp = small_hyper(GnnVariant::Ggnn, 1);
    tied_hp.tied_edges = true;
    ModelState tied = init_model(tied_hp, tiny_vocab());
    EXPECT_DOUBLE_EQ(predict(tied, a), predict(tied, b));
}

TEST(Bce, ReferenceValues) {
    EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-12);
    EXPECT_NEAR(bce_loss(1.0 - 1e-7, 1), 1e-7, 1e-9);
    EXPECT_NEAR(bce_loss(0.9, 0), -std::log(0.1), 1e-12);
    // tape path agrees
    Tape tape;
    Tape::Id y = tape.input(Tensor::scalar(0.9));
    EXPECT_NEAR(tape.value(bce_node(tape, y, 0)).data[0], -std::log(0.1), 1e-12);
}

TEST(GradCheck, FullEdgeAwareModel) {
    Hyper hp = small_hyper(GnnVariant::EdgeAware, 2, 5);
    ModelState base = init_model(hp, tiny_vocab());

    EncodedGraph g;
    g.node_tokens = {{2}, {3}, {4}, {2, 3}, {}, {4, 4}};
    int spec[][3] = {{0, 1, 1}, {1, 2, 2}, {2, 3, 4}, {3, 4, 3}, {4, 5, 1},
                     {0, 5, 2}};
    for (auto& e : spec) {
        g.edges.push_back({e[0], e[1], e[2]});
        g.edges.push_back({e[1], e[0], e[2] + 5});
    }
    g.label = 1;

    auto run = [&](const std::map<std::string, Tensor>& params,
                   std::map<std::string, Tensor>* grads) {
        ModelState m = base;
        m.params = params;
        Tape tape;
        BoundModel bound = bind_model(tape, m);
        Rng rng(3); // pinned dropout stream
        Tape::Id y = predict_logit(bound, g, true, rng);
        Tape::Id loss = bce_node(tape, y, g.label);
        if (grads) {
            auto raw = tape.backward(loss);
            for (const auto& [name, id] : bound.ids) (*grads)[name] = raw.at(id);
        }
        return tape.value(loss).data[0];
    };

    ModelState with_dropout = base;
    with_dropout.hp.dropout = 0.3;
    auto value_of = [&](const std::map<std::string, Tensor>& p) {
        return run(p, nullptr);
    };
    auto grad_of = [&](const std::map<std::string, Tensor>& p) {
        std::map<std::string, Tensor> g2;
        run(p, &g2);
        return g2;
    };

    Rng rng(77);
    double err = grad_check(value_of, grad_of, base.params, 120, rng);
    EXPECT_LE(err, 1e-4);
}

TEST(Checkpoint, RoundTripIsExact) {
    Hyper hp = small_hyper(GnnVariant::EdgeAware, 3, 7);
    hp.dropout = 0.25;
    hp.lr = 0.002;
    ModelState m = init_model(hp, tiny_vocab(), Cwe::Cwe120);

    std::string blob = serialize_checkpoint(m);
    ModelState back = deserialize_checkpoint(blob);

    EXPECT_EQ(back.hp.d, m.hp.d);
    EXPECT_EQ(back.hp.hops, m.hp.hops);
    EXPECT_DOUBLE_EQ(back.hp.dropout, m.hp.dropout);
    EXPECT_DOUBLE_EQ(back.hp.lr, m.hp.lr);
    EXPECT_EQ(back.hp.variant, m.hp.variant);
    EXPECT_EQ(back.cwe, m.cwe);
    EXPECT_EQ(back.vocab.tokens(), m.vocab.tokens());
    ASSERT_EQ(back.params.size(), m.params.size());
    for (const auto& [name, t] : m.params) {
        const Tensor& b = back.params.at(name);
        EXPECT_EQ(b.shape, t.shape);
        EXPECT_EQ(b.data, t.data); // bit-exact
    }
    // byte-stable serialization
    EXPECT_EQ(serialize_checkpoint(back), blob);
}

TEST(Checkpoint, RejectsForeignData) {
    EXPECT_THROW(deserialize_checkpoint("not a checkpoint"), MissingCheckpoint);
    EXPECT_THROW(deserialize_checkpoint(""), MissingCheckpoint);
}

TEST(Encode, RejectsOversizedGraphs) {
    std::string body;
    for (int i = 0; i < 799; ++i) body += "a" + std::to_string(i) + " = 1;\n";
    Cpg g = cpg_from_source("void f()\n{\n" + body + "}\n", "big");
    EXPECT_EQ(g.nodes.size(), 801u);
    EXPECT_THROW(encode_graph(g, tiny_vocab(), 0), SizeExceeded);
}
