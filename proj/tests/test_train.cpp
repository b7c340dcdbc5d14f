#include <gtest/gtest.h>

#include "support/synth.hpp"
#include "vulndet/checkpoint.hpp"
#include "vulndet/train.hpp"

using namespace vulndet;

namespace {

Hyper train_hyper(int d, int hops, int epochs, int batch = 4) {
    Hyper hp;
    hp.d = d;
    hp.d_edge = d;
    hp.hops = hops;
    hp.dropout = 0.0;
    hp.lr = 1e-3;
    hp.batch = batch;
    hp.epochs = epochs;
    hp.seed = 5;
    hp.variant = GnnVariant::EdgeAware;
    return hp;
}

EncodedGraph one_graph() {
    EncodedGraph g;
    g.id = "solo";
    g.label = 1;
    g.node_tokens = {{2}, {2}, {2}, {2}, {2}, {2}};
    int spec[][3] = {{0, 1, 1}, {1, 2, 2}, {2, 3, 4}, {3, 4, 1}, {4, 5, 2}};
    for (auto& e : spec) {
        g.edges.push_back({e[0], e[1], e[2]});
        g.edges.push_back({e[1], e[0], e[2] + 5});
    }
    return g;
}

} // namespace

TEST(Train, ZeroLearningRateLeavesParamsBitIdentical) {
    synth::Dataset ds = synth::make_edge_type_dataset(10, 3);
    Hyper hp = train_hyper(8, 1, 1);
    hp.lr = 0.0;
    ModelState init = init_model(hp, synth::x_vocab());
    std::map<std::string, Tensor> before = init.params;

    TrainResult r = train_model(ds.train, {}, std::move(init), 9);
    ASSERT_EQ(r.history.size(), 1u);
    for (const auto& [name, t] : before) {
        const Tensor& after = r.model.params.at(name);
        EXPECT_EQ(after.data, t.data) << name;
    }
}

TEST(Train, SingleExampleLossIsMonotone) {
    std::vector<EncodedGraph> train = {one_graph()};
    Hyper hp = train_hyper(16, 2, 50, 1);
    TrainResult r = train_model(train, {}, init_model(hp, synth::x_vocab()), 21);
    for (std::size_t i = 0; i + 1 < 50; ++i)
        EXPECT_LE(r.history[i + 1].train_loss, r.history[i].train_loss + 1e-6)
            << "step " << i;
}

TEST(Train, OverfitsOneExample) {
    std::vector<EncodedGraph> train = {one_graph()};
    Hyper hp = train_hyper(16, 2, 500, 1);
    hp.lr = 1e-2;
    TrainResult r = train_model(train, {}, init_model(hp, synth::x_vocab()), 21);

    std::size_t first_below = r.history.size();
    for (std::size_t i = 0; i < r.history.size(); ++i)
        if (r.history[i].train_loss < 1e-3) {
            first_below = i;
            break;
        }
    EXPECT_LT(first_below, 500u);
}

TEST(Train, DivergenceIsReportedWithBatchId) {
    synth::Dataset ds = synth::make_edge_type_dataset(6, 4);
    Hyper hp = train_hyper(8, 1, 10);
    hp.lr = 1e155; // blows the weights up after the first step
    try {
        train_model(ds.train, {}, init_model(hp, synth::x_vocab()), 1);
        FAIL() << "expected Diverged";
    } catch (const Diverged& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("batch"), std::string::npos);
        EXPECT_NE(msg.find("epoch"), std::string::npos);
    }
}

TEST(Train, KeepsBestValidationF1Checkpoint) {
    synth::Dataset ds = synth::make_edge_type_dataset(20, 8);
    Hyper hp = train_hyper(8, 1, 12, 8);
    TrainResult r =
        train_model(ds.train, ds.held_out, init_model(hp, synth::x_vocab()), 13);

    ASSERT_EQ(r.history.size(), 12u);
    double best = -1.0;
    int best_epoch = -1;
    for (const EpochStats& s : r.history)
        if (s.val_f1 > best) {
            best = s.val_f1;
            best_epoch = s.epoch;
        }
    EXPECT_EQ(r.best_epoch, best_epoch);
    Metrics m = validate(r.model, ds.held_out);
    EXPECT_NEAR(m.f1, best, 1e-12);
}

TEST(Train, DeterministicUnderSeed) {
    synth::Dataset ds = synth::make_edge_type_dataset(8, 6);
    Hyper hp = train_hyper(8, 1, 3);
    hp.dropout = 0.3; // exercise the dropout stream too

    TrainResult a =
        train_model(ds.train, ds.held_out, init_model(hp, synth::x_vocab()), 17);
    TrainResult b =
        train_model(ds.train, ds.held_out, init_model(hp, synth::x_vocab()), 17);

    EXPECT_EQ(serialize_checkpoint(a.model), serialize_checkpoint(b.model));
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i)
        EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
}
