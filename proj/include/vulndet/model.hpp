#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vulndet/cpg.hpp"
#include "vulndet/records.hpp"
#include "vulndet/rng.hpp"
#include "vulndet/tape.hpp"
#include "vulndet/vocab.hpp"

namespace vulndet {

constexpr int kMaxGraphNodes = 800;

enum class GnnVariant { EdgeAware, Ggnn, Gcn };

inline const char* variant_name(GnnVariant v) {
    switch (v) {
        case GnnVariant::EdgeAware: return "edge_aware";
        case GnnVariant::Ggnn: return "ggnn";
        case GnnVariant::Gcn: return "gcn";
    }
    return "?";
}

inline std::optional<GnnVariant> variant_from_name(const std::string& s) {
    if (s == "edge_aware") return GnnVariant::EdgeAware;
    if (s == "ggnn") return GnnVariant::Ggnn;
    if (s == "gcn") return GnnVariant::Gcn;
    return std::nullopt;
}

// Message-passing hop counts tuned per vulnerability class.
inline int default_hops(Cwe c) {
    switch (c) {
        case Cwe::Cwe404: return 4;
        case Cwe::Cwe835: return 1;
        case Cwe::Cwe120: return 5;
        case Cwe::Cwe672: return 4;
        case Cwe::Cwe362: return 2;
    }
    return 4;
}

struct Hyper {
    int d = 128;      // node embedding width
    int d_edge = 128; // edge-type embedding width
    int hops = 4;
    double dropout = 0.3;
    double lr = 1e-3;
    int batch = 64;
    int epochs = 10;
    int vocab_cap = 90000;
    std::uint64_t seed = 1;
    GnnVariant variant = GnnVariant::EdgeAware;
    bool tied_edges = false; // ggnn: one shared matrix for every edge type
};

// One classifier: hyperparameters, vocabulary and named weight tensors.
struct ModelState {
    Hyper hp;
    std::optional<Cwe> cwe;
    Vocabulary vocab;
    std::map<std::string, Tensor> params;
};

// Graph as the model consumes it: per-node vocab indices plus typed,
// already-mirrored edges.
struct EncodedGraph {
    std::string id;
    int label = 0;
    std::vector<std::vector<int>> node_tokens;
    struct Edge {
        int src = 0;
        int dst = 0;
        int code = 0; // 0..9
    };
    std::vector<Edge> edges;

    int node_count() const { return int(node_tokens.size()); }
};

inline EncodedGraph encode_graph(const Cpg& g, const Vocabulary& vocab,
                                 int label) {
    if (g.nodes.size() > std::size_t(kMaxGraphNodes))
        throw SizeExceeded(g.function_id + ": " +
                           std::to_string(g.nodes.size()) + " nodes exceeds " +
                           std::to_string(kMaxGraphNodes));
    EncodedGraph eg;
    eg.id = g.function_id;
    eg.label = label;
    eg.node_tokens.resize(g.nodes.size());
    for (const CpgNode& n : g.nodes) {
        std::vector<int>& seq = eg.node_tokens[std::size_t(n.id)];
        for (const std::string& tok : n.code)
            for (const std::string& sub : split_subtokens(tok))
                seq.push_back(vocab.lookup(sub));
    }
    for (const CpgEdge& e : g.edges)
        eg.edges.push_back({e.src, e.dst, e.type_code()});
    return eg;
}

namespace detail {

inline Tensor uniform_matrix(std::int64_t rows, std::int64_t cols, Rng& rng) {
    Tensor t(rows, cols);
    double bound = 1.0 / std::sqrt(double(rows));
    for (double& x : t.data) x = rng.uniform(-bound, bound);
    return t;
}

inline Tensor normal_matrix(std::int64_t rows, std::int64_t cols, Rng& rng) {
    Tensor t(rows, cols);
    for (double& x : t.data) x = rng.normal(0.0, 0.1);
    return t;
}

} // namespace detail

// Fresh parameters: normal(0, 0.1) embeddings, uniform(-1/sqrt(fan_in),
// 1/sqrt(fan_in)) matrices, zero biases. Draw order is fixed so a seed
// pins every weight.
inline ModelState init_model(const Hyper& hp, Vocabulary vocab,
                             std::optional<Cwe> cwe = std::nullopt) {
    ModelState m;
    m.hp = hp;
    m.cwe = cwe;
    m.vocab = std::move(vocab);

    Rng rng(hp.seed);
    auto& P = m.params;
    P["E_seqtoken"] = detail::normal_matrix(m.vocab.size(), hp.d, rng);
    P["E_edgetype"] = detail::normal_matrix(kEdgeTypeCount, hp.d_edge, rng);

    switch (hp.variant) {
        case GnnVariant::EdgeAware:
            P["W"] = detail::uniform_matrix(hp.d + hp.d_edge, hp.d, rng);
            break;
        case GnnVariant::Ggnn:
            if (hp.tied_edges) {
                P["E_shared"] = detail::uniform_matrix(hp.d, hp.d, rng);
            } else {
                for (int k = 0; k < kEdgeTypeCount; ++k)
                    P["E_k_" + std::to_string(k)] =
                        detail::uniform_matrix(hp.d, hp.d, rng);
            }
            break;
        case GnnVariant::Gcn:
            for (int t = 0; t < hp.hops; ++t)
                P["gcn_w_" + std::to_string(t)] =
                    detail::uniform_matrix(hp.d, hp.d, rng);
            break;
    }

    if (hp.variant != GnnVariant::Gcn) {
        const char* gates[] = {"z", "r", "h"};
        for (const char* g : gates) {
            P[std::string("W_") + g] = detail::uniform_matrix(hp.d, hp.d, rng);
            P[std::string("U_") + g] = detail::uniform_matrix(hp.d, hp.d, rng);
            P[std::string("b_") + g] = Tensor::zeros(1, hp.d);
        }
    }
    P["W_prime"] = detail::uniform_matrix(hp.d, 1, rng);
    return m;
}

// ------------------------------------------------------------- forward

struct BoundModel {
    Tape* tape = nullptr;
    const ModelState* state = nullptr;
    std::map<std::string, Tape::Id> ids;

    Tape::Id p(const std::string& name) const { return ids.at(name); }
};

inline BoundModel bind_model(Tape& tape, const ModelState& state) {
    BoundModel b;
    b.tape = &tape;
    b.state = &state;
    for (const auto& [name, t] : state.params)
        b.ids[name] = tape.input(t, true);
    return b;
}

namespace detail {

// h_v = sum of the node's token embeddings; empty nodes are zero rows.
inline Tape::Id init_nodes(BoundModel& m, const EncodedGraph& g, bool train,
                           Rng& dropout_rng) {
    Tape& tape = *m.tape;
    const int d = m.state->hp.d;
    std::vector<Tape::Id> rows;
    for (const std::vector<int>& toks : g.node_tokens) {
        if (toks.empty()) {
            rows.push_back(tape.input(Tensor::zeros(1, d)));
            continue;
        }
        Tape::Id emb = tape.embedding_lookup(m.p("E_seqtoken"), toks);
        rows.push_back(tape.row_sum(emb));
    }
    Tape::Id h = tape.stack_rows(rows);
    return tape.dropout(h, m.state->hp.dropout, train, dropout_rng);
}

struct InEdges {
    std::vector<int> srcs;
    std::vector<int> codes;
};

inline std::vector<InEdges> group_in_edges(const EncodedGraph& g) {
    std::vector<InEdges> in(std::size_t(g.node_count()));
    for (const EncodedGraph::Edge& e : g.edges) {
        in[std::size_t(e.dst)].srcs.push_back(e.src);
        in[std::size_t(e.dst)].codes.push_back(e.code);
    }
    return in;
}

inline Tape::Id gru_update(BoundModel& m, Tape::Id h, Tape::Id a,
                           std::int64_t rows) {
    Tape& tape = *m.tape;
    const int d = m.state->hp.d;
    auto gate = [&](const char* w, const char* u, const char* b, Tape::Id hh) {
        return tape.add(tape.add(tape.matmul(a, m.p(w)), tape.matmul(hh, m.p(u))),
                        m.p(b));
    };
    Tape::Id z = tape.sigmoid(gate("W_z", "U_z", "b_z", h));
    Tape::Id r = tape.sigmoid(gate("W_r", "U_r", "b_r", h));
    Tape::Id rh = tape.hadamard(r, h);
    Tape::Id cand = tape.tanh_(
        tape.add(tape.add(tape.matmul(a, m.p("W_h")), tape.matmul(rh, m.p("U_h"))),
                 m.p("b_h")));
    Tape::Id ones = tape.input(Tensor::full(rows, d, 1.0));
    Tape::Id keep = tape.add(ones, tape.scale(z, -1.0)); // 1 - z
    return tape.add(tape.hadamard(keep, h), tape.hadamard(z, cand));
}

// a_v = SUM over in-neighbors u of Relu(W [h_u ; e_{v,u}]), then a GRU
// cell folds the aggregate into the node state.
inline Tape::Id edge_aware_step(BoundModel& m, Tape::Id h,
                                const EncodedGraph& g,
                                const std::vector<InEdges>& in) {
    Tape& tape = *m.tape;
    const int d = m.state->hp.d;
    std::vector<Tape::Id> agg;
    for (int v = 0; v < g.node_count(); ++v) {
        const InEdges& ie = in[std::size_t(v)];
        if (ie.srcs.empty()) {
            agg.push_back(tape.input(Tensor::zeros(1, d)));
            continue;
        }
        Tape::Id neigh = tape.gather_rows(h, ie.srcs);
        Tape::Id etypes = tape.embedding_lookup(m.p("E_edgetype"), ie.codes);
        Tape::Id joined = tape.concat_rows(neigh, etypes);
        Tape::Id msg = tape.relu(tape.matmul(joined, m.p("W")));
        agg.push_back(tape.row_sum(msg));
    }
    Tape::Id a = tape.stack_rows(agg);
    return gru_update(m, h, a, g.node_count());
}

// Plain gated variant: per-edge-type matrices (optionally tied) multiply
// the neighbor states.
inline Tape::Id ggnn_step(BoundModel& m, Tape::Id h, const EncodedGraph& g,
                          const std::vector<InEdges>& in) {
    Tape& tape = *m.tape;
    const int d = m.state->hp.d;
    std::vector<Tape::Id> agg;
    for (int v = 0; v < g.node_count(); ++v) {
        const InEdges& ie = in[std::size_t(v)];
        if (ie.srcs.empty()) {
            agg.push_back(tape.input(Tensor::zeros(1, d)));
            continue;
        }
        std::map<int, std::vector<int>> by_code;
        for (std::size_t k = 0; k < ie.srcs.size(); ++k)
            by_code[ie.codes[k]].push_back(ie.srcs[k]);
        Tape::Id sum = -1;
        for (const auto& [code, srcs] : by_code) {
            const std::string mat = m.state->hp.tied_edges
                                        ? "E_shared"
                                        : "E_k_" + std::to_string(code);
            Tape::Id part = tape.row_sum(
                tape.matmul(tape.gather_rows(h, srcs), m.p(mat)));
            sum = sum < 0 ? part : tape.add(sum, part);
        }
        agg.push_back(sum);
    }
    Tape::Id a = tape.stack_rows(agg);
    return gru_update(m, h, a, g.node_count());
}

// Convolutional variant: h' = Relu(E_t (h_v + SUM of neighbor states)).
inline Tape::Id gcn_step(BoundModel& m, Tape::Id h, const EncodedGraph& g,
                         const std::vector<InEdges>& in, int hop) {
    Tape& tape = *m.tape;
    const int d = m.state->hp.d;
    std::vector<Tape::Id> agg;
    for (int v = 0; v < g.node_count(); ++v) {
        const InEdges& ie = in[std::size_t(v)];
        if (ie.srcs.empty()) {
            agg.push_back(tape.input(Tensor::zeros(1, d)));
            continue;
        }
        agg.push_back(tape.row_sum(tape.gather_rows(h, ie.srcs)));
    }
    Tape::Id s = tape.stack_rows(agg);
    const std::string mat = "gcn_w_" + std::to_string(hop);
    return tape.relu(tape.matmul(tape.add(h, s), m.p(mat)));
}

} // namespace detail

// y' in (0,1): `hops` rounds of message passing, columnwise max pooling,
// then a sigmoid projection.
inline Tape::Id predict_logit(BoundModel& m, const EncodedGraph& g, bool train,
                              Rng& dropout_rng) {
    Tape& tape = *m.tape;
    Tape::Id h = detail::init_nodes(m, g, train, dropout_rng);
    auto in = detail::group_in_edges(g);
    for (int k = 0; k < m.state->hp.hops; ++k) {
        switch (m.state->hp.variant) {
            case GnnVariant::EdgeAware:
                h = detail::edge_aware_step(m, h, g, in);
                break;
            case GnnVariant::Ggnn:
                h = detail::ggnn_step(m, h, g, in);
                break;
            case GnnVariant::Gcn:
                h = detail::gcn_step(m, h, g, in, k);
                break;
        }
    }
    Tape::Id pooled = tape.row_max(h);
    return tape.sigmoid(tape.matmul(pooled, m.p("W_prime")));
}

// Eval-mode prediction on a fresh tape.
inline double predict(const ModelState& state, const EncodedGraph& g) {
    Tape tape;
    BoundModel m = bind_model(tape, state);
    Rng unused(0);
    Tape::Id y = predict_logit(m, g, false, unused);
    return tape.value(y).data[0];
}

// Binary cross entropy with the prediction clamped to [1e-7, 1 - 1e-7].
inline Tape::Id bce_node(Tape& tape, Tape::Id y_pred, int label) {
    Tape::Id p = tape.clamp(y_pred, 1e-7, 1.0 - 1e-7);
    if (label == 1) return tape.scale(tape.log_(p), -1.0);
    Tape::Id one_minus =
        tape.add(tape.input(Tensor::scalar(1.0)), tape.scale(p, -1.0));
    return tape.scale(tape.log_(one_minus), -1.0);
}

inline double bce_loss(double y_pred, int label) {
    double p = std::min(std::max(y_pred, 1e-7), 1.0 - 1e-7);
    return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

} // namespace vulndet
