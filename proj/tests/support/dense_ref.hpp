#pragma once

// Straight-line reference implementation of the graph classifiers, kept
// independent of the tape machinery. Eval mode only (no dropout).

#include <cmath>
#include <map>
#include <vector>

#include "vulndet/model.hpp"

namespace dense_ref {

using vulndet::EncodedGraph;
using vulndet::GnnVariant;
using vulndet::ModelState;
using vulndet::Tensor;

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Vec row_of(const Tensor& t, std::int64_t r) {
    Vec v(std::size_t(t.cols()));
    for (std::int64_t j = 0; j < t.cols(); ++j) v[std::size_t(j)] = t.at(r, j);
    return v;
}

inline Vec vec_mat(const Vec& x, const Tensor& w) {
    Vec out(std::size_t(w.cols()), 0.0);
    for (std::size_t k = 0; k < x.size(); ++k)
        for (std::int64_t j = 0; j < w.cols(); ++j)
            out[std::size_t(j)] += x[k] * w.at(std::int64_t(k), j);
    return out;
}

inline Vec add(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vec relu(Vec a) {
    for (double& x : a) x = x > 0 ? x : 0;
    return a;
}

inline Vec sigmoid(Vec a) {
    for (double& x : a) x = 1.0 / (1.0 + std::exp(-x));
    return a;
}

inline Vec tanh_v(Vec a) {
    for (double& x : a) x = std::tanh(x);
    return a;
}

inline Vec concat(const Vec& a, const Vec& b) {
    Vec out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

inline Mat init_states(const ModelState& m, const EncodedGraph& g) {
    const Tensor& emb = m.params.at("E_seqtoken");
    Mat h;
    for (const std::vector<int>& toks : g.node_tokens) {
        Vec v(std::size_t(m.hp.d), 0.0);
        for (int t : toks) v = add(std::move(v), row_of(emb, t));
        h.push_back(std::move(v));
    }
    return h;
}

inline Vec gru(const ModelState& m, const Vec& h, const Vec& a) {
    auto gate = [&](const char* W, const char* U, const char* b) {
        Vec g = add(vec_mat(a, m.params.at(W)), vec_mat(h, m.params.at(U)));
        return add(std::move(g), row_of(m.params.at(b), 0));
    };
    Vec z = sigmoid(gate("W_z", "U_z", "b_z"));
    Vec r = sigmoid(gate("W_r", "U_r", "b_r"));
    Vec rh(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) rh[i] = r[i] * h[i];
    Vec cand = add(vec_mat(a, m.params.at("W_h")), vec_mat(rh, m.params.at("U_h")));
    cand = tanh_v(add(std::move(cand), row_of(m.params.at("b_h"), 0)));
    Vec out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        out[i] = (1.0 - z[i]) * h[i] + z[i] * cand[i];
    return out;
}

inline Mat one_step(const ModelState& m, const EncodedGraph& g, const Mat& h,
                    int hop) {
    std::size_t n = h.size();
    Mat next(n);
    std::vector<std::vector<std::pair<int, int>>> in(n); // (src, code)
    for (const EncodedGraph::Edge& e : g.edges)
        in[std::size_t(e.dst)].push_back({e.src, e.code});

    for (std::size_t v = 0; v < n; ++v) {
        if (m.hp.variant == GnnVariant::Gcn) {
            Vec sum = h[v];
            for (auto [u, code] : in[v]) sum = add(std::move(sum), h[std::size_t(u)]);
            next[v] = relu(vec_mat(sum, m.params.at("gcn_w_" + std::to_string(hop))));
            continue;
        }
        Vec a(std::size_t(m.hp.d), 0.0);
        for (auto [u, code] : in[v]) {
            if (m.hp.variant == GnnVariant::EdgeAware) {
                Vec joined = concat(h[std::size_t(u)],
                                    row_of(m.params.at("E_edgetype"), code));
                a = add(std::move(a), relu(vec_mat(joined, m.params.at("W"))));
            } else {
                const std::string mat = m.hp.tied_edges
                                            ? "E_shared"
                                            : "E_k_" + std::to_string(code);
                a = add(std::move(a), vec_mat(h[std::size_t(u)], m.params.at(mat)));
            }
        }
        next[v] = gru(m, h[v], a);
    }
    return next;
}

inline double predict(const ModelState& m, const EncodedGraph& g) {
    Mat h = init_states(m, g);
    for (int k = 0; k < m.hp.hops; ++k) h = one_step(m, g, h, k);
    Vec pooled(std::size_t(m.hp.d), -1e300);
    for (const Vec& row : h)
        for (std::size_t j = 0; j < row.size(); ++j)
            pooled[j] = std::max(pooled[j], row[j]);
    double y = vec_mat(pooled, m.params.at("W_prime"))[0];
    return 1.0 / (1.0 + std::exp(-y));
}

} // namespace dense_ref
