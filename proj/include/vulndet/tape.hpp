#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vulndet/rng.hpp"
#include "vulndet/tensor.hpp"

namespace vulndet {

// Reverse-mode autodiff over a linear tape. Nodes are appended in
// topological order by construction; backward replays them in exact
// reverse order.
class Tape {
public:
    using Id = int;

    enum class Op {
        Leaf,
        MatMul,
        Add,     // same shape, or second input is a 1xN bias broadcast
        Scale,
        ConcatRows, // per-row horizontal concatenation
        StackRows,  // vertical stacking
        GatherRows, // row selection (also the embedding lookup)
        Relu,
        Sigmoid,
        Tanh,
        Log,
        Clamp,
        Hadamard,
        RowSum,
        RowMax,
        Dropout,
    };

    Id input(Tensor value, bool requires_grad = false) {
        return push(Op::Leaf, {}, std::move(value), requires_grad);
    }

    const Tensor& value(Id id) const { return nodes_[std::size_t(id)].value; }
    std::size_t size() const { return nodes_.size(); }

    Id matmul(Id a, Id b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (A.cols() != B.rows())
            throw ShapeMismatch("matmul: " + shape_str(A) + " vs " + shape_str(B));
        Tensor out(A.rows(), B.cols());
        for (std::int64_t i = 0; i < A.rows(); ++i)
            for (std::int64_t k = 0; k < A.cols(); ++k) {
                double aik = A.at(i, k);
                if (aik == 0.0) continue;
                for (std::int64_t j = 0; j < B.cols(); ++j)
                    out.at(i, j) += aik * B.at(k, j);
            }
        return push(Op::MatMul, {a, b}, std::move(out));
    }

    Id add(Id a, Id b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        bool bias = !A.same_shape(B);
        if (bias && !(B.rows() == 1 && B.cols() == A.cols()))
            throw ShapeMismatch("add: " + shape_str(A) + " vs " + shape_str(B));
        Tensor out = A;
        for (std::int64_t i = 0; i < A.rows(); ++i)
            for (std::int64_t j = 0; j < A.cols(); ++j)
                out.at(i, j) += bias ? B.at(0, j) : B.at(i, j);
        Id id = push(Op::Add, {a, b}, std::move(out));
        node(id).flag = bias;
        return id;
    }

    Id scale(Id a, double c) {
        Tensor out = value(a);
        for (double& x : out.data) x *= c;
        Id id = push(Op::Scale, {a}, std::move(out));
        node(id).c0 = c;
        return id;
    }

    Id concat_rows(Id a, Id b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (A.rows() != B.rows())
            throw ShapeMismatch("concat_rows: " + shape_str(A) + " vs " +
                                shape_str(B));
        Tensor out(A.rows(), A.cols() + B.cols());
        for (std::int64_t i = 0; i < A.rows(); ++i) {
            for (std::int64_t j = 0; j < A.cols(); ++j) out.at(i, j) = A.at(i, j);
            for (std::int64_t j = 0; j < B.cols(); ++j)
                out.at(i, A.cols() + j) = B.at(i, j);
        }
        return push(Op::ConcatRows, {a, b}, std::move(out));
    }

    Id stack_rows(const std::vector<Id>& parts) {
        if (parts.empty()) throw ShapeMismatch("stack_rows: no inputs");
        std::int64_t cols = value(parts[0]).cols();
        std::int64_t rows = 0;
        for (Id p : parts) {
            if (value(p).cols() != cols)
                throw ShapeMismatch("stack_rows: " + shape_str(value(parts[0])) +
                                    " vs " + shape_str(value(p)));
            rows += value(p).rows();
        }
        Tensor out(rows, cols);
        std::int64_t r = 0;
        for (Id p : parts) {
            const Tensor& P = value(p);
            for (std::int64_t i = 0; i < P.rows(); ++i, ++r)
                for (std::int64_t j = 0; j < cols; ++j)
                    out.at(r, j) = P.at(i, j);
        }
        return push(Op::StackRows, parts, std::move(out));
    }

    Id gather_rows(Id src, std::vector<int> rows) {
        const Tensor& S = value(src);
        for (int r : rows)
            if (r < 0 || std::int64_t(r) >= S.rows())
                throw ShapeMismatch("gather_rows: row " + std::to_string(r) +
                                    " outside " + shape_str(S));
        Tensor out(std::int64_t(rows.size()), S.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::int64_t j = 0; j < S.cols(); ++j)
                out.at(std::int64_t(i), j) = S.at(rows[i], j);
        Id id = push(Op::GatherRows, {src}, std::move(out));
        node(id).indices = std::move(rows);
        return id;
    }

    // Embedding lookup is a row gather from the embedding table.
    Id embedding_lookup(Id table, const std::vector<int>& token_indices) {
        return gather_rows(table, token_indices);
    }

    Id relu(Id a) { return unary(Op::Relu, a, [](double x) { return x > 0 ? x : 0.0; }); }
    Id sigmoid(Id a) {
        return unary(Op::Sigmoid, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    }
    Id tanh_(Id a) { return unary(Op::Tanh, a, [](double x) { return std::tanh(x); }); }
    Id log_(Id a) { return unary(Op::Log, a, [](double x) { return std::log(x); }); }

    Id clamp(Id a, double lo, double hi) {
        Tensor out = value(a);
        for (double& x : out.data) x = x < lo ? lo : (x > hi ? hi : x);
        Id id = push(Op::Clamp, {a}, std::move(out));
        node(id).c0 = lo;
        node(id).c1 = hi;
        return id;
    }

    Id hadamard(Id a, Id b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        require_same_shape("hadamard", A, B);
        Tensor out = A;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
        return push(Op::Hadamard, {a, b}, std::move(out));
    }

    Id row_sum(Id a) {
        const Tensor& A = value(a);
        Tensor out(1, A.cols());
        for (std::int64_t i = 0; i < A.rows(); ++i)
            for (std::int64_t j = 0; j < A.cols(); ++j) out.at(0, j) += A.at(i, j);
        return push(Op::RowSum, {a}, std::move(out));
    }

    // Columnwise max over rows; arg rows recorded for the backward pass,
    // ties broken toward the lowest row index.
    Id row_max(Id a) {
        const Tensor& A = value(a);
        if (A.rows() == 0) throw ShapeMismatch("row_max: empty " + shape_str(A));
        Tensor out(1, A.cols());
        std::vector<int> arg(std::size_t(A.cols()), 0);
        for (std::int64_t j = 0; j < A.cols(); ++j) {
            double best = A.at(0, j);
            int best_row = 0;
            for (std::int64_t i = 1; i < A.rows(); ++i)
                if (A.at(i, j) > best) {
                    best = A.at(i, j);
                    best_row = int(i);
                }
            out.at(0, j) = best;
            arg[std::size_t(j)] = best_row;
        }
        Id id = push(Op::RowMax, {a}, std::move(out));
        node(id).indices = std::move(arg);
        return id;
    }

    // Train mode zeroes entries with probability p and scales survivors
    // by 1/(1-p); eval mode is the identity. The mask is stored so the
    // backward pass reuses it.
    Id dropout(Id a, double p, bool train, Rng& rng) {
        if (!train || p <= 0.0) return a;
        if (p >= 1.0) throw ShapeMismatch("dropout: p must be < 1");
        const Tensor& A = value(a);
        double keep_scale = 1.0 / (1.0 - p);
        std::vector<double> mask(A.numel());
        Tensor out = A;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
            out.data[i] *= mask[i];
        }
        Id id = push(Op::Dropout, {a}, std::move(out));
        node(id).mask = std::move(mask);
        return id;
    }

    // Gradients of the scalar `loss` for every requires-grad leaf.
    // Leaves the loss does not reach get zero tensors.
    std::map<Id, Tensor> backward(Id loss) const {
        const Tensor& L = value(loss);
        if (L.rows() != 1 || L.cols() != 1)
            throw ShapeMismatch("backward: loss must be 1x1, got " + shape_str(L));

        std::vector<std::optional<Tensor>> grads(nodes_.size());
        grads[std::size_t(loss)] = Tensor::scalar(1.0);

        for (int id = loss; id >= 0; --id) {
            const Node& n = nodes_[std::size_t(id)];
            if (!grads[std::size_t(id)] || !n.needs_grad) continue;
            const Tensor& g = *grads[std::size_t(id)];
            accumulate_inputs(n, g, grads);
        }

        std::map<Id, Tensor> out;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node& n = nodes_[i];
            if (n.op != Op::Leaf || !n.requires_grad) continue;
            if (grads[i])
                out[Id(i)] = std::move(*grads[i]);
            else
                out[Id(i)] = Tensor::zeros(n.value.rows(), n.value.cols());
        }
        return out;
    }

private:
    struct Node {
        Op op = Op::Leaf;
        std::vector<Id> inputs;
        Tensor value;
        bool requires_grad = false; // leaves only
        bool needs_grad = false;    // reachable from a requires-grad leaf
        std::vector<int> indices;
        std::vector<double> mask;
        double c0 = 0.0, c1 = 0.0;
        bool flag = false;
    };

    std::vector<Node> nodes_;

    Node& node(Id id) { return nodes_[std::size_t(id)]; }

    Id push(Op op, std::vector<Id> inputs, Tensor value, bool requires_grad_in = false) {
        Node n;
        n.op = op;
        n.inputs = std::move(inputs);
        n.value = std::move(value);
        n.requires_grad = requires_grad_in;
        n.needs_grad = requires_grad_in;
        for (Id in : n.inputs)
            n.needs_grad = n.needs_grad || nodes_[std::size_t(in)].needs_grad;
        nodes_.push_back(std::move(n));
        return Id(nodes_.size() - 1);
    }

    template <typename F>
    Id unary(Op op, Id a, F f) {
        Tensor out = value(a);
        for (double& x : out.data) x = f(x);
        return push(op, {a}, std::move(out));
    }

    static void add_into(std::optional<Tensor>& slot, const Tensor& t) {
        if (!slot) {
            slot = t;
            return;
        }
        for (std::size_t i = 0; i < slot->data.size(); ++i)
            slot->data[i] += t.data[i];
    }

    void accumulate_inputs(const Node& n, const Tensor& g,
                           std::vector<std::optional<Tensor>>& grads) const {
        auto in_val = [&](std::size_t k) -> const Tensor& {
            return nodes_[std::size_t(n.inputs[k])].value;
        };
        auto wants = [&](std::size_t k) {
            return nodes_[std::size_t(n.inputs[k])].needs_grad;
        };
        auto sink = [&](std::size_t k, const Tensor& t) {
            if (wants(k)) add_into(grads[std::size_t(n.inputs[k])], t);
        };

        switch (n.op) {
            case Op::Leaf:
                return;
            case Op::MatMul: {
                const Tensor& A = in_val(0);
                const Tensor& B = in_val(1);
                if (wants(0)) {
                    Tensor da(A.rows(), A.cols()); // g * B^T
                    for (std::int64_t i = 0; i < A.rows(); ++i)
                        for (std::int64_t j = 0; j < B.cols(); ++j) {
                            double gij = g.at(i, j);
                            if (gij == 0.0) continue;
                            for (std::int64_t k = 0; k < A.cols(); ++k)
                                da.at(i, k) += gij * B.at(k, j);
                        }
                    sink(0, da);
                }
                if (wants(1)) {
                    Tensor db(B.rows(), B.cols()); // A^T * g
                    for (std::int64_t i = 0; i < A.rows(); ++i)
                        for (std::int64_t k = 0; k < A.cols(); ++k) {
                            double aik = A.at(i, k);
                            if (aik == 0.0) continue;
                            for (std::int64_t j = 0; j < B.cols(); ++j)
                                db.at(k, j) += aik * g.at(i, j);
                        }
                    sink(1, db);
                }
                return;
            }
            case Op::Add: {
                sink(0, g);
                if (!wants(1)) return;
                if (!n.flag) {
                    sink(1, g);
                } else {
                    Tensor db(1, g.cols()); // bias: sum over rows
                    for (std::int64_t i = 0; i < g.rows(); ++i)
                        for (std::int64_t j = 0; j < g.cols(); ++j)
                            db.at(0, j) += g.at(i, j);
                    sink(1, db);
                }
                return;
            }
            case Op::Scale: {
                Tensor da = g;
                for (double& x : da.data) x *= n.c0;
                sink(0, da);
                return;
            }
            case Op::ConcatRows: {
                const Tensor& A = in_val(0);
                const Tensor& B = in_val(1);
                if (wants(0)) {
                    Tensor da(A.rows(), A.cols());
                    for (std::int64_t i = 0; i < A.rows(); ++i)
                        for (std::int64_t j = 0; j < A.cols(); ++j)
                            da.at(i, j) = g.at(i, j);
                    sink(0, da);
                }
                if (wants(1)) {
                    Tensor db(B.rows(), B.cols());
                    for (std::int64_t i = 0; i < B.rows(); ++i)
                        for (std::int64_t j = 0; j < B.cols(); ++j)
                            db.at(i, j) = g.at(i, A.cols() + j);
                    sink(1, db);
                }
                return;
            }
            case Op::StackRows: {
                std::int64_t r = 0;
                for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                    const Tensor& P = in_val(k);
                    if (wants(k)) {
                        Tensor dp(P.rows(), P.cols());
                        for (std::int64_t i = 0; i < P.rows(); ++i)
                            for (std::int64_t j = 0; j < P.cols(); ++j)
                                dp.at(i, j) = g.at(r + i, j);
                        sink(k, dp);
                    }
                    r += P.rows();
                }
                return;
            }
            case Op::GatherRows: {
                if (!wants(0)) return;
                const Tensor& S = in_val(0);
                Tensor ds(S.rows(), S.cols());
                for (std::size_t i = 0; i < n.indices.size(); ++i)
                    for (std::int64_t j = 0; j < S.cols(); ++j)
                        ds.at(n.indices[i], j) += g.at(std::int64_t(i), j);
                sink(0, ds);
                return;
            }
            case Op::Relu: {
                const Tensor& X = in_val(0);
                Tensor da = g;
                for (std::size_t i = 0; i < da.data.size(); ++i)
                    if (X.data[i] <= 0.0) da.data[i] = 0.0;
                sink(0, da);
                return;
            }
            case Op::Sigmoid: {
                Tensor da = g;
                for (std::size_t i = 0; i < da.data.size(); ++i) {
                    double s = n.value.data[i];
                    da.data[i] *= s * (1.0 - s);
                }
                sink(0, da);
                return;
            }
            case Op::Tanh: {
                Tensor da = g;
                for (std::size_t i = 0; i < da.data.size(); ++i) {
                    double t = n.value.data[i];
                    da.data[i] *= 1.0 - t * t;
                }
                sink(0, da);
                return;
            }
            case Op::Log: {
                const Tensor& X = in_val(0);
                Tensor da = g;
                for (std::size_t i = 0; i < da.data.size(); ++i)
                    da.data[i] /= X.data[i];
                sink(0, da);
                return;
            }
            case Op::Clamp: {
                const Tensor& X = in_val(0);
                Tensor da = g;
                for (std::size_t i = 0; i < da.data.size(); ++i)
                    if (X.data[i] <= n.c0 || X.data[i] >= n.c1) da.data[i] = 0.0;
                sink(0, da);
                return;
            }
            case Op::Hadamard: {
                const Tensor& A = in_val(0);
                const Tensor& B = in_val(1);
                if (wants(0)) {
                    Tensor da = g;
                    for (std::size_t i = 0; i < da.data.size(); ++i)
                        da.data[i] *= B.data[i];
                    sink(0, da);
                }
                if (wants(1)) {
                    Tensor db = g;
                    for (std::size_t i = 0; i < db.data.size(); ++i)
                        db.data[i] *= A.data[i];
                    sink(1, db);
                }
                return;
            }
            case Op::RowSum: {
                const Tensor& X = in_val(0);
                Tensor da(X.rows(), X.cols());
                for (std::int64_t i = 0; i < X.rows(); ++i)
                    for (std::int64_t j = 0; j < X.cols(); ++j)
                        da.at(i, j) = g.at(0, j);
                sink(0, da);
                return;
            }
            case Op::RowMax: {
                const Tensor& X = in_val(0);
                Tensor da(X.rows(), X.cols());
                for (std::int64_t j = 0; j < X.cols(); ++j)
                    da.at(n.indices[std::size_t(j)], j) = g.at(0, j);
                sink(0, da);
                return;
            }
            case Op::Dropout: {
                Tensor da = g;
                for (std::size_t i = 0; i < da.data.size(); ++i)
                    da.data[i] *= n.mask[i];
                sink(0, da);
                return;
            }
        }
    }
};

// Max relative central-difference error over `samples` random parameter
// coordinates. `value_of` evaluates the scalar function; `grad_of`
// returns analytic gradients for the same parameters.
inline double grad_check(
    const std::function<double(const std::map<std::string, Tensor>&)>& value_of,
    const std::function<std::map<std::string, Tensor>(
        const std::map<std::string, Tensor>&)>& grad_of,
    std::map<std::string, Tensor> params, int samples, Rng& rng,
    double step = 1e-5) {
    std::map<std::string, Tensor> analytic = grad_of(params);

    std::vector<std::string> names;
    for (const auto& [name, t] : params)
        if (t.numel() > 0) names.push_back(name);

    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const std::string& name = names[std::size_t(rng.below(names.size()))];
        Tensor& t = params[name];
        std::size_t k = std::size_t(rng.below(t.numel()));

        double saved = t.data[k];
        t.data[k] = saved + step;
        double up = value_of(params);
        t.data[k] = saved - step;
        double down = value_of(params);
        t.data[k] = saved;

        double numeric = (up - down) / (2.0 * step);
        double a = 0.0;
        auto it = analytic.find(name);
        if (it != analytic.end()) a = it->second.data[k];
        double err = std::fabs(a - numeric) /
                     std::max(1e-8, std::fabs(a) + std::fabs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace vulndet
