#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "vulndet/ensemble.hpp"
#include "vulndet/model.hpp"
#include "vulndet/rng.hpp"

namespace vulndet {

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_precision = 0.0;
    double val_recall = 0.0;
    double val_f1 = 0.0;
};

struct TrainResult {
    ModelState model; // best validation F1 (or final state without a
                      // validation set)
    std::vector<EpochStats> history;
    int best_epoch = -1;
};

namespace detail {

// Adaptive-moment optimizer state per named parameter.
class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::map<std::string, Tensor>& params,
              const std::map<std::string, Tensor>& grads) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (auto& [name, p] : params) {
            auto git = grads.find(name);
            if (git == grads.end()) continue;
            const Tensor& g = git->second;
            Tensor& m = moment(m_, name, p);
            Tensor& v = moment(v_, name, p);
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g.data[i];
                v.data[i] =
                    beta2_ * v.data[i] + (1.0 - beta2_) * g.data[i] * g.data[i];
                double mhat = m.data[i] / bc1;
                double vhat = v.data[i] / bc2;
                p.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<std::string, Tensor> m_, v_;

    static Tensor& moment(std::map<std::string, Tensor>& store,
                          const std::string& name, const Tensor& like) {
        auto it = store.find(name);
        if (it == store.end())
            it = store.emplace(name, Tensor::zeros(like.rows(), like.cols())).first;
        return it->second;
    }
};

inline void accumulate(std::map<std::string, Tensor>& into,
                       const std::map<std::string, Tensor>& grads) {
    for (const auto& [name, g] : grads) {
        auto it = into.find(name);
        if (it == into.end()) {
            into[name] = g;
        } else {
            for (std::size_t i = 0; i < g.data.size(); ++i)
                it->second.data[i] += g.data[i];
        }
    }
}

} // namespace detail

// Validation metrics at the 0.5 threshold.
inline Metrics validate(const ModelState& state,
                        const std::vector<EncodedGraph>& val_set) {
    std::vector<int> preds, labels;
    for (const EncodedGraph& g : val_set) {
        preds.push_back(predict(state, g) > 0.5 ? 1 : 0);
        labels.push_back(g.label);
    }
    return compute_metrics(preds, labels);
}

// Minimize mean batch cross entropy with Adam. Shuffling, dropout and
// initialization all derive from explicit seeds, so a (data, config,
// seed) triple pins the result bit for bit. Keeps the checkpoint with the
// best validation F1; earlier epochs win ties.
inline TrainResult train_model(const std::vector<EncodedGraph>& train_set,
                               const std::vector<EncodedGraph>& val_set,
                               ModelState state, std::uint64_t run_seed) {
    TrainResult result;
    detail::Adam adam(state.hp.lr);
    Rng shuffle_rng(splitmix64(run_seed ^ 0x5f0f71eULL));
    Rng dropout_rng(splitmix64(run_seed ^ 0xd20b0d7ULL));

    double best_f1 = -1.0;
    for (int epoch = 0; epoch < state.hp.epochs; ++epoch) {
        std::vector<std::size_t> order(train_set.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t begin = 0; begin < order.size();
             begin += std::size_t(state.hp.batch)) {
            std::size_t end =
                std::min(order.size(), begin + std::size_t(state.hp.batch));
            double inv = 1.0 / double(end - begin);

            std::map<std::string, Tensor> grad_sum;
            double batch_loss = 0.0;
            for (std::size_t k = begin; k < end; ++k) {
                const EncodedGraph& g = train_set[order[k]];
                Tape tape;
                BoundModel bound = bind_model(tape, state);
                Tape::Id y = predict_logit(bound, g, true, dropout_rng);
                Tape::Id loss = tape.scale(bce_node(tape, y, g.label), inv);
                batch_loss += tape.value(loss).data[0];

                auto grads = tape.backward(loss);
                std::map<std::string, Tensor> named;
                for (const auto& [name, id] : bound.ids)
                    named[name] = grads.at(id);
                detail::accumulate(grad_sum, named);
            }
            if (!std::isfinite(batch_loss))
                throw Diverged("epoch " + std::to_string(epoch) + " batch " +
                               std::to_string(batches) + ": non-finite loss");
            adam.step(state.params, grad_sum);
            epoch_loss += batch_loss;
            ++batches;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = batches ? epoch_loss / batches : 0.0;
        if (!val_set.empty()) {
            Metrics m = validate(state, val_set);
            stats.val_precision = m.precision;
            stats.val_recall = m.recall;
            stats.val_f1 = m.f1;
            if (m.f1 > best_f1) {
                best_f1 = m.f1;
                result.model = state;
                result.best_epoch = epoch;
            }
        }
        result.history.push_back(stats);
    }

    if (val_set.empty() || result.best_epoch < 0) {
        result.model = std::move(state);
        result.best_epoch = int(result.history.size()) - 1;
    }
    return result;
}

} // namespace vulndet
