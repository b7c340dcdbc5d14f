#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vulndet/model.hpp"

namespace vulndet {

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_defined = true; // false when TP+FP == 0
    bool recall_defined = true;    // false when TP+FN == 0
};

inline Metrics compute_metrics(const std::vector<int>& preds,
                               const std::vector<int>& labels) {
    if (preds.size() != labels.size())
        throw LengthMismatch("metrics: " + std::to_string(preds.size()) +
                             " predictions vs " + std::to_string(labels.size()) +
                             " labels");
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == 1 && labels[i] == 1) ++tp;
        if (preds[i] == 1 && labels[i] == 0) ++fp;
        if (preds[i] == 0 && labels[i] == 1) ++fn;
    }
    Metrics m;
    if (tp + fp == 0) {
        m.precision_defined = false;
    } else {
        m.precision = double(tp) / double(tp + fp);
    }
    if (tp + fn == 0) {
        m.recall_defined = false;
    } else {
        m.recall = double(tp) / double(tp + fn);
    }
    if (m.precision + m.recall > 0.0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

// Ensemble verdict for one function.
struct Verdict {
    std::vector<double> logits; // canonical class order
    std::vector<int> bits;      // logit > 0.5, strict
    int final_label = 0;        // majority of the five bits
    std::optional<Cwe> attributed;
};

// Threshold each classifier at 0.5 (strict) and take the majority; the
// attributed class is the highest logit among positive classifiers.
inline Verdict vote(const std::vector<double>& logits) {
    if (logits.size() != std::size_t(kCweCount))
        throw WrongArity("vote needs " + std::to_string(kCweCount) +
                         " logits, got " + std::to_string(logits.size()));
    Verdict v;
    v.logits = logits;
    int positives = 0;
    for (double y : logits) {
        v.bits.push_back(y > 0.5 ? 1 : 0);
        positives += v.bits.back();
    }
    v.final_label = positives >= 3 ? 1 : 0;
    if (v.final_label == 1) {
        int best = -1;
        for (int i = 0; i < kCweCount; ++i)
            if (v.bits[std::size_t(i)] &&
                (best < 0 || logits[std::size_t(i)] > logits[std::size_t(best)]))
                best = i;
        v.attributed = all_cwes()[std::size_t(best)];
    }
    return v;
}

using ModelSet = std::map<Cwe, ModelState>;

// Build the graph once, run every classifier with its own vocabulary and
// hop count, then vote.
inline Verdict predict_function(const std::string& code, const ModelSet& models) {
    for (Cwe c : all_cwes())
        if (!models.count(c))
            throw MissingCheckpoint(std::string("no classifier for ") +
                                    cwe_name(c));
    Cpg g = cpg_from_source(code, "query");
    std::vector<double> logits;
    for (Cwe c : all_cwes()) {
        const ModelState& m = models.at(c);
        EncodedGraph eg = encode_graph(g, m.vocab, 0);
        logits.push_back(predict(m, eg));
    }
    return vote(logits);
}

// ------------------------------------------------------------ evaluation

struct EvalRow {
    std::string name;
    Metrics metrics;
    int count = 0;
};

struct EvalReport {
    std::vector<EvalRow> per_cwe;
    std::optional<EvalRow> ensemble;
};

// Score one classifier on its own test records.
inline Metrics evaluate_classifier(const ModelState& model,
                                   const std::vector<FunctionRecord>& records) {
    std::vector<int> preds, labels;
    for (const FunctionRecord& r : records) {
        EncodedGraph eg = encode_graph(cpg_from_source(r.code, r.id),
                                       model.vocab, r.label);
        preds.push_back(predict(model, eg) > 0.5 ? 1 : 0);
        labels.push_back(r.label);
    }
    return compute_metrics(preds, labels);
}

} // namespace vulndet
