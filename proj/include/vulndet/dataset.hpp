#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "vulndet/commits.hpp"
#include "vulndet/cpg.hpp"
#include "vulndet/mutate.hpp"
#include "vulndet/records.hpp"
#include "vulndet/rng.hpp"

namespace vulndet {

// insertion-ordered so serialized records are byte-stable
using Json = nlohmann::ordered_json;

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return data;
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << data;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::string data = read_file(path);
    std::vector<std::string> lines;
    std::string cur;
    for (char c : data) {
        if (c == '\n') {
            if (!cur.empty()) lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

// ---------------------------------------------------------------- commits

inline Json to_json(const CommitRecord& c) {
    Json j;
    j["project"] = c.project;
    j["sha"] = c.sha;
    j["message"] = c.message;
    j["diff"] = c.diff;
    return j;
}

inline CommitRecord commit_from_json(const Json& j) {
    CommitRecord c;
    c.project = j.at("project").get<std::string>();
    c.sha = j.at("sha").get<std::string>();
    c.message = j.at("message").get<std::string>();
    c.diff = j.at("diff").get<std::string>();
    return c;
}

// --------------------------------------------------------------- functions

inline Json to_json(const FunctionRecord& r) {
    Json j;
    j["id"] = r.id;
    j["project"] = r.project;
    j["sha"] = r.sha;
    j["cwe"] = cwe_name(r.cwe);
    j["role"] = role_name(r.role);
    j["label"] = r.label;
    j["code"] = r.code;
    if (r.parent_id) j["parent_id"] = *r.parent_id;
    if (r.mutation) j["mutation"] = mutation_op_name(*r.mutation);
    if (r.seed) j["seed"] = *r.seed;
    if (!r.rename.empty()) j["rename"] = r.rename;
    return j;
}

inline FunctionRecord function_from_json(const Json& j) {
    FunctionRecord r;
    r.id = j.at("id").get<std::string>();
    r.project = j.at("project").get<std::string>();
    r.sha = j.at("sha").get<std::string>();
    auto cwe = cwe_from_name(j.at("cwe").get<std::string>());
    if (!cwe) throw Error("unknown cwe in record " + r.id);
    r.cwe = *cwe;
    auto role = role_from_name(j.at("role").get<std::string>());
    if (!role) throw Error("unknown role in record " + r.id);
    r.role = *role;
    r.label = j.at("label").get<int>();
    r.code = j.at("code").get<std::string>();
    if (j.contains("parent_id")) r.parent_id = j["parent_id"].get<std::string>();
    if (j.contains("mutation")) {
        auto op = mutation_op_from_name(j["mutation"].get<std::string>());
        if (!op) throw Error("unknown mutation in record " + r.id);
        r.mutation = op;
    }
    if (j.contains("seed")) r.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("rename"))
        r.rename = j["rename"].get<std::map<std::string, std::string>>();
    return r;
}

// ------------------------------------------------------------------ graphs

inline Json graph_record(const Cpg& g, int label, Cwe cwe) {
    Json j;
    j["function_id"] = g.function_id;
    j["cwe"] = cwe_name(cwe);
    j["label"] = label;
    Json nodes = Json::array();
    for (const CpgNode& n : g.nodes) {
        Json jn;
        jn["id"] = n.id;
        jn["kind"] = ast_kind_name(n.kind);
        jn["code"] = n.code;
        nodes.push_back(std::move(jn));
    }
    j["nodes"] = std::move(nodes);
    Json edges = Json::array();
    for (const CpgEdge& e : g.edges) {
        Json je;
        je["src"] = e.src;
        je["dst"] = e.dst;
        je["type"] = e.type_code();
        edges.push_back(std::move(je));
    }
    j["edges"] = std::move(edges);
    return j;
}

inline Json graph_record_for(const FunctionRecord& r) {
    Cpg g = cpg_from_source(r.code, r.id);
    return graph_record(g, r.label, r.cwe);
}

// ------------------------------------------------------------------- split

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

struct PairIds {
    std::string v_id;
    std::string p_id;
    Cwe cwe = Cwe::Cwe404;
};

// Pair-level shuffled split per vulnerability class. Remainder goes to
// train; a split that a positive ratio cannot fill raises TooFewPairs.
inline DatasetSplit split_dataset(const std::vector<PairIds>& pairs,
                                  std::array<int, 3> ratios,
                                  std::uint64_t seed) {
    int ratio_sum = ratios[0] + ratios[1] + ratios[2];
    if (ratio_sum <= 0 || ratios[0] <= 0)
        throw Error("split ratios must have a positive train share");
    if (pairs.empty()) throw TooFewPairs("no pairs to split");

    std::map<Cwe, std::vector<PairIds>> groups;
    for (const PairIds& p : pairs) groups[p.cwe].push_back(p);

    DatasetSplit split;
    for (auto& [cwe, group] : groups) {
        Rng rng(splitmix64(seed ^ (std::uint64_t(cwe) + 1)));
        rng.shuffle(group);

        std::size_t n = group.size();
        std::size_t n_test = n * std::size_t(ratios[2]) / std::size_t(ratio_sum);
        std::size_t n_val = n * std::size_t(ratios[1]) / std::size_t(ratio_sum);
        std::size_t n_train = n - n_val - n_test;

        if (n_train == 0 || (ratios[1] > 0 && n_val == 0) ||
            (ratios[2] > 0 && n_test == 0))
            throw TooFewPairs(std::string(cwe_name(cwe)) + ": " +
                              std::to_string(n) +
                              " pairs cannot fill the requested split");

        auto emit = [](std::vector<std::string>& dst, const PairIds& p) {
            dst.push_back(p.v_id);
            dst.push_back(p.p_id);
        };
        for (std::size_t i = 0; i < n; ++i) {
            if (i < n_train) emit(split.train, group[i]);
            else if (i < n_train + n_val) emit(split.validation, group[i]);
            else emit(split.test, group[i]);
        }
    }
    return split;
}

inline Json to_json(const DatasetSplit& s) {
    Json j;
    j["train"] = s.train;
    j["validation"] = s.validation;
    j["test"] = s.test;
    return j;
}

inline DatasetSplit split_from_json(const Json& j) {
    DatasetSplit s;
    s.train = j.at("train").get<std::vector<std::string>>();
    s.validation = j.at("validation").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
}

// -------------------------------------------------------------- preprocess

struct PreprocessStats {
    int kept_pairs = 0;
    int dropped_pairs = 0;
};

// Drop pairs where either side's graph exceeds the node budget (both
// members go, keeping pairs intact). 800 nodes is the default budget.
inline std::vector<PatchTuple> preprocess_filter(std::vector<PatchTuple> pairs,
                                                 int max_nodes,
                                                 PreprocessStats* stats = nullptr) {
    PreprocessStats local;
    PreprocessStats& st = stats ? *stats : local;
    std::vector<PatchTuple> kept;
    for (PatchTuple& t : pairs) {
        std::size_t nv = parse_source(t.f_v.code).nodes.size();
        std::size_t np = parse_source(t.f_p.code).nodes.size();
        if (nv > std::size_t(max_nodes) || np > std::size_t(max_nodes)) {
            ++st.dropped_pairs;
            continue;
        }
        ++st.kept_pairs;
        kept.push_back(std::move(t));
    }
    return kept;
}

// ---------------------------------------------------------------- pipeline

struct IngestOptions {
    std::array<int, 3> split_ratios{6, 2, 2};
    int max_nodes = 800;
    std::uint64_t seed = 0;
    std::optional<Cwe> only_cwe;
};

struct IngestResult {
    FilterCounters counters;
    int parse_failures = 0;
    int empty_change = 0;
    PreprocessStats preprocess;
    std::vector<PatchTuple> pairs;
    DatasetSplit split;
};

// Commit stream -> filtered, extracted, size-capped, split dataset.
inline IngestResult run_ingest(const std::vector<CommitRecord>& commits,
                               const IngestOptions& opt) {
    IngestResult res;
    std::vector<LabeledCommit> kept = filter_commits(commits, res.counters);

    std::vector<PatchTuple> pairs;
    for (const LabeledCommit& lc : kept) {
        if (opt.only_cwe && lc.label != *opt.only_cwe) continue;
        try {
            PatchTuple t = extract_pair(lc.commit, lc.label);
            if (t.s_del.empty() && t.s_add.empty()) {
                ++res.empty_change;
                continue;
            }
            pairs.push_back(std::move(t));
        } catch (const ParseFailure&) {
            ++res.parse_failures;
        }
    }

    res.pairs = preprocess_filter(std::move(pairs), opt.max_nodes,
                                  &res.preprocess);

    std::vector<PairIds> ids;
    for (const PatchTuple& t : res.pairs)
        ids.push_back({t.f_v.id, t.f_p.id, t.f_v.cwe});
    res.split = split_dataset(ids, opt.split_ratios, opt.seed);
    return res;
}

} // namespace vulndet
