#pragma once

#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vulndet/cpg.hpp"
#include "vulndet/records.hpp"

namespace vulndet {

enum class Direction { Forward, Backward };

// Statements related to a change, per function version.
struct RelatedSet {
    std::set<int> related_v;
    std::set<int> related_p;
};

// BFS closure from `start` following data and control edges: forward
// walks edges out of each visited statement, backward walks edges into
// it. The result always contains `start`.
inline std::set<int> traverse(int start, const Pdg& pdg, Direction dir) {
    if (start < 0 || start >= pdg.stmt_count)
        throw UnknownStatement("statement " + std::to_string(start) +
                               " not in PDG of " +
                               std::to_string(pdg.stmt_count) + " statements");

    std::vector<std::vector<int>> next;
    next.resize(std::size_t(pdg.stmt_count));
    for (const Pdg::Edge& e : pdg.edges) {
        if (dir == Direction::Forward)
            next[std::size_t(e.src)].push_back(e.dst);
        else
            next[std::size_t(e.dst)].push_back(e.src);
    }

    std::set<int> visited{start};
    std::deque<int> queue{start};
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int v : next[std::size_t(u)])
            if (!visited.count(v)) {
                visited.insert(v);
                queue.push_back(v);
            }
    }
    return visited;
}

// Forward slice from each changed statement, then a backward slice from
// every statement the forward pass reached; the union over both change
// sets is the related set of each function version.
inline RelatedSet slice_related(const Pdg& pdg_v, const Pdg& pdg_p,
                                const std::set<int>& s_del,
                                const std::set<int>& s_add) {
    if (s_del.empty() && s_add.empty())
        throw EmptyChange("both change sets are empty");

    auto slice_one = [](const Pdg& pdg, const std::set<int>& seeds) {
        std::set<int> related;
        for (int seed : seeds) {
            std::set<int> forward = traverse(seed, pdg, Direction::Forward);
            for (int t : forward) {
                std::set<int> backward = traverse(t, pdg, Direction::Backward);
                related.insert(backward.begin(), backward.end());
            }
        }
        return related;
    };

    RelatedSet out;
    out.related_v = slice_one(pdg_v, s_del);
    out.related_p = slice_one(pdg_p, s_add);
    return out;
}

// Longest-common-subsequence alignment over normalized statement token
// strings; maps patched-side stmt ids onto vulnerable-side stmt ids.
// Statements added by the patch map to nothing.
inline std::map<int, int> align_statement_texts(
    const std::vector<std::string>& v_stmts,
    const std::vector<std::string>& p_stmts) {
    const std::size_t n = v_stmts.size(), m = p_stmts.size();
    std::vector<std::vector<int>> dp;
    dp.assign(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j) {
            if (v_stmts[i - 1] == p_stmts[j - 1])
                dp[i][j] = dp[i - 1][j - 1] + 1;
            else
                dp[i][j] = std::max(dp[i - 1][j], dp[i][j - 1]);
        }
    std::map<int, int> align; // p stmt -> v stmt
    std::size_t i = n, j = m;
    while (i > 0 && j > 0) {
        if (v_stmts[i - 1] == p_stmts[j - 1]) {
            align[int(j - 1)] = int(i - 1);
            --i;
            --j;
        } else if (dp[i - 1][j] >= dp[i][j - 1]) {
            --i;
        } else {
            --j;
        }
    }
    return align;
}

inline std::map<int, int> align_statements(const Ast& f_v, const Ast& f_p) {
    return align_statement_texts(statement_texts(f_v), statement_texts(f_p));
}

// The frozen set augmentation must preserve: related statements of f_v
// plus the image of the patched side's related statements that survive in
// f_v via the alignment.
inline std::set<int> related_in_vulnerable(const RelatedSet& rel,
                                           const std::map<int, int>& alignment) {
    std::set<int> frozen = rel.related_v;
    for (int t : rel.related_p) {
        auto it = alignment.find(t);
        if (it != alignment.end()) frozen.insert(it->second);
    }
    return frozen;
}

// End-to-end slicing for one patch tuple.
struct SliceOutcome {
    RelatedSet related;
    std::map<int, int> alignment; // p stmt -> v stmt
    std::set<int> frozen_v;       // statements of f_v that must survive
};

inline SliceOutcome slice_patch(const Ast& ast_v, const Ast& ast_p,
                                const std::set<int>& s_del,
                                const std::set<int>& s_add) {
    SliceOutcome out;
    Pdg pdg_v = project_pdg(build_cpg(ast_v));
    Pdg pdg_p = project_pdg(build_cpg(ast_p));
    out.related = slice_related(pdg_v, pdg_p, s_del, s_add);
    out.alignment = align_statements(ast_v, ast_p);
    out.frozen_v = related_in_vulnerable(out.related, out.alignment);
    return out;
}

} // namespace vulndet
