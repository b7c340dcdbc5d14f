#pragma once

#include <cctype>
#include <set>
#include <string>
#include <vector>

#include "vulndet/diff.hpp"
#include "vulndet/parser.hpp"
#include "vulndet/records.hpp"

namespace vulndet {

struct CommitRecord {
    std::string project;
    std::string sha;
    std::string message;
    std::string diff; // unified diff text
};

namespace detail {

inline std::string normalize_message(const std::string& msg) {
    std::string out;
    bool in_space = true;
    for (char c : msg) {
        if (std::isspace((unsigned char)c)) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(char(std::tolower((unsigned char)c)));
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

inline bool word_char(char c) {
    return std::isalnum((unsigned char)c) || c == '_';
}

// Keywords of up to three characters (the abbreviations) match whole
// words only; longer keywords match as substrings.
inline bool keyword_hits(const std::string& msg, const std::string& kw) {
    if (kw.size() > 3) return msg.find(kw) != std::string::npos;
    std::size_t pos = 0;
    while ((pos = msg.find(kw, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !word_char(msg[pos - 1]);
        std::size_t end = pos + kw.size();
        bool right_ok = end >= msg.size() || !word_char(msg[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

} // namespace detail

// Vulnerability classes whose keywords occur in the commit message.
inline std::set<Cwe> match_keywords(const std::string& message) {
    std::string msg = detail::normalize_message(message);
    std::set<Cwe> hits;
    for (Cwe c : all_cwes())
        for (const std::string& kw : cwe_keywords(c))
            if (detail::keyword_hits(msg, kw)) {
                hits.insert(c);
                break;
            }
    return hits;
}

struct FilterCounters {
    int no_keyword = 0;
    int ambiguous_type = 0;
    int multi_function = 0;
    int ambiguous_context = 0;
    int malformed_diff = 0;
    int emitted = 0;

    int excluded() const {
        return no_keyword + ambiguous_type + multi_function +
               ambiguous_context + malformed_diff;
    }
    int total() const { return excluded() + emitted; }
};

struct LabeledCommit {
    CommitRecord commit;
    Cwe label = Cwe::Cwe404;
};

// Keep commits matched by exactly one vulnerability type whose diff
// touches exactly one function; everything excluded is counted by
// reason.
inline std::vector<LabeledCommit> filter_commits(
    const std::vector<CommitRecord>& commits, FilterCounters& counters) {
    std::vector<LabeledCommit> out;
    for (const CommitRecord& c : commits) {
        std::set<Cwe> labels = match_keywords(c.message);
        if (labels.empty()) {
            ++counters.no_keyword;
            continue;
        }
        if (labels.size() > 1) {
            ++counters.ambiguous_type;
            continue;
        }
        std::vector<FileDiff> files;
        try {
            files = parse_unified_diff(c.diff);
        } catch (const MalformedDiff&) {
            ++counters.malformed_diff;
            continue;
        }
        auto touched = count_touched_functions(files);
        if (!touched) {
            ++counters.ambiguous_context;
            continue;
        }
        if (*touched != 1) {
            ++counters.multi_function;
            continue;
        }
        ++counters.emitted;
        out.push_back({c, *labels.begin()});
    }
    return out;
}

// Extract the function pair and changed-statement seeds from a filtered
// commit: f_v from the pre-image, f_p from the post-image; statements
// overlapping deleted/added lines become s_del/s_add.
inline PatchTuple extract_pair(const CommitRecord& commit, Cwe label) {
    std::vector<FileDiff> files;
    try {
        files = parse_unified_diff(commit.diff);
    } catch (const MalformedDiff& e) {
        throw ParseFailure(std::string("diff unparsable: ") + e.what());
    }
    const FileDiff* fd = nullptr;
    for (const FileDiff& f : files)
        if (!f.hunks.empty()) {
            fd = &f;
            break;
        }
    if (!fd) throw ParseFailure("diff has no hunks");

    auto build_side = [&](const std::vector<SideLine>& side, Role role)
        -> std::pair<FunctionRecord, std::set<int>> {
        auto span = function_span(side);
        if (!span)
            throw ParseFailure("no complete function in " +
                               std::string(role_name(role)) + " side of " +
                               commit.sha);
        std::string code;
        std::vector<bool> changed;
        for (std::size_t i = span->first; i < span->second; ++i) {
            code += side[i].text;
            code += '\n';
            changed.push_back(side[i].changed);
        }
        FunctionRecord rec;
        rec.id = commit.sha + (role == Role::Vulnerable ? ":v" : ":p");
        rec.project = commit.project;
        rec.sha = commit.sha;
        rec.cwe = label;
        rec.role = role;
        rec.label = role == Role::Vulnerable ? 1 : 0;
        rec.code = code;

        Ast ast;
        try {
            ast = parse_source(code);
        } catch (const Error& e) {
            throw ParseFailure(std::string(role_name(role)) + " side of " +
                               commit.sha + ": " + e.what());
        }
        std::set<int> seeds;
        for (NodeId id : statement_nodes(ast)) {
            const AstNode& n = ast.node(id);
            for (const Token& tok : n.tokens) {
                std::size_t line = std::size_t(tok.line); // 1-based
                if (line - 1 < changed.size() && changed[line - 1]) {
                    seeds.insert(*n.stmt_id);
                    break;
                }
            }
        }
        return {std::move(rec), std::move(seeds)};
    };

    auto [f_v, s_del] = build_side(pre_image(*fd), Role::Vulnerable);
    auto [f_p, s_add] = build_side(post_image(*fd), Role::Patched);

    PatchTuple t;
    t.f_v = std::move(f_v);
    t.f_p = std::move(f_p);
    t.s_del = std::move(s_del);
    t.s_add = std::move(s_add);
    return t;
}

} // namespace vulndet
