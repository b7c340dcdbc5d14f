#pragma once

#include <cctype>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vulndet/errors.hpp"

namespace vulndet {

struct DiffLine {
    enum class Kind { Context, Del, Add };
    Kind kind = Kind::Context;
    std::string text;
};

struct Hunk {
    long old_start = 0;
    long old_count = 0;
    long new_start = 0;
    long new_count = 0;
    std::string context; // text after the second @@
    std::vector<DiffLine> lines;
};

struct FileDiff {
    std::string old_path;
    std::string new_path;
    std::vector<Hunk> hunks;
};

namespace detail {

inline std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

inline std::string strip_diff_path(const std::string& s) {
    std::string p = s;
    // drop timestamp suffix some tools append after a tab
    auto tab = p.find('\t');
    if (tab != std::string::npos) p = p.substr(0, tab);
    if (p.rfind("a/", 0) == 0 || p.rfind("b/", 0) == 0) p = p.substr(2);
    return p;
}

// @@ -l[,c] +l[,c] @@ optional-context
inline std::optional<Hunk> parse_hunk_header(const std::string& line) {
    if (line.rfind("@@ -", 0) != 0) return std::nullopt;
    Hunk h;
    std::size_t i = 4;
    auto read_num = [&](long& out) {
        if (i >= line.size() || !std::isdigit((unsigned char)line[i])) return false;
        long v = 0;
        while (i < line.size() && std::isdigit((unsigned char)line[i]))
            v = v * 10 + (line[i++] - '0');
        out = v;
        return true;
    };
    if (!read_num(h.old_start)) return std::nullopt;
    h.old_count = 1;
    if (i < line.size() && line[i] == ',') {
        ++i;
        if (!read_num(h.old_count)) return std::nullopt;
    }
    if (line.compare(i, 2, " +") != 0) return std::nullopt;
    i += 2;
    if (!read_num(h.new_start)) return std::nullopt;
    h.new_count = 1;
    if (i < line.size() && line[i] == ',') {
        ++i;
        if (!read_num(h.new_count)) return std::nullopt;
    }
    if (line.compare(i, 3, " @@") != 0) return std::nullopt;
    i += 3;
    if (i < line.size() && line[i] == ' ') ++i;
    h.context = line.substr(i);
    return h;
}

} // namespace detail

// Parse a unified diff (git style headers supported). Hunk line counts
// must be consistent with the header ranges; anything else raises
// MalformedDiff.
inline std::vector<FileDiff> parse_unified_diff(const std::string& text) {
    std::vector<FileDiff> files;
    FileDiff* cur = nullptr;
    Hunk* hunk = nullptr;
    long old_left = 0, new_left = 0;

    auto close_hunk = [&]() {
        if (hunk && (old_left != 0 || new_left != 0))
            throw MalformedDiff("hunk line counts inconsistent");
        hunk = nullptr;
    };

    for (const std::string& line : detail::split_lines(text)) {
        if (hunk && (old_left > 0 || new_left > 0)) {
            char tag = line.empty() ? ' ' : line[0];
            std::string body = line.empty() ? "" : line.substr(1);
            switch (tag) {
                case ' ':
                    hunk->lines.push_back({DiffLine::Kind::Context, body});
                    --old_left;
                    --new_left;
                    break;
                case '-':
                    hunk->lines.push_back({DiffLine::Kind::Del, body});
                    --old_left;
                    break;
                case '+':
                    hunk->lines.push_back({DiffLine::Kind::Add, body});
                    --new_left;
                    break;
                case '\\': // "\ No newline at end of file"
                    break;
                default:
                    throw MalformedDiff("unexpected line inside hunk: " + line);
            }
            if (old_left < 0 || new_left < 0)
                throw MalformedDiff("hunk line counts inconsistent");
            continue;
        }
        close_hunk();

        if (line.rfind("diff ", 0) == 0) {
            files.push_back({});
            cur = &files.back();
            continue;
        }
        if (line.rfind("--- ", 0) == 0) {
            if (!cur || !cur->old_path.empty()) {
                files.push_back({});
                cur = &files.back();
            }
            cur->old_path = detail::strip_diff_path(line.substr(4));
            continue;
        }
        if (line.rfind("+++ ", 0) == 0) {
            if (!cur) throw MalformedDiff("+++ without ---");
            cur->new_path = detail::strip_diff_path(line.substr(4));
            continue;
        }
        if (auto h = detail::parse_hunk_header(line)) {
            if (!cur) throw MalformedDiff("hunk before file header");
            cur->hunks.push_back(*h);
            hunk = &cur->hunks.back();
            old_left = h->old_count;
            new_left = h->new_count;
            continue;
        }
        // index lines, mode lines, commit text: ignored
    }
    close_hunk();

    bool any_hunk = false;
    for (const FileDiff& f : files) any_hunk = any_hunk || !f.hunks.empty();
    if (!any_hunk) throw MalformedDiff("no hunks found");
    return files;
}

// One reconstructed side of a diff.
struct SideLine {
    std::string text;
    bool changed = false; // deleted (pre side) or added (post side)
};

inline std::vector<SideLine> pre_image(const FileDiff& fd) {
    std::vector<SideLine> out;
    for (const Hunk& h : fd.hunks)
        for (const DiffLine& l : h.lines) {
            if (l.kind == DiffLine::Kind::Add) continue;
            out.push_back({l.text, l.kind == DiffLine::Kind::Del});
        }
    return out;
}

inline std::vector<SideLine> post_image(const FileDiff& fd) {
    std::vector<SideLine> out;
    for (const Hunk& h : fd.hunks)
        for (const DiffLine& l : h.lines) {
            if (l.kind == DiffLine::Kind::Del) continue;
            out.push_back({l.text, l.kind == DiffLine::Kind::Add});
        }
    return out;
}

// Heuristic recognizer for a function-definition line: unindented,
// `name(...`, not a control statement, not a declaration or assignment.
inline std::optional<std::string> signature_name(const std::string& line) {
    if (line.empty()) return std::nullopt;
    char c0 = line[0];
    if (!(std::isalpha((unsigned char)c0) || c0 == '_')) return std::nullopt;
    if (line.find('=') != std::string::npos) return std::nullopt;

    std::string trimmed = line;
    while (!trimmed.empty() &&
           std::isspace((unsigned char)trimmed.back()))
        trimmed.pop_back();
    if (!trimmed.empty() && trimmed.back() == ';') return std::nullopt;

    auto paren = line.find('(');
    if (paren == std::string::npos || paren == 0) return std::nullopt;
    std::size_t e = paren;
    while (e > 0 && std::isspace((unsigned char)line[e - 1])) --e;
    std::size_t b = e;
    while (b > 0 && (std::isalnum((unsigned char)line[b - 1]) || line[b - 1] == '_'))
        --b;
    if (b == e) return std::nullopt;
    std::string name = line.substr(b, e - b);
    static const std::set<std::string> not_names = {
        "if", "while", "for", "switch", "return", "sizeof", "do", "else"};
    if (not_names.count(name)) return std::nullopt;
    return name;
}

inline std::optional<std::string> context_function_name(const std::string& ctx) {
    auto paren = ctx.find('(');
    if (paren == std::string::npos || paren == 0) return std::nullopt;
    std::size_t e = paren;
    while (e > 0 && std::isspace((unsigned char)ctx[e - 1])) --e;
    std::size_t b = e;
    while (b > 0 && (std::isalnum((unsigned char)ctx[b - 1]) || ctx[b - 1] == '_'))
        --b;
    if (b == e) return std::nullopt;
    return ctx.substr(b, e - b);
}

// Count the distinct functions whose lines a diff changes. nullopt means
// a changed line could not be attributed to any function.
inline std::optional<int> count_touched_functions(
    const std::vector<FileDiff>& files) {
    std::set<std::string> touched;
    for (const FileDiff& fd : files)
        for (const Hunk& h : fd.hunks) {
            std::string current;
            if (auto n = context_function_name(h.context)) current = *n;
            for (const DiffLine& l : h.lines) {
                if (auto n = signature_name(l.text)) current = *n;
                if (l.kind != DiffLine::Kind::Context) {
                    if (current.empty()) return std::nullopt;
                    touched.insert(fd.old_path + "::" + current);
                }
            }
        }
    return int(touched.size());
}

// [begin, end) span of the first complete function definition in a
// reconstructed side.
inline std::optional<std::pair<std::size_t, std::size_t>> function_span(
    const std::vector<SideLine>& lines) {
    std::size_t begin = 0;
    bool found = false;
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (signature_name(lines[i].text)) {
            begin = i;
            found = true;
            break;
        }
    if (!found) return std::nullopt;

    int depth = 0;
    bool opened = false;
    for (std::size_t i = begin; i < lines.size(); ++i) {
        for (char c : lines[i].text) {
            if (c == '{') {
                ++depth;
                opened = true;
            }
            if (c == '}') --depth;
        }
        if (opened && depth == 0) return std::make_pair(begin, i + 1);
    }
    return std::nullopt;
}

} // namespace vulndet
