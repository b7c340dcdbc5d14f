#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vulndet/errors.hpp"

namespace vulndet {

// The five vulnerability classes, in canonical order.
enum class Cwe { Cwe404 = 0, Cwe835 = 1, Cwe120 = 2, Cwe672 = 3, Cwe362 = 4 };

constexpr int kCweCount = 5;

inline const std::array<Cwe, 5>& all_cwes() {
    static const std::array<Cwe, 5> xs = {Cwe::Cwe404, Cwe::Cwe835, Cwe::Cwe120,
                                          Cwe::Cwe672, Cwe::Cwe362};
    return xs;
}

inline const char* cwe_name(Cwe c) {
    switch (c) {
        case Cwe::Cwe404: return "CWE-404";
        case Cwe::Cwe835: return "CWE-835";
        case Cwe::Cwe120: return "CWE-120";
        case Cwe::Cwe672: return "CWE-672";
        case Cwe::Cwe362: return "CWE-362";
    }
    return "?";
}

inline std::optional<Cwe> cwe_from_name(const std::string& s) {
    for (Cwe c : all_cwes())
        if (s == cwe_name(c)) return c;
    return std::nullopt;
}

// Commit-message keywords per class (matched case-insensitively;
// abbreviations of up to three characters match whole words only).
inline const std::vector<std::string>& cwe_keywords(Cwe c) {
    static const std::map<Cwe, std::vector<std::string>> table = {
        {Cwe::Cwe404,
         {"memory leak", "information leak", "info leak", "leak info",
          "memory disclosure", "leak memory", "leak information"}},
        {Cwe::Cwe835,
         {"infinite loop", "endless loop", "long loop", "infinite recursion",
          "deep recursion"}},
        {Cwe::Cwe120, {"buffer overflow"}},
        {Cwe::Cwe672,
         {"double free", "double-free", "df", "use after free",
          "use-after-free", "uaf"}},
        {Cwe::Cwe362, {"race conditions"}},
    };
    return table.at(c);
}

enum class Role { Vulnerable, Patched, Mutated };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::Vulnerable: return "vulnerable";
        case Role::Patched: return "patched";
        case Role::Mutated: return "mutated";
    }
    return "?";
}

inline std::optional<Role> role_from_name(const std::string& s) {
    if (s == "vulnerable") return Role::Vulnerable;
    if (s == "patched") return Role::Patched;
    if (s == "mutated") return Role::Mutated;
    return std::nullopt;
}

enum class MutationOp { Rn = 0, Ai = 1, Del = 2, Add = 3, Ro = 4 };

inline const std::array<MutationOp, 5>& all_mutation_ops() {
    static const std::array<MutationOp, 5> xs = {MutationOp::Rn, MutationOp::Ai,
                                                 MutationOp::Del, MutationOp::Add,
                                                 MutationOp::Ro};
    return xs;
}

inline const char* mutation_op_name(MutationOp op) {
    switch (op) {
        case MutationOp::Rn: return "rn";
        case MutationOp::Ai: return "ai";
        case MutationOp::Del: return "del";
        case MutationOp::Add: return "add";
        case MutationOp::Ro: return "ro";
    }
    return "?";
}

inline std::optional<MutationOp> mutation_op_from_name(const std::string& s) {
    for (MutationOp op : all_mutation_ops())
        if (s == mutation_op_name(op)) return op;
    return std::nullopt;
}

// One labeled function with provenance. role vulnerable/mutated <=> label
// 1; role patched <=> label 0.
struct FunctionRecord {
    std::string id;
    std::string project;
    std::string sha;
    Cwe cwe = Cwe::Cwe404;
    Role role = Role::Vulnerable;
    int label = 1;
    std::string code;
    std::optional<std::string> parent_id;
    std::optional<MutationOp> mutation;
    std::optional<std::uint64_t> seed;
    std::map<std::string, std::string> rename; // rn provenance
};

// The unit a security commit yields: both function versions plus the
// changed-statement seeds on each side.
struct PatchTuple {
    FunctionRecord f_v;
    FunctionRecord f_p;
    std::set<int> s_del; // stmt ids in f_v
    std::set<int> s_add; // stmt ids in f_p
};

} // namespace vulndet
