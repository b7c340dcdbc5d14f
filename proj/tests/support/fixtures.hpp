#pragma once

// Small C functions shared across suites. The copy_payload pair is the
// buffer-overflow patch fixture: the guard and the copy call are replaced
// by a bounded variant.

namespace fixtures {

inline const char* kVulnCopyPayload = R"(static void copy_payload(struct pkt *x, char *out)
{
    int n = x->len;
    if (x->len >= 8)
        memcpy(out, x->data, n);
    return;
}
)";

inline const char* kPatchedCopyPayload = R"(static void copy_payload(struct pkt *x, char *out)
{
    int n = x->len;
    if (n >= 8 && n < 64)
        n = copy_bytes(out, x);
    return;
}
)";

inline const char* kLoopFunction = R"(int sum_table(int *tab, int count)
{
    int total = 0;
    int i;
    for (i = 0; i < count; i++) {
        total += tab[i];
    }
    while (total > 100) {
        total = total - 7;
    }
    return total;
}
)";

inline const char* kBranchFunction = R"(int pick(int c, int a, int b)
{
    int r = 0;
    if (c) {
        r = a;
    } else {
        r = b;
    }
    return r;
}
)";

} // namespace fixtures
