// Acceptance suite: one line per criterion, nonzero exit if a blocking
// criterion fails.

#include <cstdio>

#include "fracsig/acceptance.hpp"

int main() {
    using namespace fracsig::acceptance;
    Suite suite;
    bool ok = true;
    suite.run_all([&](const CriterionResult& r) {
        std::printf("%s\n", format_line(r).c_str());
        std::fflush(stdout);
        if (!r.passed && !r.advisory) ok = false;
    });
    std::printf("acceptance: %s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}
