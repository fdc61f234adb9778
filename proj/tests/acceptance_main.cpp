// Runs every acceptance criterion with the default configuration and prints
// one PASS/FAIL line per criterion. Exit status is nonzero if any fails.

#include "lipmbrl/acceptance.hpp"

#include <iostream>

int main() {
    const lipmbrl::AcceptanceConfig cfg;
    const auto report = lipmbrl::run_acceptance(
        cfg, [](const lipmbrl::CriterionResult& r) { std::cout << lipmbrl::format_result(r) << std::endl; });
    std::cout << (report.all_passed() ? "all criteria passed" : "some criteria failed") << '\n';
    return report.all_passed() ? 0 : 1;
}
