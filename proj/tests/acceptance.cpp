#include "absflow/suite.hpp"

#include <cstdlib>
#include <iostream>
#include <string>

/// Runs every acceptance criterion and prints one PASS/FAIL line each.
/// ABSFLOW_VERBOSE=1 prints progress to stderr.
int main(int argc, char **argv)
{
    absflow::SuiteOptions options;
    if (const char *v = std::getenv("ABSFLOW_VERBOSE"); v != nullptr && std::string(v) == "1")
    {
        options.log = &std::cerr;
    }
    std::vector<std::string> only;
    for (int i = 1; i < argc; ++i)
    {
        only.emplace_back(argv[i]);
    }
    bool ok = true;
    for (const auto &r : absflow::run_suite(options, only))
    {
        std::cout << absflow::format_result(r) << std::endl;
        ok = ok && r.pass;
    }
    return ok ? EXIT_SUCCESS : EXIT_FAILURE;
}
