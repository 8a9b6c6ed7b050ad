#pragma once

#include "absflow/bench.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace absflow
{
    struct CriterionResult
    {
        std::string name;
        bool pass = false;
        std::string detail;
        double seconds = 0.0;
    };

    struct SuiteOptions
    {
        std::uint64_t seed = 1;
        /// Shrinks every check to a few seconds (smoke runs).
        bool quick = false;
        std::uint32_t feasibility_runs = 1000;
        std::uint32_t layered_kill_points = 200;
        BenchmarkSpec overhead;
        /// Scratch space for directory stores; empty uses the temp dir.
        std::filesystem::path scratch;
        /// Progress and failure details.
        std::ostream *log = nullptr;
    };

    CriterionResult check_feasibility(const SuiteOptions &options);
    CriterionResult check_minimality(const SuiteOptions &options);
    CriterionResult check_termination(const SuiteOptions &options);
    CriterionResult check_cyclic(const SuiteOptions &options);
    CriterionResult check_exactly_once(const SuiteOptions &options);
    CriterionResult check_overhead(const SuiteOptions &options);
    CriterionResult check_durability(const SuiteOptions &options);
    CriterionResult check_determinism(const SuiteOptions &options);

    std::vector<std::string> criterion_names();

    /// Runs the named criteria (all when `only` is empty) in order.
    std::vector<CriterionResult> run_suite(const SuiteOptions &options, const std::vector<std::string> &only = {});

    /// `PASS name (seconds) detail`.
    std::string format_result(const CriterionResult &result);
} // namespace absflow
