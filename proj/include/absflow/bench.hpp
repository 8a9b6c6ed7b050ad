#pragma once

#include "absflow/coordinator.hpp"
#include "absflow/task.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace absflow
{
    /// Runs of one benchmark disagreed on the sink output.
    class BenchmarkMismatch : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// One benchmark configuration, executed in multi-worker mode.
    struct BenchmarkSpec
    {
        std::string topology = "layered:4:digest";
        std::uint64_t record_count = 1'000'000;
        std::uint32_t keys = 1024;
        TriggerPolicy snapshot_interval = TriggerPolicy::records(1'000'000 / 256);
        Protocol protocol = Protocol::Abs;
        std::uint32_t workers = 4;
        std::uint64_t seed = 1;
        std::uint32_t repetitions = 7;

        std::uint64_t max_in_flight = 512;
        /// Where snapshots go; empty uses a fresh temporary directory.
        std::filesystem::path store_dir;
        bool fsync = true;

        void validate() const;
    };

    struct BenchRow
    {
        std::string topology;
        std::string protocol;
        std::string interval;
        std::uint32_t workers = 0;
        std::uint64_t records = 0;
        std::uint32_t repetitions = 0;
        double median_runtime_ms = 0.0;
        double overhead_pct = 0.0;
        double median_epochs = 0.0;
        std::uint64_t snapshot_bytes = 0;
        double halt_ms = 0.0;
        std::vector<double> runtimes_ms;
        std::uint64_t sink_digest = 0;
    };

    std::string bench_csv_header();
    std::string to_csv(const BenchRow &row);

    /// Runs `spec` and a no-snapshot baseline of the same workload, with
    /// repetitions interleaved, and returns the baseline row followed by the
    /// spec's row. Overheads are relative to the baseline median.
    std::vector<BenchRow> run_benchmark(const BenchmarkSpec &spec, std::ostream *log = nullptr);

    /// Interval sweep: the baseline plus every (protocol, interval) pair of
    /// `base`, all interleaved per repetition. Rows are ordered baseline
    /// first, then by protocol and interval as given.
    std::vector<BenchRow> run_sweep(const BenchmarkSpec &base, const std::vector<Protocol> &protocols,
                                    const std::vector<TriggerPolicy> &intervals, std::ostream *log = nullptr);

    /// Default sweep intervals: record_count / 1024, / 256, / 64, / 16.
    std::vector<TriggerPolicy> default_intervals(std::uint64_t record_count);

    /// Weak scaling: for each worker count W, the layered topology at
    /// parallelism W with `per_worker` x W records under `base.protocol`.
    /// Record intervals scale with the input so every configuration takes
    /// the same number of snapshots. Overhead is relative to the first
    /// worker count.
    std::vector<BenchRow> run_scaling(const BenchmarkSpec &base, const std::vector<std::uint32_t> &workers,
                                      std::uint64_t per_worker, std::ostream *log = nullptr);
} // namespace absflow
