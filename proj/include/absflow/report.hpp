#pragma once

#include "absflow/coordinator.hpp"
#include "absflow/ids.hpp"
#include "absflow/state.hpp"
#include "absflow/udf.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace absflow
{
    /// Metrics of one execution. Durations are scheduler steps in
    /// deterministic mode and nanoseconds in multi-worker mode.
    struct RunReport
    {
        std::string protocol;
        std::string mode;
        std::string trigger;
        std::uint32_t workers = 1;
        std::uint64_t seed = 0;

        std::uint64_t records_ingested = 0;
        std::uint64_t steps = 0;
        std::uint64_t wall_ns = 0;
        double throughput = 0.0;

        std::vector<EpochMetrics> epochs;
        std::uint64_t blocking_time = 0;
        std::uint64_t halt_time = 0;
        /// Data records in flight when sync halts began, summed over epochs:
        /// what an upstream-backup scheme would have to persist.
        std::uint64_t halt_in_flight = 0;
        std::uint64_t sink_outputs_during_halt = 0;

        std::uint64_t failures = 0;
        std::uint64_t recoveries = 0;
        /// Epoch each recovery restarted from (0 = initial states).
        std::vector<std::uint64_t> restored_epochs;
        bool failed = false;

        std::map<TaskId, OperatorState> sink_states;
        std::uint64_t sink_records = 0;
        std::uint64_t sink_digest = 0;

        /// Fills sink_records and sink_digest from sink_states.
        void finalize_sinks();

        /// Merged multiset over all sinks.
        SinkMultiset sink_outputs() const;
        std::uint64_t snapshot_bytes() const noexcept;

        /// One `name value` line per metric.
        std::string to_text() const;
        static std::string csv_header();
        std::string to_csv_row() const;

        /// Hash over every field that is reproducible in deterministic mode
        /// (wall-clock fields excluded).
        std::uint64_t digest() const;
    };
} // namespace absflow
