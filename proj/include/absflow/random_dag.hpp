#pragma once

#include "absflow/coordinator.hpp"
#include "absflow/graph.hpp"
#include "absflow/workload.hpp"

#include <cstdint>

namespace absflow
{
    struct RandomCase
    {
        std::uint64_t seed = 0;
        ExecutionGraph graph;
        Workload workload;
        std::uint64_t records = 0;
        TriggerPolicy trigger;
    };

    /// Seeded random layered DAG with 3..max_tasks tasks (1-2 sources, 1-2
    /// sinks, operators drawn from identity/count/sum/filter_key, occasional
    /// parallel edges), 1..max_records generated records and a record trigger
    /// aiming at 1..max_epochs snapshots.
    RandomCase random_dag_case(std::uint64_t seed, std::size_t max_tasks = 8, std::uint64_t max_records = 500,
                               std::uint32_t max_epochs = 5);
} // namespace absflow
