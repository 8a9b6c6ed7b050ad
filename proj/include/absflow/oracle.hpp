#pragma once

#include "absflow/graph.hpp"
#include "absflow/state.hpp"
#include "absflow/udf.hpp"
#include "absflow/workload.hpp"

#include <cstdint>
#include <map>

namespace absflow
{
    /// Per source: how many records (its offset) precede the barrier.
    using SourceCut = std::map<TaskId, std::uint64_t>;

    struct OracleResult
    {
        std::map<TaskId, OperatorState> states;
        SinkMultiset sink_outputs;
        std::uint64_t sink_records = 0;
        std::uint64_t sink_digest = 0;
    };

    /// Sequential interpreter: each source emits its records up to the cut,
    /// then tasks are visited in topological order, each draining its inputs
    /// in channel order, until every queue is empty. Shares nothing with the
    /// engine except the UDFs and provenance stamping.
    std::map<TaskId, OperatorState> prefix_replay_oracle(const ExecutionGraph &graph, const Workload &workload,
                                                         const SourceCut &cut,
                                                         const UdfRegistry &registry = UdfRegistry::builtin());

    /// Full-input run of the interpreter.
    OracleResult run_oracle(const ExecutionGraph &graph, const Workload &workload,
                            const UdfRegistry &registry = UdfRegistry::builtin());

    /// Cut that covers every source's whole input.
    SourceCut full_cut(const ExecutionGraph &graph, const Workload &workload);
} // namespace absflow
