#pragma once

#include "absflow/graph.hpp"
#include "absflow/record.hpp"
#include "absflow/snapshot.hpp"
#include "absflow/state.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace absflow
{
    class GraphMismatch : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    enum class DedupDecision : std::uint8_t
    {
        Keep,
        Discard,
    };

    /// Discards records at or below the cursor; keeping advances it.
    DedupDecision dedup_filter(DedupCursor &cursor, const Record &record);

    /// Throws GraphMismatch unless the snapshot covers exactly the graph's
    /// tasks and its logs name only back-edges of the graph.
    void check_restorable(const ExecutionGraph &graph, const GlobalSnapshot &snapshot);

    /// Per-channel replay queues: the logged back-edge records, in log order,
    /// indexed like graph.channels().
    std::vector<std::vector<Record>> replay_queues(const ExecutionGraph &graph, const GlobalSnapshot &snapshot);

    /// Task states to install on restart, in graph task order; initial states
    /// when `snapshot` is null. Source offsets come from the snapshot's
    /// source_offsets.
    std::vector<OperatorState> restored_states(const ExecutionGraph &graph, const GlobalSnapshot *snapshot);
} // namespace absflow
