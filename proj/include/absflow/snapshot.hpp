#pragma once

#include "absflow/ids.hpp"
#include "absflow/record.hpp"
#include "absflow/state.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace absflow
{
    /// A record received on a back-edge while its consumer was logging.
    struct LoggedRecord
    {
        ChannelId channel;
        Record record;
        bool operator==(const LoggedRecord &) const = default;
    };

    /// One task's contribution to an epoch.
    struct TaskSnapshot
    {
        TaskId task;
        std::uint64_t epoch = 0;
        OperatorState state;
        std::vector<LoggedRecord> backup_log;
        bool operator==(const TaskSnapshot &) const = default;
    };

    /// Epoch-stamped operator states plus per-back-edge record logs. For
    /// acyclic graphs `back_edge_logs` is always empty.
    struct GlobalSnapshot
    {
        std::uint64_t epoch = 0;
        std::map<TaskId, OperatorState> task_states;
        std::map<ChannelId, std::vector<Record>> back_edge_logs;
        std::map<TaskId, std::uint64_t> source_offsets;
        std::uint64_t created_at = 0;
        std::uint64_t size_bytes = 0;

        bool operator==(const GlobalSnapshot &) const = default;

        std::uint64_t channel_records() const noexcept;
    };
} // namespace absflow
