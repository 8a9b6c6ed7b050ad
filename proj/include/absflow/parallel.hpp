#pragma once

#include "absflow/coordinator.hpp"
#include "absflow/graph.hpp"
#include "absflow/report.hpp"
#include "absflow/store.hpp"
#include "absflow/task.hpp"
#include "absflow/udf.hpp"
#include "absflow/workload.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>

namespace absflow
{
    struct ParallelConfig
    {
        Protocol protocol = Protocol::Abs;
        TriggerPolicy trigger = TriggerPolicy::never();
        std::uint32_t workers = 1;
        /// Messages a task handles per scheduling turn.
        std::size_t batch = 64;
        /// Sources pause generation while more data records than this are
        /// queued. Barriers and control messages are never held back.
        std::uint64_t max_in_flight = 1 << 16;
        std::optional<std::size_t> spill_threshold;
        std::filesystem::path spill_dir;
        /// Coordinator poll period.
        std::chrono::microseconds poll{20};
        /// An epoch not complete after this long raises WatchdogExpired.
        std::chrono::milliseconds epoch_timeout{60000};
        std::uint64_t seed = 0;
    };

    /// Multi-worker runtime: tasks are assigned round-robin to worker
    /// threads; each task's state is touched only by its worker. Channels are
    /// mutex-guarded queues. The calling thread acts as coordinator and
    /// persists completed snapshots while the workers keep running.
    /// Durations in the report are nanoseconds.
    class ParallelRunner
    {
    public:
        ParallelRunner(std::shared_ptr<const ExecutionGraph> graph, std::shared_ptr<const Workload> workload,
                       ParallelConfig config, SnapshotStore *store = nullptr,
                       const UdfRegistry &registry = UdfRegistry::builtin());
        ~ParallelRunner();

        ParallelRunner(const ParallelRunner &) = delete;
        ParallelRunner &operator=(const ParallelRunner &) = delete;

        RunReport run();

    private:
        struct Impl;
        std::unique_ptr<Impl> impl_;
    };
} // namespace absflow
