#pragma once

#include "absflow/graph.hpp"
#include "absflow/record.hpp"
#include "absflow/snapshot.hpp"
#include "absflow/store.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace absflow
{
    class EpochOverlap : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class DuplicateContribution : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// When the coordinator starts a new snapshot epoch.
    struct TriggerPolicy
    {
        enum class Kind : std::uint8_t
        {
            Never,
            Records,
            Millis,
        };

        Kind kind = Kind::Never;
        std::uint64_t every = 0;

        static TriggerPolicy never() { return {}; }
        static TriggerPolicy records(std::uint64_t n) { return {Kind::Records, n}; }
        static TriggerPolicy millis(std::uint64_t ms) { return {Kind::Millis, ms}; }

        /// Parses `none`, `500`, `500r`, `500records`, `20ms`.
        static TriggerPolicy parse(std::string_view text);
        std::string str() const;
    };

    /// Per-epoch metadata reported by a run.
    struct EpochMetrics
    {
        std::uint64_t epoch = 0;
        std::uint64_t injected_at = 0;
        std::uint64_t completed_at = 0;
        std::uint64_t size_bytes = 0;
        std::uint64_t channel_records = 0;
        /// Data records queued in channels when the epoch was started.
        std::uint64_t in_flight_at_barrier = 0;
        bool operator==(const EpochMetrics &) const = default;
    };

    /// Receives control-plane messages addressed to a task's Nil channel.
    class ControlFabric
    {
    public:
        virtual ~ControlFabric() = default;
        virtual void send_control(std::size_t task, Message message) = 0;
    };

    struct SnapshotProgress
    {
        std::optional<GlobalSnapshot> complete;
        bool is_complete() const noexcept { return complete.has_value(); }
    };

    /// Injects barriers, assembles TaskSnapshots into GlobalSnapshots and
    /// persists them. At most one epoch is in flight.
    class Coordinator
    {
    public:
        Coordinator() = default;
        Coordinator(std::shared_ptr<const ExecutionGraph> graph, TriggerPolicy trigger, SnapshotStore *store);

        /// Starts `epoch` and enqueues Barrier(epoch) on every source's Nil
        /// channel. Requires epoch == last_injected() + 1 and no epoch in
        /// flight, otherwise throws EpochOverlap.
        void inject_barriers(std::uint64_t epoch, ControlFabric &fabric, std::uint64_t now,
                             std::uint64_t in_flight_records);

        /// Starts an epoch without sending anything (synchronous baseline).
        void begin_epoch(std::uint64_t epoch, std::uint64_t now, std::uint64_t in_flight_records);

        /// Records one contribution. On the last one, assembles, persists and
        /// returns the complete snapshot.
        SnapshotProgress collect(TaskSnapshot contribution, std::uint64_t now);

        std::uint64_t last_injected() const noexcept { return last_injected_; }
        std::uint64_t next_epoch() const noexcept { return last_injected_ + 1; }
        std::optional<std::uint64_t> in_flight() const noexcept { return in_flight_; }
        std::uint64_t latest_complete() const noexcept { return latest_complete_; }
        const std::optional<GlobalSnapshot> &latest_snapshot() const noexcept { return latest_; }
        const std::vector<EpochMetrics> &metrics() const noexcept { return metrics_; }
        const TriggerPolicy &trigger() const noexcept { return trigger_; }

        /// True when the trigger fired and no epoch is in flight.
        bool due(std::uint64_t records_emitted, std::uint64_t now_ms) const noexcept;
        /// Re-arms the trigger relative to the current position.
        void arm(std::uint64_t records_emitted, std::uint64_t now_ms) noexcept;
        /// True once the trigger fired, whether or not an epoch is in flight.
        bool pending(std::uint64_t records_emitted, std::uint64_t now_ms) const noexcept;

        /// Drops the in-flight epoch and continues from `snapshot` (or from
        /// scratch when absent) after a full-graph restart.
        void reset(const std::optional<GlobalSnapshot> &snapshot, std::uint64_t records_emitted,
                   std::uint64_t now_ms);

    private:
        std::shared_ptr<const ExecutionGraph> graph_;
        TriggerPolicy trigger_;
        SnapshotStore *store_ = nullptr;

        std::uint64_t last_injected_ = 0;
        std::uint64_t latest_complete_ = 0;
        std::optional<std::uint64_t> in_flight_;
        std::map<TaskId, TaskSnapshot> contributions_;
        std::optional<GlobalSnapshot> latest_;
        std::vector<EpochMetrics> metrics_;

        std::uint64_t next_record_threshold_ = 0;
        std::uint64_t next_time_threshold_ = 0;
    };
} // namespace absflow
