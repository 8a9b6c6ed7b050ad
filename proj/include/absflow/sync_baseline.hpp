#pragma once

#include "absflow/coordinator.hpp"

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace absflow
{
    class DrainTimeout : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    enum class SyncPhase : std::uint8_t
    {
        Running,
        Halting,
        Draining,
        Snapshotting,
        Resuming,
    };

    std::string_view to_string(SyncPhase phase) noexcept;

    /// Halt-drain-snapshot-resume state machine of the synchronous baseline.
    /// Sources are halted with Control(Halt); once they acknowledged and all
    /// channels drained, every task receives Control(SnapshotRequest); after
    /// the global snapshot is persisted, sources get Control(Resume).
    class SyncController
    {
    public:
        SyncController() = default;
        SyncController(std::vector<std::size_t> sources, std::vector<std::size_t> tasks);

        SyncPhase phase() const noexcept { return phase_; }
        std::uint64_t epoch() const noexcept { return epoch_; }

        void begin(std::uint64_t epoch, ControlFabric &fabric);
        void on_halt_ack(std::size_t source);
        /// Draining -> Snapshotting once `drained` holds.
        bool maybe_request(bool drained, ControlFabric &fabric);
        void on_snapshot_complete(ControlFabric &fabric);
        void on_resume_ack(std::size_t source);
        /// Forces Running (full-graph restart).
        void reset() noexcept;

    private:
        std::vector<std::size_t> sources_;
        std::vector<std::size_t> tasks_;
        std::set<std::size_t> acked_;
        SyncPhase phase_ = SyncPhase::Running;
        std::uint64_t epoch_ = 0;
    };
} // namespace absflow
