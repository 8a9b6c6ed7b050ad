#include "absflow/sync_baseline.hpp"

#include <string>

namespace absflow
{
    std::string_view to_string(SyncPhase phase) noexcept
    {
        switch (phase)
        {
        case SyncPhase::Running:
            return "running";
        case SyncPhase::Halting:
            return "halting";
        case SyncPhase::Draining:
            return "draining";
        case SyncPhase::Snapshotting:
            return "snapshotting";
        case SyncPhase::Resuming:
            return "resuming";
        }
        return "?";
    }

    namespace
    {
        void expect(SyncPhase have, SyncPhase want, const char *what)
        {
            if (have != want)
            {
                throw std::logic_error(std::string(what) + " in phase " + std::string(to_string(have)));
            }
        }
    } // namespace

    SyncController::SyncController(std::vector<std::size_t> sources, std::vector<std::size_t> tasks)
        : sources_(std::move(sources)), tasks_(std::move(tasks))
    {
    }

    void SyncController::begin(std::uint64_t epoch, ControlFabric &fabric)
    {
        if (phase_ != SyncPhase::Running)
        {
            throw EpochOverlap("synchronous snapshot " + std::to_string(epoch) + " started while " +
                               std::string(to_string(phase_)));
        }
        epoch_ = epoch;
        acked_.clear();
        phase_ = sources_.empty() ? SyncPhase::Draining : SyncPhase::Halting;
        for (auto s : sources_)
        {
            fabric.send_control(s, Control{ControlKind::Halt, epoch});
        }
    }

    void SyncController::on_halt_ack(std::size_t source)
    {
        expect(phase_, SyncPhase::Halting, "halt acknowledgement");
        acked_.insert(source);
        if (acked_.size() == sources_.size())
        {
            phase_ = SyncPhase::Draining;
        }
    }

    bool SyncController::maybe_request(bool drained, ControlFabric &fabric)
    {
        if (phase_ != SyncPhase::Draining || !drained)
        {
            return false;
        }
        phase_ = SyncPhase::Snapshotting;
        for (auto t : tasks_)
        {
            fabric.send_control(t, Control{ControlKind::SnapshotRequest, epoch_});
        }
        return true;
    }

    void SyncController::on_snapshot_complete(ControlFabric &fabric)
    {
        expect(phase_, SyncPhase::Snapshotting, "snapshot completion");
        acked_.clear();
        phase_ = sources_.empty() ? SyncPhase::Running : SyncPhase::Resuming;
        for (auto s : sources_)
        {
            fabric.send_control(s, Control{ControlKind::Resume, epoch_});
        }
    }

    void SyncController::on_resume_ack(std::size_t source)
    {
        expect(phase_, SyncPhase::Resuming, "resume acknowledgement");
        acked_.insert(source);
        if (acked_.size() == sources_.size())
        {
            phase_ = SyncPhase::Running;
        }
    }

    void SyncController::reset() noexcept
    {
        acked_.clear();
        phase_ = SyncPhase::Running;
    }
} // namespace absflow
