#include "absflow/coordinator.hpp"

#include "absflow/abs_protocol.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace absflow
{
    TriggerPolicy TriggerPolicy::parse(std::string_view text)
    {
        if (text.empty() || text == "none" || text == "never")
        {
            return never();
        }
        std::size_t digits = 0;
        while (digits < text.size() && std::isdigit(static_cast<unsigned char>(text[digits])))
        {
            ++digits;
        }
        if (digits == 0)
        {
            throw std::invalid_argument("bad snapshot interval: " + std::string(text));
        }
        auto n = std::stoull(std::string(text.substr(0, digits)));
        auto unit = text.substr(digits);
        if (n == 0)
        {
            throw std::invalid_argument("snapshot interval must be positive: " + std::string(text));
        }
        if (unit.empty() || unit == "r" || unit == "records")
        {
            return records(n);
        }
        if (unit == "ms")
        {
            return millis(n);
        }
        throw std::invalid_argument("bad snapshot interval unit: " + std::string(text));
    }

    std::string TriggerPolicy::str() const
    {
        switch (kind)
        {
        case Kind::Never:
            return "none";
        case Kind::Records:
            return std::to_string(every) + "r";
        case Kind::Millis:
            return std::to_string(every) + "ms";
        }
        return "?";
    }

    Coordinator::Coordinator(std::shared_ptr<const ExecutionGraph> graph, TriggerPolicy trigger, SnapshotStore *store)
        : graph_(std::move(graph)), trigger_(trigger), store_(store)
    {
        arm(0, 0);
    }

    void Coordinator::begin_epoch(std::uint64_t epoch, std::uint64_t now, std::uint64_t in_flight_records)
    {
        if (in_flight_)
        {
            throw EpochOverlap("epoch " + std::to_string(epoch) + " requested while epoch " +
                               std::to_string(*in_flight_) + " is incomplete");
        }
        if (epoch != last_injected_ + 1)
        {
            throw EpochOverlap("epoch " + std::to_string(epoch) + " does not follow " + std::to_string(last_injected_));
        }
        last_injected_ = epoch;
        in_flight_ = epoch;
        contributions_.clear();
        metrics_.push_back(EpochMetrics{epoch, now, 0, 0, 0, in_flight_records});
    }

    void Coordinator::inject_barriers(std::uint64_t epoch, ControlFabric &fabric, std::uint64_t now,
                                      std::uint64_t in_flight_records)
    {
        begin_epoch(epoch, now, in_flight_records);
        for (auto s : graph_->sources())
        {
            fabric.send_control(s, Barrier{epoch});
        }
    }

    SnapshotProgress Coordinator::collect(TaskSnapshot contribution, std::uint64_t now)
    {
        if (!in_flight_ || contribution.epoch != *in_flight_)
        {
            throw UnknownEpoch(contribution.epoch);
        }
        if (!graph_->find_task(contribution.task))
        {
            throw std::invalid_argument("snapshot contribution from unknown task " + contribution.task.str());
        }
        if (contributions_.contains(contribution.task))
        {
            throw DuplicateContribution("task " + contribution.task.str() + " contributed twice to epoch " +
                                        std::to_string(contribution.epoch));
        }
        auto task = contribution.task;
        contributions_.emplace(std::move(task), std::move(contribution));
        if (contributions_.size() < graph_->tasks().size())
        {
            return {};
        }

        GlobalSnapshot s;
        s.epoch = *in_flight_;
        s.created_at = now;
        for (const auto &c : graph_->back_edges())
        {
            s.back_edge_logs[c];
        }
        for (auto &[id, c] : contributions_)
        {
            for (auto &logged : c.backup_log)
            {
                if (!graph_->back_edges().contains(logged.channel))
                {
                    throw std::logic_error("task " + id.str() + " logged records of non-back-edge " +
                                           logged.channel.str());
                }
                s.back_edge_logs[logged.channel].push_back(std::move(logged.record));
            }
            s.task_states.emplace(id, std::move(c.state));
        }
        for (auto src : graph_->sources())
        {
            const auto &id = graph_->tasks()[src].id;
            s.source_offsets[id] = s.task_states.at(id).offset;
        }
        s.size_bytes = payload_bytes(s);
        contributions_.clear();

        if (store_ != nullptr)
        {
            store_->persist(s);
        }
        auto &m = metrics_.back();
        m.completed_at = now;
        m.size_bytes = s.size_bytes;
        m.channel_records = s.channel_records();
        latest_complete_ = s.epoch;
        in_flight_.reset();
        latest_ = s;
        return SnapshotProgress{std::move(s)};
    }

    bool Coordinator::pending(std::uint64_t records_emitted, std::uint64_t now_ms) const noexcept
    {
        switch (trigger_.kind)
        {
        case TriggerPolicy::Kind::Never:
            return false;
        case TriggerPolicy::Kind::Records:
            return records_emitted >= next_record_threshold_;
        case TriggerPolicy::Kind::Millis:
            return now_ms >= next_time_threshold_;
        }
        return false;
    }

    bool Coordinator::due(std::uint64_t records_emitted, std::uint64_t now_ms) const noexcept
    {
        return !in_flight_ && pending(records_emitted, now_ms);
    }

    void Coordinator::arm(std::uint64_t records_emitted, std::uint64_t now_ms) noexcept
    {
        next_record_threshold_ = records_emitted + trigger_.every;
        next_time_threshold_ = now_ms + trigger_.every;
    }

    void Coordinator::reset(const std::optional<GlobalSnapshot> &snapshot, std::uint64_t records_emitted,
                            std::uint64_t now_ms)
    {
        in_flight_.reset();
        contributions_.clear();
        latest_ = snapshot;
        latest_complete_ = snapshot ? snapshot->epoch : 0;
        last_injected_ = latest_complete_;
        std::erase_if(metrics_, [&](const EpochMetrics &m) { return m.epoch > latest_complete_; });
        arm(records_emitted, now_ms);
    }
} // namespace absflow
