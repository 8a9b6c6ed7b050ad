#pragma once

#include <compare>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>

namespace absflow
{
    /// Name of a task. Unique within one ExecutionGraph.
    ///
    /// Ordering between tasks of a graph is by declaration position, not by
    /// name (see ExecutionGraph); comparison operators here exist so ids can
    /// key ordinary containers.
    class TaskId
    {
    public:
        TaskId() = default;
        TaskId(std::string name) : name_(std::move(name)) {}
        TaskId(const char *name) : name_(name) {}
        TaskId(std::string_view name) : name_(name) {}

        const std::string &str() const noexcept { return name_; }
        bool empty() const noexcept { return name_.empty(); }

        auto operator<=>(const TaskId &) const = default;
        bool operator==(const TaskId &) const = default;

    private:
        std::string name_;
    };

    inline std::ostream &operator<<(std::ostream &os, const TaskId &id) { return os << id.str(); }

    /// A directed data channel. `ordinal` disambiguates parallel edges.
    struct ChannelId
    {
        TaskId from;
        TaskId to;
        std::uint32_t ordinal = 0;

        auto operator<=>(const ChannelId &) const = default;
        bool operator==(const ChannelId &) const = default;

        std::string str() const
        {
            std::string s = from.str() + "->" + to.str();
            if (ordinal != 0)
            {
                s += "#" + std::to_string(ordinal);
            }
            return s;
        }
    };

    inline std::ostream &operator<<(std::ostream &os, const ChannelId &id) { return os << id.str(); }

    enum class TaskKind : std::uint8_t
    {
        Source,
        Operator,
        Sink,
    };

    std::string_view to_string(TaskKind kind) noexcept;
    TaskKind parse_task_kind(std::string_view text);
} // namespace absflow
