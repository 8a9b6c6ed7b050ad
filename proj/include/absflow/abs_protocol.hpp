#pragma once

#include "absflow/ids.hpp"
#include "absflow/record.hpp"
#include "absflow/snapshot.hpp"
#include "absflow/state.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace absflow
{
    /// Input slot of the synthetic Nil channel on which sources receive
    /// injected barriers.
    inline constexpr std::size_t kNilInput = std::numeric_limits<std::size_t>::max();

    class UnknownEpoch : public std::runtime_error
    {
    public:
        explicit UnknownEpoch(std::uint64_t epoch)
            : std::runtime_error("barrier for unknown epoch " + std::to_string(epoch)), epoch_(epoch) {}
        std::uint64_t epoch() const noexcept { return epoch_; }

    private:
        std::uint64_t epoch_;
    };

    class ProtocolError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Per-task snapshot bookkeeping. Input sets hold input slot indices
    /// (positions in the task's input list) or kNilInput.
    struct AbsTaskBook
    {
        std::set<std::size_t> blocked_inputs;
        std::set<std::size_t> marked;
        bool logging = false;
        std::optional<OperatorState> state_copy;
        std::vector<LoggedRecord> backup_log;
        std::set<std::size_t> loop_inputs;

        std::uint64_t completed_epoch = 0;
        std::optional<std::uint64_t> active_epoch;

        bool operator==(const AbsTaskBook &) const = default;
    };

    struct BlockInput
    {
        std::size_t input;
        bool operator==(const BlockInput &) const = default;
    };
    struct BroadcastBarrier
    {
        Barrier barrier;
        bool operator==(const BroadcastBarrier &) const = default;
    };
    struct EmitSnapshot
    {
        TaskSnapshot snapshot;
        bool operator==(const EmitSnapshot &) const = default;
    };
    struct UnblockAll
    {
        bool operator==(const UnblockAll &) const = default;
    };

    using Effect = std::variant<BlockInput, BroadcastBarrier, EmitSnapshot, UnblockAll>;

    /// What the protocol needs to know about the task it runs in.
    struct ProtocolContext
    {
        TaskId task;
        /// Channel ids of the task's inputs by slot; empty for sources.
        std::span<const ChannelId> inputs;
        const OperatorState &state;
    };

    /// Initial book for a task; `loop_inputs` are the slots of its incoming
    /// back-edges (empty in acyclic mode).
    AbsTaskBook make_book(std::set<std::size_t> loop_inputs = {}, std::uint64_t completed_epoch = 0);

    /// Barrier alignment for acyclic graphs: block the delivering input; once
    /// every input delivered the barrier, broadcast it, snapshot the state and
    /// unblock everything.
    std::vector<Effect> on_barrier_acyclic(AbsTaskBook &book, std::size_t input, const Barrier &barrier,
                                           const ProtocolContext &ctx);

    /// Cyclic variant: back-edge inputs are marked but never blocked. When all
    /// regular inputs are marked the task copies its state, starts logging
    /// back-edge records, broadcasts and unblocks. When back-edge barriers
    /// have also arrived it emits the copy with the log.
    std::vector<Effect> on_barrier_cyclic(AbsTaskBook &book, std::size_t input, const Barrier &barrier,
                                          const ProtocolContext &ctx);

    /// Data-path hook; appends to the backup log while logging on a loop
    /// input. Returns true when the record was logged.
    bool on_data(AbsTaskBook &book, std::size_t input, const Record &record, const ProtocolContext &ctx);
} // namespace absflow
