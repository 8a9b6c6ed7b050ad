#pragma once

#include "absflow/abs_protocol.hpp"
#include "absflow/graph.hpp"
#include "absflow/record.hpp"
#include "absflow/udf.hpp"
#include "absflow/workload.hpp"

#include <cstdint>
#include <memory>
#include <string_view>
#include <variant>
#include <vector>

namespace absflow
{
    enum class Protocol : std::uint8_t
    {
        None,
        Abs,
        Sync,
    };

    std::string_view to_string(Protocol p) noexcept;
    Protocol parse_protocol(std::string_view text);

    struct HaltAck
    {
        std::size_t task;
    };
    struct ResumeAck
    {
        std::size_t task;
    };

    /// Task-to-coordinator traffic.
    using CoordinatorEvent = std::variant<TaskSnapshot, HaltAck, ResumeAck>;

    /// Channel operations a task performs; implemented by each scheduler.
    class TaskIo
    {
    public:
        virtual ~TaskIo() = default;
        virtual void send(std::size_t channel, Message message) = 0;
        virtual void set_blocked(std::size_t channel, bool blocked) = 0;
        virtual void notify(CoordinatorEvent event) = 0;
        /// Observation hook, called before each protocol effect is applied.
        virtual void on_effect(std::size_t /*task*/, const Effect & /*effect*/) {}
    };

    /// Everything one task owns at run time.
    struct TaskRuntime
    {
        std::size_t index = 0;
        TaskId id;
        TaskKind kind = TaskKind::Operator;

        std::vector<std::size_t> in_channels;
        std::vector<ChannelId> in_ids;
        std::vector<std::size_t> out_channels;
        std::vector<OutputPort> ports;
        std::vector<std::uint64_t> salts;
        std::uint64_t routing = 0;
        std::size_t control_channel = 0;

        std::shared_ptr<const UdfFn> udf;
        const SourceWorkload *workload = nullptr;
        std::uint64_t source_total = 0;

        OperatorState state;
        AbsTaskBook book;
        bool halted = false;

        /// Messages handled plus records generated, over the whole run.
        std::uint64_t steps = 0;
        /// UDF applications.
        std::uint64_t processed = 0;
        std::uint64_t discarded = 0;

        bool is_source() const noexcept { return kind == TaskKind::Source; }
        bool exhausted() const noexcept { return !is_source() || state.offset >= source_total; }
        bool can_generate() const noexcept { return is_source() && !halted && state.offset < source_total; }
    };

    enum class StepKind : std::uint8_t
    {
        Idle,
        Data,
        Discarded,
        Generated,
        Marker,
        Control,
    };

    /// Reusable per-driver buffers.
    struct StepScratch
    {
        std::vector<Emit> emits;
        std::vector<std::pair<std::uint32_t, Record>> stamped;
    };

    struct TaskSettings
    {
        Protocol protocol = Protocol::Abs;
        bool cyclic = false;
    };

    /// Builds the runtime view of every task of `graph`. Channel indices
    /// follow graph.channels(); the Nil channel of task i is
    /// channels().size() + i.
    std::vector<TaskRuntime> build_tasks(const ExecutionGraph &graph, const Workload &workload,
                                         const UdfRegistry &registry);

    /// Resets protocol bookkeeping to `completed_epoch` for the given mode.
    void reset_book(TaskRuntime &task, const ExecutionGraph &graph, bool cyclic, std::uint64_t completed_epoch);

    /// Handles one message taken from input slot `slot` (kNilInput for the
    /// task's Nil/control channel).
    StepKind handle_message(TaskRuntime &task, std::size_t slot, Message message, const TaskSettings &settings,
                            TaskIo &io, StepScratch &scratch);

    /// Lets a source emit its next record.
    StepKind generate(TaskRuntime &task, TaskIo &io, StepScratch &scratch);
} // namespace absflow
