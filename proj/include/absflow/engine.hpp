#pragma once

#include "absflow/channel.hpp"
#include "absflow/coordinator.hpp"
#include "absflow/graph.hpp"
#include "absflow/report.hpp"
#include "absflow/store.hpp"
#include "absflow/sync_baseline.hpp"
#include "absflow/task.hpp"
#include "absflow/udf.hpp"
#include "absflow/workload.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace absflow
{
    class Deadlock : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// An epoch that did not complete within its step bound.
    class WatchdogExpired : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Thrown out of run() when a task fails and recovery is off.
    class TaskFailure : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Kill `victim` instead of letting it take its `at_step`-th step
    /// (counted over the whole run, 1-based). The victim's state and queued
    /// inputs are lost; the snapshot store survives.
    struct FailureEvent
    {
        TaskId victim;
        std::uint64_t at_step = 0;
    };

    enum class RecoverMode : std::uint8_t
    {
        Auto,
        Off,
    };

    struct EngineConfig
    {
        Protocol protocol = Protocol::Abs;
        TriggerPolicy trigger = TriggerPolicy::never();
        std::uint64_t seed = 1;
        std::optional<std::size_t> spill_threshold;
        std::filesystem::path spill_dir;
        /// Upper bound on data steps of one failure-free pass; 0 derives it
        /// from the workload (records x tasks x loop turns).
        std::uint64_t record_budget = 0;
        /// Total step bound; 0 means 10 x record_budget per incarnation.
        std::uint64_t step_budget = 0;
        std::vector<FailureEvent> failures;
        RecoverMode recover = RecoverMode::Auto;
    };

    /// A schedulable action: deliver from input `slot` of `task`, where slot
    /// kNilInput is the task's Nil channel and kGenerate asks a source for
    /// its next record.
    struct Choice
    {
        std::uint32_t task = 0;
        std::size_t slot = 0;
        bool operator==(const Choice &) const = default;
    };

    inline constexpr std::size_t kGenerate = kNilInput - 1;

    enum class StepOutcome : std::uint8_t
    {
        Idle,
        Processed,
        SnapshotAction,
    };

    /// Observation hooks for exhaustive exploration and tracing.
    class EngineObserver
    {
    public:
        virtual ~EngineObserver() = default;
        virtual void on_deliver(std::size_t /*task*/, std::size_t /*slot*/, const Message & /*m*/) {}
        virtual void on_send(std::size_t /*channel*/, const Message & /*m*/) {}
        virtual void on_effect(std::size_t /*task*/, const Effect & /*e*/) {}
        virtual void on_complete(const GlobalSnapshot & /*s*/) {}
    };

    /// Single-worker deterministic runtime. All scheduling choices come from
    /// a seeded generator (or from the caller via step(Choice)), so a run is
    /// reproducible bit-exactly. The engine is a copyable value so explorers
    /// can fork it at choice points.
    class Engine
    {
    public:
        Engine(std::shared_ptr<const ExecutionGraph> graph, std::shared_ptr<const Workload> workload,
               EngineConfig config, SnapshotStore *store = nullptr,
               const UdfRegistry &registry = UdfRegistry::builtin());

        Engine(const Engine &other);
        Engine &operator=(const Engine &other);
        Engine(Engine &&) noexcept;
        Engine &operator=(Engine &&) noexcept;
        ~Engine();

        /// Runs to completion under the seeded scheduler.
        RunReport run();

        /// Enabled actions in canonical order (task, then slot).
        std::vector<Choice> choices() const;
        /// Performs one action, then lets the coordinator react.
        StepOutcome step(Choice choice);
        /// Seeded choice of one ready input of `task`.
        StepOutcome task_step(const TaskId &task);
        /// Coordinator reaction without a task step (trigger, sync progress).
        void poll_coordinator();
        /// Starts the next epoch now, regardless of the trigger.
        std::uint64_t start_epoch();

        bool finished() const;
        bool quiescent() const;

        /// Enqueues a message on a channel as a producer would.
        void channel_send(std::size_t channel, Message message);
        void channel_block(std::size_t channel);
        void channel_unblock(std::size_t channel);
        /// Enqueues `message` on every output channel of `task`.
        void broadcast(const TaskId &task, const Message &message);

        /// Kills a task and, depending on config, restarts the whole graph
        /// from the latest complete snapshot.
        void fail(const TaskId &victim);
        /// Full-graph restart from `snapshot` (or from initial states).
        void restore(const std::optional<GlobalSnapshot> &snapshot);

        /// Runs one synchronous snapshot to completion (Sync protocol only).
        GlobalSnapshot sync_snapshot();

        const ExecutionGraph &graph() const noexcept { return *graph_; }
        const std::vector<TaskRuntime> &tasks() const noexcept { return tasks_; }
        const TaskRuntime &task(const TaskId &id) const;
        TaskRuntime &task_mut(const TaskId &id);
        const std::vector<Channel> &channels() const noexcept { return channels_; }
        const Channel &channel(const ChannelId &id) const;
        std::size_t channel_index(const ChannelId &id) const;
        const Coordinator &coordinator() const noexcept { return coordinator_; }
        SyncPhase sync_phase() const noexcept { return sync_.phase(); }
        const EngineConfig &config() const noexcept { return config_; }
        std::uint64_t now() const noexcept { return steps_; }
        std::uint64_t records_emitted() const noexcept;
        std::uint64_t in_flight_records() const noexcept;
        std::uint64_t record_budget() const noexcept { return record_budget_; }
        RunReport report() const;

        void set_observer(EngineObserver *observer) noexcept { observer_ = observer; }
        /// Close every channel; later sends throw ChannelClosed.
        void shutdown();

    private:
        class Io;
        friend class Io;

        void handle_event(CoordinatorEvent event);
        void after_step();
        void check_watchdog() const;
        std::size_t pick(std::size_t n);
        bool ready(const TaskRuntime &t, std::size_t slot) const;
        bool task_ready(const TaskRuntime &t) const;
        StepOutcome apply(const Choice &c);

        std::shared_ptr<const ExecutionGraph> graph_;
        std::shared_ptr<const Workload> workload_;
        EngineConfig config_;
        SnapshotStore *store_ = nullptr;
        const UdfRegistry *registry_ = nullptr;
        TaskSettings settings_;

        std::vector<TaskRuntime> tasks_;
        std::vector<Channel> channels_;
        Coordinator coordinator_;
        SyncController sync_;
        std::deque<CoordinatorEvent> inbox_;

        std::uint64_t rng_state_ = 0;
        std::uint64_t steps_ = 0;
        std::uint64_t incarnation_start_ = 0;
        std::uint64_t record_budget_ = 0;
        std::vector<bool> failure_fired_;

        std::uint64_t blocking_time_ = 0;
        std::vector<std::uint64_t> blocked_since_;
        std::uint64_t halt_started_ = 0;
        std::uint64_t halt_time_ = 0;
        std::uint64_t halt_in_flight_ = 0;
        std::uint64_t sink_outputs_during_halt_ = 0;
        std::uint64_t failures_ = 0;
        std::uint64_t recoveries_ = 0;
        std::vector<std::uint64_t> restored_epochs_;
        std::uint64_t records_ingested_ = 0;
        bool failed_ = false;

        StepScratch scratch_;
        EngineObserver *observer_ = nullptr;
    };
} // namespace absflow
