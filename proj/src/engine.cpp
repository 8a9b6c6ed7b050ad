#include "absflow/engine.hpp"

#include "absflow/recovery.hpp"

#include <algorithm>
#include <chrono>

namespace absflow
{
    class Engine::Io final : public TaskIo, public ControlFabric
    {
    public:
        explicit Io(Engine &e) : e_(e) {}

        void send(std::size_t channel, Message message) override { e_.channel_send(channel, std::move(message)); }

        void set_blocked(std::size_t channel, bool blocked) override
        {
            if (blocked)
            {
                e_.channel_block(channel);
            }
            else
            {
                e_.channel_unblock(channel);
            }
        }

        void notify(CoordinatorEvent event) override { e_.inbox_.push_back(std::move(event)); }

        void on_effect(std::size_t task, const Effect &effect) override
        {
            if (e_.observer_ != nullptr)
            {
                e_.observer_->on_effect(task, effect);
            }
        }

        void send_control(std::size_t task, Message message) override
        {
            e_.channel_send(e_.tasks_[task].control_channel, std::move(message));
        }

    private:
        Engine &e_;
    };

    namespace
    {
        std::uint64_t derive_budget(const ExecutionGraph &g, const std::vector<TaskRuntime> &tasks)
        {
            std::uint64_t records = 0;
            std::int64_t turns = 1;
            for (const auto &t : tasks)
            {
                if (!t.is_source())
                {
                    continue;
                }
                records += t.source_total;
                if (g.cyclic())
                {
                    if (t.workload->is_generated())
                    {
                        turns = std::max(turns, t.workload->generator().value);
                    }
                    else
                    {
                        for (const auto &item : t.workload->items())
                        {
                            turns = std::max(turns, item.value);
                        }
                    }
                }
            }
            auto loops = g.cyclic() ? static_cast<std::uint64_t>(turns) + 1 : 1;
            return std::max<std::uint64_t>(1, records * g.tasks().size() * loops);
        }
    } // namespace

    Engine::Engine(std::shared_ptr<const ExecutionGraph> graph, std::shared_ptr<const Workload> workload,
                   EngineConfig config, SnapshotStore *store, const UdfRegistry &registry)
        : graph_(std::move(graph)), workload_(std::move(workload)), config_(std::move(config)), store_(store),
          registry_(&registry)
    {
        if (config_.protocol == Protocol::Sync && graph_->cyclic())
        {
            throw GraphError("the synchronous baseline does not support cyclic graphs");
        }
        settings_ = TaskSettings{config_.protocol, graph_->cyclic()};
        tasks_ = build_tasks(*graph_, *workload_, registry);
        for (const auto &c : graph_->channels())
        {
            channels_.emplace_back(c, config_.spill_threshold, config_.spill_dir);
        }
        std::vector<std::size_t> all;
        for (const auto &t : tasks_)
        {
            channels_.emplace_back(ChannelId{TaskId("nil"), t.id, 0});
            all.push_back(t.index);
        }
        blocked_since_.assign(channels_.size(), 0);
        coordinator_ = Coordinator(graph_, config_.protocol == Protocol::None ? TriggerPolicy::never() : config_.trigger,
                                   store_);
        sync_ = SyncController(graph_->sources(), all);
        rng_state_ = mix64(config_.seed ^ 0x5eedULL);
        record_budget_ = config_.record_budget != 0 ? config_.record_budget : derive_budget(*graph_, tasks_);
        failure_fired_.assign(config_.failures.size(), false);
    }

    Engine::Engine(const Engine &other) = default;
    Engine &Engine::operator=(const Engine &other) = default;
    Engine::Engine(Engine &&) noexcept = default;
    Engine &Engine::operator=(Engine &&) noexcept = default;
    Engine::~Engine() = default;

    std::size_t Engine::pick(std::size_t n)
    {
        rng_state_ += 0x9e3779b97f4a7c15ULL;
        return static_cast<std::size_t>(mix64(rng_state_) % n);
    }

    bool Engine::ready(const TaskRuntime &t, std::size_t slot) const
    {
        if (slot == kGenerate)
        {
            return t.can_generate();
        }
        if (slot == kNilInput)
        {
            return channels_[t.control_channel].deliverable();
        }
        return channels_[t.in_channels[slot]].deliverable();
    }

    bool Engine::task_ready(const TaskRuntime &t) const
    {
        if (ready(t, kNilInput) || ready(t, kGenerate))
        {
            return true;
        }
        for (std::size_t s = 0; s < t.in_channels.size(); ++s)
        {
            if (ready(t, s))
            {
                return true;
            }
        }
        return false;
    }

    std::vector<Choice> Engine::choices() const
    {
        std::vector<Choice> out;
        for (const auto &t : tasks_)
        {
            auto idx = static_cast<std::uint32_t>(t.index);
            if (ready(t, kNilInput))
            {
                out.push_back({idx, kNilInput});
            }
            for (std::size_t s = 0; s < t.in_channels.size(); ++s)
            {
                if (ready(t, s))
                {
                    out.push_back({idx, s});
                }
            }
            if (ready(t, kGenerate))
            {
                out.push_back({idx, kGenerate});
            }
        }
        return out;
    }

    StepOutcome Engine::apply(const Choice &c)
    {
        auto &t = tasks_[c.task];
        Io io(*this);
        StepKind kind = StepKind::Idle;
        if (c.slot == kGenerate)
        {
            kind = generate(t, io, scratch_);
            if (kind == StepKind::Generated)
            {
                ++records_ingested_;
            }
        }
        else
        {
            auto ch = c.slot == kNilInput ? t.control_channel : t.in_channels[c.slot];
            auto m = channels_[ch].receive();
            if (!m)
            {
                return StepOutcome::Idle;
            }
            if (observer_ != nullptr)
            {
                observer_->on_deliver(t.index, c.slot, *m);
            }
            kind = handle_message(t, c.slot, std::move(*m), settings_, io, scratch_);
            if (kind == StepKind::Data && t.kind == TaskKind::Sink && sync_.phase() == SyncPhase::Snapshotting)
            {
                ++sink_outputs_during_halt_;
            }
        }
        switch (kind)
        {
        case StepKind::Idle:
            return StepOutcome::Idle;
        case StepKind::Marker:
            return StepOutcome::SnapshotAction;
        default:
            return StepOutcome::Processed;
        }
    }

    StepOutcome Engine::step(Choice choice)
    {
        if (choice.task >= tasks_.size() || !ready(tasks_[choice.task], choice.slot))
        {
            return StepOutcome::Idle;
        }
        const auto &t = tasks_[choice.task];
        for (std::size_t i = 0; i < config_.failures.size(); ++i)
        {
            const auto &f = config_.failures[i];
            if (!failure_fired_[i] && f.victim == t.id && t.steps + 1 == f.at_step)
            {
                failure_fired_[i] = true;
                ++steps_;
                fail(f.victim);
                after_step();
                return StepOutcome::Processed;
            }
        }
        auto outcome = apply(choice);
        ++steps_;
        after_step();
        return outcome;
    }

    StepOutcome Engine::task_step(const TaskId &task)
    {
        const auto &t = this->task(task);
        std::vector<Choice> ready_slots;
        auto idx = static_cast<std::uint32_t>(t.index);
        if (ready(t, kNilInput))
        {
            ready_slots.push_back({idx, kNilInput});
        }
        for (std::size_t s = 0; s < t.in_channels.size(); ++s)
        {
            if (ready(t, s))
            {
                ready_slots.push_back({idx, s});
            }
        }
        if (ready(t, kGenerate))
        {
            ready_slots.push_back({idx, kGenerate});
        }
        if (ready_slots.empty())
        {
            return StepOutcome::Idle;
        }
        return step(ready_slots[pick(ready_slots.size())]);
    }

    void Engine::handle_event(CoordinatorEvent event)
    {
        Io io(*this);
        if (auto *snap = std::get_if<TaskSnapshot>(&event))
        {
            auto progress = coordinator_.collect(std::move(*snap), steps_);
            if (!progress.is_complete())
            {
                return;
            }
            if (observer_ != nullptr)
            {
                observer_->on_complete(*progress.complete);
            }
            if (config_.protocol == Protocol::Sync)
            {
                sync_.on_snapshot_complete(io);
                if (sync_.phase() == SyncPhase::Running)
                {
                    halt_time_ += steps_ - halt_started_;
                }
            }
        }
        else if (auto *h = std::get_if<HaltAck>(&event))
        {
            sync_.on_halt_ack(h->task);
        }
        else
        {
            sync_.on_resume_ack(std::get<ResumeAck>(event).task);
            if (sync_.phase() == SyncPhase::Running)
            {
                halt_time_ += steps_ - halt_started_;
            }
        }
    }

    void Engine::poll_coordinator()
    {
        Io io(*this);
        while (!inbox_.empty())
        {
            auto ev = std::move(inbox_.front());
            inbox_.pop_front();
            handle_event(std::move(ev));
        }
        switch (config_.protocol)
        {
        case Protocol::None:
            break;
        case Protocol::Abs:
            if (coordinator_.due(records_ingested_, steps_))
            {
                start_epoch();
            }
            break;
        case Protocol::Sync:
            if (sync_.phase() == SyncPhase::Running && coordinator_.due(records_ingested_, steps_))
            {
                start_epoch();
            }
            if (sync_.phase() == SyncPhase::Draining)
            {
                sync_.maybe_request(in_flight_records() == 0, io);
            }
            break;
        }
    }

    std::uint64_t Engine::start_epoch()
    {
        if (config_.protocol == Protocol::None)
        {
            throw std::logic_error("no snapshot protocol installed");
        }
        Io io(*this);
        auto epoch = coordinator_.next_epoch();
        auto in_flight = in_flight_records();
        if (config_.protocol == Protocol::Abs)
        {
            coordinator_.inject_barriers(epoch, io, steps_, in_flight);
        }
        else
        {
            if (sync_.phase() != SyncPhase::Running)
            {
                throw EpochOverlap("a synchronous snapshot is already in progress");
            }
            coordinator_.begin_epoch(epoch, steps_, in_flight);
            halt_in_flight_ += in_flight;
            halt_started_ = steps_;
            sync_.begin(epoch, io);
        }
        coordinator_.arm(records_ingested_, steps_);
        return epoch;
    }

    void Engine::check_watchdog() const
    {
        auto limit = 10 * record_budget_;
        if (auto e = coordinator_.in_flight())
        {
            const auto &m = coordinator_.metrics().back();
            if (steps_ - m.injected_at > limit)
            {
                throw WatchdogExpired("epoch " + std::to_string(*e) + " did not complete within " +
                                      std::to_string(limit) + " steps");
            }
        }
    }

    void Engine::after_step()
    {
        poll_coordinator();
        check_watchdog();
    }

    bool Engine::quiescent() const
    {
        return std::all_of(channels_.begin(), channels_.end(), [](const Channel &c) { return c.empty(); }) &&
               inbox_.empty();
    }

    bool Engine::finished() const
    {
        for (const auto &t : tasks_)
        {
            if (!t.exhausted())
            {
                return false;
            }
        }
        return quiescent() && !coordinator_.in_flight() && sync_.phase() == SyncPhase::Running;
    }

    RunReport Engine::run()
    {
        auto start = std::chrono::steady_clock::now();
        poll_coordinator();
        auto budget = config_.step_budget != 0 ? config_.step_budget : 10 * record_budget_;
        while (!finished())
        {
            if (steps_ - incarnation_start_ > budget)
            {
                throw Deadlock("step budget of " + std::to_string(budget) + " exceeded");
            }
            auto cs = choices();
            if (cs.empty())
            {
                throw Deadlock("no task can make progress with " + std::to_string(in_flight_records()) +
                               " records queued");
            }
            step(cs[pick(cs.size())]);
        }
        auto report = this->report();
        report.wall_ns = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count());
        if (report.wall_ns > 0)
        {
            report.throughput = static_cast<double>(report.records_ingested) * 1e9 / static_cast<double>(report.wall_ns);
        }
        return report;
    }

    void Engine::channel_send(std::size_t channel, Message message)
    {
        if (observer_ != nullptr)
        {
            observer_->on_send(channel, message);
        }
        channels_.at(channel).send(std::move(message));
    }

    void Engine::channel_block(std::size_t channel)
    {
        auto &c = channels_.at(channel);
        if (!c.blocked())
        {
            blocked_since_[channel] = steps_;
        }
        c.block();
    }

    void Engine::channel_unblock(std::size_t channel)
    {
        auto &c = channels_.at(channel);
        if (c.blocked())
        {
            blocking_time_ += steps_ - blocked_since_[channel];
        }
        c.unblock();
    }

    void Engine::broadcast(const TaskId &task, const Message &message)
    {
        for (auto c : this->task(task).out_channels)
        {
            channel_send(c, message);
        }
    }

    void Engine::fail(const TaskId &victim)
    {
        auto &t = task_mut(victim);
        ++failures_;
        t.state = OperatorState{};
        t.book = AbsTaskBook{};
        for (auto c : t.in_channels)
        {
            channels_[c].clear();
        }
        channels_[t.control_channel].clear();
        if (config_.recover == RecoverMode::Off)
        {
            failed_ = true;
            throw TaskFailure("task " + victim.str() + " failed at step " + std::to_string(steps_));
        }
        std::optional<GlobalSnapshot> snap;
        if (store_ != nullptr)
        {
            try
            {
                snap = store_->load_latest();
            }
            catch (const NoSnapshot &)
            {
            }
        }
        else
        {
            snap = coordinator_.latest_snapshot();
        }
        restore(snap);
        ++recoveries_;
        restored_epochs_.push_back(snap ? snap->epoch : 0);
    }

    void Engine::restore(const std::optional<GlobalSnapshot> &snapshot)
    {
        if (snapshot)
        {
            check_restorable(*graph_, *snapshot);
        }
        for (std::size_t i = 0; i < channels_.size(); ++i)
        {
            channels_[i].clear();
            channel_unblock(i);
        }
        auto states = restored_states(*graph_, snapshot ? &*snapshot : nullptr);
        auto completed = snapshot ? snapshot->epoch : 0;
        for (auto &t : tasks_)
        {
            t.state = std::move(states[t.index]);
            t.halted = false;
            reset_book(t, *graph_, settings_.cyclic, completed);
        }
        if (snapshot)
        {
            auto queues = replay_queues(*graph_, *snapshot);
            for (std::size_t c = 0; c < queues.size(); ++c)
            {
                if (queues[c].empty())
                {
                    continue;
                }
                std::vector<Message> msgs(queues[c].begin(), queues[c].end());
                channels_[c].push_front(std::move(msgs));
            }
        }
        inbox_.clear();
        sync_.reset();
        coordinator_.reset(snapshot, records_ingested_, steps_);
        incarnation_start_ = steps_;
    }

    GlobalSnapshot Engine::sync_snapshot()
    {
        if (config_.protocol != Protocol::Sync)
        {
            throw std::logic_error("sync_snapshot requires the synchronous protocol");
        }
        if (sync_.phase() != SyncPhase::Running || coordinator_.in_flight())
        {
            throw EpochOverlap("a synchronous snapshot is already in progress");
        }
        auto epoch = start_epoch();
        poll_coordinator();
        auto deadline = steps_ + 10 * record_budget_;
        while (coordinator_.latest_complete() < epoch || sync_.phase() != SyncPhase::Running)
        {
            auto cs = choices();
            if (cs.empty() || steps_ > deadline)
            {
                throw DrainTimeout("synchronous snapshot " + std::to_string(epoch) + " did not drain");
            }
            step(cs[pick(cs.size())]);
        }
        return *coordinator_.latest_snapshot();
    }

    const TaskRuntime &Engine::task(const TaskId &id) const { return tasks_[graph_->task_index(id)]; }
    TaskRuntime &Engine::task_mut(const TaskId &id) { return tasks_[graph_->task_index(id)]; }

    std::size_t Engine::channel_index(const ChannelId &id) const
    {
        auto idx = graph_->find_channel(id);
        if (!idx)
        {
            throw std::out_of_range("unknown channel " + id.str());
        }
        return *idx;
    }

    const Channel &Engine::channel(const ChannelId &id) const { return channels_[channel_index(id)]; }

    std::uint64_t Engine::records_emitted() const noexcept { return records_ingested_; }

    std::uint64_t Engine::in_flight_records() const noexcept
    {
        std::uint64_t n = 0;
        for (std::size_t i = 0; i < graph_->channels().size(); ++i)
        {
            n += channels_[i].data_count();
        }
        return n;
    }

    RunReport Engine::report() const
    {
        RunReport r;
        r.protocol = std::string(to_string(config_.protocol));
        r.mode = "deterministic";
        r.trigger = config_.protocol == Protocol::None ? "none" : config_.trigger.str();
        r.workers = 1;
        r.seed = config_.seed;
        r.records_ingested = records_ingested_;
        r.steps = steps_;
        r.epochs = coordinator_.metrics();
        r.blocking_time = blocking_time_;
        r.halt_time = halt_time_;
        r.halt_in_flight = halt_in_flight_;
        r.sink_outputs_during_halt = sink_outputs_during_halt_;
        r.failures = failures_;
        r.recoveries = recoveries_;
        r.restored_epochs = restored_epochs_;
        r.failed = failed_;
        for (const auto &t : tasks_)
        {
            if (t.kind == TaskKind::Sink)
            {
                r.sink_states.emplace(t.id, t.state);
            }
        }
        r.finalize_sinks();
        return r;
    }

    void Engine::shutdown()
    {
        for (auto &c : channels_)
        {
            c.close();
        }
    }
} // namespace absflow
