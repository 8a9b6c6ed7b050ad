#include "absflow/parallel.hpp"

#include "absflow/channel.hpp"
#include "absflow/engine.hpp"
#include "absflow/sync_baseline.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace absflow
{
    namespace
    {
        using Clock = std::chrono::steady_clock;

        struct SharedChannel
        {
            std::mutex m;
            Channel ch;
            std::atomic<bool> blocked{false};
            std::uint64_t blocked_since = 0;
        };
    } // namespace

    struct ParallelRunner::Impl
    {
        class Fabric;

        std::shared_ptr<const ExecutionGraph> graph;
        std::shared_ptr<const Workload> workload;
        ParallelConfig config;
        SnapshotStore *store;
        TaskSettings settings;

        std::vector<TaskRuntime> tasks;
        std::vector<std::unique_ptr<SharedChannel>> channels;
        std::vector<std::size_t> rr;
        std::vector<bool> counted_exhausted;

        Coordinator coordinator;
        SyncController sync;

        std::mutex inbox_m;
        std::vector<CoordinatorEvent> inbox;

        std::atomic<std::int64_t> pending_msgs{0};
        std::atomic<std::int64_t> pending_data{0};
        std::atomic<std::uint64_t> records{0};
        std::atomic<std::uint64_t> steps{0};
        std::atomic<std::uint64_t> blocking_ns{0};
        std::atomic<std::uint64_t> sink_during_halt{0};
        std::atomic<std::uint32_t> exhausted_sources{0};
        std::atomic<SyncPhase> phase{SyncPhase::Running};
        std::atomic<bool> stop{false};

        std::mutex error_m;
        std::exception_ptr error;

        Clock::time_point start;
        std::uint64_t halt_started = 0;
        std::uint64_t halt_time = 0;
        std::uint64_t halt_in_flight = 0;

        Impl(std::shared_ptr<const ExecutionGraph> g, std::shared_ptr<const Workload> w, ParallelConfig c,
             SnapshotStore *s, const UdfRegistry &registry)
            : graph(std::move(g)), workload(std::move(w)), config(std::move(c)), store(s)
        {
            if (config.workers == 0)
            {
                throw std::invalid_argument("at least one worker is required");
            }
            if (config.protocol == Protocol::Sync && graph->cyclic())
            {
                throw GraphError("the synchronous baseline does not support cyclic graphs");
            }
            settings = TaskSettings{config.protocol, graph->cyclic()};
            tasks = build_tasks(*graph, *workload, registry);
            for (const auto &id : graph->channels())
            {
                auto sc = std::make_unique<SharedChannel>();
                sc->ch = Channel(id, config.spill_threshold, config.spill_dir);
                channels.push_back(std::move(sc));
            }
            std::vector<std::size_t> all;
            for (const auto &t : tasks)
            {
                auto sc = std::make_unique<SharedChannel>();
                sc->ch = Channel(ChannelId{TaskId("nil"), t.id, 0});
                channels.push_back(std::move(sc));
                all.push_back(t.index);
            }
            rr.assign(tasks.size(), 0);
            counted_exhausted.assign(tasks.size(), false);
            coordinator = Coordinator(
                graph, config.protocol == Protocol::None ? TriggerPolicy::never() : config.trigger, store);
            sync = SyncController(graph->sources(), all);
        }

        std::uint64_t now_ns() const
        {
            return static_cast<std::uint64_t>(
                std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
        }

        void send(std::size_t channel, Message message)
        {
            pending_msgs.fetch_add(1, std::memory_order_relaxed);
            if (is_data(message))
            {
                pending_data.fetch_add(1, std::memory_order_relaxed);
            }
            auto &sc = *channels[channel];
            std::lock_guard lock(sc.m);
            sc.ch.send(std::move(message));
        }

        void set_blocked(std::size_t channel, bool blocked)
        {
            auto &sc = *channels[channel];
            std::lock_guard lock(sc.m);
            if (blocked && !sc.ch.blocked())
            {
                sc.blocked_since = now_ns();
                sc.ch.block();
            }
            else if (!blocked && sc.ch.blocked())
            {
                blocking_ns.fetch_add(now_ns() - sc.blocked_since, std::memory_order_relaxed);
                sc.ch.unblock();
            }
            sc.blocked.store(blocked, std::memory_order_release);
        }

        void notify(CoordinatorEvent event)
        {
            std::lock_guard lock(inbox_m);
            inbox.push_back(std::move(event));
        }

        void fail(std::exception_ptr e)
        {
            {
                std::lock_guard lock(error_m);
                if (!error)
                {
                    error = e;
                }
            }
            stop.store(true);
        }

        std::size_t take(std::size_t channel, std::vector<Message> &buf, std::size_t max)
        {
            auto &sc = *channels[channel];
            if (sc.blocked.load(std::memory_order_acquire))
            {
                return 0;
            }
            std::lock_guard lock(sc.m);
            while (buf.size() < max && sc.ch.deliverable())
            {
                buf.push_back(std::move(*sc.ch.receive()));
            }
            return buf.size();
        }

        void put_back(std::size_t channel, std::vector<Message> &buf, std::size_t from)
        {
            if (from >= buf.size())
            {
                return;
            }
            std::vector<Message> rest(std::make_move_iterator(buf.begin() + static_cast<std::ptrdiff_t>(from)),
                                      std::make_move_iterator(buf.end()));
            auto &sc = *channels[channel];
            std::lock_guard lock(sc.m);
            sc.ch.push_front(std::move(rest));
        }

        std::size_t drain_slot(TaskRuntime &t, std::size_t slot, std::size_t budget, TaskIo &io, StepScratch &scratch,
                               std::vector<Message> &buf)
        {
            auto channel = slot == kNilInput ? t.control_channel : t.in_channels[slot];
            buf.clear();
            if (take(channel, buf, budget) == 0)
            {
                return 0;
            }
            std::size_t done = 0;
            for (std::size_t i = 0; i < buf.size(); ++i)
            {
                bool data = is_data(buf[i]);
                auto kind = handle_message(t, slot, std::move(buf[i]), settings, io, scratch);
                ++done;
                if (data)
                {
                    pending_data.fetch_sub(1, std::memory_order_relaxed);
                    if (kind == StepKind::Data && t.kind == TaskKind::Sink &&
                        phase.load(std::memory_order_relaxed) == SyncPhase::Snapshotting)
                    {
                        sink_during_halt.fetch_add(1, std::memory_order_relaxed);
                    }
                }
                pending_msgs.fetch_sub(1, std::memory_order_relaxed);
                if (slot != kNilInput && channels[channel]->blocked.load(std::memory_order_acquire))
                {
                    put_back(channel, buf, i + 1);
                    break;
                }
            }
            return done;
        }

        bool run_task(TaskRuntime &t, TaskIo &io, StepScratch &scratch, std::vector<Message> &buf)
        {
            std::size_t budget = config.batch;
            std::size_t done = drain_slot(t, kNilInput, budget, io, scratch, buf);
            const auto n = t.in_channels.size();
            for (std::size_t k = 0; k < n && done < budget; ++k)
            {
                auto slot = (rr[t.index] + k) % n;
                done += drain_slot(t, slot, budget - done, io, scratch, buf);
            }
            if (n > 0)
            {
                rr[t.index] = (rr[t.index] + 1) % n;
            }
            if (t.is_source())
            {
                std::uint64_t made = 0;
                while (done < budget && t.can_generate() &&
                       pending_data.load(std::memory_order_relaxed) < static_cast<std::int64_t>(config.max_in_flight))
                {
                    generate(t, io, scratch);
                    ++done;
                    ++made;
                }
                if (made > 0)
                {
                    records.fetch_add(made, std::memory_order_relaxed);
                }
                if (t.exhausted() && !counted_exhausted[t.index])
                {
                    counted_exhausted[t.index] = true;
                    exhausted_sources.fetch_add(1, std::memory_order_release);
                }
            }
            if (done > 0)
            {
                steps.fetch_add(done, std::memory_order_relaxed);
            }
            return done > 0;
        }

        void worker(std::uint32_t w);
        void handle(CoordinatorEvent &event, Fabric &fabric);
        bool coordinate(Fabric &fabric);
        RunReport run();
    };

    class ParallelRunner::Impl::Fabric final : public TaskIo, public ControlFabric
    {
    public:
        explicit Fabric(Impl &impl) : impl_(impl) {}
        void send(std::size_t channel, Message message) override { impl_.send(channel, std::move(message)); }
        void set_blocked(std::size_t channel, bool blocked) override { impl_.set_blocked(channel, blocked); }
        void notify(CoordinatorEvent event) override { impl_.notify(std::move(event)); }
        void send_control(std::size_t task, Message message) override
        {
            impl_.send(impl_.tasks[task].control_channel, std::move(message));
        }

    private:
        Impl &impl_;
    };

    void ParallelRunner::Impl::worker(std::uint32_t w)
    {
        Fabric io(*this);
        StepScratch scratch;
        std::vector<Message> buf;
        std::vector<TaskRuntime *> mine;
        for (std::size_t i = w; i < tasks.size(); i += config.workers)
        {
            mine.push_back(&tasks[i]);
        }
        std::uint32_t idle = 0;
        try
        {
            while (!stop.load(std::memory_order_relaxed))
            {
                bool did = false;
                for (auto *t : mine)
                {
                    did = run_task(*t, io, scratch, buf) || did;
                }
                if (did)
                {
                    idle = 0;
                }
                else if (++idle < 64)
                {
                    std::this_thread::yield();
                }
                else
                {
                    std::this_thread::sleep_for(std::chrono::microseconds(50));
                }
            }
        }
        catch (...)
        {
            fail(std::current_exception());
        }
    }

    void ParallelRunner::Impl::handle(CoordinatorEvent &event, Fabric &fabric)
    {
        auto now = now_ns();
        if (auto *snap = std::get_if<TaskSnapshot>(&event))
        {
            auto progress = coordinator.collect(std::move(*snap), now);
            if (progress.is_complete() && config.protocol == Protocol::Sync)
            {
                sync.on_snapshot_complete(fabric);
                if (sync.phase() == SyncPhase::Running)
                {
                    halt_time += now_ns() - halt_started;
                }
            }
        }
        else if (auto *h = std::get_if<HaltAck>(&event))
        {
            sync.on_halt_ack(h->task);
        }
        else
        {
            sync.on_resume_ack(std::get<ResumeAck>(event).task);
            if (sync.phase() == SyncPhase::Running)
            {
                halt_time += now - halt_started;
            }
        }
        phase.store(sync.phase());
    }

    bool ParallelRunner::Impl::coordinate(Fabric &fabric)
    {
        std::vector<CoordinatorEvent> events;
        {
            std::lock_guard lock(inbox_m);
            events.swap(inbox);
        }
        for (auto &e : events)
        {
            handle(e, fabric);
        }
        auto now = now_ns();
        auto emitted = records.load(std::memory_order_relaxed);
        auto now_ms = now / 1000000;
        bool acted = !events.empty();
        if (config.protocol == Protocol::Abs && coordinator.due(emitted, now_ms))
        {
            auto in_flight = static_cast<std::uint64_t>(std::max<std::int64_t>(0, pending_data.load()));
            coordinator.inject_barriers(coordinator.next_epoch(), fabric, now, in_flight);
            coordinator.arm(emitted, now_ms);
            acted = true;
        }
        if (config.protocol == Protocol::Sync)
        {
            if (sync.phase() == SyncPhase::Running && coordinator.due(emitted, now_ms))
            {
                auto in_flight = static_cast<std::uint64_t>(std::max<std::int64_t>(0, pending_data.load()));
                auto epoch = coordinator.next_epoch();
                coordinator.begin_epoch(epoch, now, in_flight);
                halt_in_flight += in_flight;
                halt_started = now;
                sync.begin(epoch, fabric);
                coordinator.arm(emitted, now_ms);
                acted = true;
            }
            if (sync.phase() == SyncPhase::Draining && pending_data.load() == 0)
            {
                acted = sync.maybe_request(true, fabric) || acted;
            }
            phase.store(sync.phase());
        }
        if (auto e = coordinator.in_flight())
        {
            auto age = now - coordinator.metrics().back().injected_at;
            if (age > static_cast<std::uint64_t>(std::chrono::nanoseconds(config.epoch_timeout).count()))
            {
                throw WatchdogExpired("epoch " + std::to_string(*e) + " did not complete in time");
            }
        }
        return acted;
    }

    RunReport ParallelRunner::Impl::run()
    {
        Fabric fabric(*this);
        const auto nsources = static_cast<std::uint32_t>(graph->sources().size());
        for (const auto &t : tasks)
        {
            if (t.is_source() && t.exhausted())
            {
                counted_exhausted[t.index] = true;
                exhausted_sources.fetch_add(1);
            }
        }
        start = Clock::now();
        std::vector<std::thread> threads;
        for (std::uint32_t w = 0; w < config.workers; ++w)
        {
            threads.emplace_back([this, w] { worker(w); });
        }
        try
        {
            while (!stop.load())
            {
                bool acted = coordinate(fabric);
                bool done = exhausted_sources.load(std::memory_order_acquire) == nsources &&
                            pending_msgs.load() == 0 && !coordinator.in_flight() &&
                            sync.phase() == SyncPhase::Running;
                if (done)
                {
                    std::lock_guard lock(inbox_m);
                    done = inbox.empty();
                }
                if (done)
                {
                    break;
                }
                if (!acted)
                {
                    std::this_thread::sleep_for(config.poll);
                }
            }
        }
        catch (...)
        {
            fail(std::current_exception());
        }
        stop.store(true);
        for (auto &th : threads)
        {
            th.join();
        }
        if (error)
        {
            std::rethrow_exception(error);
        }

        RunReport r;
        r.wall_ns = now_ns();
        r.protocol = std::string(to_string(config.protocol));
        r.mode = "multi-worker";
        r.trigger = config.protocol == Protocol::None ? "none" : config.trigger.str();
        r.workers = config.workers;
        r.seed = config.seed;
        r.records_ingested = records.load();
        r.steps = steps.load();
        if (r.wall_ns > 0)
        {
            r.throughput = static_cast<double>(r.records_ingested) * 1e9 / static_cast<double>(r.wall_ns);
        }
        r.epochs = coordinator.metrics();
        r.blocking_time = blocking_ns.load();
        r.halt_time = halt_time;
        r.halt_in_flight = halt_in_flight;
        r.sink_outputs_during_halt = sink_during_halt.load();
        for (const auto &t : tasks)
        {
            if (t.kind == TaskKind::Sink)
            {
                r.sink_states.emplace(t.id, t.state);
            }
        }
        r.finalize_sinks();
        return r;
    }

    ParallelRunner::ParallelRunner(std::shared_ptr<const ExecutionGraph> graph, std::shared_ptr<const Workload> workload,
                                   ParallelConfig config, SnapshotStore *store, const UdfRegistry &registry)
        : impl_(std::make_unique<Impl>(std::move(graph), std::move(workload), std::move(config), store, registry))
    {
    }

    ParallelRunner::~ParallelRunner() = default;

    RunReport ParallelRunner::run() { return impl_->run(); }
} // namespace absflow
