#include "absflow/explore.hpp"

#include "absflow/engine.hpp"
#include "absflow/oracle.hpp"
#include "absflow/store.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

namespace absflow
{
    namespace
    {
        struct Tracking
        {
            bool injected = false;
            std::vector<bool> copied;
            std::vector<std::vector<Record>> processed;
            std::vector<std::vector<Record>> pre_sends;
            std::vector<std::size_t> received_before_copy;
        };

        class Tracker final : public EngineObserver
        {
        public:
            Tracker(const ExecutionGraph &graph, const std::vector<TaskRuntime> &tasks, Tracking &tr)
                : graph_(graph), tasks_(tasks), tr_(tr)
            {
            }

            void on_deliver(std::size_t task, std::size_t slot, const Message &m) override
            {
                const auto *rec = std::get_if<Record>(&m);
                if (rec == nullptr || tr_.copied[task])
                {
                    return;
                }
                tr_.processed[task].push_back(*rec);
                if (slot != kNilInput && slot < tasks_[task].in_channels.size())
                {
                    auto c = tasks_[task].in_channels[slot];
                    if (graph_.is_back_edge(c))
                    {
                        ++tr_.received_before_copy[c];
                    }
                }
            }

            void on_send(std::size_t channel, const Message &m) override
            {
                if (channel >= graph_.channels().size() || !graph_.is_back_edge(channel) || !is_data(m))
                {
                    return;
                }
                auto producer = graph_.task_index(graph_.channels()[channel].from);
                if (!tr_.copied[producer])
                {
                    tr_.pre_sends[channel].push_back(std::get<Record>(m));
                }
            }

            void on_effect(std::size_t task, const Effect &e) override
            {
                if (std::holds_alternative<BroadcastBarrier>(e))
                {
                    tr_.copied[task] = true;
                }
            }

        private:
            const ExecutionGraph &graph_;
            const std::vector<TaskRuntime> &tasks_;
            Tracking &tr_;
        };

        bool record_less(const Record &a, const Record &b)
        {
            return std::tie(a.source, a.seq, a.lineage, a.key, a.value) <
                   std::tie(b.source, b.seq, b.lineage, b.key, b.value);
        }

        void put_records(ByteWriter &w, const std::vector<Record> &rs)
        {
            w.put<std::uint32_t>(static_cast<std::uint32_t>(rs.size()));
            for (const auto &r : rs)
            {
                encode(w, r);
            }
        }

        std::string fingerprint(const Engine &e, const Tracking &tr)
        {
            ByteWriter w;
            for (const auto &t : e.tasks())
            {
                w.put_string(t.state.serialize());
                const auto &b = t.book;
                w.put<std::uint32_t>(static_cast<std::uint32_t>(b.blocked_inputs.size()));
                for (auto s : b.blocked_inputs)
                {
                    w.put<std::uint64_t>(s);
                }
                w.put<std::uint32_t>(static_cast<std::uint32_t>(b.marked.size()));
                for (auto s : b.marked)
                {
                    w.put<std::uint64_t>(s);
                }
                w.put_bool(b.logging);
                w.put_string(b.state_copy ? b.state_copy->serialize() : std::string());
                w.put<std::uint32_t>(static_cast<std::uint32_t>(b.backup_log.size()));
                for (const auto &l : b.backup_log)
                {
                    encode(w, l.record);
                }
                w.put(b.completed_epoch);
                w.put(b.active_epoch.value_or(0));
                w.put_bool(t.halted);
            }
            for (const auto &c : e.channels())
            {
                w.put_bool(c.blocked());
                auto contents = c.contents();
                w.put<std::uint32_t>(static_cast<std::uint32_t>(contents.size()));
                for (const auto &m : contents)
                {
                    encode(w, m);
                }
            }
            w.put(e.coordinator().in_flight().value_or(0));
            w.put(e.coordinator().latest_complete());
            w.put_bool(tr.injected);
            for (std::size_t i = 0; i < tr.copied.size(); ++i)
            {
                w.put_bool(tr.copied[i]);
                auto sorted = tr.processed[i];
                std::sort(sorted.begin(), sorted.end(), record_less);
                put_records(w, sorted);
            }
            for (std::size_t c = 0; c < tr.pre_sends.size(); ++c)
            {
                put_records(w, tr.pre_sends[c]);
                w.put<std::uint64_t>(tr.received_before_copy[c]);
            }
            return std::move(w).take();
        }

        struct Key
        {
            std::uint64_t a;
            std::uint64_t b;
            bool operator==(const Key &) const = default;
        };

        struct KeyHash
        {
            std::size_t operator()(const Key &k) const noexcept { return static_cast<std::size_t>(k.a ^ (k.b << 1)); }
        };

        Key key_of(const std::string &bytes)
        {
            return Key{fnv1a(bytes), mix64(fnv1a(bytes, 0x84222325cbf29ce4ull) ^ bytes.size())};
        }

        class Explorer
        {
        public:
            Explorer(std::shared_ptr<const ExecutionGraph> graph, std::shared_ptr<const Workload> workload,
                     const ExploreOptions &options, const UdfRegistry &registry)
                : graph_(std::move(graph)), workload_(std::move(workload)), options_(options), registry_(registry),
                  runtime_(build_tasks(*graph_, *workload_, registry)),
                  oracle_(run_oracle(*graph_, *workload_, registry))
            {
            }

            ExploreResult run()
            {
                EngineConfig cfg;
                cfg.protocol = Protocol::Abs;
                cfg.trigger = TriggerPolicy::never();
                Engine root(graph_, workload_, cfg, nullptr, registry_);
                Tracking tr;
                auto n = graph_->tasks().size();
                auto m = graph_->channels().size();
                tr.copied.assign(n, false);
                tr.processed.assign(n, {});
                tr.pre_sends.assign(m, {});
                tr.received_before_copy.assign(m, 0);
                visit(std::move(root), std::move(tr));
                return std::move(result_);
            }

        private:
            void violation(std::string what)
            {
                if (result_.violations.size() < 20)
                {
                    result_.violations.push_back(std::move(what));
                }
            }

            void visit(Engine engine, Tracking tr)
            {
                if (result_.truncated || result_.violations.size() >= 20)
                {
                    return;
                }
                if (!seen_.insert(key_of(fingerprint(engine, tr))).second)
                {
                    return;
                }
                if (++result_.states > options_.max_states)
                {
                    result_.truncated = true;
                    return;
                }
                if (engine.coordinator().latest_complete() >= 1)
                {
                    check(engine, tr);
                    return;
                }
                if (engine.finished())
                {
                    return;
                }
                auto cs = engine.choices();
                if (!tr.injected)
                {
                    Engine child = engine;
                    Tracking ctr = tr;
                    Tracker obs(*graph_, child.tasks(), ctr);
                    child.set_observer(&obs);
                    child.start_epoch();
                    child.poll_coordinator();
                    child.set_observer(nullptr);
                    ctr.injected = true;
                    visit(std::move(child), std::move(ctr));
                }
                if (cs.empty())
                {
                    if (tr.injected)
                    {
                        violation("no enabled action while epoch 1 is incomplete");
                    }
                    return;
                }
                for (const auto &c : cs)
                {
                    Engine child = engine;
                    Tracking ctr = tr;
                    Tracker obs(*graph_, child.tasks(), ctr);
                    child.set_observer(&obs);
                    child.step(c);
                    child.set_observer(nullptr);
                    visit(std::move(child), std::move(ctr));
                }
            }

            OperatorState fold(std::size_t t, std::vector<Record> records) const
            {
                const auto &rt = runtime_[t];
                std::sort(records.begin(), records.end(), record_less);
                OperatorState s = graph_->tasks()[t].initial_state;
                UdfContext ctx{rt.id, rt.ports, rt.workload, rt.routing};
                std::vector<Emit> emits;
                for (const auto &r : records)
                {
                    if (!s.cursor.admit(r.source, r.lineage, r.seq))
                    {
                        continue;
                    }
                    emits.clear();
                    (*rt.udf)(s, &r, ctx, emits);
                }
                return s;
            }

            void check(const Engine &engine, const Tracking &tr)
            {
                ++result_.snapshots;
                const auto &snap = *engine.coordinator().latest_snapshot();
                const auto &tasks = graph_->tasks();
                for (std::size_t t = 0; t < tasks.size(); ++t)
                {
                    const auto &id = tasks[t].id;
                    const auto &state = snap.task_states.at(id);
                    if (tasks[t].kind == TaskKind::Source)
                    {
                        if (state.offset != snap.source_offsets.at(id))
                        {
                            violation("source " + id.str() + " offset disagrees with the snapshot's source offsets");
                        }
                        continue;
                    }
                    for (const auto &r : tr.processed[t])
                    {
                        if (r.seq > snap.source_offsets.at(r.source))
                        {
                            violation("task " + id.str() + " state includes post-barrier record " + r.source.str() +
                                      "#" + std::to_string(r.seq));
                        }
                    }
                    if (fold(t, tr.processed[t]) != state)
                    {
                        violation("task " + id.str() + " snapshot state is not the fold of its pre-copy records");
                    }
                }
                for (std::size_t c = 0; c < graph_->channels().size(); ++c)
                {
                    if (!graph_->is_back_edge(c))
                    {
                        continue;
                    }
                    const auto &sent = tr.pre_sends[c];
                    auto received = tr.received_before_copy[c];
                    if (received > sent.size())
                    {
                        violation("consumer of " + graph_->channels()[c].str() +
                                  " received post-barrier records before its copy");
                        continue;
                    }
                    std::vector<Record> expected(sent.begin() + static_cast<std::ptrdiff_t>(received), sent.end());
                    auto it = snap.back_edge_logs.find(graph_->channels()[c]);
                    std::vector<Record> got = it == snap.back_edge_logs.end() ? std::vector<Record>{} : it->second;
                    if (got != expected)
                    {
                        violation("backup log of " + graph_->channels()[c].str() + " has " +
                                  std::to_string(got.size()) + " records, expected " +
                                  std::to_string(expected.size()));
                    }
                    result_.max_backup_log = std::max<std::uint64_t>(result_.max_backup_log, got.size());
                    if (!got.empty())
                    {
                        ++result_.logged_snapshots;
                    }
                }
                if (!graph_->cyclic() && snap.channel_records() != 0)
                {
                    violation("acyclic snapshot carries channel records");
                }

                GlobalSnapshot canonical = snap;
                canonical.created_at = 0;
                std::string bytes;
                for (const auto &[name, content] : encode_snapshot(canonical))
                {
                    bytes += name;
                    bytes += content;
                }
                if (!replayed_.insert(key_of(bytes)).second)
                {
                    return;
                }
                ++result_.distinct_snapshots;
                for (auto seed : options_.replay_seeds)
                {
                    EngineConfig cfg;
                    cfg.protocol = Protocol::Abs;
                    cfg.seed = seed;
                    Engine e(graph_, workload_, cfg, nullptr, registry_);
                    e.restore(snap);
                    auto report = e.run();
                    if (report.sink_outputs() != oracle_.sink_outputs)
                    {
                        violation("restoring epoch " + std::to_string(snap.epoch) + " (seed " + std::to_string(seed) +
                                  ") does not reproduce the failure-free sink output");
                    }
                }
            }

            std::shared_ptr<const ExecutionGraph> graph_;
            std::shared_ptr<const Workload> workload_;
            ExploreOptions options_;
            const UdfRegistry &registry_;
            std::vector<TaskRuntime> runtime_;
            OracleResult oracle_;
            std::unordered_set<Key, KeyHash> seen_;
            std::unordered_set<Key, KeyHash> replayed_;
            ExploreResult result_;
        };
    } // namespace

    ExploreResult explore_snapshots(std::shared_ptr<const ExecutionGraph> graph, std::shared_ptr<const Workload> workload,
                                    const ExploreOptions &options, const UdfRegistry &registry)
    {
        return Explorer(std::move(graph), std::move(workload), options, registry).run();
    }
} // namespace absflow
