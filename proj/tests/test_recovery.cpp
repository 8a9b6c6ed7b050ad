#include "absflow/builtins.hpp"
#include "absflow/engine.hpp"
#include "absflow/oracle.hpp"
#include "absflow/recovery.hpp"
#include "absflow/store.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace absflow;

namespace
{
    Record at_seq(std::uint64_t seq)
    {
        return Record{"k", 1, TaskId("src"), seq, 9};
    }

    GlobalSnapshot snapshot_from_oracle(const ExecutionGraph &g, const Workload &w, std::uint64_t epoch,
                                        const SourceCut &cut)
    {
        GlobalSnapshot s;
        s.epoch = epoch;
        s.task_states = prefix_replay_oracle(g, w, cut);
        s.source_offsets = cut;
        s.size_bytes = payload_bytes(s);
        return s;
    }

    /// Remembers a task's step count when a given epoch completes.
    struct StepsAtEpoch final : EngineObserver
    {
        const Engine *engine = nullptr;
        TaskId task;
        std::uint64_t epoch = 0;
        std::uint64_t steps = 0;
        void on_complete(const GlobalSnapshot &s) override
        {
            if (s.epoch == epoch)
            {
                steps = engine->task(task).steps;
            }
        }
    };

    const std::vector<std::string> kTenKeys{"a", "b", "a", "c", "b", "a", "d", "e", "a", "f"};
} // namespace

TEST_CASE("dedup filter discards at or below the cursor")
{
    DedupCursor cursor;
    CHECK(dedup_filter(cursor, at_seq(7)) == DedupDecision::Keep);
    CHECK(cursor.position(TaskId("src"), 9) == 7);
    CHECK(dedup_filter(cursor, at_seq(6)) == DedupDecision::Discard);
    CHECK(cursor.position(TaskId("src"), 9) == 7);
    CHECK(dedup_filter(cursor, at_seq(8)) == DedupDecision::Keep);
    CHECK(cursor.position(TaskId("src"), 9) == 8);
    CHECK(dedup_filter(cursor, at_seq(7)) == DedupDecision::Discard);
    auto other_lineage = at_seq(1);
    other_lineage.lineage = 10;
    CHECK(dedup_filter(cursor, other_lineage) == DedupDecision::Keep);
    CHECK(cursor.size() == 2);
}

TEST_CASE("replayed records the sink already applied are discarded once")
{
    auto g = share(chain3("identity"));
    auto w = share(testing::keys_workload(kTenKeys));
    auto reference = Engine(g, w, testing::config(Protocol::Abs)).run();

    Engine ahead(g, w, testing::config(Protocol::Abs));
    while (ahead.task(TaskId("sink")).processed < 7)
    {
        ahead.step(ahead.choices().back());
    }
    auto sink_at_7 = ahead.task(TaskId("sink")).state;
    REQUIRE(sink_at_7.cursor.size() == 1);
    CHECK(sink_at_7.cursor.entries().begin()->second == 7);

    auto snap = snapshot_from_oracle(*g, *w, 1, {{TaskId("src"), 5}});
    Engine e(g, w, testing::config(Protocol::Abs));
    e.restore(snap);
    CHECK(e.task(TaskId("src")).state.offset == 5);
    e.task_mut(TaskId("sink")).state = sink_at_7;
    auto report = e.run();

    CHECK(e.task(TaskId("sink")).discarded == 2);
    CHECK(report.sink_outputs() == reference.sink_outputs());
    CHECK(report.sink_digest == reference.sink_digest);
}

TEST_CASE("killing map after epoch 2 restarts chain3 from epoch 2")
{
    auto g = share(chain3());
    auto w = share(generated_workload(*g, 60, 5));
    auto cfg = testing::config(Protocol::Abs, TriggerPolicy::records(10), 3);
    auto expected = run_oracle(*g, *w);

    StepsAtEpoch probe;
    probe.task = TaskId("map");
    probe.epoch = 2;
    {
        MemoryStore store;
        Engine dry(g, w, cfg, &store);
        probe.engine = &dry;
        dry.set_observer(&probe);
        dry.run();
    }
    REQUIRE(probe.steps > 0);

    MemoryStore store;
    cfg.failures.push_back(FailureEvent{TaskId("map"), probe.steps + 1});
    Engine e(g, w, cfg, &store);
    auto report = e.run();
    CHECK(report.failures == 1);
    CHECK(report.recoveries == 1);
    REQUIRE(report.restored_epochs.size() == 1);
    CHECK(report.restored_epochs[0] == 2);
    CHECK(report.sink_outputs() == expected.sink_outputs);
    CHECK(report.sink_digest == expected.sink_digest);
}

TEST_CASE("logged back-edge records are replayed at the head of the back-edge")
{
    auto g = share(loop());
    auto w = share(generated_workload(*g, 30, 3, 1, 3));
    auto expected = run_oracle(*g, *w);
    const ChannelId back{"tail", "head", 0};

    std::optional<GlobalSnapshot> logged;
    for (std::uint64_t seed = 1; seed <= 200 && !logged; ++seed)
    {
        Engine e(g, w, testing::config(Protocol::Abs, TriggerPolicy::records(3), seed));
        testing::SnapshotCollector col;
        e.set_observer(&col);
        e.run();
        for (const auto &s : col.snapshots)
        {
            if (s.back_edge_logs.at(back).size() == 2)
            {
                logged = s;
                break;
            }
        }
    }
    REQUIRE(logged);

    Engine e(g, w, testing::config(Protocol::Abs, TriggerPolicy::never(), 5));
    e.restore(*logged);
    auto queued = e.channel(back).contents();
    REQUIRE(queued.size() == 2);
    CHECK(std::get<Record>(queued[0]) == logged->back_edge_logs.at(back)[0]);
    CHECK(std::get<Record>(queued[1]) == logged->back_edge_logs.at(back)[1]);
    auto report = e.run();
    CHECK(report.sink_outputs() == expected.sink_outputs);
}

TEST_CASE("an empty store restarts from initial states")
{
    auto g = share(chain3());
    auto w = share(generated_workload(*g, 40, 4));
    auto cfg = testing::config(Protocol::Abs, TriggerPolicy::records(1000));
    cfg.failures.push_back(FailureEvent{TaskId("sink"), 10});
    MemoryStore store;
    Engine e(g, w, cfg, &store);
    auto report = e.run();
    CHECK(report.restored_epochs == std::vector<std::uint64_t>{0});
    CHECK(report.sink_outputs() == run_oracle(*g, *w).sink_outputs);
}

TEST_CASE("recovery off surfaces the failure")
{
    auto g = share(chain3());
    auto w = share(generated_workload(*g, 40, 4));
    auto cfg = testing::config(Protocol::Abs, TriggerPolicy::records(10));
    cfg.failures.push_back(FailureEvent{TaskId("map"), 5});
    cfg.recover = RecoverMode::Off;
    MemoryStore store;
    Engine e(g, w, cfg, &store);
    CHECK_THROWS_AS(e.run(), TaskFailure);
}

TEST_CASE("snapshots of another graph are refused")
{
    auto chain = share(chain3());
    auto w = share(generated_workload(*chain, 10, 2));
    auto snap = snapshot_from_oracle(*chain, *w, 1, {{TaskId("src"), 3}});

    auto other = loop();
    CHECK_THROWS_AS(check_restorable(other, snap), GraphMismatch);
    snap.back_edge_logs[ChannelId{"map", "sink", 0}] = {};
    CHECK_THROWS_AS(check_restorable(*chain, snap), GraphMismatch);
    snap.back_edge_logs.clear();
    CHECK_NOTHROW(check_restorable(*chain, snap));
    snap.task_states.erase(TaskId("map"));
    Engine e(chain, w, testing::config(Protocol::Abs));
    CHECK_THROWS_AS(e.restore(snap), GraphMismatch);
}
