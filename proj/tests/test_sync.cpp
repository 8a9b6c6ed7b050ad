#include "absflow/builtins.hpp"
#include "absflow/engine.hpp"
#include "absflow/oracle.hpp"
#include "absflow/store.hpp"
#include "absflow/sync_baseline.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace absflow;

namespace
{
    struct RecordingFabric final : ControlFabric
    {
        void send_control(std::size_t task, Message message) override
        {
            sent.emplace_back(task, std::get<Control>(message));
        }
        std::vector<std::pair<std::size_t, Control>> sent;
    };
} // namespace

TEST_CASE("synchronous snapshot of chain3 equals the prefix oracle")
{
    auto g = share(chain3());
    auto w = share(generated_workload(*g, 50, 4));
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        CAPTURE(seed);
        MemoryStore store;
        Engine e(g, w, testing::config(Protocol::Sync, TriggerPolicy::never(), seed), &store);
        for (int i = 0; i < 40; ++i)
        {
            auto cs = e.choices();
            REQUIRE_FALSE(cs.empty());
            e.step(cs[(seed * 7 + static_cast<std::uint64_t>(i)) % cs.size()]);
        }
        auto snap = e.sync_snapshot();
        CHECK(snap.epoch == 1);
        CHECK(snap.channel_records() == 0);
        CHECK(snap.task_states == prefix_replay_oracle(*g, *w, snap.source_offsets));
        CHECK(e.sync_phase() == SyncPhase::Running);
        CHECK(e.in_flight_records() == 0);
        CHECK(store.latest_complete() == std::optional<std::uint64_t>{1});

        auto report = e.run();
        CHECK(report.sink_outputs_during_halt == 0);
        CHECK(report.sink_outputs() == run_oracle(*g, *w).sink_outputs);
    }
}

TEST_CASE("interval-driven sync epochs halt, drain and resume")
{
    auto g = share(diamond());
    auto w = share(generated_workload(*g, 200, 8));
    MemoryStore store;
    Engine e(g, w, testing::config(Protocol::Sync, TriggerPolicy::records(20), 2), &store);
    testing::SnapshotCollector col;
    e.set_observer(&col);
    auto report = e.run();
    REQUIRE(col.snapshots.size() >= 5);
    for (const auto &s : col.snapshots)
    {
        CHECK(s.task_states == prefix_replay_oracle(*g, *w, s.source_offsets));
    }
    CHECK(report.halt_time > 0);
    CHECK(report.halt_in_flight > 0);
    CHECK(report.sink_outputs_during_halt == 0);
    CHECK(report.sink_outputs() == run_oracle(*g, *w).sink_outputs);
}

TEST_CASE("the synchronous baseline rejects cyclic graphs")
{
    auto g = share(loop());
    auto w = share(generated_workload(*g, 5, 2, 1, 2));
    CHECK_THROWS_AS(Engine(g, w, testing::config(Protocol::Sync)), GraphError);
}

TEST_CASE("sync_snapshot requires the synchronous protocol")
{
    auto g = share(chain3());
    auto w = share(generated_workload(*g, 5, 2));
    Engine e(g, w, testing::config(Protocol::Abs));
    CHECK_THROWS_AS(e.sync_snapshot(), std::logic_error);
}

TEST_CASE("sync controller phases")
{
    SyncController c({0, 1}, {0, 1, 2, 3});
    RecordingFabric fabric;
    c.begin(1, fabric);
    CHECK(c.phase() == SyncPhase::Halting);
    REQUIRE(fabric.sent.size() == 2);
    CHECK(fabric.sent[0].second == Control{ControlKind::Halt, 1});
    CHECK_THROWS_AS(c.begin(2, fabric), EpochOverlap);

    c.on_halt_ack(0);
    CHECK(c.phase() == SyncPhase::Halting);
    CHECK_FALSE(c.maybe_request(true, fabric));
    c.on_halt_ack(1);
    CHECK(c.phase() == SyncPhase::Draining);
    CHECK_FALSE(c.maybe_request(false, fabric));
    CHECK(c.maybe_request(true, fabric));
    CHECK(c.phase() == SyncPhase::Snapshotting);
    CHECK(fabric.sent.size() == 6);
    CHECK(fabric.sent[5].second == Control{ControlKind::SnapshotRequest, 1});

    c.on_snapshot_complete(fabric);
    CHECK(c.phase() == SyncPhase::Resuming);
    CHECK(fabric.sent.back().second == Control{ControlKind::Resume, 1});
    c.on_resume_ack(0);
    c.on_resume_ack(1);
    CHECK(c.phase() == SyncPhase::Running);

    c.begin(2, fabric);
    c.reset();
    CHECK(c.phase() == SyncPhase::Running);
}
