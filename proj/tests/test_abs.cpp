#include "absflow/abs_protocol.hpp"
#include "absflow/builtins.hpp"
#include "absflow/engine.hpp"
#include "absflow/explore.hpp"
#include "absflow/oracle.hpp"
#include "absflow/random_dag.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace absflow;

namespace
{
    template <typename T>
    std::size_t count_of(const std::vector<Effect> &effects)
    {
        return static_cast<std::size_t>(std::count_if(effects.begin(), effects.end(), [](const Effect &e) {
            return std::holds_alternative<T>(e);
        }));
    }

    Record rec(const char *key, std::uint64_t seq)
    {
        return Record{key, 1, TaskId("src"), seq, 0};
    }

    const std::vector<ChannelId> kTwoInputs{ChannelId{"a", "t", 0}, ChannelId{"b", "t", 0}};
} // namespace

TEST_CASE("source snapshots and broadcasts on a Nil barrier without blocking")
{
    auto book = make_book();
    OperatorState st = OperatorState::parse_literal("offset=4");
    ProtocolContext ctx{TaskId("src"), {}, st};
    auto effects = on_barrier_acyclic(book, kNilInput, Barrier{1}, ctx);
    REQUIRE(effects.size() >= 2);
    CHECK(std::get<BroadcastBarrier>(effects[0]).barrier == Barrier{1});
    const auto &snap = std::get<EmitSnapshot>(effects[1]).snapshot;
    CHECK(snap.task == TaskId("src"));
    CHECK(snap.epoch == 1);
    CHECK(snap.state == st);
    CHECK(snap.backup_log.empty());
    CHECK(count_of<BlockInput>(effects) == 0);
    CHECK(book.completed_epoch == 1);
}

TEST_CASE("alignment blocks each input until all delivered the barrier")
{
    auto book = make_book();
    OperatorState st = OperatorState::parse_literal("x=1");
    ProtocolContext ctx{TaskId("t"), kTwoInputs, st};

    auto first = on_barrier_acyclic(book, 0, Barrier{1}, ctx);
    CHECK(first == std::vector<Effect>{BlockInput{0}});
    CHECK(book.blocked_inputs == std::set<std::size_t>{0});

    auto second = on_barrier_acyclic(book, 1, Barrier{1}, ctx);
    REQUIRE(second.size() == 4);
    CHECK(second[0] == Effect{BlockInput{1}});
    CHECK(second[1] == Effect{BroadcastBarrier{Barrier{1}}});
    CHECK(std::get<EmitSnapshot>(second[2]).snapshot.state == st);
    CHECK(second[3] == Effect{UnblockAll{}});
    CHECK(book.blocked_inputs.empty());
}

TEST_CASE("barrier epochs must be the active one or its successor")
{
    auto book = make_book();
    OperatorState st;
    ProtocolContext ctx{TaskId("t"), kTwoInputs, st};
    CHECK_THROWS_AS(on_barrier_acyclic(book, 0, Barrier{2}, ctx), UnknownEpoch);
    on_barrier_acyclic(book, 0, Barrier{1}, ctx);
    CHECK_THROWS_AS(on_barrier_acyclic(book, 1, Barrier{2}, ctx), UnknownEpoch);
    CHECK_THROWS_AS(on_barrier_acyclic(book, 0, Barrier{1}, ctx), ProtocolError);
    on_barrier_acyclic(book, 1, Barrier{1}, ctx);
    CHECK_THROWS_AS(on_barrier_acyclic(book, 0, Barrier{1}, ctx), UnknownEpoch);
    CHECK(on_barrier_acyclic(book, 0, Barrier{2}, ctx).size() == 1);
}

TEST_CASE("records behind a barrier on a blocked input are excluded from the snapshot")
{
    std::vector<TaskSpec> tasks{{TaskId("s1"), TaskKind::Source, "source", {}},
                                {TaskId("s2"), TaskKind::Source, "source", {}},
                                {TaskId("j"), TaskKind::Operator, "count", {}},
                                {TaskId("k"), TaskKind::Sink, "sink", {}}};
    auto g = share(make_graph(tasks, {ChannelId{"s1", "j", 0}, ChannelId{"s2", "j", 0}, ChannelId{"j", "k", 0}}));
    Workload w;
    w.sources[TaskId("s1")] = SourceWorkload::from_keys({"d"});
    w.sources[TaskId("s2")] = SourceWorkload::from_keys({"e"});
    auto wl = share(w);

    Engine e(g, wl, testing::config(Protocol::Abs));
    testing::SnapshotCollector col;
    e.set_observer(&col);
    const std::uint32_t s1 = 0, s2 = 1, j = 2;
    e.start_epoch();
    e.step({s1, kNilInput});
    e.step({s1, kGenerate});
    e.step({j, 0});
    CHECK(e.channel(ChannelId{"s1", "j", 0}).blocked());
    CHECK(e.channel(ChannelId{"s1", "j", 0}).data_count() == 1);
    e.step({s2, kGenerate});
    e.step({j, 1});
    e.step({s2, kNilInput});
    e.step({j, 1});
    e.run();

    REQUIRE(col.snapshots.size() == 1);
    const auto &snap = col.snapshots[0];
    CHECK(snap.source_offsets == std::map<TaskId, std::uint64_t>{{"s1", 0}, {"s2", 1}});
    CHECK(snap.task_states.at(TaskId("j")).table == std::map<std::string, std::int64_t>{{"e", 1}});
    CHECK(snap.task_states == prefix_replay_oracle(*g, *wl, snap.source_offsets));
    CHECK(e.task(TaskId("j")).state.table == std::map<std::string, std::int64_t>{{"d", 1}, {"e", 1}});
}

TEST_CASE("head of the loop copies its state and starts logging on its regular barrier")
{
    auto book = make_book({1});
    OperatorState st = OperatorState::parse_literal("a=3");
    std::vector<ChannelId> inputs{ChannelId{"src", "head", 0}, ChannelId{"tail", "head", 0}};
    ProtocolContext ctx{TaskId("head"), inputs, st};

    auto effects = on_barrier_cyclic(book, 0, Barrier{1}, ctx);
    CHECK(count_of<BroadcastBarrier>(effects) == 1);
    CHECK(count_of<UnblockAll>(effects) == 1);
    CHECK(count_of<EmitSnapshot>(effects) == 0);
    CHECK(book.logging);
    CHECK(book.state_copy == st);

    auto r1 = rec("a", 1);
    auto r2 = rec("b", 2);
    CHECK_FALSE(on_data(book, 0, r1, ctx));
    CHECK(on_data(book, 1, r1, ctx));
    CHECK(on_data(book, 1, r2, ctx));

    OperatorState later = OperatorState::parse_literal("a=9");
    ProtocolContext ctx2{TaskId("head"), inputs, later};
    auto done = on_barrier_cyclic(book, 1, Barrier{1}, ctx2);
    CHECK(count_of<BlockInput>(done) == 0);
    REQUIRE(count_of<EmitSnapshot>(done) == 1);
    const auto &snap = std::get<EmitSnapshot>(done.back()).snapshot;
    CHECK(snap.state == st);
    REQUIRE(snap.backup_log.size() == 2);
    CHECK(snap.backup_log[0].record == r1);
    CHECK(snap.backup_log[1].record == r2);
    CHECK(snap.backup_log[0].channel == inputs[1]);
    CHECK_FALSE(book.logging);
    CHECK_FALSE(book.state_copy.has_value());
    CHECK(book.backup_log.empty());
    CHECK(book.marked.empty());
}

TEST_CASE("back-edge inputs are never blocked")
{
    auto book = make_book({1});
    OperatorState st;
    std::vector<ChannelId> inputs{ChannelId{"src", "head", 0}, ChannelId{"tail", "head", 0}};
    ProtocolContext ctx{TaskId("head"), inputs, st};
    // Barrier from the loop before the regular one: marked, not blocked, no copy yet.
    auto effects = on_barrier_cyclic(book, 1, Barrier{1}, ctx);
    CHECK(effects.empty());
    CHECK(book.blocked_inputs.empty());
    CHECK_FALSE(book.logging);
    auto rest = on_barrier_cyclic(book, 0, Barrier{1}, ctx);
    CHECK(count_of<EmitSnapshot>(rest) == 1);
    CHECK(book.completed_epoch == 1);
}

TEST_CASE("on_data only logs loop inputs while logging")
{
    auto book = make_book({1});
    OperatorState st;
    std::vector<ChannelId> inputs{ChannelId{"src", "head", 0}, ChannelId{"tail", "head", 0}};
    ProtocolContext ctx{TaskId("head"), inputs, st};
    CHECK_FALSE(on_data(book, 1, rec("a", 1), ctx));
    CHECK(book.backup_log.empty());
    book.logging = true;
    CHECK_FALSE(on_data(book, 0, rec("a", 1), ctx));
    CHECK(book.backup_log.empty());
}

TEST_CASE("loop snapshots log only the back-edge")
{
    auto g = share(loop());
    auto w = share(generated_workload(*g, 40, 3, 1, 3));
    bool saw_log = false;
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        CAPTURE(seed);
        Engine e(g, w, testing::config(Protocol::Abs, TriggerPolicy::records(4), seed));
        testing::SnapshotCollector col;
        e.set_observer(&col);
        e.run();
        REQUIRE_FALSE(col.snapshots.empty());
        for (const auto &s : col.snapshots)
        {
            for (const auto &[c, log] : s.back_edge_logs)
            {
                CHECK(c == ChannelId{"tail", "head", 0});
                saw_log = saw_log || !log.empty();
            }
            CHECK(s.back_edge_logs.size() == 1);
        }
    }
    CHECK(saw_log);
}

TEST_CASE("acyclic snapshots equal the prefix oracle")
{
    for (std::uint64_t seed = 1; seed <= 150; ++seed)
    {
        CAPTURE(seed);
        auto c = random_dag_case(seed);
        auto g = share(c.graph);
        auto w = share(c.workload);
        Engine e(g, w, testing::config(Protocol::Abs, c.trigger, seed));
        testing::SnapshotCollector col;
        e.set_observer(&col);
        e.run();
        for (const auto &s : col.snapshots)
        {
            CHECK(s.back_edge_logs.empty());
            CHECK(s.task_states == prefix_replay_oracle(*g, *w, s.source_offsets));
        }
    }
}

TEST_CASE("exhaustive interleavings of a small loop")
{
    auto g = loop();
    auto w = generated_workload(g, 2, 2, 1, 2);
    auto res = explore_snapshots(share(g), share(w));
    CHECK(res.ok());
    CHECK(res.distinct_snapshots > 1);
    CHECK(res.max_backup_log >= 1);
    for (const auto &v : res.violations)
    {
        MESSAGE(v);
    }
}
