#include "absflow/builtins.hpp"
#include "absflow/engine.hpp"
#include "absflow/oracle.hpp"
#include "absflow/udf.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <sstream>

using namespace absflow;

namespace
{
    std::string without_wall_clock(const std::string &text)
    {
        std::istringstream in(text);
        std::string line;
        std::string out;
        while (std::getline(in, line))
        {
            if (line.rfind("wall_ns", 0) == 0 || line.rfind("throughput", 0) == 0)
            {
                continue;
            }
            out += line + "\n";
        }
        return out;
    }
} // namespace

TEST_CASE("count UDF keeps the running count per word")
{
    const auto &fn = UdfRegistry::builtin().get("count");
    std::vector<OutputPort> ports{{ChannelId{"count", "sink", 0}, TaskKind::Sink}};
    UdfContext ctx{TaskId("count"), ports, nullptr, route_salt(ports)};
    Record a{"a", 1, TaskId("src"), 1, 0};
    auto r = apply_udf(fn, OperatorState{}, &a, ctx);
    CHECK(r.new_state.table == std::map<std::string, std::int64_t>{{"a", 1}});
    REQUIRE(r.outputs.size() == 1);
    CHECK(r.outputs[0].first == ports[0].channel);
    CHECK(r.outputs[0].second.key == "a");
    CHECK(r.outputs[0].second.value == 1);
    CHECK(r.outputs[0].second.seq == 1);
    CHECK(r.outputs[0].second.source == TaskId("src"));
}

TEST_CASE("every builtin UDF is pure")
{
    const auto &reg = UdfRegistry::builtin();
    std::vector<OutputPort> ports{{ChannelId{"t", "x", 0}, TaskKind::Operator},
                                  {ChannelId{"t", "y", 0}, TaskKind::Sink}};
    auto src = SourceWorkload::from_keys({"a", "b"});
    UdfContext ctx{TaskId("t"), ports, &src, route_salt(ports)};
    auto state = OperatorState::parse_literal("a=2,b=5");
    for (const auto &name : reg.names())
    {
        CAPTURE(name);
        const auto &fn = reg.get(name);
        for (std::int64_t value : {0, 1, 3})
        {
            Record in{"a", value, TaskId("s"), 4, 17};
            if (name == "source")
            {
                CHECK(udf_is_pure(fn, state, nullptr, ctx));
            }
            else
            {
                CHECK(udf_is_pure(fn, state, &in, ctx));
            }
        }
    }
    CHECK_THROWS_AS(reg.get("nope"), UnknownUdf);
}

TEST_CASE("operators reject generation and sources reject input")
{
    const auto &reg = UdfRegistry::builtin();
    std::vector<OutputPort> ports{{ChannelId{"t", "x", 0}, TaskKind::Sink}};
    UdfContext ctx{TaskId("t"), ports, nullptr, 0};
    Record in{"a", 1, TaskId("s"), 1, 0};
    CHECK_THROWS_AS(apply_udf(reg.get("count"), {}, nullptr, ctx), UdfFailure);
    CHECK_THROWS_AS(apply_udf(reg.get("source"), {}, &in, ctx), UdfFailure);
}

TEST_CASE("source step emits the next record and advances its offset")
{
    std::vector<TaskSpec> tasks{{TaskId("src"), TaskKind::Source, "source", OperatorState::parse_literal("offset=3")},
                                {TaskId("sink"), TaskKind::Sink, "sink", {}}};
    auto g = make_graph(tasks, {ChannelId{"src", "sink", 0}});
    Engine e(share(g), share(testing::keys_workload({"a", "b", "c", "d", "e"})), testing::config(Protocol::None));
    CHECK(e.task_step(TaskId("src")) == StepOutcome::Processed);
    CHECK(e.task(TaskId("src")).state.offset == 4);
    auto queued = e.channel(ChannelId{"src", "sink", 0}).contents();
    REQUIRE(queued.size() == 1);
    const auto &r = std::get<Record>(queued[0]);
    CHECK(r.seq == 4);
    CHECK(r.key == "d");
}

TEST_CASE("task_step is idle when no input is ready")
{
    Engine e(share(chain3()), share(testing::keys_workload({"a"})), testing::config(Protocol::None));
    CHECK(e.task_step(TaskId("map")) == StepOutcome::Idle);
    CHECK(e.task_step(TaskId("sink")) == StepOutcome::Idle);
    e.channel_block(e.channel_index(ChannelId{"src", "map", 0}));
    e.task_step(TaskId("src"));
    CHECK(e.task_step(TaskId("map")) == StepOutcome::Idle);
    e.channel_unblock(e.channel_index(ChannelId{"src", "map", 0}));
    CHECK(e.task_step(TaskId("map")) == StepOutcome::Processed);
    CHECK(e.task(TaskId("map")).state.table.at("a") == 1);
}

TEST_CASE("broadcast appends behind earlier sends on every output")
{
    std::vector<TaskSpec> tasks{{TaskId("src"), TaskKind::Source, "source", {}},
                                {TaskId("x"), TaskKind::Sink, "sink", {}},
                                {TaskId("y"), TaskKind::Sink, "sink", {}},
                                {TaskId("z"), TaskKind::Sink, "sink", {}}};
    auto g = make_graph(tasks, {ChannelId{"src", "x", 0}, ChannelId{"src", "y", 0}, ChannelId{"src", "z", 0}});
    Engine e(share(g), share(testing::keys_workload({"a", "b", "c", "d", "e", "f"})), testing::config(Protocol::None));
    for (int i = 0; i < 4; ++i)
    {
        e.task_step(TaskId("src"));
    }
    std::map<std::string, std::size_t> before;
    for (const char *t : {"x", "y", "z"})
    {
        before[t] = e.channel(ChannelId{"src", t, 0}).size();
    }
    e.broadcast(TaskId("src"), Barrier{1});
    e.task_step(TaskId("src"));
    for (const char *t : {"x", "y", "z"})
    {
        auto q = e.channel(ChannelId{"src", t, 0}).contents();
        REQUIRE(q.size() >= before[t] + 1);
        CHECK(std::get<Barrier>(q[before[t]]) == Barrier{1});
        for (std::size_t i = 0; i < before[t]; ++i)
        {
            CHECK(is_data(q[i]));
        }
    }

    auto sinks_before = e.in_flight_records();
    e.broadcast(TaskId("x"), Barrier{1});
    CHECK(e.in_flight_records() == sinks_before);
}

TEST_CASE("chain delivers every record in order")
{
    std::vector<std::string> keys;
    for (int i = 0; i < 10; ++i)
    {
        keys.push_back("k" + std::to_string(i));
    }
    Engine e(share(chain3("identity", "sink_log")), share(testing::keys_workload(keys)),
             testing::config(Protocol::None));
    auto report = e.run();
    auto seq = sink_sequence(report.sink_states.at(TaskId("sink")));
    REQUIRE(seq.size() == 10);
    for (int i = 0; i < 10; ++i)
    {
        CHECK(seq[i] == entry_hash(keys[i], 1));
    }
    CHECK(report.sink_records == 10);
}

TEST_CASE("word count over two counters matches sequential counting")
{
    std::vector<std::string> words{"to", "be", "or", "not", "to", "be", "that", "is", "the", "question", "to"};
    std::map<std::string, std::int64_t> expected;
    for (int src = 0; src < 2; ++src)
    {
        for (const auto &w : words)
        {
            ++expected[w];
        }
    }
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
    {
        CAPTURE(seed);
        Engine e(share(wc2()), share(testing::keys_workload(words)), testing::config(Protocol::Abs,
                                                                                   TriggerPolicy::records(3), seed));
        auto report = e.run();
        std::map<std::string, std::int64_t> counted;
        for (const char *t : {"count1", "count2"})
        {
            for (const auto &[w, n] : e.task(TaskId(t)).state.table)
            {
                CHECK_FALSE(counted.contains(w));
                counted[w] = n;
            }
        }
        CHECK(counted == expected);

        std::map<std::string, std::int64_t> latest;
        for (const auto &[entry, mult] : report.sink_outputs())
        {
            latest[entry.first] = std::max(latest[entry.first], entry.second);
            CHECK(mult == 1);
        }
        CHECK(latest == expected);
    }
}

TEST_CASE("deterministic runs are bit-identical")
{
    auto g = share(build_layered_topology(2));
    auto w = share(generated_workload(*g, 2000, 32, 7));
    auto run = [&] {
        MemoryStore store;
        Engine e(g, w, testing::config(Protocol::Abs, TriggerPolicy::records(150), 11), &store);
        auto r = e.run();
        return std::make_tuple(r.digest(), without_wall_clock(r.to_text()), store.files());
    };
    auto a = run();
    auto b = run();
    CHECK(std::get<0>(a) == std::get<0>(b));
    CHECK(std::get<1>(a) == std::get<1>(b));
    CHECK(std::get<2>(a) == std::get<2>(b));

    MemoryStore other;
    Engine e(g, w, testing::config(Protocol::Abs, TriggerPolicy::records(150), 12), &other);
    CHECK(e.run().sink_outputs() == run_oracle(*g, *w).sink_outputs);
}

TEST_CASE("run reports deadlock when the step budget is exhausted")
{
    auto cfg = testing::config(Protocol::None);
    cfg.step_budget = 5;
    Engine e(share(chain3()), share(testing::keys_workload({"a", "b", "c", "d"})), cfg);
    CHECK_THROWS_AS(e.run(), Deadlock);
}

TEST_CASE("run reports deadlock when a channel stays blocked")
{
    Engine e(share(chain3()), share(testing::keys_workload({"a", "b"})), testing::config(Protocol::None));
    e.channel_block(e.channel_index(ChannelId{"src", "map", 0}));
    CHECK_THROWS_AS(e.run(), Deadlock);
}

TEST_CASE("shutdown closes every channel")
{
    Engine e(share(chain3()), share(testing::keys_workload({"a"})), testing::config(Protocol::None));
    e.shutdown();
    CHECK_THROWS_AS(e.channel_send(e.channel_index(ChannelId{"src", "map", 0}), Barrier{1}), ChannelClosed);
}

TEST_CASE("no-snapshot, barrier and synchronous runs produce the same output")
{
    auto g = share(build_layered_topology(2));
    auto w = share(generated_workload(*g, 3000, 50, 3));
    auto oracle = run_oracle(*g, *w);
    for (auto p : {Protocol::None, Protocol::Abs, Protocol::Sync})
    {
        CAPTURE(to_string(p));
        Engine e(g, w, testing::config(p, TriggerPolicy::records(200)));
        auto r = e.run();
        CHECK(r.sink_outputs() == oracle.sink_outputs);
        CHECK(r.sink_digest == oracle.sink_digest);
    }
}
