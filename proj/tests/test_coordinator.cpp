#include "absflow/abs_protocol.hpp"
#include "absflow/builtins.hpp"
#include "absflow/coordinator.hpp"
#include "absflow/engine.hpp"
#include "absflow/store.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace absflow;

namespace
{
    struct RecordingFabric final : ControlFabric
    {
        void send_control(std::size_t task, Message message) override { sent.emplace_back(task, std::move(message)); }
        std::vector<std::pair<std::size_t, Message>> sent;
    };

    TaskSnapshot contribution(const TaskId &id, std::uint64_t epoch, const char *literal = "")
    {
        return TaskSnapshot{id, epoch, OperatorState::parse_literal(literal), {}};
    }
} // namespace

TEST_CASE("epoch 1 on wc2 sends one barrier to each source")
{
    auto g = share(wc2());
    Coordinator c(g, TriggerPolicy::never(), nullptr);
    RecordingFabric fabric;
    c.inject_barriers(1, fabric, 0, 0);
    REQUIRE(fabric.sent.size() == 2);
    auto sources = g->sources();
    for (std::size_t i = 0; i < 2; ++i)
    {
        CHECK(fabric.sent[i].first == sources[i]);
        CHECK(std::get<Barrier>(fabric.sent[i].second) == Barrier{1});
    }
    CHECK(c.in_flight() == std::optional<std::uint64_t>{1});
    CHECK(c.last_injected() == 1);
}

TEST_CASE("a second epoch is refused while one is in flight or out of order")
{
    auto g = share(chain3());
    Coordinator c(g, TriggerPolicy::never(), nullptr);
    RecordingFabric fabric;
    CHECK_THROWS_AS(c.inject_barriers(2, fabric, 0, 0), EpochOverlap);
    c.inject_barriers(1, fabric, 0, 0);
    CHECK_THROWS_AS(c.inject_barriers(2, fabric, 0, 0), EpochOverlap);
    CHECK(fabric.sent.size() == 1);
}

TEST_CASE("chain3 epoch completes after three contributions and is persisted")
{
    auto g = share(chain3());
    MemoryStore store;
    Coordinator c(g, TriggerPolicy::never(), &store);
    RecordingFabric fabric;
    c.inject_barriers(1, fabric, 5, 2);

    CHECK_FALSE(c.collect(contribution(TaskId("src"), 1, "offset=3"), 6).is_complete());
    CHECK_FALSE(c.collect(contribution(TaskId("map"), 1, "a=2"), 7).is_complete());
    CHECK_THROWS_AS(c.collect(contribution(TaskId("map"), 1), 8), DuplicateContribution);
    auto done = c.collect(contribution(TaskId("sink"), 1, "a=1"), 9);
    REQUIRE(done.is_complete());

    const auto &s = *done.complete;
    CHECK(s.epoch == 1);
    CHECK(s.task_states.size() == 3);
    CHECK(s.source_offsets == std::map<TaskId, std::uint64_t>{{TaskId("src"), 3}});
    CHECK(s.back_edge_logs.empty());
    CHECK(store.latest_complete() == std::optional<std::uint64_t>{1});
    CHECK(store.load_latest() == s);
    CHECK_FALSE(c.in_flight());
    CHECK(c.latest_complete() == 1);

    REQUIRE(c.metrics().size() == 1);
    CHECK(c.metrics()[0].injected_at == 5);
    CHECK(c.metrics()[0].completed_at == 9);
    CHECK(c.metrics()[0].in_flight_at_barrier == 2);
    CHECK(c.metrics()[0].size_bytes == s.size_bytes);
}

TEST_CASE("contributions for other epochs or tasks are rejected")
{
    auto g = share(chain3());
    Coordinator c(g, TriggerPolicy::never(), nullptr);
    RecordingFabric fabric;
    CHECK_THROWS_AS(c.collect(contribution(TaskId("src"), 1), 0), UnknownEpoch);
    c.inject_barriers(1, fabric, 0, 0);
    CHECK_THROWS_AS(c.collect(contribution(TaskId("src"), 2), 0), UnknownEpoch);
    CHECK_THROWS_AS(c.collect(contribution(TaskId("nope"), 1), 0), std::invalid_argument);
}

TEST_CASE("record interval drives epochs 1..n in order")
{
    auto g = share(chain3());
    auto w = share(generated_workload(*g, 100, 4));
    MemoryStore store;
    Engine e(g, w, testing::config(Protocol::Abs, TriggerPolicy::records(10)), &store);
    auto report = e.run();
    REQUIRE(report.epochs.size() >= 5);
    for (std::size_t i = 0; i < report.epochs.size(); ++i)
    {
        CHECK(report.epochs[i].epoch == i + 1);
        CHECK(report.epochs[i].completed_at >= report.epochs[i].injected_at);
        if (i > 0)
        {
            CHECK(report.epochs[i].injected_at >= report.epochs[i - 1].completed_at);
        }
    }
    CHECK(store.epochs().size() == report.epochs.size());
}

TEST_CASE("trigger policy parsing")
{
    CHECK(TriggerPolicy::parse("none").kind == TriggerPolicy::Kind::Never);
    CHECK(TriggerPolicy::parse("").kind == TriggerPolicy::Kind::Never);
    CHECK(TriggerPolicy::parse("500").every == 500);
    CHECK(TriggerPolicy::parse("500r").kind == TriggerPolicy::Kind::Records);
    CHECK(TriggerPolicy::parse("500records").every == 500);
    auto ms = TriggerPolicy::parse("20ms");
    CHECK(ms.kind == TriggerPolicy::Kind::Millis);
    CHECK(ms.every == 20);
    CHECK(ms.str() == "20ms");
    CHECK(TriggerPolicy::records(7).str() == "7r");
    CHECK_THROWS_AS(TriggerPolicy::parse("0"), std::invalid_argument);
    CHECK_THROWS_AS(TriggerPolicy::parse("ms"), std::invalid_argument);
    CHECK_THROWS_AS(TriggerPolicy::parse("5s"), std::invalid_argument);
}

TEST_CASE("trigger fires only after the interval and not while an epoch is in flight")
{
    auto g = share(chain3());
    Coordinator c(g, TriggerPolicy::records(10), nullptr);
    CHECK_FALSE(c.due(9, 0));
    CHECK(c.due(10, 0));
    RecordingFabric fabric;
    c.inject_barriers(1, fabric, 0, 0);
    CHECK(c.pending(10, 0));
    CHECK_FALSE(c.due(10, 0));
    c.arm(10, 0);
    CHECK_FALSE(c.pending(19, 0));
}
