#include "absflow/builtins.hpp"
#include "absflow/graph.hpp"
#include "absflow/random_dag.hpp"
#include "absflow/udf.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace absflow;

namespace
{
    TaskSpec task(const char *id, TaskKind kind, const char *udf)
    {
        return TaskSpec{TaskId(id), kind, udf, {}};
    }

    ChannelId ch(const char *from, const char *to, std::uint32_t ordinal = 0)
    {
        return ChannelId{TaskId(from), TaskId(to), ordinal};
    }

    /// Every permutation of the tasks consistent with channels minus back-edges.
    std::vector<std::vector<TaskId>> all_orders(const ExecutionGraph &g)
    {
        std::vector<std::size_t> perm(g.tasks().size());
        for (std::size_t i = 0; i < perm.size(); ++i)
        {
            perm[i] = i;
        }
        std::vector<std::vector<TaskId>> out;
        do
        {
            std::vector<std::size_t> pos(perm.size());
            for (std::size_t i = 0; i < perm.size(); ++i)
            {
                pos[perm[i]] = i;
            }
            bool ok = true;
            for (const auto &c : g.channels())
            {
                if (!g.back_edges().contains(c) && pos[g.task_index(c.from)] > pos[g.task_index(c.to)])
                {
                    ok = false;
                }
            }
            if (ok)
            {
                std::vector<TaskId> order;
                for (auto i : perm)
                {
                    order.push_back(g.tasks()[i].id);
                }
                out.push_back(order);
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return out;
    }
} // namespace

TEST_CASE("validate accepts the chain")
{
    CHECK(validate(chain3()).ok());
}

TEST_CASE("validate names an unknown endpoint")
{
    ExecutionGraph g({task("src", TaskKind::Source, "source"), task("sink", TaskKind::Sink, "sink")},
                     {ch("src", "sink"), ch("src", "x")});
    auto r = validate(g);
    REQUIRE_FALSE(r.ok());
    CHECK(std::any_of(r.violations.begin(), r.violations.end(),
                      [](const std::string &v) { return v.rfind("unknown endpoint x", 0) == 0; }));
}

TEST_CASE("validate reports missing sources and sinks and misplaced channels")
{
    ExecutionGraph no_sink({task("src", TaskKind::Source, "source"), task("op", TaskKind::Operator, "identity")},
                           {ch("src", "op")});
    CHECK_FALSE(validate(no_sink).ok());

    ExecutionGraph source_with_input({task("a", TaskKind::Source, "source"), task("b", TaskKind::Source, "source"),
                                      task("k", TaskKind::Sink, "sink")},
                                     {ch("a", "b"), ch("b", "k")});
    CHECK_FALSE(validate(source_with_input).ok());

    ExecutionGraph sink_with_output({task("s", TaskKind::Source, "source"), task("k", TaskKind::Sink, "sink"),
                                     task("k2", TaskKind::Sink, "sink")},
                                    {ch("s", "k"), ch("k", "k2")});
    CHECK_FALSE(validate(sink_with_output).ok());

    ExecutionGraph duplicate({task("s", TaskKind::Source, "source"), task("k", TaskKind::Sink, "sink")},
                             {ch("s", "k"), ch("s", "k")});
    CHECK_FALSE(validate(duplicate).ok());
}

TEST_CASE("validate checks UDF registration")
{
    ExecutionGraph g({task("s", TaskKind::Source, "source"), task("k", TaskKind::Sink, "no-such-udf")},
                     {ch("s", "k")});
    CHECK_FALSE(validate(g, UdfRegistry::builtin()).ok());
    CHECK_THROWS_AS(make_graph(g.tasks(), g.channels()), GraphError);
}

TEST_CASE("loop topology validates and its only back-edge is tail to head")
{
    auto g = loop();
    CHECK(validate(g).ok());
    CHECK(g.back_edges() == std::set<ChannelId>{ch("tail", "head")});
    CHECK(testing::acyclic(g.tasks(), testing::without(g.channels(), g.back_edges())));
    CHECK_FALSE(testing::acyclic(g.tasks(), g.channels()));
}

TEST_CASE("find_back_edges on acyclic graphs is empty and deterministic")
{
    auto g = chain3();
    CHECK(find_back_edges(g.tasks(), g.channels()).empty());
    for (std::uint64_t seed = 1; seed <= 200; ++seed)
    {
        CAPTURE(seed);
        auto c = random_dag_case(seed);
        CHECK(find_back_edges(c.graph.tasks(), c.graph.channels()).empty());
    }
    auto d = double_loop();
    CHECK(find_back_edges(d.tasks(), d.channels()) == find_back_edges(d.tasks(), d.channels()));
}

TEST_CASE("double loop back-edges form a minimal cycle-breaking set")
{
    auto g = double_loop();
    auto found = find_back_edges(g.tasks(), g.channels());
    CHECK(found == std::set<ChannelId>{ch("c", "a"), ch("c", "b")});

    const auto &all = g.channels();
    auto breaks_cycles = [&](const std::set<ChannelId> &removed) {
        return testing::acyclic(g.tasks(), testing::without(all, removed));
    };
    REQUIRE(breaks_cycles(found));
    std::vector<ChannelId> members(found.begin(), found.end());
    for (std::size_t mask = 0; mask + 1 < (1u << members.size()); ++mask)
    {
        std::set<ChannelId> subset;
        for (std::size_t i = 0; i < members.size(); ++i)
        {
            if ((mask >> i) & 1u)
            {
                subset.insert(members[i]);
            }
        }
        CHECK_FALSE(breaks_cycles(subset));
    }
}

TEST_CASE("find_back_edges rejects unreachable tasks")
{
    std::vector<TaskSpec> tasks{task("s", TaskKind::Source, "source"), task("a", TaskKind::Operator, "identity"),
                                task("b", TaskKind::Operator, "identity"), task("k", TaskKind::Sink, "sink")};
    std::vector<ChannelId> channels{ch("s", "k"), ch("a", "b"), ch("b", "a"), ch("b", "k")};
    CHECK_THROWS_AS(find_back_edges(tasks, channels), UnreachableTask);
}

TEST_CASE("random cyclic graphs reduce to a DAG")
{
    for (std::uint64_t seed = 1; seed <= 200; ++seed)
    {
        CAPTURE(seed);
        auto c = random_dag_case(seed);
        std::mt19937_64 rng(seed);
        auto tasks = c.graph.tasks();
        auto channels = c.graph.channels();
        std::vector<std::size_t> ops;
        for (std::size_t i = 0; i < tasks.size(); ++i)
        {
            if (tasks[i].kind == TaskKind::Operator)
            {
                ops.push_back(i);
            }
        }
        if (ops.size() < 2)
        {
            continue;
        }
        for (int k = 0; k < 3; ++k)
        {
            auto from = ops[rng() % ops.size()];
            auto to = ops[rng() % ops.size()];
            ChannelId extra{tasks[from].id, tasks[to].id, 7};
            if (std::find(channels.begin(), channels.end(), extra) == channels.end())
            {
                channels.push_back(extra);
            }
        }
        auto l = find_back_edges(tasks, channels);
        CHECK(testing::acyclic(tasks, testing::without(channels, l)));
        CHECK(l == find_back_edges(tasks, channels));
    }
}

TEST_CASE("topological orders")
{
    CHECK(topological_order(chain3()) == std::vector<TaskId>{"src", "map", "sink"});
    CHECK(topological_order(diamond()) == std::vector<TaskId>{"src", "a", "b", "sink"});

    for (const auto &g : {loop(), double_loop(), diamond(), wc2()})
    {
        auto order = topological_order(g);
        auto valid = all_orders(g);
        REQUIRE_FALSE(valid.empty());
        CHECK(std::find(valid.begin(), valid.end(), order) != valid.end());
        // Lowest ordinal first among ready tasks gives the smallest order by ordinal.
        auto by_ordinal = [&](const std::vector<TaskId> &a, const std::vector<TaskId> &b) {
            return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                                [&](const TaskId &x, const TaskId &y) {
                                                    return g.task_index(x) < g.task_index(y);
                                                });
        };
        CHECK(order == *std::min_element(valid.begin(), valid.end(), by_ordinal));
    }
    CHECK(topological_order(loop()) == std::vector<TaskId>{"src", "head", "tail", "sink"});
}

TEST_CASE("topological order detects cycles when back-edges are not applied")
{
    auto l = loop();
    ExecutionGraph raw(l.tasks(), l.channels());
    CHECK_THROWS_AS(topological_order(raw), CycleDetected);
}

TEST_CASE("layered topology shape")
{
    auto one = build_layered_topology(1);
    CHECK(one.tasks().size() == 6);
    CHECK(one.channels().size() == 5);
    CHECK(topological_order(one).size() == 6);

    for (std::size_t p : {2, 3, 4})
    {
        CAPTURE(p);
        auto g = build_layered_topology(p);
        CHECK(g.tasks().size() == 6 * p);
        CHECK(validate(g).ok());
        CHECK(g.back_edges().empty());
        std::map<std::pair<std::size_t, std::size_t>, std::size_t> between;
        for (const auto &c : g.channels())
        {
            between[{g.task_index(c.from) / p, g.task_index(c.to) / p}]++;
        }
        std::size_t shuffles = 0;
        for (const auto &[layers, n] : between)
        {
            CHECK(layers.second == layers.first + 1);
            CHECK((n == p * p || n == p));
            shuffles += n == p * p ? 1 : 0;
        }
        CHECK(shuffles == 3);
        CHECK(between.size() == 5);
    }
    CHECK_THROWS(build_layered_topology(0));
}
