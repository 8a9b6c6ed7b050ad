#include "absflow/random_dag.hpp"

#include "absflow/builtins.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace absflow
{
    RandomCase random_dag_case(std::uint64_t seed, std::size_t max_tasks, std::uint64_t max_records,
                               std::uint32_t max_epochs)
    {
        std::mt19937_64 rng(seed);
        auto below = [&](std::uint64_t n) { return n <= 1 ? 0 : rng() % n; };

        std::size_t n = 3 + below(std::max<std::size_t>(max_tasks, 3) - 2);
        std::size_t nsrc = n >= 5 ? 1 + below(2) : 1;
        std::size_t nsink = n >= 6 ? 1 + below(2) : 1;
        std::size_t nops = n - nsrc - nsink;

        static const char *const kOps[] = {"identity", "count", "sum", "filter_key"};
        std::vector<TaskSpec> tasks;
        for (std::size_t i = 0; i < nsrc; ++i)
        {
            tasks.push_back(TaskSpec{TaskId("s" + std::to_string(i)), TaskKind::Source, "source", {}});
        }
        for (std::size_t i = 0; i < nops; ++i)
        {
            tasks.push_back(TaskSpec{TaskId("o" + std::to_string(i)), TaskKind::Operator, kOps[below(4)], {}});
        }
        for (std::size_t i = 0; i < nsink; ++i)
        {
            tasks.push_back(TaskSpec{TaskId("k" + std::to_string(i)), TaskKind::Sink, "sink", {}});
        }

        std::set<ChannelId> edges;
        std::vector<bool> has_output(n, false);
        auto add = [&](std::size_t from, std::size_t to) {
            ChannelId c{tasks[from].id, tasks[to].id, 0};
            if (edges.contains(c))
            {
                return;
            }
            edges.insert(c);
            has_output[from] = true;
            if (below(8) == 0)
            {
                edges.insert(ChannelId{tasks[from].id, tasks[to].id, 1});
            }
        };
        for (std::size_t j = nsrc; j < n; ++j)
        {
            std::size_t candidates = std::min(j, nsrc + nops);
            auto inputs = 1 + below(std::min<std::size_t>(3, candidates));
            for (std::size_t k = 0; k < inputs; ++k)
            {
                add(below(candidates), j);
            }
        }
        for (std::size_t i = 0; i < nsrc + nops; ++i)
        {
            if (!has_output[i])
            {
                auto first = std::max(i + 1, nsrc);
                add(i, first + below(n - first));
            }
        }

        RandomCase c;
        c.seed = seed;
        c.graph = make_graph(std::move(tasks), std::vector<ChannelId>(edges.begin(), edges.end()));
        c.records = 1 + below(max_records);
        auto keys = static_cast<std::uint32_t>(1 + below(16));
        c.workload = generated_workload(c.graph, c.records, keys, seed);
        auto epochs = 1 + below(max_epochs);
        c.trigger = TriggerPolicy::records(std::max<std::uint64_t>(1, c.records / (epochs + 1)));
        return c;
    }
} // namespace absflow
