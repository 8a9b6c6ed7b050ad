#include "absflow/builtins.hpp"

#include <stdexcept>

namespace absflow
{
    namespace
    {
        TaskSpec spec(const std::string &id, TaskKind kind, const std::string &udf)
        {
            return TaskSpec{TaskId(id), kind, udf, {}};
        }

        ChannelId edge(const std::string &from, const std::string &to, std::uint32_t ordinal = 0)
        {
            return ChannelId{TaskId(from), TaskId(to), ordinal};
        }
    } // namespace

    ExecutionGraph chain3(const std::string &map_udf, const std::string &sink_udf)
    {
        return make_graph({spec("src", TaskKind::Source, "source"), spec("map", TaskKind::Operator, map_udf),
                           spec("sink", TaskKind::Sink, sink_udf)},
                          {edge("src", "map"), edge("map", "sink")});
    }

    ExecutionGraph diamond()
    {
        return make_graph({spec("src", TaskKind::Source, "source"), spec("a", TaskKind::Operator, "count"),
                           spec("b", TaskKind::Operator, "count"), spec("sink", TaskKind::Sink, "sink")},
                          {edge("src", "a"), edge("src", "b"), edge("a", "sink"), edge("b", "sink")});
    }

    ExecutionGraph loop()
    {
        return make_graph({spec("src", TaskKind::Source, "source"), spec("head", TaskKind::Operator, "loop_head"),
                           spec("tail", TaskKind::Operator, "loop_tail"), spec("sink", TaskKind::Sink, "sink")},
                          {edge("src", "head"), edge("head", "tail"), edge("tail", "head"), edge("head", "sink")});
    }

    ExecutionGraph double_loop()
    {
        return make_graph({spec("src", TaskKind::Source, "source"), spec("a", TaskKind::Operator, "loop_head"),
                           spec("b", TaskKind::Operator, "identity"), spec("c", TaskKind::Operator, "loop_tail"),
                           spec("sink", TaskKind::Sink, "sink")},
                          {edge("src", "a"), edge("a", "b"), edge("b", "c"), edge("c", "a"), edge("c", "b"),
                           edge("a", "sink")});
    }

    ExecutionGraph wc2()
    {
        std::vector<TaskSpec> tasks{spec("src1", TaskKind::Source, "source"), spec("src2", TaskKind::Source, "source"),
                                    spec("count1", TaskKind::Operator, "count"),
                                    spec("count2", TaskKind::Operator, "count"), spec("sink1", TaskKind::Sink, "sink"),
                                    spec("sink2", TaskKind::Sink, "sink")};
        std::vector<ChannelId> channels{edge("src1", "count1"), edge("src1", "count2"), edge("src2", "count1"),
                                        edge("src2", "count2"), edge("count1", "sink1"), edge("count2", "sink2")};
        return make_graph(std::move(tasks), std::move(channels));
    }

    ExecutionGraph build_layered_topology(std::size_t parallelism, const std::string &sink_udf)
    {
        if (parallelism == 0)
        {
            throw std::invalid_argument("parallelism must be at least 1");
        }
        struct Layer
        {
            const char *name;
            TaskKind kind;
            std::string udf;
            bool shuffle_in;
        };
        const std::vector<Layer> layers{
            {"src", TaskKind::Source, "source", false},  {"count", TaskKind::Operator, "count", true},
            {"map", TaskKind::Operator, "identity", false}, {"sum", TaskKind::Operator, "sum", true},
            {"proj", TaskKind::Operator, "identity", false}, {"sink", TaskKind::Sink, sink_udf, true},
        };
        auto name = [](const Layer &l, std::size_t i) { return std::string(l.name) + std::to_string(i); };
        std::vector<TaskSpec> tasks;
        std::vector<ChannelId> channels;
        for (std::size_t l = 0; l < layers.size(); ++l)
        {
            for (std::size_t i = 0; i < parallelism; ++i)
            {
                tasks.push_back(spec(name(layers[l], i), layers[l].kind, layers[l].udf));
                if (l == 0)
                {
                    continue;
                }
                if (layers[l].shuffle_in)
                {
                    for (std::size_t j = 0; j < parallelism; ++j)
                    {
                        channels.push_back(edge(name(layers[l - 1], j), name(layers[l], i)));
                    }
                }
                else
                {
                    channels.push_back(edge(name(layers[l - 1], i), name(layers[l], i)));
                }
            }
        }
        return make_graph(std::move(tasks), std::move(channels));
    }

    ExecutionGraph builtin_topology(std::string_view name)
    {
        if (name == "chain3")
        {
            return chain3();
        }
        if (name == "diamond")
        {
            return diamond();
        }
        if (name == "loop")
        {
            return loop();
        }
        if (name == "double_loop")
        {
            return double_loop();
        }
        if (name == "wc2")
        {
            return wc2();
        }
        if (name == "layered")
        {
            return build_layered_topology(2);
        }
        if (name.rfind("layered:", 0) == 0)
        {
            auto rest = std::string(name.substr(8));
            std::string sink = "sink";
            if (auto colon = rest.find(':'); colon != std::string::npos)
            {
                if (rest.substr(colon + 1) != "digest")
                {
                    throw std::invalid_argument("unknown layered variant: " + std::string(name));
                }
                sink = "sink_digest";
                rest = rest.substr(0, colon);
            }
            return build_layered_topology(std::stoul(rest), sink);
        }
        throw std::invalid_argument("unknown builtin topology: " + std::string(name));
    }

    std::vector<std::string> builtin_topology_names()
    {
        return {"chain3", "diamond", "loop", "double_loop", "wc2", "layered:P", "layered:P:digest"};
    }

    Workload generated_workload(const ExecutionGraph &graph, std::uint64_t total, std::uint32_t keys,
                                std::uint64_t seed, std::int64_t value)
    {
        Workload w;
        auto sources = graph.sources();
        if (sources.empty())
        {
            return w;
        }
        auto per = total / sources.size();
        auto extra = total % sources.size();
        for (std::size_t i = 0; i < sources.size(); ++i)
        {
            SourceWorkload::Generator g;
            g.count = per + (i < extra ? 1 : 0);
            g.keys = keys;
            g.seed = mix64(seed + i);
            g.value = value;
            w.sources[graph.tasks()[sources[i]].id] = SourceWorkload::generated(g);
        }
        return w;
    }

    std::shared_ptr<const ExecutionGraph> share(ExecutionGraph graph)
    {
        return std::make_shared<const ExecutionGraph>(std::move(graph));
    }

    std::shared_ptr<const Workload> share(Workload workload)
    {
        return std::make_shared<const Workload>(std::move(workload));
    }
} // namespace absflow
