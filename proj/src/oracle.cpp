#include "absflow/oracle.hpp"

#include "absflow/report.hpp"

#include <deque>

namespace absflow
{
    std::map<TaskId, OperatorState> prefix_replay_oracle(const ExecutionGraph &graph, const Workload &workload,
                                                         const SourceCut &cut, const UdfRegistry &registry)
    {
        const auto &specs = graph.tasks();
        const auto &channels = graph.channels();
        std::vector<OperatorState> states;
        std::vector<std::vector<OutputPort>> ports(specs.size());
        std::vector<std::vector<std::uint64_t>> salts(specs.size());
        for (std::size_t i = 0; i < specs.size(); ++i)
        {
            states.push_back(specs[i].initial_state);
            for (auto c : graph.outputs_of(i))
            {
                ports[i].push_back(OutputPort{channels[c], graph.task(channels[c].to).kind});
                salts[i].push_back(channel_salt(channels[c]));
            }
        }
        std::vector<std::deque<Record>> queues(channels.size());
        std::vector<Emit> emits;
        std::vector<std::pair<std::uint32_t, Record>> stamped;

        auto fire = [&](std::size_t t, const Record *input) {
            const auto &spec = specs[t];
            const SourceWorkload *w = spec.kind == TaskKind::Source ? &workload.for_source(spec.id) : nullptr;
            UdfContext ctx{spec.id, ports[t], w, route_salt(ports[t])};
            emits.clear();
            registry.get(spec.udf)(states[t], input, ctx, emits);
            stamp_all(emits, input, spec.id, states[t].offset, salts[t], stamped);
            const auto &outs = graph.outputs_of(t);
            for (auto &[port, rec] : stamped)
            {
                queues[outs[port]].push_back(std::move(rec));
            }
        };

        auto order = topological_order(graph);
        for (const auto &id : order)
        {
            auto t = graph.task_index(id);
            if (specs[t].kind != TaskKind::Source)
            {
                continue;
            }
            auto it = cut.find(id);
            std::uint64_t until = it == cut.end() ? 0 : it->second;
            while (states[t].offset < until)
            {
                fire(t, nullptr);
            }
        }

        bool moved = true;
        while (moved)
        {
            moved = false;
            for (const auto &id : order)
            {
                auto t = graph.task_index(id);
                for (auto c : graph.inputs_of(t))
                {
                    while (!queues[c].empty())
                    {
                        auto rec = std::move(queues[c].front());
                        queues[c].pop_front();
                        moved = true;
                        if (!states[t].cursor.admit(rec.source, rec.lineage, rec.seq))
                        {
                            continue;
                        }
                        fire(t, &rec);
                    }
                }
            }
        }

        std::map<TaskId, OperatorState> out;
        for (std::size_t i = 0; i < specs.size(); ++i)
        {
            out.emplace(specs[i].id, std::move(states[i]));
        }
        return out;
    }

    SourceCut full_cut(const ExecutionGraph &graph, const Workload &workload)
    {
        SourceCut cut;
        for (auto s : graph.sources())
        {
            const auto &id = graph.tasks()[s].id;
            cut[id] = workload.for_source(id).size();
        }
        return cut;
    }

    OracleResult run_oracle(const ExecutionGraph &graph, const Workload &workload, const UdfRegistry &registry)
    {
        OracleResult r;
        r.states = prefix_replay_oracle(graph, workload, full_cut(graph, workload), registry);
        RunReport sinks;
        for (auto s : graph.sinks())
        {
            const auto &id = graph.tasks()[s].id;
            sinks.sink_states.emplace(id, r.states.at(id));
        }
        sinks.finalize_sinks();
        r.sink_outputs = sinks.sink_outputs();
        r.sink_records = sinks.sink_records;
        r.sink_digest = sinks.sink_digest;
        return r;
    }
} // namespace absflow
