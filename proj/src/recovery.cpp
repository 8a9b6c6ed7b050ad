#include "absflow/recovery.hpp"

namespace absflow
{
    DedupDecision dedup_filter(DedupCursor &cursor, const Record &record)
    {
        return cursor.admit(record.source, record.lineage, record.seq) ? DedupDecision::Keep : DedupDecision::Discard;
    }

    void check_restorable(const ExecutionGraph &graph, const GlobalSnapshot &snapshot)
    {
        if (snapshot.task_states.size() != graph.tasks().size())
        {
            throw GraphMismatch("snapshot of epoch " + std::to_string(snapshot.epoch) + " has " +
                                std::to_string(snapshot.task_states.size()) + " tasks, graph has " +
                                std::to_string(graph.tasks().size()));
        }
        for (const auto &t : graph.tasks())
        {
            if (!snapshot.task_states.contains(t.id))
            {
                throw GraphMismatch("snapshot has no state for task " + t.id.str());
            }
        }
        for (const auto &[c, _] : snapshot.back_edge_logs)
        {
            if (!graph.back_edges().contains(c))
            {
                throw GraphMismatch("snapshot logs channel " + c.str() + " which is not a back-edge");
            }
        }
    }

    std::vector<std::vector<Record>> replay_queues(const ExecutionGraph &graph, const GlobalSnapshot &snapshot)
    {
        std::vector<std::vector<Record>> out(graph.channels().size());
        for (const auto &[c, log] : snapshot.back_edge_logs)
        {
            auto idx = graph.find_channel(c);
            if (!idx)
            {
                throw GraphMismatch("snapshot logs unknown channel " + c.str());
            }
            out[*idx] = log;
        }
        return out;
    }

    std::vector<OperatorState> restored_states(const ExecutionGraph &graph, const GlobalSnapshot *snapshot)
    {
        std::vector<OperatorState> out;
        out.reserve(graph.tasks().size());
        for (const auto &t : graph.tasks())
        {
            if (snapshot == nullptr)
            {
                out.push_back(t.initial_state);
                continue;
            }
            auto state = snapshot->task_states.at(t.id);
            if (t.kind == TaskKind::Source)
            {
                auto it = snapshot->source_offsets.find(t.id);
                if (it != snapshot->source_offsets.end())
                {
                    state.offset = it->second;
                }
            }
            out.push_back(std::move(state));
        }
        return out;
    }
} // namespace absflow
