#include "absflow/task.hpp"

#include <stdexcept>
#include <string>

namespace absflow
{
    std::string_view to_string(Protocol p) noexcept
    {
        switch (p)
        {
        case Protocol::None:
            return "none";
        case Protocol::Abs:
            return "abs";
        case Protocol::Sync:
            return "sync";
        }
        return "?";
    }

    Protocol parse_protocol(std::string_view text)
    {
        if (text == "none")
        {
            return Protocol::None;
        }
        if (text == "abs")
        {
            return Protocol::Abs;
        }
        if (text == "sync")
        {
            return Protocol::Sync;
        }
        throw std::invalid_argument("unknown protocol: " + std::string(text));
    }

    std::vector<TaskRuntime> build_tasks(const ExecutionGraph &graph, const Workload &workload,
                                         const UdfRegistry &registry)
    {
        std::vector<TaskRuntime> out;
        out.reserve(graph.tasks().size());
        const auto &channels = graph.channels();
        for (std::size_t i = 0; i < graph.tasks().size(); ++i)
        {
            const auto &spec = graph.tasks()[i];
            TaskRuntime t;
            t.index = i;
            t.id = spec.id;
            t.kind = spec.kind;
            t.in_channels = graph.inputs_of(i);
            for (auto c : t.in_channels)
            {
                t.in_ids.push_back(channels[c]);
            }
            t.out_channels = graph.outputs_of(i);
            for (auto c : t.out_channels)
            {
                const auto &id = channels[c];
                t.ports.push_back(OutputPort{id, graph.task(id.to).kind});
                t.salts.push_back(channel_salt(id));
            }
            t.routing = route_salt(t.ports);
            t.control_channel = channels.size() + i;
            t.udf = registry.share(spec.udf);
            if (t.is_source())
            {
                t.workload = &workload.for_source(spec.id);
                t.source_total = t.workload->size();
            }
            t.state = spec.initial_state;
            reset_book(t, graph, graph.cyclic(), 0);
            out.push_back(std::move(t));
        }
        return out;
    }

    void reset_book(TaskRuntime &task, const ExecutionGraph &graph, bool cyclic, std::uint64_t completed_epoch)
    {
        std::set<std::size_t> loops;
        if (cyclic)
        {
            for (std::size_t s = 0; s < task.in_channels.size(); ++s)
            {
                if (graph.is_back_edge(task.in_channels[s]))
                {
                    loops.insert(s);
                }
            }
        }
        task.book = make_book(std::move(loops), completed_epoch);
    }

    namespace
    {
        void emit_stamped(TaskRuntime &task, TaskIo &io, StepScratch &scratch)
        {
            for (auto &[port, rec] : scratch.stamped)
            {
                io.send(task.out_channels[port], Message(std::move(rec)));
            }
        }

        void apply_effects(TaskRuntime &task, std::vector<Effect> &effects, TaskIo &io)
        {
            for (auto &e : effects)
            {
                io.on_effect(task.index, e);
                if (auto *b = std::get_if<BlockInput>(&e))
                {
                    io.set_blocked(task.in_channels[b->input], true);
                }
                else if (auto *bc = std::get_if<BroadcastBarrier>(&e))
                {
                    for (auto c : task.out_channels)
                    {
                        io.send(c, Message(bc->barrier));
                    }
                }
                else if (auto *s = std::get_if<EmitSnapshot>(&e))
                {
                    io.notify(std::move(s->snapshot));
                }
                else
                {
                    for (auto c : task.in_channels)
                    {
                        io.set_blocked(c, false);
                    }
                }
            }
        }

        StepKind on_record(TaskRuntime &task, std::size_t slot, Record &rec, const TaskSettings &settings, TaskIo &io,
                           StepScratch &scratch)
        {
            if (task.is_source())
            {
                throw ProtocolError("source " + task.id.str() + " received a data record");
            }
            if (!task.state.cursor.admit(rec.source, rec.lineage, rec.seq))
            {
                ++task.discarded;
                return StepKind::Discarded;
            }
            if (settings.protocol == Protocol::Abs && settings.cyclic)
            {
                on_data(task.book, slot, rec, ProtocolContext{task.id, task.in_ids, task.state});
            }
            scratch.emits.clear();
            UdfContext ctx{task.id, task.ports, task.workload, task.routing};
            (*task.udf)(task.state, &rec, ctx, scratch.emits);
            stamp_all(scratch.emits, &rec, task.id, 0, task.salts, scratch.stamped);
            ++task.processed;
            emit_stamped(task, io, scratch);
            return StepKind::Data;
        }
    } // namespace

    StepKind handle_message(TaskRuntime &task, std::size_t slot, Message message, const TaskSettings &settings,
                            TaskIo &io, StepScratch &scratch)
    {
        ++task.steps;
        if (auto *rec = std::get_if<Record>(&message))
        {
            return on_record(task, slot, *rec, settings, io, scratch);
        }
        if (auto *b = std::get_if<Barrier>(&message))
        {
            if (settings.protocol != Protocol::Abs)
            {
                throw ProtocolError("barrier delivered to " + task.id.str() + " outside the barrier protocol");
            }
            ProtocolContext ctx{task.id, task.in_ids, task.state};
            auto effects = settings.cyclic ? on_barrier_cyclic(task.book, slot, *b, ctx)
                                           : on_barrier_acyclic(task.book, slot, *b, ctx);
            apply_effects(task, effects, io);
            return StepKind::Marker;
        }
        const auto &c = std::get<Control>(message);
        switch (c.kind)
        {
        case ControlKind::Halt:
            task.halted = true;
            io.notify(HaltAck{task.index});
            break;
        case ControlKind::Resume:
            task.halted = false;
            io.notify(ResumeAck{task.index});
            break;
        case ControlKind::SnapshotRequest:
            io.notify(TaskSnapshot{task.id, c.epoch, task.state, {}});
            break;
        }
        return StepKind::Control;
    }

    StepKind generate(TaskRuntime &task, TaskIo &io, StepScratch &scratch)
    {
        if (!task.can_generate())
        {
            return StepKind::Idle;
        }
        ++task.steps;
        scratch.emits.clear();
        UdfContext ctx{task.id, task.ports, task.workload, task.routing};
        (*task.udf)(task.state, nullptr, ctx, scratch.emits);
        stamp_all(scratch.emits, nullptr, task.id, task.state.offset, task.salts, scratch.stamped);
        ++task.processed;
        emit_stamped(task, io, scratch);
        return StepKind::Generated;
    }
} // namespace absflow
