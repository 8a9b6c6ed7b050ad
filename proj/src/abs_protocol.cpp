#include "absflow/abs_protocol.hpp"

#include <algorithm>

namespace absflow
{
    namespace
    {
        void check_epoch(AbsTaskBook &book, const Barrier &barrier)
        {
            if (book.active_epoch)
            {
                if (barrier.epoch != *book.active_epoch)
                {
                    throw UnknownEpoch(barrier.epoch);
                }
                return;
            }
            if (barrier.epoch != book.completed_epoch + 1)
            {
                throw UnknownEpoch(barrier.epoch);
            }
            book.active_epoch = barrier.epoch;
        }

        bool is_source(const ProtocolContext &ctx) noexcept { return ctx.inputs.empty(); }

        void check_slot(std::size_t input, const ProtocolContext &ctx)
        {
            if (input == kNilInput ? !is_source(ctx) : input >= ctx.inputs.size())
            {
                throw ProtocolError("task " + ctx.task.str() + " got a barrier on an input it does not have");
            }
        }

        void finish(AbsTaskBook &book, std::uint64_t epoch)
        {
            book.completed_epoch = epoch;
            book.active_epoch.reset();
        }
    } // namespace

    AbsTaskBook make_book(std::set<std::size_t> loop_inputs, std::uint64_t completed_epoch)
    {
        AbsTaskBook book;
        book.loop_inputs = std::move(loop_inputs);
        book.completed_epoch = completed_epoch;
        return book;
    }

    std::vector<Effect> on_barrier_acyclic(AbsTaskBook &book, std::size_t input, const Barrier &barrier,
                                           const ProtocolContext &ctx)
    {
        check_slot(input, ctx);
        check_epoch(book, barrier);
        std::vector<Effect> effects;
        if (input != kNilInput)
        {
            if (!book.blocked_inputs.insert(input).second)
            {
                throw ProtocolError("task " + ctx.task.str() + " got a second barrier on " + ctx.inputs[input].str());
            }
            effects.emplace_back(BlockInput{input});
        }
        if (book.blocked_inputs.size() == ctx.inputs.size())
        {
            book.blocked_inputs.clear();
            effects.emplace_back(BroadcastBarrier{barrier});
            effects.emplace_back(EmitSnapshot{TaskSnapshot{ctx.task, barrier.epoch, ctx.state, {}}});
            effects.emplace_back(UnblockAll{});
            finish(book, barrier.epoch);
        }
        return effects;
    }

    std::vector<Effect> on_barrier_cyclic(AbsTaskBook &book, std::size_t input, const Barrier &barrier,
                                          const ProtocolContext &ctx)
    {
        check_slot(input, ctx);
        check_epoch(book, barrier);
        std::vector<Effect> effects;
        if (!book.marked.insert(input).second)
        {
            throw ProtocolError("task " + ctx.task.str() + " got a second barrier on one input");
        }
        const bool loop = book.loop_inputs.contains(input);
        if (input != kNilInput && !loop)
        {
            book.blocked_inputs.insert(input);
            effects.emplace_back(BlockInput{input});
        }

        const std::size_t all = is_source(ctx) ? 1 : ctx.inputs.size();
        const std::size_t regular = all - book.loop_inputs.size();
        std::size_t regular_marked = 0;
        for (auto m : book.marked)
        {
            regular_marked += book.loop_inputs.contains(m) ? 0 : 1;
        }

        if (!book.logging && regular_marked == regular)
        {
            book.state_copy = ctx.state;
            book.logging = true;
            book.blocked_inputs.clear();
            effects.emplace_back(BroadcastBarrier{barrier});
            effects.emplace_back(UnblockAll{});
        }
        if (book.marked.size() == all)
        {
            if (!book.state_copy)
            {
                throw ProtocolError("task " + ctx.task.str() + " completed an epoch without a state copy");
            }
            effects.emplace_back(
                EmitSnapshot{TaskSnapshot{ctx.task, barrier.epoch, std::move(*book.state_copy), std::move(book.backup_log)}});
            book.marked.clear();
            book.logging = false;
            book.state_copy.reset();
            book.backup_log.clear();
            finish(book, barrier.epoch);
        }
        return effects;
    }

    bool on_data(AbsTaskBook &book, std::size_t input, const Record &record, const ProtocolContext &ctx)
    {
        if (!book.logging || !book.loop_inputs.contains(input))
        {
            return false;
        }
        book.backup_log.push_back(LoggedRecord{ctx.inputs[input], record});
        return true;
    }
} // namespace absflow
