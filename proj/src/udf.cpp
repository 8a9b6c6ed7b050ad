#include "absflow/udf.hpp"

#include <algorithm>
#include <cstdio>

namespace absflow
{
    namespace
    {
        constexpr char kSep = '\x1f';
        constexpr const char *kDigestCount = "#n";
        constexpr const char *kDigestHash = "#h";
        constexpr const char *kLogLength = "#len";

        std::string log_slot(std::int64_t i)
        {
            char buf[32];
            std::snprintf(buf, sizeof buf, "@%012lld", static_cast<long long>(i));
            return buf;
        }

        void route(const std::string &key, std::int64_t value, const UdfContext &ctx, std::vector<Emit> &out)
        {
            if (ctx.outputs.empty())
            {
                return;
            }
            out.push_back({partition(key, ctx.outputs.size(), ctx.route_salt), key, value});
        }

        /// Routes among the ports whose target kind matches `want_sink`.
        void route_filtered(const std::string &key, std::int64_t value, bool want_sink, const UdfContext &ctx,
                            std::vector<Emit> &out)
        {
            std::uint32_t matching = 0;
            for (const auto &p : ctx.outputs)
            {
                matching += (p.target_kind == TaskKind::Sink) == want_sink ? 1 : 0;
            }
            if (matching == 0)
            {
                throw UdfFailure("task " + ctx.task.str() + " has no " + (want_sink ? "exit" : "loop") + " output");
            }
            auto pick = partition(key, matching, ctx.route_salt);
            for (std::uint32_t i = 0; i < ctx.outputs.size(); ++i)
            {
                if ((ctx.outputs[i].target_kind == TaskKind::Sink) != want_sink)
                {
                    continue;
                }
                if (pick-- == 0)
                {
                    out.push_back({i, key, value});
                    return;
                }
            }
        }

        const Record &need_input(const Record *input, const UdfContext &ctx)
        {
            if (input == nullptr)
            {
                throw UdfFailure("task " + ctx.task.str() + " was asked to generate but is not a source");
            }
            return *input;
        }

        void source_fn(OperatorState &s, const Record *input, const UdfContext &ctx, std::vector<Emit> &out)
        {
            if (input != nullptr)
            {
                throw UdfFailure("source " + ctx.task.str() + " received a record");
            }
            if (ctx.workload == nullptr || s.offset >= ctx.workload->size())
            {
                throw UdfFailure("source " + ctx.task.str() + " is exhausted");
            }
            auto item = ctx.workload->at(s.offset);
            ++s.offset;
            route(item.key, item.value, ctx, out);
        }

        void identity_fn(OperatorState &, const Record *input, const UdfContext &ctx, std::vector<Emit> &out)
        {
            const auto &r = need_input(input, ctx);
            route(r.key, r.value, ctx, out);
        }

        void count_fn(OperatorState &s, const Record *input, const UdfContext &ctx, std::vector<Emit> &out)
        {
            const auto &r = need_input(input, ctx);
            auto n = ++s.table[r.key];
            route(r.key, n, ctx, out);
        }

        void sum_fn(OperatorState &s, const Record *input, const UdfContext &ctx, std::vector<Emit> &out)
        {
            const auto &r = need_input(input, ctx);
            s.table[r.key] += r.value;
            route(r.key, r.value, ctx, out);
        }

        void filter_key_fn(OperatorState &, const Record *input, const UdfContext &ctx, std::vector<Emit> &out)
        {
            const auto &r = need_input(input, ctx);
            if ((fnv1a(r.key) & 1u) != 0)
            {
                route(r.key, r.value, ctx, out);
            }
        }

        void loop_head_fn(OperatorState &s, const Record *input, const UdfContext &ctx, std::vector<Emit> &out)
        {
            const auto &r = need_input(input, ctx);
            ++s.table[r.key];
            route_filtered(r.key, r.value, r.value <= 0, ctx, out);
        }

        /// Decrements the remaining turns. With several outputs, finished
        /// records leave through port 0 so they always reach an exit.
        void loop_tail_fn(OperatorState &s, const Record *input, const UdfContext &ctx, std::vector<Emit> &out)
        {
            const auto &r = need_input(input, ctx);
            ++s.table[r.key];
            if (r.value - 1 <= 0 && !ctx.outputs.empty())
            {
                out.push_back({0, r.key, r.value - 1});
                return;
            }
            route(r.key, r.value - 1, ctx, out);
        }

        void sink_fn(OperatorState &s, const Record *input, const UdfContext &ctx, std::vector<Emit> &)
        {
            const auto &r = need_input(input, ctx);
            ++s.table[sink_entry(r.key, r.value)];
        }

        /// Sink that also keeps arrival order: entry i of the log is stored
        /// under "@i" as the entry hash.
        void sink_log_fn(OperatorState &s, const Record *input, const UdfContext &ctx, std::vector<Emit> &)
        {
            const auto &r = need_input(input, ctx);
            ++s.table[sink_entry(r.key, r.value)];
            auto n = s.table[kLogLength]++;
            s.table[log_slot(n)] = static_cast<std::int64_t>(entry_hash(r.key, r.value));
        }

        void sink_digest_fn(OperatorState &s, const Record *input, const UdfContext &ctx, std::vector<Emit> &)
        {
            const auto &r = need_input(input, ctx);
            ++s.table[kDigestCount];
            auto &h = s.table[kDigestHash];
            h = static_cast<std::int64_t>(static_cast<std::uint64_t>(h) + entry_hash(r.key, r.value));
        }
    } // namespace

    std::uint64_t route_salt(std::span<const OutputPort> outputs) noexcept
    {
        std::uint64_t h = fnv1a("route");
        for (const auto &p : outputs)
        {
            h = fnv1a(p.channel.to.str(), h);
            h = fnv1a("|", h);
        }
        return mix64(h);
    }

    std::uint32_t partition(std::string_view key, std::size_t n, std::uint64_t salt) noexcept
    {
        if (n <= 1)
        {
            return 0;
        }
        return static_cast<std::uint32_t>(mix64(fnv1a(key) ^ salt) % n);
    }

    std::uint64_t entry_hash(std::string_view key, std::int64_t value) noexcept
    {
        return mix64(fnv1a(key) ^ mix64(static_cast<std::uint64_t>(value)));
    }

    std::string sink_entry(std::string_view key, std::int64_t value)
    {
        std::string s(key);
        s += kSep;
        s += std::to_string(value);
        return s;
    }

    SinkMultiset sink_multiset(const OperatorState &sink_state)
    {
        SinkMultiset m;
        for (const auto &[entry, count] : sink_state.table)
        {
            auto sep = entry.rfind(kSep);
            if (sep == std::string::npos)
            {
                continue;
            }
            auto value = std::stoll(entry.substr(sep + 1));
            m[{entry.substr(0, sep), value}] += count;
        }
        return m;
    }

    std::vector<std::uint64_t> sink_sequence(const OperatorState &sink_state)
    {
        std::vector<std::uint64_t> out;
        auto it = sink_state.table.lower_bound("@");
        for (; it != sink_state.table.end() && !it->first.empty() && it->first[0] == '@'; ++it)
        {
            out.push_back(static_cast<std::uint64_t>(it->second));
        }
        return out;
    }

    std::uint64_t multiset_digest(const SinkMultiset &m)
    {
        std::uint64_t h = 0;
        for (const auto &[kv, count] : m)
        {
            h += static_cast<std::uint64_t>(count) * entry_hash(kv.first, kv.second);
        }
        return h;
    }

    void UdfRegistry::add(std::string name, UdfFn fn)
    {
        fns_[std::move(name)] = std::make_shared<const UdfFn>(std::move(fn));
    }

    bool UdfRegistry::contains(const std::string &name) const { return fns_.contains(name); }

    const UdfFn &UdfRegistry::get(const std::string &name) const
    {
        auto it = fns_.find(name);
        if (it == fns_.end())
        {
            throw UnknownUdf("unknown udf: " + name);
        }
        return *it->second;
    }

    std::shared_ptr<const UdfFn> UdfRegistry::share(const std::string &name) const
    {
        auto it = fns_.find(name);
        if (it == fns_.end())
        {
            throw UnknownUdf("unknown udf: " + name);
        }
        return it->second;
    }

    std::vector<std::string> UdfRegistry::names() const
    {
        std::vector<std::string> out;
        for (const auto &[n, _] : fns_)
        {
            out.push_back(n);
        }
        return out;
    }

    const UdfRegistry &UdfRegistry::builtin()
    {
        static const UdfRegistry registry = [] {
            UdfRegistry r;
            r.add("source", source_fn);
            r.add("identity", identity_fn);
            r.add("count", count_fn);
            r.add("sum", sum_fn);
            r.add("filter_key", filter_key_fn);
            r.add("loop_head", loop_head_fn);
            r.add("loop_tail", loop_tail_fn);
            r.add("sink", sink_fn);
            r.add("sink_log", sink_log_fn);
            r.add("sink_digest", sink_digest_fn);
            return r;
        }();
        return registry;
    }

    Record stamp(const Emit &e, const Record *trigger, const TaskId &source_task, std::uint64_t source_seq,
                 std::uint64_t port_salt, std::uint32_t k)
    {
        Record r;
        r.key = e.key;
        r.value = e.value;
        if (trigger != nullptr)
        {
            r.source = trigger->source;
            r.seq = trigger->seq;
            r.lineage = next_lineage(trigger->lineage, port_salt, k);
        }
        else
        {
            r.source = source_task;
            r.seq = source_seq;
            r.lineage = next_lineage(0, port_salt, k);
        }
        return r;
    }

    void stamp_all(const std::vector<Emit> &emits, const Record *trigger, const TaskId &task,
                   std::uint64_t source_seq, std::span<const std::uint64_t> port_salts,
                   std::vector<std::pair<std::uint32_t, Record>> &out)
    {
        out.clear();
        // k numbers emits per port; the common single-emit case stays k = 0.
        std::uint32_t per_port_small[8] = {};
        std::vector<std::uint32_t> per_port_large;
        std::uint32_t *per_port = per_port_small;
        if (port_salts.size() > 8)
        {
            per_port_large.assign(port_salts.size(), 0);
            per_port = per_port_large.data();
        }
        for (const auto &e : emits)
        {
            if (e.port >= port_salts.size())
            {
                throw UdfFailure("task " + task.str() + " emitted on unknown output port " + std::to_string(e.port));
            }
            out.emplace_back(e.port, stamp(e, trigger, task, source_seq, port_salts[e.port], per_port[e.port]++));
        }
    }

    UdfResult apply_udf(const UdfFn &fn, const OperatorState &state, const Record *input, const UdfContext &ctx)
    {
        UdfResult result;
        result.new_state = state;
        std::vector<Emit> emits;
        fn(result.new_state, input, ctx, emits);
        std::vector<std::uint64_t> salts;
        for (const auto &p : ctx.outputs)
        {
            salts.push_back(channel_salt(p.channel));
        }
        std::vector<std::pair<std::uint32_t, Record>> stamped;
        stamp_all(emits, input, ctx.task, result.new_state.offset, salts, stamped);
        for (auto &[port, rec] : stamped)
        {
            result.outputs.emplace_back(ctx.outputs[port].channel, std::move(rec));
        }
        return result;
    }

    bool udf_is_pure(const UdfFn &fn, const OperatorState &state, const Record *input, const UdfContext &ctx)
    {
        return apply_udf(fn, state, input, ctx) == apply_udf(fn, state, input, ctx);
    }
} // namespace absflow
