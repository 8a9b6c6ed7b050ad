#pragma once

#include "absflow/ids.hpp"
#include "absflow/record.hpp"
#include "absflow/state.hpp"
#include "absflow/workload.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace absflow
{
    class UdfFailure : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class UnknownUdf : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct OutputPort
    {
        ChannelId channel;
        TaskKind target_kind = TaskKind::Operator;
    };

    struct UdfContext
    {
        TaskId task;
        std::span<const OutputPort> outputs;
        const SourceWorkload *workload = nullptr;
        /// Routing salt derived from the output targets, identical for every
        /// task that feeds the same downstream set.
        std::uint64_t route_salt = 0;
    };

    /// Salt for UdfContext::route_salt.
    std::uint64_t route_salt(std::span<const OutputPort> outputs) noexcept;

    /// Payload emitted on output port `port`; the runtime stamps provenance.
    struct Emit
    {
        std::uint32_t port = 0;
        std::string key;
        std::int64_t value = 0;
    };

    /// In-place form of f(state, record) -> (state', outputs). `input` is null
    /// when a source is asked to produce its next record.
    using UdfFn = std::function<void(OperatorState &state, const Record *input, const UdfContext &ctx,
                                     std::vector<Emit> &out)>;

    /// Functional result: new state plus stamped output records.
    struct UdfResult
    {
        OperatorState new_state;
        std::vector<std::pair<ChannelId, Record>> outputs;
        bool operator==(const UdfResult &) const = default;
    };

    class UdfRegistry
    {
    public:
        void add(std::string name, UdfFn fn);
        bool contains(const std::string &name) const;
        const UdfFn &get(const std::string &name) const;
        std::shared_ptr<const UdfFn> share(const std::string &name) const;
        std::vector<std::string> names() const;

        /// Registry with every built-in workload function.
        static const UdfRegistry &builtin();

    private:
        std::map<std::string, std::shared_ptr<const UdfFn>> fns_;
    };

    /// Stamps provenance on UDF output. `trigger` is null for source emission,
    /// in which case `source_task`/`source_seq` name the new record.
    Record stamp(const Emit &e, const Record *trigger, const TaskId &source_task, std::uint64_t source_seq,
                 std::uint64_t port_salt, std::uint32_t k);

    /// Stamps a whole batch of emits; k counts emits per port in order.
    void stamp_all(const std::vector<Emit> &emits, const Record *trigger, const TaskId &task,
                   std::uint64_t source_seq, std::span<const std::uint64_t> port_salts,
                   std::vector<std::pair<std::uint32_t, Record>> &out);

    /// Pure application used by tests and oracles.
    UdfResult apply_udf(const UdfFn &fn, const OperatorState &state, const Record *input, const UdfContext &ctx);

    /// Applies the function twice on copies and checks identical results.
    bool udf_is_pure(const UdfFn &fn, const OperatorState &state, const Record *input, const UdfContext &ctx);

    /// Port chosen for `key` among `n` ports.
    std::uint32_t partition(std::string_view key, std::size_t n, std::uint64_t salt = 0) noexcept;

    /// Per-entry hash shared by multiset digests and digest sinks.
    std::uint64_t entry_hash(std::string_view key, std::int64_t value) noexcept;

    /// Key used by sinks to store (key, value) pairs in their table.
    std::string sink_entry(std::string_view key, std::int64_t value);

    /// Sink contents as a multiset of (key, value) -> multiplicity.
    using SinkMultiset = std::map<std::pair<std::string, std::int64_t>, std::int64_t>;
    SinkMultiset sink_multiset(const OperatorState &sink_state);

    /// Arrival-ordered entry hashes kept by `sink_log` sinks.
    std::vector<std::uint64_t> sink_sequence(const OperatorState &sink_state);

    /// Order-independent digest of a sink multiset.
    std::uint64_t multiset_digest(const SinkMultiset &m);
} // namespace absflow
